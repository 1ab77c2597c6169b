#![allow(dead_code)]

//! Analytic gradients against central finite differences on a 3-concept,
//! 2-rule model whose role assignment is a fixed one-hot sample.

use super::tiny_config;
use hcmr_core::math;
use hcmr_core::nn::ParamTensors;
use hcmr_core::rule_memory::{self, RuleMemoryParams};
use hcmr_core::training::{likelihood_for_samples, RoleSample};
use hcmr_core::{ConstraintSet, Dataset, HcmrParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub struct Setup {
    params: HcmrParams,
    data: Dataset,
    sample: RoleSample,
    cs: ConstraintSet,
}

pub fn setup(seed: u64) -> Setup {
    let (n, nr) = (3, 2);
    let mut cfg = tiny_config(n, nr, 2);
    cfg.beta = 0.3;
    let mut params = HcmrParams::new(&cfg, seed).unwrap();
    // C1 <- C0 | C1 <- !C0 ; C2 <- C0 & !C1 | C2 <- C1
    let mut logits = vec![0.0; n * nr * n * 3];
    let mut set = |i: usize, k: usize, j: usize, role: usize| {
        for r in 0..3 {
            logits[((i * nr + k) * n + j) * 3 + r] = if r == role { 1.5 } else { -1.5 };
        }
    };
    for i in 0..n {
        for k in 0..nr {
            for j in 0..n {
                set(i, k, j, 2);
            }
        }
    }
    set(1, 0, 0, 0);
    set(1, 1, 0, 1);
    set(2, 0, 0, 0);
    set(2, 0, 1, 1);
    set(2, 1, 1, 0);
    let mut memory = RuleMemoryParams::from_role_logits(n, nr, &logits, vec![1.0, 0.5, 0.0]).unwrap();
    // move every pre-activation off the leaky-rectifier kink
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    memory.rule_embeddings.iter_mut().for_each(|w| *w += rng.random_range(-0.05..0.05));
    for layer in memory.role_decoder.layers.iter_mut() {
        layer.weight.iter_mut().for_each(|w| *w += rng.random_range(-0.05..0.05));
        layer.bias.iter_mut().for_each(|w| *w += rng.random_range(-0.05..0.05));
    }
    params.memory = memory;
    let cs = ConstraintSet::empty(n, nr);
    let rules = params.hard_rules(Some(&cs)).unwrap();
    assert!(!rules.is_source(1) && !rules.is_source(2));
    let sample = RoleSample::from_rules(&rules).unwrap();
    let mut data = Dataset::new(2, n);
    for _ in 0..6 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        // with both parents false no rule of C2 holds; keep every term off the probability floor
        if !labels[0] && !labels[1] {
            labels[2] = false;
        }
        data.push(&x, &labels, &[true; 3]).unwrap();
    }
    Setup {
        params,
        data,
        sample,
        cs,
    }
}

fn loss(s: &Setup, params: &HcmrParams, sample: &RoleSample) -> f64 {
    let all: Vec<usize> = (0..s.data.len()).collect();
    likelihood_for_samples(&s.data, &all, params, &s.cs, std::slice::from_ref(sample), false)
        .unwrap()
        .loss
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    if na.max(nb) <= 1e-8 {
        // an identically zero group would pass vacuously
        return f64::INFINITY;
    }
    diff / na.max(nb)
}

/// Central differences of `f` over every entry of the tensors `select` picks from a parameter clone.
fn numeric_grad<T: Clone>(
    base: &T,
    select: impl Fn(&mut T) -> Vec<&mut [f64]>,
    f: impl Fn(&T) -> f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    let n_tensors = select(&mut base.clone()).len();
    for t in 0..n_tensors {
        let len = select(&mut base.clone())[t].len();
        for e in 0..len {
            let mut hi = base.clone();
            select(&mut hi)[t][e] += STEP;
            let mut lo = base.clone();
            select(&mut lo)[t][e] -= STEP;
            out.push((f(&hi) - f(&lo)) / (2.0 * STEP));
        }
    }
    out
}

fn analytic(s: &Setup) -> (HcmrParams, Vec<f64>) {
    let all: Vec<usize> = (0..s.data.len()).collect();
    let out = likelihood_for_samples(&s.data, &all, &s.params, &s.cs, std::slice::from_ref(&s.sample), true).unwrap();
    (out.grads.unwrap(), out.role_grad.unwrap())
}

pub fn encoder_error(s: &Setup) -> f64 {
    let (grads, _) = analytic(s);
    let fd = numeric_grad(&s.params, |p| p.encoder.tensors_mut(), |p| loss(s, p, &s.sample));
    let an: Vec<f64> = grads.encoder.tensors().concat();
    relative_error(&an, &fd)
}

pub fn selector_error(s: &Setup) -> f64 {
    let (grads, _) = analytic(s);
    let fd = numeric_grad(&s.params, |p| p.selector.tensors_mut(), |p| loss(s, p, &s.sample));
    let an: Vec<f64> = grads.selector.tensors().concat();
    relative_error(&an, &fd)
}

pub fn role_weight_error(s: &Setup) -> f64 {
    let (_, role_grad) = analytic(s);
    let (n, nr) = (3, 2);
    let order = s.sample.order.clone();
    let fd: Vec<f64> = (0..s.sample.z.len())
        .map(|e| {
            let eval = |delta: f64| {
                let mut z = s.sample.z.clone();
                z[e] += delta;
                let soft = RoleSample::from_weights(n, nr, z, order.clone()).unwrap();
                // keep the hard rules of the unperturbed sample
                let soft = RoleSample {
                    rules: s.sample.rules.clone(),
                    ..soft
                };
                loss(s, &s.params, &soft)
            };
            (eval(STEP) - eval(-STEP)) / (2.0 * STEP)
        })
        .collect();
    relative_error(&role_grad, &fd)
}

pub fn rule_memory_error(s: &Setup) -> f64 {
    let (grads, role_grad) = analytic(s);
    let surrogate = |m: &RuleMemoryParams| {
        let r_prime = rule_memory::decode_unadjusted_roles(m).unwrap();
        let adjusted = rule_memory::adjust_roles(&r_prime, &m.priorities, Some(&s.cs)).unwrap();
        adjusted.probs.iter().zip(&role_grad).map(|(p, g)| p * g).sum::<f64>()
    };
    let fd = numeric_grad(
        &s.params.memory,
        |m| {
            let mut v = vec![&mut m.rule_embeddings[..]];
            v.extend(m.role_decoder.tensors_mut());
            v
        },
        surrogate,
    );
    let mut an = grads.memory.rule_embeddings.clone();
    an.extend(grads.memory.role_decoder.tensors().concat());
    relative_error(&an, &fd)
}

pub fn priority_error(s: &Setup) -> f64 {
    let (grads, role_grad) = analytic(s);
    let r_prime = rule_memory::decode_unadjusted_roles(&s.params.memory).unwrap();
    let tau = s.params.config.st_temperature;
    let (n, nr) = (3, 2);
    let surrogate = |o: &Vec<f64>| {
        let mut total = 0.0;
        for i in 0..n {
            for k in 0..nr {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let a = math::sigmoid((o[j] - o[i]) / tau);
                    let off = r_prime.offset(i, k, j);
                    for r in 0..3 {
                        let e = if r == 2 { 1.0 } else { 0.0 };
                        total += role_grad[off + r] * (a * r_prime.probs[off + r] + (1.0 - a) * e);
                    }
                }
            }
        }
        total
    };
    let fd = numeric_grad(&s.params.memory.priorities, |o| vec![&mut o[..]], surrogate);
    relative_error(&grads.memory.priorities, &fd)
}

/// Relative error of every parameter group, by name.
pub fn all_group_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let s = setup(seed);
    vec![
        ("encoder", encoder_error(&s)),
        ("selector", selector_error(&s)),
        ("role weights", role_weight_error(&s)),
        ("rule memory", rule_memory_error(&s)),
        ("priorities", priority_error(&s)),
    ]
}
