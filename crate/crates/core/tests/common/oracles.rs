#![allow(dead_code)]

//! Brute-force marginals and random models for checking inference.

use hcmr_core::{decoder, encoder, FrozenModel, HcmrParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tiny_config;

/// Marginals by summing the full joint over every concept assignment.
pub fn brute_force_marginals(x: &[f64], model: &FrozenModel) -> Vec<f64> {
    let n = model.rules.n_concepts;
    let out = encoder::encode(x, &model.encoder).unwrap();
    let mut marg = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        let c: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let mut joint = 1.0;
        for i in 0..n {
            let p1 = if model.rules.is_source(i) {
                out.source_probs[i]
            } else {
                decoder::predict_nonsource_concept(i, &out, &c, &model.rules, &model.selector).unwrap()
            };
            joint *= if c[i] { p1 } else { 1.0 - p1 };
        }
        for i in 0..n {
            if c[i] {
                marg[i] += joint;
            }
        }
    }
    marg
}

pub fn random_model(rng: &mut ChaCha8Rng) -> FrozenModel {
    let n = rng.random_range(2..=10);
    let nr = rng.random_range(1..=3);
    let cfg = tiny_config(n, nr, 3);
    let mut params = HcmrParams::new(&cfg, rng.random()).unwrap();
    // spread priorities so that random draws produce a few edges
    for o in params.memory.priorities.iter_mut() {
        *o *= 3.0;
    }
    FrozenModel::new(&params, None).unwrap()
}

pub fn random_input(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Makes every source probability and selection within ~1e-13 of one-hot.
pub fn make_deterministic(params: &mut HcmrParams, rng: &mut ChaCha8Rng) {
    let enc = &mut params.encoder;
    enc.head_weight.fill(0.0);
    for b in enc.head_bias.iter_mut() {
        *b = if rng.random() { 30.0 } else { -30.0 };
    }
    let sel = &mut params.selector;
    sel.output.weight.fill(0.0);
    let nr = sel.n_rules;
    for i in 0..sel.n_concepts {
        let k = rng.random_range(0..nr);
        for r in 0..nr {
            sel.output.bias[i * nr + r] = if r == k { 40.0 } else { 0.0 };
        }
    }
}
