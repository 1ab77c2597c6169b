//! Training likelihood, its gradient and the optimisation loop.
//!
//! Per example and observed concept `i`, with a sampled role assignment `z`
//! (one-hot per slot):
//!
//! ```text
//! p(ĉ_i) = Src_i · enc_i(ĉ_i) + (1 - Src_i) · dec_i(ĉ_i)
//! Src_i  = Π_{k,j} z[i,k,j,I]
//! dec_i(1) = Σ_k S_ik Π_j g_reg(z[i,k,j], ĉ_j)
//! dec_i(0) = 1 - Σ_k S_ik Π_j g(z[i,k,j], ĉ_j)
//! g(z, c)  = z_P c + z_N (1 - c) + z_I
//! ```
//!
//! `g_reg` replaces the irrelevant factor by `0.5^β` (prototypicality). Every
//! quantity is multilinear in `z`, so the straight-through gradient of the
//! sample is the gradient of that extension, passed unchanged to the adjusted
//! role probabilities. Unobserved parents take the hard prediction
//! `1[p > 0.5]` with a straight-through gradient.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelConfig, TrainOptions};
use crate::constraints::ConstraintSet;
use crate::datasets::Dataset;
use crate::decoder::{self, SelectorCache};
use crate::encoder::{self, EncoderParams};
use crate::error::{HcmrError, Result};
use crate::inference::{self, InterventionAssignment};
use crate::model::{pinned_selection, FrozenModel, HcmrParams};
use crate::nn::ParamTensors;
use crate::optim::AdamW;
use crate::rule_memory::{self, RoleTensor, SymbolicRuleSet};
use crate::math;

/// Probabilities below this are clamped inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-6;

/// Backward pass of the log-likelihood caps `1 / p` at `1 / GRAD_FLOOR`.
/// Labels that are impossible under hard upstream values still pass a
/// straight-through signal, without the spikes of the full `1 / PROB_FLOOR`.
pub const GRAD_FLOOR: f64 = 1e-2;

/// Examples are processed in this many fixed chunks (summed in order, so
/// results do not depend on the number of threads).
const CHUNKS: usize = 8;

/// One role assignment used for a likelihood evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleSample {
    /// Role weights with the layout of [`RoleTensor::probs`]; one-hot for sampled roles.
    pub z: Vec<f64>,
    /// Order in which concepts are evaluated (topological for the sampled rules).
    pub order: Vec<usize>,
    /// Hard roles (argmax of `z`), used for pinned selections.
    pub rules: SymbolicRuleSet,
}

impl RoleSample {
    pub fn from_rules(rules: &SymbolicRuleSet) -> Result<Self> {
        let graph = rule_memory::derive_graph(rules)?;
        Ok(RoleSample {
            z: rules.one_hot(),
            order: graph.topo_order,
            rules: rules.clone(),
        })
    }

    /// Soft role weights with an explicit evaluation order.
    pub fn from_weights(n_concepts: usize, n_rules: usize, z: Vec<f64>, order: Vec<usize>) -> Result<Self> {
        let tensor = RoleTensor::new(n_concepts, n_rules, z)?;
        let rules = rule_memory::hard_rules(&tensor);
        Ok(RoleSample {
            z: tensor.probs,
            order,
            rules,
        })
    }
}

/// Summed negative log-likelihood and, optionally, its gradient.
#[derive(Debug, Clone)]
pub struct LikelihoodOutput {
    /// Sum over examples of `-Σ_i ln p(ĉ_i)` over observed concepts.
    pub loss: f64,
    /// Examples contributing to the loss.
    pub used: usize,
    /// Examples without any observed label.
    pub skipped: usize,
    /// Gradient of `loss` (a sum, not a mean) when requested.
    pub grads: Option<HcmrParams>,
    /// Gradient with respect to the role weights `z`, averaged over samples as in the loss.
    pub role_grad: Option<Vec<f64>>,
}

struct SampleState {
    values: Vec<f64>,
    src: Vec<f64>,
    enc_term: Vec<f64>,
    dec_term: Vec<f64>,
    prob: Vec<f64>,
    selection: Vec<Option<SelectorCache>>,
    pinned: Vec<Vec<f64>>,
    /// Rule products used by the mixture (regularised or plain) per concept.
    products: Vec<Vec<f64>>,
}

struct Ctx<'a> {
    params: &'a HcmrParams,
    constraints: &'a ConstraintSet,
    samples: &'a [RoleSample],
    /// `1 - Π_k z[i,k,j,I]` per sample.
    parents: Vec<Vec<f64>>,
    /// `Π_{k,j} z[i,k,j,I]` per sample.
    sources: Vec<Vec<f64>>,
    reg_irrelevant: f64,
}

#[derive(Clone)]
struct Accum {
    loss: f64,
    used: usize,
    skipped: usize,
    encoder: EncoderParams,
    selector: decoder::SelectorParams,
    z: Vec<f64>,
}

#[inline]
fn zi(n: usize, nr: usize, i: usize, k: usize, j: usize) -> usize {
    ((i * nr + k) * n + j) * 3
}

/// `out[t] = Π_{s != t} v[s]`, exact when some entries are zero.
fn products_except(v: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let zeros = v.iter().filter(|&&x| x == 0.0).count();
    let nonzero: f64 = v.iter().filter(|&&x| x != 0.0).product();
    for &x in v {
        out.push(match (zeros, x == 0.0) {
            (0, _) => nonzero / x,
            (1, true) => nonzero,
            _ => 0.0,
        });
    }
}

impl<'a> Ctx<'a> {
    fn new(params: &'a HcmrParams, constraints: &'a ConstraintSet, samples: &'a [RoleSample]) -> Self {
        let cfg = &params.config;
        let (n, nr) = (cfg.n_concepts, cfg.n_rules);
        let mut parents = Vec::with_capacity(samples.len());
        let mut sources = Vec::with_capacity(samples.len());
        for s in samples {
            let mut par = vec![0.0; n * n];
            let mut src = vec![1.0; n];
            for i in 0..n {
                for j in 0..n {
                    let mut prod = 1.0;
                    for k in 0..nr {
                        prod *= s.z[zi(n, nr, i, k, j) + 2];
                    }
                    par[i * n + j] = 1.0 - prod;
                    src[i] *= prod;
                }
            }
            parents.push(par);
            sources.push(src);
        }
        Ctx {
            params,
            constraints,
            samples,
            parents,
            sources,
            reg_irrelevant: libm::pow(0.5, cfg.beta),
        }
    }

    fn irrelevant_factor(&self, regularised: bool, i: usize, j: usize) -> f64 {
        if regularised && i != j {
            self.reg_irrelevant
        } else {
            1.0
        }
    }

    fn forward_sample(
        &self,
        m: usize,
        out: &encoder::EncoderOutput,
        labels: &[bool],
        observed: &[bool],
        input_buf: &mut Vec<f64>,
    ) -> SampleState {
        let cfg = &self.params.config;
        let (n, nr) = (cfg.n_concepts, cfg.n_rules);
        let sample = &self.samples[m];
        let z = &sample.z;
        let mut st = SampleState {
            values: vec![0.0; n],
            src: self.sources[m].clone(),
            enc_term: vec![0.0; n],
            dec_term: vec![0.0; n],
            prob: vec![0.0; n],
            selection: vec![None; n],
            pinned: vec![Vec::new(); n],
            products: vec![Vec::new(); n],
        };
        for i in 0..n {
            if observed[i] {
                st.values[i] = if labels[i] { 1.0 } else { 0.0 };
            }
        }
        for &i in &sample.order {
            let par = &self.parents[m][i * n..(i + 1) * n];
            let probs = if self.constraints.selection_pinned(i) {
                let c_hat: Vec<bool> = st.values.iter().map(|&v| v > 0.5).collect();
                st.pinned[i] = pinned_selection(&sample.rules, i, &c_hat);
                st.pinned[i].clone()
            } else {
                decoder::selector_input(&out.embedding, cfg.size_c_emb, par, &st.values, input_buf);
                let cache = decoder::selector_forward(&self.params.selector, i, core::mem::take(input_buf));
                let p = cache.probs.clone();
                st.selection[i] = Some(cache);
                p
            };
            let label_one = observed[i] && labels[i];
            let regularised = label_one;
            let mut products = vec![0.0; nr];
            for (k, pk) in products.iter_mut().enumerate() {
                let mut prod = 1.0;
                for j in 0..n {
                    let o = zi(n, nr, i, k, j);
                    let v = st.values[j];
                    prod *= z[o] * v + z[o + 1] * (1.0 - v) + z[o + 2] * self.irrelevant_factor(regularised, i, j);
                }
                *pk = prod;
            }
            let mix: f64 = probs.iter().zip(&products).map(|(s, p)| s * p).sum();
            let q = out.source_probs[i];
            let (e, d) = if observed[i] && !labels[i] { (1.0 - q, 1.0 - mix) } else { (q, mix) };
            let p = st.src[i] * e + (1.0 - st.src[i]) * d;
            st.enc_term[i] = e;
            st.dec_term[i] = d;
            st.prob[i] = p;
            st.products[i] = products;
            if !observed[i] {
                st.values[i] = if p > 0.5 { 1.0 } else { 0.0 };
            }
        }
        st
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_sample(
        &self,
        m: usize,
        st: &SampleState,
        out: &encoder::EncoderOutput,
        labels: &[bool],
        observed: &[bool],
        mut gp: Vec<f64>,
        g_probs: &mut [f64],
        g_emb: &mut [f64],
        acc: &mut Accum,
        scratch: &mut Vec<f64>,
    ) {
        let cfg = &self.params.config;
        let (n, nr) = (cfg.n_concepts, cfg.n_rules);
        let sample = &self.samples[m];
        let z = &sample.z;
        let mut gv = vec![0.0; n];
        let mut g_par = vec![0.0; n];
        let mut g_val = vec![0.0; n];
        let mut factors = Vec::with_capacity(n);
        for &i in sample.order.iter().rev() {
            if !observed[i] {
                gp[i] += gv[i];
            }
            let g = gp[i];
            if g == 0.0 {
                continue;
            }
            let label_zero = observed[i] && !labels[i];
            let regularised = observed[i] && labels[i];
            let src = st.src[i];
            g_probs[i] += g * src * if label_zero { -1.0 } else { 1.0 };
            let g_src = g * (st.enc_term[i] - st.dec_term[i]);
            let g_dec = g * (1.0 - src);
            let sign = if label_zero { -1.0 } else { 1.0 };
            let probs: &[f64] = match &st.selection[i] {
                Some(c) => &c.probs,
                None => &st.pinned[i],
            };
            let mut g_sel = vec![0.0; nr];
            for k in 0..nr {
                g_sel[k] = sign * g_dec * st.products[i][k];
                let g_prod = sign * g_dec * probs[k];
                if g_prod == 0.0 {
                    continue;
                }
                factors.clear();
                for j in 0..n {
                    let o = zi(n, nr, i, k, j);
                    let v = st.values[j];
                    factors.push(z[o] * v + z[o + 1] * (1.0 - v) + z[o + 2] * self.irrelevant_factor(regularised, i, j));
                }
                products_except(&factors, scratch);
                for j in 0..n {
                    let dg = g_prod * scratch[j];
                    if dg == 0.0 {
                        continue;
                    }
                    let o = zi(n, nr, i, k, j);
                    let v = st.values[j];
                    acc.z[o] += dg * v;
                    acc.z[o + 1] += dg * (1.0 - v);
                    acc.z[o + 2] += dg * self.irrelevant_factor(regularised, i, j);
                    gv[j] += dg * (z[o] - z[o + 1]);
                }
            }
            if g_src != 0.0 {
                factors.clear();
                for k in 0..nr {
                    for j in 0..n {
                        factors.push(z[zi(n, nr, i, k, j) + 2]);
                    }
                }
                products_except(&factors, scratch);
                for k in 0..nr {
                    for j in 0..n {
                        acc.z[zi(n, nr, i, k, j) + 2] += g_src * scratch[k * n + j];
                    }
                }
            }
            if let Some(cache) = &st.selection[i] {
                if g_sel.iter().any(|&x| x != 0.0) {
                    let mut g_input = vec![0.0; cache.input.len()];
                    decoder::selector_backward(&self.params.selector, i, cache, &g_sel, &mut acc.selector, Some(&mut g_input));
                    g_par.fill(0.0);
                    g_val.fill(0.0);
                    let par = &self.parents[m][i * n..(i + 1) * n];
                    decoder::selector_input_backward(
                        &out.embedding,
                        cfg.size_c_emb,
                        par,
                        &st.values,
                        &g_input,
                        g_emb,
                        &mut g_par,
                        &mut g_val,
                    );
                    for j in 0..n {
                        gv[j] += g_val[j];
                        if g_par[j] == 0.0 {
                            continue;
                        }
                        factors.clear();
                        for k in 0..nr {
                            factors.push(z[zi(n, nr, i, k, j) + 2]);
                        }
                        products_except(&factors, scratch);
                        for k in 0..nr {
                            acc.z[zi(n, nr, i, k, j) + 2] -= g_par[j] * scratch[k];
                        }
                    }
                }
            }
        }
    }

    fn example(&self, x: &[f64], labels: &[bool], observed: &[bool], acc: &mut Accum, with_grad: bool) -> Result<()> {
        if !observed.iter().any(|&o| o) {
            acc.skipped += 1;
            return Ok(());
        }
        let n = self.params.config.n_concepts;
        let (out, cache) = encoder::encode_cached(x, &self.params.encoder)?;
        let mut buf = Vec::new();
        let states: Vec<SampleState> = (0..self.samples.len())
            .map(|m| self.forward_sample(m, &out, labels, observed, &mut buf))
            .collect();
        let mm = self.samples.len() as f64;
        let mut mean = vec![0.0; n];
        for st in &states {
            for i in 0..n {
                mean[i] += st.prob[i] / mm;
            }
        }
        let mut loss = 0.0;
        let mut gp = vec![0.0; n];
        for i in 0..n {
            if observed[i] {
                let p = mean[i];
                loss -= math::ln(p.max(PROB_FLOOR));
                gp[i] = -1.0 / (p.max(GRAD_FLOOR) * mm);
            }
        }
        acc.loss += loss;
        acc.used += 1;
        if with_grad {
            let mut g_probs = vec![0.0; n];
            let mut g_emb = vec![0.0; out.embedding.len()];
            let mut scratch = Vec::new();
            for (m, st) in states.iter().enumerate() {
                self.backward_sample(m, st, &out, labels, observed, gp.clone(), &mut g_probs, &mut g_emb, acc, &mut scratch);
            }
            encoder::encode_backward(&self.params.encoder, &out, &cache, &g_probs, &g_emb, &mut acc.encoder);
        }
        Ok(())
    }

    fn accum(&self) -> Accum {
        Accum {
            loss: 0.0,
            used: 0,
            skipped: 0,
            encoder: self.params.encoder.zeros_like(),
            selector: self.params.selector.zeros_like(),
            z: vec![0.0; self.params.config.role_tensor_len()],
        }
    }

    fn run_chunk(&self, data: &Dataset, indices: &[usize], with_grad: bool) -> Result<Accum> {
        let mut acc = self.accum();
        for &e in indices {
            self.example(data.x(e), data.labels(e), data.observed(e), &mut acc, with_grad)?;
        }
        Ok(acc)
    }
}

fn check_data(params: &HcmrParams, data: &Dataset) -> Result<()> {
    data.validate()?;
    if data.input_dim != params.config.input_dim || data.n_concepts != params.config.n_concepts {
        return Err(HcmrError::Shape(alloc::format!(
            "dataset has {} features and {} concepts, model expects {} and {}",
            data.input_dim,
            data.n_concepts,
            params.config.input_dim,
            params.config.n_concepts
        )));
    }
    Ok(())
}

fn run_chunks(ctx: &Ctx<'_>, data: &Dataset, indices: &[usize], with_grad: bool) -> Result<Vec<Accum>> {
    let size = indices.len().div_ceil(CHUNKS).max(1);
    let chunks: Vec<&[usize]> = indices.chunks(size).collect();
    #[cfg(feature = "std")]
    {
        if chunks.len() > 1 {
            return std::thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .iter()
                    .map(|c| scope.spawn(move || ctx.run_chunk(data, c, with_grad)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("likelihood worker panicked"))
                    .collect()
            });
        }
    }
    chunks.iter().map(|c| ctx.run_chunk(data, c, with_grad)).collect()
}

/// Likelihood of `indices` under explicit role samples (averaged inside the logarithm).
///
/// With `with_grad`, also returns parameter gradients: role gradients are
/// passed straight through to the adjusted role probabilities, then through
/// the priority indicator surrogate and the role decoder.
pub fn likelihood_for_samples(
    data: &Dataset,
    indices: &[usize],
    params: &HcmrParams,
    constraints: &ConstraintSet,
    samples: &[RoleSample],
    with_grad: bool,
) -> Result<LikelihoodOutput> {
    check_data(params, data)?;
    let cfg = &params.config;
    constraints.check_dimensions(cfg.n_concepts, cfg.n_rules)?;
    if samples.is_empty() {
        return Err(HcmrError::InvalidArgument("at least one role sample is required".into()));
    }
    for s in samples {
        if s.z.len() != cfg.role_tensor_len() || s.order.len() != cfg.n_concepts {
            return Err(HcmrError::Shape("role sample does not match the model".into()));
        }
    }
    let ctx = Ctx::new(params, constraints, samples);
    let parts = run_chunks(&ctx, data, indices, with_grad)?;
    let mut total = ctx.accum();
    for p in &parts {
        total.loss += p.loss;
        total.used += p.used;
        total.skipped += p.skipped;
        if with_grad {
            total.encoder.add_scaled(&p.encoder, 1.0);
            total.selector.add_scaled(&p.selector, 1.0);
            for (a, b) in total.z.iter_mut().zip(&p.z) {
                *a += b;
            }
        }
    }
    if !with_grad {
        return Ok(LikelihoodOutput {
            loss: total.loss,
            used: total.used,
            skipped: total.skipped,
            grads: None,
            role_grad: None,
        });
    }
    let mut grads = params.zeros_like();
    grads.encoder = total.encoder;
    grads.selector = total.selector;
    memory_backward(params, constraints, &total.z, &mut grads)?;
    Ok(LikelihoodOutput {
        loss: total.loss,
        used: total.used,
        skipped: total.skipped,
        grads: Some(grads),
        role_grad: Some(total.z),
    })
}

/// Backpropagates a gradient on the adjusted role probabilities into the rule memory.
pub fn memory_backward(params: &HcmrParams, constraints: &ConstraintSet, role_grad: &[f64], grads: &mut HcmrParams) -> Result<()> {
    let (r_prime, cache) = rule_memory::decode_with_cache(&params.memory)?;
    let adjusted = rule_memory::adjust_roles_detailed(&r_prime, &params.memory.priorities, Some(constraints))?;
    let (g_prime, g_pr) = rule_memory::adjust_backward(&r_prime, &adjusted, role_grad, params.config.st_temperature);
    rule_memory::decode_backward(&params.memory, &r_prime, &cache, &g_prime, &mut grads.memory);
    for (a, b) in grads.memory.priorities.iter_mut().zip(constraints.priorities_backward(&g_pr)) {
        *a += b;
    }
    Ok(())
}

/// Draws `mc_samples` role assignments from the adjusted role distributions.
pub fn sample_role_assignments<R: Rng + ?Sized>(
    params: &HcmrParams,
    constraints: &ConstraintSet,
    rng: &mut R,
) -> Result<Vec<RoleSample>> {
    let roles = params.adjusted_roles(Some(constraints))?;
    (0..params.config.mc_samples.max(1))
        .map(|_| RoleSample::from_rules(&rule_memory::sample_roles(&roles, rng)))
        .collect()
}

/// Summed negative log-likelihood of a batch under freshly sampled roles.
pub fn training_likelihood<R: Rng + ?Sized>(
    batch: &Dataset,
    params: &HcmrParams,
    constraints: Option<&ConstraintSet>,
    rng: &mut R,
) -> Result<LikelihoodOutput> {
    let cs = resolve_constraints(params, constraints);
    let samples = sample_role_assignments(params, &cs, rng)?;
    let all: Vec<usize> = (0..batch.len()).collect();
    likelihood_for_samples(batch, &all, params, &cs, &samples, false)
}

fn resolve_constraints(params: &HcmrParams, constraints: Option<&ConstraintSet>) -> ConstraintSet {
    match constraints {
        Some(c) => c.clone(),
        None => ConstraintSet::empty(params.config.n_concepts, params.config.n_rules),
    }
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-example loss over the epoch.
    pub loss: f64,
    /// Concept accuracy on the validation set, when validated this epoch.
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch of the returned checkpoint (0 means the initial parameters).
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    /// Training stopped early on a non-finite loss or parameter.
    pub diverged: bool,
    /// Examples skipped (per epoch) because no label was observed.
    pub skipped_examples: usize,
}

/// Concept accuracy of MAP predictions over observed labels.
pub fn concept_accuracy(model: &FrozenModel, data: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    let none = InterventionAssignment::new();
    for e in 0..data.len() {
        let trace = inference::infer_map(data.x(e), model, &none)?;
        let values = trace.values();
        for i in 0..data.n_concepts {
            if data.observed(e)[i] {
                total += 1;
                if values[i] == data.labels(e)[i] {
                    correct += 1;
                }
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

fn frozen_tensors(params: &HcmrParams, options: &TrainOptions) -> Vec<bool> {
    let t = options.trainable;
    let mut v = vec![!t.encoder; params.encoder.tensors().len()];
    v.extend(vec![!t.selector; params.selector.tensors().len()]);
    v.extend(vec![!t.rule_memory; params.memory.tensors().len()]);
    v
}

/// Shared epoch loop of the model and the baseline.
pub(crate) fn optimise<P, S, V>(
    params: &mut P,
    n_train: usize,
    options: &TrainOptions,
    frozen: &[bool],
    mut step: S,
    mut validate: V,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainHistory>
where
    P: ParamTensors + Clone,
    S: FnMut(&P, &[usize], &mut ChaCha8Rng) -> Result<(f64, usize, usize, P)>,
    V: FnMut(&P) -> Result<Option<f64>>,
{
    if options.batch_size == 0 {
        return Err(HcmrError::Config("batch_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut opt = AdamW::new(options.optimizer, params);
    let mut history = TrainHistory::default();
    let mut best = params.clone();
    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 1..=options.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut used_sum = 0usize;
        let mut skipped = 0usize;
        let mut diverged = false;
        for batch in order.chunks(options.batch_size) {
            let (loss, used, skip, mut grads) = step(params, batch, &mut rng)?;
            skipped += skip;
            if used == 0 {
                continue;
            }
            if !loss.is_finite() || !grads.all_finite() {
                diverged = true;
                break;
            }
            loss_sum += loss;
            used_sum += used;
            for t in grads.tensors_mut() {
                for g in t.iter_mut() {
                    *g /= used as f64;
                }
            }
            opt.step(params, &grads, frozen);
            if !params.all_finite() {
                diverged = true;
                break;
            }
        }
        history.skipped_examples = skipped;
        if diverged {
            history.diverged = true;
            *params = best;
            return Ok(history);
        }
        let validate_now = epoch % options.validate_every.max(1) == 0 || epoch == options.epochs;
        let val_accuracy = if validate_now { validate(params)? } else { None };
        let record = EpochRecord {
            epoch,
            loss: if used_sum > 0 { loss_sum / used_sum as f64 } else { 0.0 },
            val_accuracy,
        };
        match (val_accuracy, history.best_val_accuracy) {
            (Some(a), Some(b)) if a <= b => {}
            (Some(a), _) => {
                history.best_val_accuracy = Some(a);
                history.best_epoch = epoch;
                best = params.clone();
            }
            (None, None) => {
                history.best_epoch = epoch;
                best = params.clone();
            }
            (None, Some(_)) => {}
        }
        progress(&record);
        history.records.push(record);
    }
    *params = best;
    Ok(history)
}

/// Trains a model; returns the checkpoint with the best validation accuracy.
pub fn train(
    train_data: &Dataset,
    val_data: &Dataset,
    config: &ModelConfig,
    constraints: Option<&ConstraintSet>,
    options: &TrainOptions,
) -> Result<(HcmrParams, TrainHistory)> {
    train_with_progress(train_data, val_data, config, constraints, options, &mut |_| {})
}

pub fn train_with_progress(
    train_data: &Dataset,
    val_data: &Dataset,
    config: &ModelConfig,
    constraints: Option<&ConstraintSet>,
    options: &TrainOptions,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<(HcmrParams, TrainHistory)> {
    let params = HcmrParams::new(config, options.seed)?;
    train_from(params, train_data, val_data, constraints, options, progress)
}

/// Continues training from given parameters.
pub fn train_from(
    mut params: HcmrParams,
    train_data: &Dataset,
    val_data: &Dataset,
    constraints: Option<&ConstraintSet>,
    options: &TrainOptions,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<(HcmrParams, TrainHistory)> {
    check_data(&params, train_data)?;
    if !val_data.is_empty() {
        check_data(&params, val_data)?;
    }
    let cs = resolve_constraints(&params, constraints);
    let frozen = frozen_tensors(&params, options);
    let history = optimise(
        &mut params,
        train_data.len(),
        options,
        &frozen,
        |p: &HcmrParams, batch: &[usize], rng: &mut ChaCha8Rng| {
            let samples = sample_role_assignments(p, &cs, rng)?;
            let out = likelihood_for_samples(train_data, batch, p, &cs, &samples, true)?;
            let grads = out.grads.expect("gradient requested");
            Ok((out.loss, out.used, out.skipped, grads))
        },
        |p: &HcmrParams| {
            if val_data.is_empty() {
                return Ok(None);
            }
            let model = FrozenModel::new(p, Some(&cs))?;
            concept_accuracy(&model, val_data).map(Some)
        },
        progress,
    )?;
    Ok((params, history))
}
