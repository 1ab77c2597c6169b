//! Rule selection and symbolic rule evaluation.
//!
//! The selector sees the encoder embedding and the parent values of the
//! concept being predicted. Entries of non-parents are zeroed; for each
//! parent only the embedding matching its value is kept (positive when True,
//! negative when False), followed by the parent-masked bit vector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::config::ModelConfig;
use crate::encoder::EncoderOutput;
use crate::error::{HcmrError, Result};
use crate::math;
use crate::nn::{Activation, Dense, ParamTensors};
use crate::rule_memory::{Role, SymbolicRuleSet};

/// One shared network emitting `n_C x n_R` selection logits; only the rows of
/// the concept being predicted are ever evaluated.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectorParams {
    pub n_concepts: usize,
    pub n_rules: usize,
    pub size_c_emb: usize,
    /// `2 n_C size_c_emb + n_C -> size_latent`, rectifier.
    pub hidden: Dense,
    /// `size_latent -> n_C n_R`.
    pub output: Dense,
}

impl SelectorParams {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let n = config.n_concepts;
        let n_in = 2 * n * config.size_c_emb + n;
        SelectorParams {
            n_concepts: n,
            n_rules: config.n_rules,
            size_c_emb: config.size_c_emb,
            hidden: Dense::new(n_in, config.size_latent, rng),
            output: Dense::new(config.size_latent, n * config.n_rules, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        SelectorParams {
            n_concepts: self.n_concepts,
            n_rules: self.n_rules,
            size_c_emb: self.size_c_emb,
            hidden: self.hidden.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    pub fn input_len(&self) -> usize {
        self.hidden.n_in
    }
}

impl ParamTensors for SelectorParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.hidden.tensors();
        v.extend(self.output.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.hidden.tensors_mut();
        v.extend(self.output.tensors_mut());
        v
    }
}

/// Selector input for soft parent mask and soft values (both in `[0, 1]`).
///
/// With hard 0/1 arguments this is exactly the masking described in the
/// module docs; the multilinear form lets training differentiate through it.
pub fn selector_input(embedding: &[f64], size_c_emb: usize, parent: &[f64], values: &[f64], out: &mut Vec<f64>) {
    let n = parent.len();
    let e = size_c_emb;
    out.clear();
    out.resize(2 * n * e + n, 0.0);
    for j in 0..n {
        let m = parent[j];
        if m == 0.0 {
            continue;
        }
        let c = values[j];
        let base = 2 * e * j;
        for t in 0..e {
            out[base + t] = m * c * embedding[base + t];
            out[base + e + t] = m * (1.0 - c) * embedding[base + e + t];
        }
        out[2 * n * e + j] = m * c;
    }
}

/// Gradients of [`selector_input`] with respect to `embedding`, `parent` and `values`.
pub fn selector_input_backward(
    embedding: &[f64],
    size_c_emb: usize,
    parent: &[f64],
    values: &[f64],
    grad_input: &[f64],
    grad_embedding: &mut [f64],
    grad_parent: &mut [f64],
    grad_values: &mut [f64],
) {
    let n = parent.len();
    let e = size_c_emb;
    for j in 0..n {
        let m = parent[j];
        let c = values[j];
        let base = 2 * e * j;
        let gb = grad_input[2 * n * e + j];
        let mut pos_dot = 0.0;
        let mut neg_dot = 0.0;
        for t in 0..e {
            let gp = grad_input[base + t];
            let gn = grad_input[base + e + t];
            grad_embedding[base + t] += m * c * gp;
            grad_embedding[base + e + t] += m * (1.0 - c) * gn;
            pos_dot += gp * embedding[base + t];
            neg_dot += gn * embedding[base + e + t];
        }
        grad_parent[j] += c * pos_dot + (1.0 - c) * neg_dot + c * gb;
        grad_values[j] += m * (pos_dot - neg_dot + gb);
    }
}

/// Activations of one selector evaluation.
#[derive(Debug, Clone, Default)]
pub struct SelectorCache {
    pub input: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Softmax over the `n_R` rules of the concept.
    pub probs: Vec<f64>,
}

pub fn selector_forward(params: &SelectorParams, i: usize, input: Vec<f64>) -> SelectorCache {
    let mut hidden_pre = vec![0.0; params.hidden.n_out];
    params.hidden.forward(&input, &mut hidden_pre);
    let hidden: Vec<f64> = hidden_pre.iter().map(|&v| Activation::Relu.apply(v)).collect();
    let nr = params.n_rules;
    let mut probs = vec![0.0; nr];
    params.output.forward_rows(&hidden, i * nr..(i + 1) * nr, &mut probs);
    math::softmax_in_place(&mut probs);
    SelectorCache {
        input,
        hidden_pre,
        hidden,
        probs,
    }
}

/// Accumulates gradients for a gradient on the selection probabilities; adds the input gradient into `grad_input`.
pub fn selector_backward(
    params: &SelectorParams,
    i: usize,
    cache: &SelectorCache,
    grad_probs: &[f64],
    grads: &mut SelectorParams,
    grad_input: Option<&mut [f64]>,
) {
    let nr = params.n_rules;
    let mut g_logits = vec![0.0; nr];
    math::softmax_backward(&cache.probs, grad_probs, &mut g_logits);
    let mut g_hidden = vec![0.0; params.hidden.n_out];
    params
        .output
        .backward_rows(&cache.hidden, i * nr..(i + 1) * nr, &g_logits, &mut grads.output, Some(&mut g_hidden));
    for (g, &pre) in g_hidden.iter_mut().zip(&cache.hidden_pre) {
        *g *= Activation::Relu.derivative(pre);
    }
    params.hidden.backward(&cache.input, &g_hidden, &mut grads.hidden, grad_input);
}

fn bits(values: &[bool]) -> Vec<f64> {
    values.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Selection distribution `p(S_i | ê, ĉ_parents)` over the rules of a non-source concept.
pub fn select_rule_distribution(
    i: usize,
    out: &EncoderOutput,
    c_hat: &[bool],
    rules: &SymbolicRuleSet,
    params: &SelectorParams,
) -> Result<Vec<f64>> {
    let n = rules.n_concepts;
    if i >= n || c_hat.len() != n || params.n_concepts != n || out.embedding.len() != 2 * n * params.size_c_emb {
        return Err(HcmrError::Shape(format!("selector called for concept {i} with inconsistent shapes")));
    }
    if rules.is_source(i) {
        return Err(HcmrError::ContractViolation(format!(
            "concept {i} is a source concept and has no rule to select"
        )));
    }
    let parent = bits(&rules.parent[i * n..(i + 1) * n]);
    let mut input = Vec::new();
    selector_input(&out.embedding, params.size_c_emb, &parent, &bits(c_hat), &mut input);
    Ok(selector_forward(params, i, input).probs)
}

/// Truth value of a conjunctive rule body: every positive literal true and every negative literal false.
pub fn evaluate_rule(rule: &[Role], c_hat: &[bool]) -> bool {
    rule.iter().zip(c_hat).all(|(r, &c)| match r {
        Role::Positive => c,
        Role::Negative => !c,
        Role::Irrelevant => true,
    })
}

/// Mixture of rule evaluations weighted by selection probabilities.
pub fn rule_mixture(selection: &[f64], i: usize, c_hat: &[bool], rules: &SymbolicRuleSet) -> f64 {
    selection
        .iter()
        .enumerate()
        .filter(|&(k, _)| evaluate_rule(rules.rule(i, k), c_hat))
        .map(|(_, s)| s)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// `p(C_i = 1 | ê, ĉ_parents, r̂_i)` for a non-source concept.
pub fn predict_nonsource_concept(
    i: usize,
    out: &EncoderOutput,
    c_hat: &[bool],
    rules: &SymbolicRuleSet,
    params: &SelectorParams,
) -> Result<f64> {
    let selection = select_rule_distribution(i, out, c_hat, rules, params)?;
    Ok(rule_mixture(&selection, i, c_hat, rules))
}
