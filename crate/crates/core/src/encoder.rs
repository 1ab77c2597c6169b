//! Neural encoder: input vector to per-concept probabilities and the
//! structured embedding `ê` (a positive and a negative embedding per concept).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::config::ModelConfig;
use crate::error::{HcmrError, Result};
use crate::math;
use crate::nn::{Activation, Dense, Mlp, MlpCache, ParamTensors};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderParams {
    pub n_concepts: usize,
    pub size_c_emb: usize,
    /// `input_dim -> backbone_hidden... -> size_latent`, rectifier activations.
    pub backbone: Mlp,
    /// `size_latent -> n_C * 2 * size_c_emb`, leaky rectifier.
    pub embedding: Dense,
    /// Per-concept logistic head over that concept's `2 * size_c_emb` slice.
    pub head_weight: Vec<f64>,
    pub head_bias: Vec<f64>,
}

impl EncoderParams {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let mut sizes = vec![config.input_dim];
        sizes.extend_from_slice(&config.backbone_hidden);
        sizes.push(config.size_latent);
        let backbone = Mlp::new(&sizes, Activation::Relu, Activation::Relu, rng);
        let n = config.n_concepts;
        let e2 = 2 * config.size_c_emb;
        let embedding = Dense::new(config.size_latent, n * e2, rng);
        let head = Dense::new(e2, n, rng);
        EncoderParams {
            n_concepts: n,
            size_c_emb: config.size_c_emb,
            backbone,
            embedding,
            head_weight: head.weight,
            head_bias: head.bias,
        }
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParams {
            n_concepts: self.n_concepts,
            size_c_emb: self.size_c_emb,
            backbone: self.backbone.zeros_like(),
            embedding: self.embedding.zeros_like(),
            head_weight: vec![0.0; self.head_weight.len()],
            head_bias: vec![0.0; self.head_bias.len()],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.backbone.n_in()
    }
}

impl ParamTensors for EncoderParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.backbone.tensors();
        v.extend(self.embedding.tensors());
        v.push(&self.head_weight);
        v.push(&self.head_bias);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.backbone.tensors_mut();
        v.extend(self.embedding.tensors_mut());
        v.push(&mut self.head_weight);
        v.push(&mut self.head_bias);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderOutput {
    /// `p(C'_i = 1 | x)` for every concept.
    pub source_probs: Vec<f64>,
    /// Concatenation over concepts of `[positive, negative]` embeddings.
    pub embedding: Vec<f64>,
    pub size_c_emb: usize,
}

impl EncoderOutput {
    pub fn pos_emb(&self, i: usize) -> &[f64] {
        let e = self.size_c_emb;
        &self.embedding[2 * e * i..2 * e * i + e]
    }

    pub fn neg_emb(&self, i: usize) -> &[f64] {
        let e = self.size_c_emb;
        &self.embedding[2 * e * i + e..2 * e * (i + 1)]
    }
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    backbone: MlpCache,
    emb_pre: Vec<f64>,
}

pub fn encode(x: &[f64], params: &EncoderParams) -> Result<EncoderOutput> {
    encode_cached(x, params).map(|(o, _)| o)
}

pub fn encode_cached(x: &[f64], params: &EncoderParams) -> Result<(EncoderOutput, EncoderCache)> {
    if x.len() != params.input_dim() {
        return Err(HcmrError::Shape(format!(
            "input has {} features, encoder expects {}",
            x.len(),
            params.input_dim()
        )));
    }
    let backbone = params.backbone.forward_cached(x);
    let mut emb_pre = vec![0.0; params.embedding.n_out];
    params.embedding.forward(backbone.output(), &mut emb_pre);
    let embedding: Vec<f64> = emb_pre.iter().map(|&v| Activation::LeakyRelu.apply(v)).collect();
    let e2 = 2 * params.size_c_emb;
    let source_probs = (0..params.n_concepts)
        .map(|i| {
            let w = &params.head_weight[i * e2..(i + 1) * e2];
            let z = params.head_bias[i] + w.iter().zip(&embedding[i * e2..(i + 1) * e2]).map(|(a, b)| a * b).sum::<f64>();
            math::sigmoid(z)
        })
        .collect();
    Ok((
        EncoderOutput {
            source_probs,
            embedding,
            size_c_emb: params.size_c_emb,
        },
        EncoderCache { backbone, emb_pre },
    ))
}

/// Accumulates parameter gradients given gradients on `source_probs` and `embedding`.
pub fn encode_backward(
    params: &EncoderParams,
    out: &EncoderOutput,
    cache: &EncoderCache,
    grad_probs: &[f64],
    grad_embedding: &[f64],
    grads: &mut EncoderParams,
) {
    let e2 = 2 * params.size_c_emb;
    let mut g_emb = grad_embedding.to_vec();
    for i in 0..params.n_concepts {
        let p = out.source_probs[i];
        let gz = grad_probs[i] * p * (1.0 - p);
        if gz == 0.0 {
            continue;
        }
        grads.head_bias[i] += gz;
        let range = i * e2..(i + 1) * e2;
        for ((gw, ge), (&w, &x)) in grads.head_weight[range.clone()]
            .iter_mut()
            .zip(&mut g_emb[range.clone()])
            .zip(params.head_weight[range.clone()].iter().zip(&out.embedding[range]))
        {
            *gw += gz * x;
            *ge += gz * w;
        }
    }
    for (g, &pre) in g_emb.iter_mut().zip(&cache.emb_pre) {
        *g *= Activation::LeakyRelu.derivative(pre);
    }
    let mut g_latent = vec![0.0; params.embedding.n_in];
    params
        .embedding
        .backward(cache.backbone.output(), &g_emb, &mut grads.embedding, Some(&mut g_latent));
    params.backbone.backward(&cache.backbone, &g_latent, &mut grads.backbone, None);
}
