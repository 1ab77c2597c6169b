use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{HcmrError, Result};
use crate::optim::AdamWConfig;

/// Model hyperparameters. Tasks, when present, are simply additional concepts.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelConfig {
    pub n_concepts: usize,
    pub n_rules: usize,
    pub input_dim: usize,
    pub size_rule_emb: usize,
    pub size_c_emb: usize,
    pub size_latent: usize,
    /// Hidden widths of the input backbone (rectifier activations).
    pub backbone_hidden: Vec<usize>,
    /// Prototypicality weight.
    pub beta: f64,
    /// Temperature of the sigmoid surrogate used for the priority indicator.
    pub st_temperature: f64,
    /// Role samples drawn per optimisation step.
    pub mc_samples: usize,
}

impl ModelConfig {
    /// Desk-scale defaults: `n_R = 10`, `beta = 0.1`, one role sample per step.
    pub fn new(n_concepts: usize, input_dim: usize) -> Self {
        ModelConfig {
            n_concepts,
            n_rules: 10,
            input_dim,
            size_rule_emb: 64,
            size_c_emb: 3,
            size_latent: 64,
            backbone_hidden: vec![64, 64],
            beta: 0.1,
            st_temperature: 1.0,
            mc_samples: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_concepts", self.n_concepts),
            ("n_rules", self.n_rules),
            ("input_dim", self.input_dim),
            ("size_rule_emb", self.size_rule_emb),
            ("size_c_emb", self.size_c_emb),
            ("size_latent", self.size_latent),
            ("mc_samples", self.mc_samples),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(HcmrError::Config(format!("{name} must be positive")));
            }
        }
        if self.backbone_hidden.contains(&0) {
            return Err(HcmrError::Config("backbone_hidden widths must be positive".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(HcmrError::Config("beta must be finite and >= 0".into()));
        }
        if !(self.st_temperature > 0.0 && self.st_temperature.is_finite()) {
            return Err(HcmrError::Config("st_temperature must be finite and > 0".into()));
        }
        Ok(())
    }

    /// Length of the structured embedding (positive and negative per concept).
    pub fn embedding_len(&self) -> usize {
        2 * self.n_concepts * self.size_c_emb
    }

    /// Number of entries in a role tensor: `n_C * n_R * n_C * 3`.
    pub fn role_tensor_len(&self) -> usize {
        self.n_concepts * self.n_rules * self.n_concepts * 3
    }
}

/// Optimisation settings for [`crate::training::train`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Validate every this many epochs.
    pub validate_every: usize,
    /// Seeds parameter initialisation, shuffling and role sampling.
    pub seed: u64,
    pub trainable: Trainable,
}

/// Parameter groups updated by the optimiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Trainable {
    pub encoder: bool,
    pub selector: bool,
    pub rule_memory: bool,
}

impl Default for Trainable {
    fn default() -> Self {
        Trainable {
            encoder: true,
            selector: true,
            rule_memory: true,
        }
    }
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 100,
            batch_size: 256,
            optimizer: AdamWConfig::default(),
            validate_every: 1,
            seed: 0,
            trainable: Trainable::default(),
        }
    }
}
