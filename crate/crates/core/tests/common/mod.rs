#![allow(dead_code)]

pub mod gradcheck;
pub mod logic;
pub mod oracles;

use hcmr_core::ModelConfig;

/// A model small enough for finite differences and enumeration.
pub fn tiny_config(n_concepts: usize, n_rules: usize, input_dim: usize) -> ModelConfig {
    let mut cfg = ModelConfig::new(n_concepts, input_dim);
    cfg.n_rules = n_rules;
    cfg.size_rule_emb = 6;
    cfg.size_c_emb = 2;
    cfg.size_latent = 6;
    cfg.backbone_hidden = vec![5];
    cfg
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
