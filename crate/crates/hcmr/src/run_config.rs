//! TOML run configuration for `hcmr train`.
//!
//! ```toml
//! output_dir = "runs/xor"       # optional; --output-dir and HCMR_OUTPUT_DIR take precedence
//!
//! [data]
//! train = "train.csv"           # required; paths are relative to this file
//! val = "val.csv"               # optional; otherwise the last val_fraction of train
//! val_fraction = 0.2
//! constraints = "xor.toml"      # optional
//!
//! [model]                       # every key optional; n_concepts and input_dim come from the data
//! n_rules = 10
//! beta = 0.1
//!
//! [train]
//! epochs = 100
//! batch_size = 256
//! lr = 0.001
//! seed = 0
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use hcmr_core::optim::AdamWConfig;
use hcmr_core::{ModelConfig, TrainOptions, Trainable};
use serde::Deserialize;

use crate::error::{self, FormatError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: PathBuf,
    pub val: Option<PathBuf>,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    pub constraints: Option<PathBuf>,
}

fn default_val_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_rules: Option<usize>,
    pub size_rule_emb: Option<usize>,
    pub size_c_emb: Option<usize>,
    pub size_latent: Option<usize>,
    pub backbone_hidden: Option<Vec<usize>>,
    pub beta: Option<f64>,
    pub st_temperature: Option<f64>,
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub validate_every: Option<usize>,
    pub seed: Option<u64>,
    pub freeze_encoder: Option<bool>,
    pub freeze_selector: Option<bool>,
    pub freeze_rule_memory: Option<bool>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text)?;
        if !(0.0..1.0).contains(&c.data.val_fraction) {
            return Err(FormatError::Schema("data.val_fraction must lie in [0, 1)".into()));
        }
        Ok(c)
    }

    /// Loads a config and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::parse(&error::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut c.data.train);
        if let Some(p) = c.data.val.as_mut() {
            resolve(p);
        }
        if let Some(p) = c.data.constraints.as_mut() {
            resolve(p);
        }
        if let Some(p) = c.output_dir.as_mut() {
            resolve(p);
        }
        Ok(c)
    }

    pub fn model_config(&self, n_concepts: usize, input_dim: usize) -> Result<ModelConfig> {
        let m = &self.model;
        let mut c = ModelConfig::new(n_concepts, input_dim);
        c.n_rules = m.n_rules.unwrap_or(c.n_rules);
        c.size_rule_emb = m.size_rule_emb.unwrap_or(c.size_rule_emb);
        c.size_c_emb = m.size_c_emb.unwrap_or(c.size_c_emb);
        c.size_latent = m.size_latent.unwrap_or(c.size_latent);
        c.backbone_hidden = m.backbone_hidden.clone().unwrap_or(c.backbone_hidden);
        c.beta = m.beta.unwrap_or(c.beta);
        c.st_temperature = m.st_temperature.unwrap_or(c.st_temperature);
        c.mc_samples = m.mc_samples.unwrap_or(c.mc_samples);
        c.validate()?;
        Ok(c)
    }

    pub fn train_options(&self) -> TrainOptions {
        let t = &self.train;
        let d = TrainOptions::default();
        let o = AdamWConfig::default();
        TrainOptions {
            epochs: t.epochs.unwrap_or(d.epochs),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            optimizer: AdamWConfig {
                lr: t.lr.unwrap_or(o.lr),
                beta1: t.beta1.unwrap_or(o.beta1),
                beta2: t.beta2.unwrap_or(o.beta2),
                eps: t.eps.unwrap_or(o.eps),
                weight_decay: t.weight_decay.unwrap_or(o.weight_decay),
            },
            validate_every: t.validate_every.unwrap_or(d.validate_every),
            seed: t.seed.unwrap_or(d.seed),
            trainable: Trainable {
                encoder: !t.freeze_encoder.unwrap_or(false),
                selector: !t.freeze_selector.unwrap_or(false),
                rule_memory: !t.freeze_rule_memory.unwrap_or(false),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = RunConfig::parse("[data]\ntrain = \"t.csv\"\n").unwrap();
        assert_eq!(c.train_options(), TrainOptions::default());
        assert_eq!(c.model_config(7, 4).unwrap(), ModelConfig::new(7, 4));
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        assert!(RunConfig::parse("[data]\ntrain = \"t.csv\"\n[model]\nn_rule = 3\n").is_err());
        assert!(RunConfig::parse("[model]\nn_rules = 3\n").is_err());
        assert!(RunConfig::parse("[data]\ntrain = \"t.csv\"\nval_fraction = 1.5\n").is_err());
    }

    #[test]
    fn invalid_model_values_fail_validation() {
        let c = RunConfig::parse("[data]\ntrain = \"t.csv\"\n[model]\nn_rules = 0\n").unwrap();
        assert!(c.model_config(3, 2).is_err());
    }
}
