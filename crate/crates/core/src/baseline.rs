//! Independent concept predictor: the same encoder, one logistic head per
//! concept, trained with cross-entropy. Interventions cannot propagate
//! between its concepts.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::config::{ModelConfig, TrainOptions};
use crate::datasets::Dataset;
use crate::encoder::{self, EncoderParams};
use crate::error::{HcmrError, Result};
use crate::inference::InterventionAssignment;
use crate::math;
use crate::nn::ParamTensors;
use crate::training::{optimise, EpochRecord, TrainHistory, PROB_FLOOR};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineModel {
    pub config: ModelConfig,
    pub encoder: EncoderParams,
}

impl BaselineModel {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(BaselineModel {
            config: config.clone(),
            encoder: EncoderParams::new(config, &mut ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    pub fn predict_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(encoder::encode(x, &self.encoder)?.source_probs)
    }

    /// Thresholded predictions; intervened concepts take their given value
    /// and nothing else changes.
    pub fn predict(&self, x: &[f64], interventions: &InterventionAssignment) -> Result<Vec<bool>> {
        interventions.validate(self.config.n_concepts)?;
        let probs = self.predict_probs(x)?;
        Ok(probs
            .iter()
            .enumerate()
            .map(|(i, &p)| interventions.get(i).unwrap_or(p > 0.5))
            .collect())
    }
}

impl ParamTensors for BaselineModel {
    fn tensors(&self) -> Vec<&[f64]> {
        self.encoder.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder.tensors_mut()
    }
}

/// Summed cross-entropy over observed labels and its gradient.
pub fn baseline_loss(model: &BaselineModel, data: &Dataset, indices: &[usize]) -> Result<(f64, usize, usize, BaselineModel)> {
    let mut grads = BaselineModel {
        config: model.config.clone(),
        encoder: model.encoder.zeros_like(),
    };
    let mut loss = 0.0;
    let (mut used, mut skipped) = (0, 0);
    let n = model.config.n_concepts;
    for &e in indices {
        let observed = data.observed(e);
        if !observed.iter().any(|&o| o) {
            skipped += 1;
            continue;
        }
        used += 1;
        let (out, cache) = encoder::encode_cached(data.x(e), &model.encoder)?;
        let mut gp = alloc::vec![0.0; n];
        for i in 0..n {
            if !observed[i] {
                continue;
            }
            let q = out.source_probs[i];
            let p = if data.labels(e)[i] { q } else { 1.0 - q };
            let pc = p.max(PROB_FLOOR);
            loss -= math::ln(pc);
            gp[i] = if data.labels(e)[i] { -1.0 / pc } else { 1.0 / pc };
        }
        let ge = alloc::vec![0.0; out.embedding.len()];
        encoder::encode_backward(&model.encoder, &out, &cache, &gp, &ge, &mut grads.encoder);
    }
    Ok((loss, used, skipped, grads))
}

/// Concept accuracy of thresholded predictions over observed labels.
pub fn baseline_accuracy(model: &BaselineModel, data: &Dataset) -> Result<f64> {
    let (mut correct, mut total) = (0usize, 0usize);
    for e in 0..data.len() {
        let probs = model.predict_probs(data.x(e))?;
        for i in 0..data.n_concepts {
            if data.observed(e)[i] {
                total += 1;
                correct += ((probs[i] > 0.5) == data.labels(e)[i]) as usize;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

pub fn train_baseline(
    train_data: &Dataset,
    val_data: &Dataset,
    config: &ModelConfig,
    options: &TrainOptions,
) -> Result<(BaselineModel, TrainHistory)> {
    train_baseline_with_progress(train_data, val_data, config, options, &mut |_| {})
}

pub fn train_baseline_with_progress(
    train_data: &Dataset,
    val_data: &Dataset,
    config: &ModelConfig,
    options: &TrainOptions,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<(BaselineModel, TrainHistory)> {
    if train_data.input_dim != config.input_dim || train_data.n_concepts != config.n_concepts {
        return Err(HcmrError::Shape("dataset does not match the model configuration".into()));
    }
    let mut model = BaselineModel::new(config, options.seed)?;
    let frozen = alloc::vec![false; model.tensors().len()];
    let history = optimise(
        &mut model,
        train_data.len(),
        options,
        &frozen,
        |m: &BaselineModel, batch: &[usize], _rng: &mut ChaCha8Rng| baseline_loss(m, train_data, batch),
        |m: &BaselineModel| {
            if val_data.is_empty() {
                Ok(None)
            } else {
                baseline_accuracy(m, val_data).map(Some)
            }
        },
        progress,
    )?;
    Ok((model, history))
}
