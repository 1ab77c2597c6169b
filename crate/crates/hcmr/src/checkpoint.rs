//! JSON checkpoints: parameters, configuration, the constraints they were
//! trained under and a digest guarding those constraints.

use std::path::Path;

use hcmr_core::constraints::ConstraintSpec;
use hcmr_core::{ConstraintSet, FrozenModel, HcmrParams, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::constraint_file::constraint_digest;
use crate::error::{self, FormatError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub params: HcmrParams,
    pub constraints: ConstraintSpec,
    /// Hex SHA-256 of `constraints`, checked on load.
    pub constraint_digest: String,
}

impl Checkpoint {
    pub fn new(params: HcmrParams, constraints: ConstraintSpec) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: params.config.clone(),
            constraint_digest: constraint_digest(&constraints),
            params,
            constraints,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(FormatError::Schema(format!("unsupported checkpoint version {}", self.version)));
        }
        if self.config != self.params.config {
            return Err(FormatError::Schema("checkpoint config disagrees with its parameters".into()));
        }
        if constraint_digest(&self.constraints) != self.constraint_digest {
            return Err(FormatError::Schema("constraint digest mismatch".into()));
        }
        self.config.validate()?;
        Ok(())
    }

    pub fn constraint_set(&self) -> Result<ConstraintSet> {
        Ok(ConstraintSet::new(
            self.config.n_concepts,
            self.config.n_rules,
            self.constraints.clone(),
        )?)
    }

    pub fn frozen(&self) -> Result<FrozenModel> {
        let cs = self.constraint_set()?;
        Ok(FrozenModel::new(&self.params, Some(&cs))?)
    }

    /// Priorities after constraint overrides, as used by the rules.
    pub fn priorities(&self) -> Result<Vec<f64>> {
        Ok(self.constraint_set()?.resolve_priorities(&self.params.memory.priorities))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        error::write(path, self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&error::read_to_string(path)?)
    }
}
