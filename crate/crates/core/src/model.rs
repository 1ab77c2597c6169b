//! Parameter container and the frozen (hard-rule) model used for inference.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::constraints::{ConstraintSet, ConstraintSpec};
use crate::decoder::{self, SelectorParams};
use crate::encoder::{EncoderOutput, EncoderParams};
use crate::error::{HcmrError, Result};
use crate::nn::ParamTensors;
use crate::rule_memory::{self, ConceptGraph, RoleTensor, RuleMemoryParams, SymbolicRuleSet};

/// Every learnable parameter of the model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HcmrParams {
    pub config: ModelConfig,
    pub encoder: EncoderParams,
    pub selector: SelectorParams,
    pub memory: RuleMemoryParams,
}

impl HcmrParams {
    /// Fresh parameters; initialisation is fully determined by `seed`.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderParams::new(config, &mut rng);
        let selector = SelectorParams::new(config, &mut rng);
        let memory = RuleMemoryParams::new(config, &mut rng);
        Ok(HcmrParams {
            config: config.clone(),
            encoder,
            selector,
            memory,
        })
    }

    pub fn zeros_like(&self) -> Self {
        HcmrParams {
            config: self.config.clone(),
            encoder: self.encoder.zeros_like(),
            selector: self.selector.zeros_like(),
            memory: self.memory.zeros_like(),
        }
    }

    /// Role distributions after priorities and constraints.
    pub fn adjusted_roles(&self, constraints: Option<&ConstraintSet>) -> Result<RoleTensor> {
        let r_prime = rule_memory::decode_unadjusted_roles(&self.memory)?;
        rule_memory::adjust_roles(&r_prime, &self.memory.priorities, constraints)
    }

    /// Most likely rules after priorities and constraints.
    pub fn hard_rules(&self, constraints: Option<&ConstraintSet>) -> Result<SymbolicRuleSet> {
        self.adjusted_roles(constraints).map(|r| rule_memory::hard_rules(&r))
    }
}

impl ParamTensors for HcmrParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.encoder.tensors();
        v.extend(self.selector.tensors());
        v.extend(self.memory.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.selector.tensors_mut());
        v.extend(self.memory.tensors_mut());
        v
    }
}

/// A trained model with its rules collapsed to the most likely roles.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    pub config: ModelConfig,
    pub encoder: EncoderParams,
    pub selector: SelectorParams,
    pub rules: SymbolicRuleSet,
    pub graph: ConceptGraph,
    pub constraints: ConstraintSet,
}

impl FrozenModel {
    pub fn new(params: &HcmrParams, constraints: Option<&ConstraintSet>) -> Result<Self> {
        let cfg = &params.config;
        let constraints = match constraints {
            Some(c) => {
                c.check_dimensions(cfg.n_concepts, cfg.n_rules)?;
                c.clone()
            }
            None => ConstraintSet::empty(cfg.n_concepts, cfg.n_rules),
        };
        let rules = params.hard_rules(Some(&constraints))?;
        Self::from_rules(params, rules, constraints)
    }

    /// Uses the given hard rules instead of those decoded from the memory.
    pub fn from_rules(params: &HcmrParams, rules: SymbolicRuleSet, constraints: ConstraintSet) -> Result<Self> {
        let cfg = &params.config;
        if rules.n_concepts != cfg.n_concepts || rules.n_rules != cfg.n_rules {
            return Err(HcmrError::Shape("rule set does not match the model configuration".into()));
        }
        let graph = rule_memory::derive_graph(&rules)?;
        Ok(FrozenModel {
            config: cfg.clone(),
            encoder: params.encoder.clone(),
            selector: params.selector.clone(),
            rules,
            graph,
            constraints,
        })
    }

    pub fn constraint_spec(&self) -> &ConstraintSpec {
        self.constraints.spec()
    }

    /// Rule-selection distribution of non-source concept `i`.
    ///
    /// Concepts whose selection is pinned by injected rules select the first
    /// rule whose body holds (the first rule when none does).
    pub fn selection(&self, i: usize, out: &EncoderOutput, c_hat: &[bool]) -> Result<Vec<f64>> {
        if self.constraints.selection_pinned(i) {
            if self.rules.is_source(i) {
                return Err(crate::error::HcmrError::ContractViolation(alloc::format!(
                    "concept {i} is a source concept and has no rule to select"
                )));
            }
            return Ok(pinned_selection(&self.rules, i, c_hat));
        }
        decoder::select_rule_distribution(i, out, c_hat, &self.rules, &self.selector)
    }
}

/// One-hot selection of the first rule of `i` that holds under `c_hat`.
pub fn pinned_selection(rules: &SymbolicRuleSet, i: usize, c_hat: &[bool]) -> Vec<f64> {
    let mut s = alloc::vec![0.0; rules.n_rules];
    let k = (0..rules.n_rules)
        .find(|&k| decoder::evaluate_rule(rules.rule(i, k), c_hat))
        .unwrap_or(0);
    s[k] = 1.0;
    s
}
