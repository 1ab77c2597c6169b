//! Hierarchical concept memory reasoner.
//!
//! A concept-based classifier that keeps a memory of conjunctive logic rules
//! per concept. Rules are decoded from learnable embeddings, restricted by a
//! learnable node-priority vector so that the implied concept graph is always
//! acyclic, and executed symbolically after a neural selector picks one rule
//! per concept and input.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! the terminal or text formats lives in the companion `hcmr` crate.
//!
//! Module map:
//!
//! - [`rule_memory`]: role decoding, priority adjustment, hard rules, concept graph.
//! - [`constraints`]: training-time model interventions (allow-matrix edits, clamps, injected rules).
//! - [`encoder`] / [`decoder`]: neural source-concept prediction and rule selection/evaluation.
//! - [`inference`]: hierarchical MAP inference, exact marginals, local explanations.
//! - [`training`]: likelihood, straight-through gradients, the optimisation loop.
//! - [`baseline`]: the independent concept predictor used for comparisons.
//! - [`intervention_eval`]: intervention policies and accuracy curves.
//! - [`datasets`]: synthetic generators and the Bayes oracle.
//! - [`verification`]: propositional encoding of the memory, brute-force checking, CNF.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baseline;
pub mod config;
pub mod constraints;
pub mod datasets;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod inference;
pub mod intervention_eval;
pub mod math;
pub mod model;
pub mod nn;
pub mod optim;
pub mod rule_memory;
pub mod training;
pub mod verification;

pub use config::{ModelConfig, TrainOptions, Trainable};
pub use constraints::ConstraintSet;
pub use datasets::Dataset;
pub use error::{HcmrError, Result};
pub use inference::{InterventionAssignment, PredictionTrace};
pub use model::{FrozenModel, HcmrParams};
pub use rule_memory::{ConceptGraph, Role, RoleTensor, SymbolicRuleSet};
