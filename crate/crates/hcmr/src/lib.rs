//! File formats, checkpoints and run configuration for the hierarchical
//! concept memory reasoner. The `hcmr` binary in this package wraps these
//! together with the model code in `hcmr-core`.

pub mod checkpoint;
pub mod constraint_file;
pub mod data_csv;
pub mod error;
pub mod reports;
pub mod rule_export;
pub mod run_config;

pub use error::{FormatError, Result};
