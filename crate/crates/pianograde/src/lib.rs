//! Performance difficulty estimation for piano recordings.
//!
//! The crate covers the full pipeline: feature extraction (CQT and
//! piano-roll tensors at 5 fps), an ordinal convolutional-recurrent model
//! with context attention, single- and multi-task training with 5-fold
//! cross-validation, evaluation metrics (accuracy, MSE, Kendall tau-c,
//! average imbalance ratio), decision fusion over multiple performances,
//! and dataset curation utilities.
//!
//! See the `examples/` directory for one runnable example per capability,
//! or the `pianograde` binary for the batch workflows.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod manifest;
pub mod model;
pub mod ordinal;
pub mod training;

pub use error::{Error, Result};
pub use ordinal::{decode_ordinal, encode_ordinal, DifficultyLevel, OrdinalVector};
