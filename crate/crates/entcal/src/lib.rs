//! Files, remote models and experiment drivers around `entcal-core`.
//!
//! * [`model_file`] and [`profile_file`]: the `ECLM1` and `ECPROF1` text formats.
//! * [`remote`]: client for models served over the newline-delimited logits protocol.
//! * [`config`], [`decoder`], [`data`]: experiment description and corpus splits.
//! * [`pipeline`], [`output`]: train / profile / sweep drivers and their tables.

pub mod config;
pub mod data;
pub mod decoder;
mod error;
pub mod model_file;
pub mod output;
pub mod pipeline;
pub mod profile_file;
pub mod remote;
pub mod serve_check;

pub use config::{ExperimentConfig, ProviderSpec};
pub use decoder::DecoderSpec;
pub use error::{Error, Result};
pub use pipeline::Provider;
