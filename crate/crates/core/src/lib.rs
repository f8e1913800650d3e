//! Consensus over disagreeing model explanations.
//!
//! Synthetic datasets with known generating rules ([`dataset`]), small
//! predictors ([`models`]), model-agnostic attribution methods
//! ([`explain`]), six consensus functions ([`consensus`]) and a hit-analysis
//! harness that scores every function against the known rule features
//! ([`eval`]). [`pipeline`] wires them into the end-to-end experiment that
//! the `xaiconsensus` binary exposes.

pub mod consensus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
