//! Streaming click-through-rate prediction benchmark engine.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] ingests hour-stamped categorical logs, builds vocabularies and
//!   splits the stream into a pretraining block plus per-hour train/test halves.
//! * [`nn`] holds the dense primitives with hand-written backward passes,
//!   including the batch/layer normalization family with independently
//!   switchable mean, variance, scale and shift components.
//! * [`models`] composes those primitives into LR, FM, DNN and DeepFM.
//! * [`optim`] implements SGD, Adam, AdamW and RMSprop with lazy sparse rows.
//! * [`metrics`] provides tie-aware AUC, logloss and the stream aggregates
//!   (oAUC, cAUC, bAUC, iAUC, pAUC) along with the analysis statistics.
//! * [`engine`] runs pretraining, the inference→updating loop, epoch sweeps,
//!   exemplar replay and the synthetic drift generator.

pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod optim;
pub mod rng;

pub use error::{Error, ErrorKind, Result};

/// Engine version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
