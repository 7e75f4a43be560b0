//! Touch-less hand-gesture recognition from Wi-Fi received signal strength.
//!
//! A hand moving near a Wi-Fi receiver leaves a visible imprint on the
//! per-frame RSSI stream. This crate implements the whole recognition stack
//! around that effect:
//!
//! - [`signal`] — log-distance path-loss channel simulator with shadow fading,
//!   Nakagami multipath and gesture attenuation templates, used to synthesize
//!   ground-truth-labeled RSSI sessions.
//! - [`ingest`] — RSSI log file parsing/serialization, the Linux
//!   `/proc/net/wireless` table parser, gesture window extraction and
//!   stratified train/test splitting.
//! - [`pipeline`] — the online chain: overlapping windowing, variance noise
//!   gate, fixed-length feature resampling and standardization, logits
//!   thresholding and the prediction decision rules.
//! - [`lstm`] — from-scratch stacked LSTM sequence classifier: forward pass,
//!   softmax/NLL loss, backpropagation through time, ADAM with gradient
//!   clipping, training loop, cross-validated grid search, serialization.
//! - [`dtw`] — k-nearest-neighbor dynamic-time-warping baseline classifier.
//! - [`capture`] — live front end: ICMP echo traffic inducer and a polling
//!   RSSI source abstraction with replay and mock implementations.
//! - [`report`] — accuracy metric, confusion matrices and evaluation reports.
//!
//! The `handwave` binary wires these into batch subcommands (`synth`,
//! `train`, `eval`, `gridsearch`, `fp-soak`, `run`, `induce`); the crate
//! `examples/` directory demonstrates each capability as a standalone
//! program.

pub mod capture;
pub mod cli;
pub mod config;
pub mod dtw;
pub mod ingest;
pub mod lstm;
pub mod pipeline;
pub mod report;
pub mod signal;
pub mod types;

pub use types::{GestureLabel, RssiSample, GESTURE_CLASSES};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or function argument is out of its domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    /// Input text or bytes could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    /// Structurally valid input that cannot be processed (missing classes,
    /// empty datasets, inconsistent metadata).
    #[error("data error: {0}")]
    Data(String),
    /// Tensor or feature dimensions do not line up.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    /// A serialized model file is malformed or corrupted.
    #[error("model format error: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParam(_) => 1,
            Error::Parse(_) | Error::Data(_) | Error::Shape { .. } | Error::ModelFormat(_) => 2,
            Error::Io(_) => 3,
        }
    }
}
