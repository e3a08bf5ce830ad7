//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fixed-point format {int_bits}.{frac_bits}: total data bits must be >= 1")]
    InvalidFormat { int_bits: u32, frac_bits: u32 },

    #[error("weight code {code} out of range [0, {max}] for the given format")]
    CodeOutOfRange { code: u64, max: u64 },

    #[error("layer {layer}: {reason}")]
    ShapeIncompatible { layer: usize, reason: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite loss encountered during training")]
    NonFiniteLoss,

    #[error("action at step {step} is {action}, but the step only has {choices} choices")]
    ActionOutOfRange {
        step: usize,
        action: usize,
        choices: usize,
    },

    #[error("action sequence has {got} steps, decision plan has {expected}")]
    ActionLengthMismatch { got: usize, expected: usize },

    #[error("candidate infeasible: {reason}")]
    InfeasibleCandidate { reason: String },

    #[error(
        "unsupported switch combination {0}; supported: (1,0,0,0) nas, (1,1,0,0) quantnas, \
         (1,1,1,0) ptbnas, (0,1,0,1) rnas"
    )]
    UnsupportedSwitches(String),

    #[error("reward config requires hardware metrics when beta < 1")]
    MetricsRequired,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("architecture has no layers")]
    EmptyArchitecture,

    #[error("dataset error: {0}")]
    Data(String),

    #[error("history error: {0}")]
    History(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
