// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum IcidError {
    #[error("insufficient data for subsample: psi = {psi} but only {available} rows available")]
    InsufficientData { psi: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least two intervals: n = {n}, w = {w}")]
    TooFewIntervals { n: usize, w: usize },

    #[error("empty interval")]
    EmptyInterval,

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("warming up: buffer holds {have} points, need {need}")]
    WarmingUp { have: usize, need: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl IcidError {
    /// Whether the error stems from parameters that do not fit the input,
    /// as opposed to a failure while reading or processing it.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Self::InvalidParameter(_)
                | Self::InsufficientData { .. }
                | Self::DimensionMismatch { .. }
                | Self::TooFewIntervals { .. }
                | Self::SeriesTooShort(_)
        )
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Self::InvalidParameter(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, IcidError>;
