use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Every point has zero sensitivity under the activation and query ball,
    /// so there is nothing to sample from.
    #[error(
        "all sensitivities are zero: every neuron is dead under the given activation and ball"
    )]
    AllZeroSensitivity,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("malformed model at `{path}`: {reason}")]
    MalformedModel { path: String, reason: String },

    #[error("malformed IDX data: {0}")]
    MalformedIdx(String),

    #[error("layer {layer} cannot be pruned: {reason}")]
    NotPrunable { layer: usize, reason: String },

    #[error("degenerate instance: points {first} and {second} coincide")]
    DegenerateInstance { first: usize, second: usize },

    #[error("layer {layer}: {source}")]
    AtLayer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn malformed(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::MalformedModel {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Strips any layer annotations and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLayer { source, .. } => source.root(),
            other => other,
        }
    }
}
