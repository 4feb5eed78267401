use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PwiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PwiError {
    /// Operand shapes that an operation cannot combine.
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("function is not deterministic: two forward passes gave {first} and {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("non-finite loss {loss} at epoch {epoch}, step {step} (pair {pair}); last finite loss {last_finite:?}")]
    NonFiniteLoss {
        loss: f64,
        epoch: usize,
        step: usize,
        pair: String,
        last_finite: Option<f64>,
    },

    #[error("trainable parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PwiError {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        PwiError::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PwiError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PwiError::Io {
            path: path.into(),
            source,
        }
    }
}
