use std::io;

use thiserror::Error;

/// Errors produced by the analysis, tracking and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The normal-equation matrix stayed non-positive-definite after ridge regularization.
    #[error("singular normal-equation system (order {order})")]
    SingularSystem { order: usize },

    #[error("degenerate all-pole model: {0}")]
    DegenerateModel(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("signal shorter than one frame ({samples} samples, frame length {frame_len})")]
    SignalTooShort { samples: usize, frame_len: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("wav error: {0}")]
    Wav(String),

    #[error("synthesis spec error: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures of the numerical core rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. } | Error::DegenerateModel(_) | Error::Numerical(_)
        )
    }
}

impl From<hound::Error> for Error {
    fn from(err: hound::Error) -> Self {
        match err {
            hound::Error::IoError(e) => Error::Io(e),
            other => Error::Wav(other.to_string()),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Format(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
