use std::path::PathBuf;

use thiserror::Error;

use crate::kernels::Family;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("coincident points (index pairs within 1e-12): {pairs:?}")]
    CoincidentPoints { pairs: Vec<(usize, usize)> },

    #[error("{what} of the {family} kernel is undefined at r = {r} (sigma = {sigma})")]
    UndefinedDerivative {
        family: Family,
        sigma: f64,
        r: f64,
        what: &'static str,
    },

    #[error("{what} of a {family} RBF is undefined at its centre")]
    CentreSingularity { family: Family, what: &'static str },

    #[error("linear system is numerically singular (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed model file: {0}")]
    Model(#[from] serde_json::Error),
}

impl Error {
    /// `true` for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. } | Error::CentreSingularity { .. } | Error::UndefinedDerivative { .. }
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
