use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular gradient for sensor {sensor}: received signal power {power:e} is numerically zero")]
    SingularGradient { sensor: usize, power: f64 },

    #[error("degenerate fairness weights: sensor {sensor} has zero SINR at the reference point")]
    DegenerateWeights { sensor: usize },

    #[error("degenerate expansion point for sensor {sensor}: {reason}")]
    DegenerateExpansion { sensor: usize, reason: &'static str },

    #[error("refusing to run: {0}")]
    Refused(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
