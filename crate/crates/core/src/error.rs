use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a domain invariant (topic out of range, asymmetric edge, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A record in an input file could not be decoded.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// `c_hat` dropped below `c` in some component.
    #[error(
        "constraint violation: topic {topic} has {added} < {original} links after manipulation"
    )]
    Constraint {
        topic: usize,
        original: u64,
        added: u64,
    },

    #[error("length mismatch: {left} vs {right} topics")]
    LengthMismatch { left: usize, right: usize },

    #[error("topic distribution undefined for an empty history")]
    EmptyDistribution,

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("no candidate users to sample decoys from for `{0}`")]
    NoCandidates(String),

    #[error("gave up on topic {topic} for `{user}` after {retries} retries")]
    RetriesExhausted {
        user: String,
        topic: usize,
        retries: usize,
    },

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("clustering failed: {0}")]
    Clustering(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad input rather than a failed run; the CLI maps these to exit code 1.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::Constraint { .. }
                | Error::LengthMismatch { .. }
                | Error::UnknownUser(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
