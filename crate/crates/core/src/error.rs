use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (e.g. `det F <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent arguments.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The energy has no representation usable by the requested operation.
    #[error("unsupported representation: {0}")]
    Unsupported(String),

    /// The energy is not bounded below, so no envelope exists.
    #[error("envelope undefined: {0}")]
    EnvelopeUndefined(String),

    /// A function evaluation produced a non-finite value.
    #[error("evaluation error at {at}: {msg}")]
    Evaluation { at: f64, msg: String },

    /// The envelope has no affine segment that a double tangent could refine.
    #[error("nothing to refine: envelope has no affine segment")]
    NothingToRefine,

    /// The initial state of a simulation has an inverted element.
    #[error("infeasible state: {0}")]
    Infeasible(String),

    #[error("unknown energy `{0}`")]
    UnknownEnergy(String),

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
