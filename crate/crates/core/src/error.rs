use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the engine.
///
/// Variants are grouped by the kind of failure rather than by module so
/// callers (the CLI in particular) can map them onto stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad network spec at `{token}`: {reason}")]
    Spec { token: String, reason: String },

    #[error("checkpoint not found: {}", .0.display())]
    CheckpointMissing(PathBuf),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("corrupted checkpoint: {0}")]
    CheckpointCorrupt(String),

    #[error("pgm: {0}")]
    Pgm(String),

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("training diverged at iteration {iteration} (loss = {loss})")]
    Divergence { iteration: u64, loss: f64 },

    #[error("scorer failed on image `{image_id}`: {reason}")]
    Scorer { image_id: String, reason: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
