use std::path::PathBuf;

/// Errors surfaced by the simulation and verification kernels.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an input parameter failed. `field` names the offending input.
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },

    /// A Brownian path ended before an exit-time embedding completed.
    /// `embeddings_done` is the index reached in the schedule.
    #[error("brownian path of horizon {horizon} exhausted after {embeddings_done} embeddings")]
    HorizonExhausted { embeddings_done: usize, horizon: f64 },

    /// I/O failure while reading or writing an artifact.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Rejects non-finite or out-of-range values with a message naming the field.
pub(crate) fn require(cond: bool, field: &'static str, message: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(field, message))
    }
}
