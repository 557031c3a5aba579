use thiserror::Error;

/// Everything that can go wrong in the lab.
///
/// The variants line up with the exit codes of the `mdlab` binary: domain
/// and degenerate inputs are validation failures, integrity errors mean an
/// exact identity disagreed with its kernel, resource errors mean a size cap
/// was hit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("resource limit: {what} exceeds cap {cap}")]
    Resource { what: String, cap: u64 },

    #[error("model integrity: {0}")]
    Integrity(String),

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Degenerate(_) | Error::Json(_) => 2,
            Error::Integrity(_) => 3,
            Error::Resource { .. } => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}
