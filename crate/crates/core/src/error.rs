use std::path::PathBuf;

/// Errors raised by the tracking core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("frame {frame} does not follow previous frame {previous}")]
    NonMonotonicFrame { frame: u32, previous: u32 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data or configuration, as opposed
    /// to failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidBox(_)
                | Error::Domain(_)
                | Error::DimensionMismatch { .. }
                | Error::Parse { .. }
                | Error::InvalidConfig(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
