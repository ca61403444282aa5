use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("step {step} (t = {t}): {reason}")]
    Numerical { step: usize, t: f64, reason: String },
    #[error("under-resolved at step {step} (t = {t}): spectral tail fraction {fraction:.3e}")]
    UnderResolved { step: usize, t: f64, fraction: f64 },
    #[error("picard iteration diverging after iterate {0}: T too large")]
    PicardDivergence(usize),
    #[error("config: {0}")]
    Config(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

impl Error {
    /// True for failures of the numerics rather than of the inputs or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Numerical { .. }
                | Error::UnderResolved { .. }
                | Error::PicardDivergence(_)
        )
    }
}
