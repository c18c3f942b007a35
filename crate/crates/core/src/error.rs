use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("s = {s} lies outside the open domain (0, {s_infinity})")]
    Domain { s: f64, s_infinity: f64 },
    #[error("no interior minimizer of the spectral function")]
    NoInteriorMinimizer,
    #[error("particle cap {cap} exceeded at t = {time}")]
    CapExceeded { time: f64, cap: usize },
    #[error("tail index {law} of the initial law does not match gamma* = {gamma_star}")]
    TailIndexMismatch { law: f64, gamma_star: f64 },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("grid too coarse: interpolation error {error:e} exceeds {tolerance:e}")]
    GridTooCoarse { error: f64, tolerance: f64 },
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by the inputs rather than by a run.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Domain { .. }
                | Error::NoInteriorMinimizer
                | Error::TailIndexMismatch { .. }
                | Error::Unsupported(_)
        )
    }
}
