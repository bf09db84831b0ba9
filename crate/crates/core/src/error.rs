//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no critical point bracketed for m = {mass}, L = {sites}")]
    NoBracket { mass: f64, sites: usize },

    #[error("operator expectation has imaginary part {0:e}; not Hermitian")]
    NonHermitian(f64),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("ill-conditioned shift: {0}")]
    IllConditioned(String),

    #[error("singular calibration matrix")]
    SingularCalibration,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no real root of the fitted polynomial in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("optimizer did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        trajectory: Vec<(f64, f64, f64)>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by a bad configuration rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidLattice(_) | Error::InvalidParameter(_) | Error::Json(_)
        )
    }
}
