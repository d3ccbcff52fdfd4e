use thiserror::Error;

/// Failures raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("lag {lag} has no raw covariance pairs")]
    EmptyLag { lag: i64 },

    #[error("local fit has no support at {location}")]
    SingularFit { location: String },

    #[error("degenerate local-linear denominator at x = {x}")]
    DegenerateDenominator { x: f64 },

    #[error("imaginary residue {residue:e} exceeds tolerance")]
    ImagResidue { residue: f64 },

    #[error("Cholesky factorization of a {size}x{size} system failed after jitter escalation")]
    SolveFailure { size: usize },

    #[error("predicted curve for time {t} is not available")]
    MissingCurve { t: i64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("no candidate produced a finite holdout score")]
    NoFiniteScore,

    #[error("every cross-validation fold was degenerate")]
    AllFoldsDegenerate,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("domain error at line {line}: {message}")]
    Domain { line: usize, message: String },

    #[error("input contains no data")]
    EmptyData,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by malformed or unusable input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Domain { .. }
                | Error::EmptyData
                | Error::InsufficientData(_)
                | Error::EmptyLag { .. }
                | Error::Io(_)
        )
    }

    /// True for configuration problems detected before any computation.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_))
    }
}
