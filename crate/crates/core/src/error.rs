use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: max asymmetry {max_asym:e} exceeds tolerance {tol:e}")]
    NotSymmetric { max_asym: f64, tol: f64 },

    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigen-decomposition failed to converge for a {0}x{0} matrix")]
    ConvergenceFailure(usize),

    #[error("sampled matrix has numerical rank {rank} < requested width {requested}")]
    RankDeficientSample { rank: usize, requested: usize },

    #[error("alpha {alpha:e} is at or below the tolerance {tol:e}; the matrix is numerically PSD")]
    AlphaTooSmall { alpha: f64, tol: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("polynomial degree {degree} exceeds 2d = {max}")]
    DegreeTooHigh { degree: u32, max: u32 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// Whether this error comes from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceFailure(_) | Error::RankDeficientSample { .. }
        )
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonSquare { .. } => "non_square",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::EmptyMatrix => "empty_matrix",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::ConvergenceFailure(_) => "convergence_failure",
            Error::RankDeficientSample { .. } => "rank_deficient_sample",
            Error::AlphaTooSmall { .. } => "alpha_too_small",
            Error::InvalidParams(_) => "invalid_params",
            Error::DegreeTooHigh { .. } => "degree_too_high",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
