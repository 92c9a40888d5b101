use thiserror::Error;

/// Errors produced by the estimators and their building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(&'static str),

    #[error("degenerate variance: sample standard deviation is zero")]
    DegenerateVariance,

    #[error("degenerate covariate: pre-period values are constant")]
    DegenerateCovariate,

    #[error("zero residual: post-period values are an exact linear function of the pre-period")]
    ZeroResidual,

    #[error("division by zero: control mean is zero")]
    DivisionByZero,

    #[error("refused size: {nodes} nodes exceeds the materialization cap of {max}")]
    RefusedSize { nodes: usize, max: usize },

    #[error("numerical failure at iteration {iteration}: non-finite draw of {parameter}")]
    NumericalFailure {
        iteration: usize,
        parameter: &'static str,
    },
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InvalidInput(_) => "invalid_input",
            Error::DegenerateVariance => "degenerate_variance",
            Error::DegenerateCovariate => "degenerate_covariate",
            Error::ZeroResidual => "zero_residual",
            Error::DivisionByZero => "division_by_zero",
            Error::RefusedSize { .. } => "refused_size",
            Error::NumericalFailure { .. } => "numerical_failure",
        }
    }

    /// True for failures caused by the shape of the data rather than by a
    /// caller mistake or a numerical breakdown.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InsufficientData { .. }
                | Error::DegenerateVariance
                | Error::DegenerateCovariate
                | Error::ZeroResidual
                | Error::DivisionByZero
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
