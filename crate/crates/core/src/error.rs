use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("escalated warning: {0}")]
    Escalated(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidArgument(msg.into())
}

/// Non-fatal numerical diagnostics attached to a computed value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NumericWarning {
    /// Mass beyond the truncation radius is estimated to exceed the tolerance.
    TailTruncation { estimate: f64, tol: f64 },
    /// Ascent made less than `tol` relative progress for `steps` consecutive iterations.
    Stagnation { steps: usize, tol: f64 },
    /// Fewer Knapp shells fit inside the truncated plane than requested.
    ShellCoverage { covered: usize, requested: usize },
    /// A regression was run on too few points to be trusted.
    IllConditionedFit { points: usize },
    /// Oscillations are not resolved by the quadrature.
    Undersampled { detail: String },
}

impl std::fmt::Display for NumericWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NumericWarning::TailTruncation { estimate, tol } => {
                write!(f, "tail estimate {estimate:.3e} exceeds tolerance {tol:.1e}")
            }
            NumericWarning::Stagnation { steps, tol } => {
                write!(f, "relative gain below {tol:.1e} for {steps} steps")
            }
            NumericWarning::ShellCoverage { covered, requested } => {
                write!(f, "only {covered} of {requested} shells covered")
            }
            NumericWarning::IllConditionedFit { points } => {
                write!(f, "slope fit on only {points} points")
            }
            NumericWarning::Undersampled { detail } => write!(f, "undersampled: {detail}"),
        }
    }
}

/// A value together with the warnings raised while computing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: Vec<NumericWarning>,
}

impl<T> Checked<T> {
    pub fn clean(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }

    pub fn with(value: T, warnings: Vec<NumericWarning>) -> Self {
        Self { value, warnings }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Checked<U> {
        Checked {
            value: f(self.value),
            warnings: self.warnings,
        }
    }
}
