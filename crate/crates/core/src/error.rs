use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// An iterative solver ran out of budget. The last iterate is kept (in
    /// `f64`) so callers can inspect or reuse it.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure {
        iterations: usize,
        residual: f64,
        last_iterate: Option<Array2<f64>>,
    },

    /// A mean of the field failed; names the class and exponent.
    #[error("mean field entry (class {class}, h = {h}) failed: {source}")]
    MeanField {
        class: usize,
        h: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }

    /// True for failures caused by the numbers rather than by the shape of the
    /// input (used to pick exit codes and to decide whether a fold is reported
    /// as a numerical problem).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalFailure(_) | Error::ConvergenceFailure { .. } => true,
            Error::MeanField { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
