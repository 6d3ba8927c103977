use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        reason: &'static str,
    },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    RiccatiNotConverged { iterations: usize, residual: f64 },

    #[error("closed loop is not stable (max real eigenvalue part {max_real:e})")]
    Unstabilized { max_real: f64 },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { field, reason }
    }
}
