use thiserror::Error;

/// Errors raised by the laboratory's operators and integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum YmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("blow-up in {what} at {time:.6e}: {detail}")]
    BlowUp {
        what: &'static str,
        time: f64,
        detail: String,
    },

    #[error("step rejected in {what}: {detail}")]
    StepRejected { what: &'static str, detail: String },
}

pub type Result<T> = std::result::Result<T, YmError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(YmError::InvalidInput(msg.into()))
}
