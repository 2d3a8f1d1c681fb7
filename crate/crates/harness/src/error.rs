use serde_json::{json, Value};
use thiserror::Error;
use ymlab::YmError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] YmError),
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Parse(_) => "parse",
            HarnessError::Config(_) => "config",
            HarnessError::Io(_) => "io",
            HarnessError::Checkpoint(_) => "checkpoint",
            HarnessError::Core(YmError::InvalidInput(_)) => "invalid-input",
            HarnessError::Core(YmError::Convergence { .. }) => "convergence",
            HarnessError::Core(YmError::BlowUp { .. }) => "blow-up",
            HarnessError::Core(YmError::StepRejected { .. }) => "step-rejected",
        }
    }

    /// Structured record written as `error.json`.
    pub fn record(&self) -> Value {
        let details = match self {
            HarnessError::Config(v) => json!(v),
            HarnessError::Core(YmError::Convergence { history, .. }) => json!({ "history": history }),
            _ => Value::Null,
        };
        json!({ "status": "error", "kind": self.kind(), "message": self.to_string(), "details": details })
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
