use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum UcipError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("exact mode supports at most {max} hidden units, got {got}; use the mean-field path")]
    Capacity { got: usize, max: usize },

    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDivergence {
        epoch: usize,
        detail: String,
        loss_trace: Vec<f64>,
    },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, UcipError>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(UcipError::Argument(msg.into()))
}
