use thiserror::Error;

/// Errors surfaced by model construction, training, and the experiment harness.
#[derive(Debug, Error)]
pub enum CocycleError {
    #[error("non-finite value in parameter block `{block}`")]
    NonFiniteParam { block: String },

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGrad { block: String },

    #[error("loss evaluated to a non-finite value ({context})")]
    NonFiniteLoss { context: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training aborted at epoch {epoch}: {reason}")]
    TrainingFailed {
        epoch: usize,
        reason: String,
        trace: Vec<f64>,
    },

    #[error("all candidate architectures failed cross-validation")]
    AllArchitecturesFailed,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CocycleError>;
