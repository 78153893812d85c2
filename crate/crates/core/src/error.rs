use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("action index out of range: {0}")]
    ActionIndex(String),

    #[error("curriculum stage {0} out of range 1..=4")]
    Stage(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("masked action chosen: {0}")]
    MaskedChoice(String),

    #[error("all actions of head `{0}` are masked")]
    AllMasked(&'static str),

    #[error("non-finite loss: {0}")]
    NonFinite(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
