use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("insufficient {class} pool: need {needed} frames, have {available}")]
    InsufficientPool {
        class: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("subject {0} has {1} frames, expected 1 to 4")]
    SubjectFrames(String, usize),

    #[error("labels contain a single class; ROC analysis needs both")]
    SingleClass,

    #[error("degenerate variance in paired AUC comparison")]
    DegenerateVariance,

    #[error("non-finite {loss} loss at iteration {iteration}")]
    NonFiniteLoss { loss: String, iteration: usize },

    #[error("architecture mismatch: expected {expected}, checkpoint holds {found}")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("frame {frame} missing from seed {seed}")]
    MissingFrame { frame: String, seed: String },

    #[error("no baseline scores for DeLong comparison: {0}")]
    MissingBaseline(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
