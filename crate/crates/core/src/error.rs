use thiserror::Error;

/// Errors raised by the library. The CLI maps [`RecourseError::is_data_error`]
/// to a distinct exit code.
#[derive(Debug, Error)]
pub enum RecourseError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("dimension {dim} too large for exhaustive search (limit {limit})")]
    DimensionTooLarge { dim: usize, limit: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("shape mismatch at layer {layer}: {detail}")]
    LayerShape { layer: usize, detail: String },
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RecourseError {
    /// True for failures caused by input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            RecourseError::Data(_)
                | RecourseError::Csv(_)
                | RecourseError::SingleClass
                | RecourseError::NonFinite(_)
                | RecourseError::DegenerateDesign(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, RecourseError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(RecourseError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
