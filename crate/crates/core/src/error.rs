use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot size architecture: {0}")]
    Sizing(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// Training diverged; carries the accepted objective values up to the failure.
    #[error("training failed: {message}")]
    Training { message: String, trace: Vec<f64> },

    #[error("slope fit failed: {0}")]
    Fit(String),

    #[error("no cone-feasible parameter pair found in {0} draws")]
    NoFeasiblePair(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by numerics or training rather than by the caller.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::Training { .. }
                | Error::Fit(_)
                | Error::NoFeasiblePair(_)
        )
    }
}
