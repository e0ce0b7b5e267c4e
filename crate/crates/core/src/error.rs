use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The design carries no information at a quadrature node with positive weight.
    #[error("degenerate design: Fisher information vanishes at theta = {theta}")]
    DegenerateDesign { theta: f64 },

    /// Every candidate item has zero information almost everywhere under the weight.
    #[error("degenerate candidate pool: {0}")]
    DegeneratePool(String),

    #[error("root not bracketed for {what} on [{lo}, {hi}]")]
    BracketNotFound { what: String, lo: f64, hi: f64 },

    #[error("{what}: condition integral is not monotone on [{lo}, {hi}] ({detail})")]
    NotMonotone {
        what: String,
        lo: f64,
        hi: f64,
        detail: String,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Validation errors are caller mistakes; everything numeric is a solver failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Json(_))
    }
}
