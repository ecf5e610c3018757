use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("problem size {size} exceeds configured maximum {max}")]
    SizeOverflow { size: u128, max: u128 },

    #[error("unknown distribution kind `{0}`")]
    UnknownDistribution(String),

    #[error("driving profile violates the decay bound at site {site:?}: |W| = {value:e} > {bound:e}")]
    ProfileViolation {
        site: Vec<i64>,
        value: f64,
        bound: f64,
    },

    #[error("eigensolver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("near-singular shift: {0}")]
    NearSingular(String),

    #[error("matrix is not unitary within tolerance (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("residual {residual:e} exceeds tolerance {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for failures of a numerical kernel, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::NearSingular(_)
                | Error::NotUnitary { .. }
                | Error::ResidualTooLarge { .. }
                | Error::InsufficientData(_)
        )
    }
}
