use thiserror::Error;

/// Errors shared by every analysis module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: need at least {required}, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("invalid parameter {name}={value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("length mismatch: x has {x} values, y has {y}")]
    LengthMismatch { x: usize, y: usize },

    #[error("csv row {line}: {reason}")]
    CsvRow { line: u64, reason: String },

    #[error("required column {0:?} not found in header")]
    MissingColumn(String),

    #[error("operation requires normalized returns")]
    NotNormalized,

    #[error("fewer than {required} usable scales in fit range for q={q}")]
    UnusableFitRange { q: f64, required: usize },

    #[error("no q value with usable scaling in the fit range")]
    NoUsableScaling,

    #[error("time {t} is not strictly on the required side of t_c={t_c}")]
    TimeOutsidePhase { t: i64, t_c: i64 },

    #[error("no fit start converged")]
    NoConvergedStart,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
