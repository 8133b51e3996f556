use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate privacy parameters: p ({p}) must exceed q ({q})")]
    DegenerateParams { p: f64, q: f64 },

    #[error("item {item} does not fit a domain of size {domain}")]
    DomainOverflow { item: u64, domain: u64 },

    #[error("index {index} out of bounds for order {order}")]
    IndexOutOfBounds { index: u64, order: u64 },

    #[error("row 0 of the Hadamard matrix is reserved")]
    ReservedRow,

    #[error("output space of {size} exceeds the enumeration limit of {limit}")]
    EnumerationLimit { size: u64, limit: u64 },

    #[error("corrupt report: {0}")]
    CorruptReport(String),

    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("report indices must differ (both are {0})")]
    EqualIndices(u64),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("top-k sets do not overlap")]
    NoOverlap,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
