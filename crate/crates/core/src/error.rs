use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("cell index {index} out of range for {n_cells} cells")]
    CellIndex { index: usize, n_cells: usize },

    #[error("empty search interval: lower bound {lo} exceeds upper bound {hi}")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("unknown scheme `{0}` (expected conoma-opt, conoma-fixed, noma-opt or noma-fixed)")]
    UnknownScheme(String),

    #[error("{0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
