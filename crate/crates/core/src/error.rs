use std::path::PathBuf;

use thiserror::Error;

use crate::optimizer::KRange;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("jacobian singular at D = {d} m (|D| must be at least {guard} m)")]
    Singular { d: f64, guard: f64 },

    #[error("insufficient excitation: {used} samples survive filtering, {required} required")]
    InsufficientExcitation { used: usize, required: usize },

    #[error("no stiffness in the sweep keeps D within {tolerance} m of {d_star} m ({tried} values tried)")]
    EmptyAcceptance {
        d_star: f64,
        tolerance: f64,
        tried: usize,
        sweep: Vec<(f64, f64)>,
    },

    #[error("stiffness ranges have no common intersection: {}", format_ranges(.ranges))]
    EmptyIntersection { ranges: Vec<KRange> },

    #[error("window of {got} states is shorter than the model window {need}")]
    WindowTooShort { got: usize, need: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite residual at initial point")]
    NonFinite,

    #[error("dataset is not free space: sample {index} carries a nonzero incision force")]
    NotFreeSpace { index: usize },

    #[error("missing column `{0}` in dataset")]
    MissingColumn(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_ranges(ranges: &[KRange]) -> String {
    ranges
        .iter()
        .map(|r| format!("[{}, {}]", r.lower, r.upper))
        .collect::<Vec<_>>()
        .join(", ")
}
