use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image {axis} ({size}) is not divisible by grid size {grid}")]
    NotDivisible {
        axis: &'static str,
        size: usize,
        grid: usize,
    },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid permutation of {0} cells")]
    InvalidPermutation(usize),
    #[error("cannot parse augmentation descriptor `{0}`")]
    BadDescriptor(String),
    #[error("input dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty batch")]
    EmptyBatch,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("degenerate input: all values are identical")]
    Degenerate,
    #[error("zero variance in loss values")]
    ZeroVariance,
    #[error("uniform_optimal mode requires a constant smoothing strength")]
    MissingConstant,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "attempt budget of {budget} exhausted: collected {id_count} ID and {ood_count} OOD of {target}"
    )]
    BudgetExhausted {
        budget: usize,
        target: usize,
        id_count: usize,
        ood_count: usize,
    },
    #[error("no samples selected for an entire epoch ({epoch})")]
    EmptyEpoch { epoch: usize },
    #[error("config error at line {line}: key `{key}`: {msg}")]
    Config {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
