use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("invalid rectangle: lower bound exceeds upper bound on axis {0}")]
    InvertedRectangle(usize),

    #[error("invalid domain: y_min must be strictly below y_max on axis {0}")]
    InvalidDomain(usize),

    #[error("rectangle is degenerate on axis {0} and cannot be split")]
    Degenerate(usize),

    #[error("point {x:?} lies outside the domain")]
    OutOfDomain { x: Vec<f64> },

    #[error("argument {0} outside the function's domain")]
    ArgumentOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cell budget exceeded: {requested} cells requested, budget is {budget}")]
    CellBudget { requested: u128, budget: usize },

    #[error("dataset has no records")]
    EmptyDataset,

    #[error("monotonicity violation between records {i} and {j}: x_{i} <= x_{j} but f decreases")]
    MonotonicityViolation { i: usize, j: usize },

    #[error("no cell has a finite upper value: the dataset dominates none of the cells")]
    NoFiniteCells,

    #[error("point {x:?} is not contained in any cell")]
    Uncovered { x: Vec<f64> },

    #[error("training diverged: non-finite loss at epoch {0}")]
    Diverged(usize),

    #[error("model file invalid: {0}")]
    InvalidModel(String),

    #[error("unsupported model version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
