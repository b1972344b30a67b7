use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("node {node} has degree zero and self-loops are disabled")]
    DegreeZero { node: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not symmetric (max |M - M^T| = {max_asymmetry:e})")]
    Symmetry { max_asymmetry: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("too few items: need at least {needed}, got {got}")]
    TooSmall { needed: usize, got: usize },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("degenerate input: row {node} has zero norm")]
    DegenerateInput { node: usize },

    #[error("design matrix is rank deficient (collinear regressors)")]
    Collinear,

    #[error("instrument has zero variance")]
    DegenerateInstrument,

    #[error("could not reach perturbation strength target {target} (achieved {achieved})")]
    Sampling { target: f64, achieved: f64 },

    #[error("embedding construction impossible: {0}")]
    Constructibility(String),

    #[error("non-finite loss at epoch {epoch} (parameter norms {norms:?})")]
    NonFinite { epoch: usize, norms: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::DegreeZero { .. } => "degree_zero",
            Error::Shape(_) => "shape",
            Error::Parameter(_) => "parameter",
            Error::Symmetry { .. } => "symmetry",
            Error::Numerical(_) => "numerical",
            Error::Domain(_) => "domain",
            Error::Argument(_) => "argument",
            Error::TooSmall { .. } => "too_small",
            Error::DegenerateSplit(_) => "degenerate_split",
            Error::DegenerateInput { .. } => "degenerate_input",
            Error::Collinear => "collinear",
            Error::DegenerateInstrument => "degenerate_instrument",
            Error::Sampling { .. } => "sampling",
            Error::Constructibility(_) => "constructibility",
            Error::NonFinite { .. } => "non_finite",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
