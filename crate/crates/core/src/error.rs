use thiserror::Error;

/// Errors produced by ingestion, estimation, optimization, and backtesting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd {
        min_eigenvalue: f64,
        tolerance: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("optimizer did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Best feasible iterate found before giving up.
        best_weights: Vec<f64>,
    },

    #[error("insufficient history: first feasible rebalance date is {first_feasible}, but {reason}")]
    InsufficientHistory {
        first_feasible: String,
        reason: String,
    },

    #[error("solver failed at rebalance date {date}: {source}")]
    SolverAtDate {
        date: String,
        #[source]
        source: Box<Error>,
    },

    #[error("refused: {0}")]
    Refused(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
