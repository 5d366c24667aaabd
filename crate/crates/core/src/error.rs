use thiserror::Error;

use crate::solver::SolverTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter lies outside the domain where the step rules are defined.
    #[error("parameter domain: {0}")]
    ParameterDomain(String),

    /// Lipschitz estimation failed (power iteration or backtracking).
    #[error("lipschitz estimation failed: {message} (last gap {gap:e})")]
    Estimation { message: String, gap: f64 },

    /// A non-finite value appeared in an iterate. Carries the trace up to the
    /// last finite iteration.
    #[error("iterates diverged at iteration {iteration}")]
    Divergence {
        iteration: usize,
        trace: Box<SolverTrace>,
    },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}
