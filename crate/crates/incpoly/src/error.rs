//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("no separating circle: {0}")]
    NoSeparatingCircle(String),
    #[error("exact Fekete search needs {needed:.3e} tuples, budget is {budget:.3e}")]
    BudgetExceeded { needed: f64, budget: f64 },
    #[error("set is polar, no Green function is available")]
    PolarInput,
    #[error("set is not polar (capacity {0:.4e})")]
    NonPolarInput(f64),
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("ill-conditioned basis: {0}")]
    IllConditioned(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureUnconverged(String),
    #[error("horizon too small: {0}")]
    HorizonTooSmall(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("parameter infeasible: {0}")]
    ParameterInfeasible(String),
    #[error("no feasible tau up to the sweep cap {cap}")]
    NoFeasibleTau { cap: f64 },
    #[error("block {block} violates constraint ({which}): {detail}")]
    ConstraintViolation {
        block: usize,
        which: char,
        detail: String,
    },
    #[error("linear program: {0}")]
    Lp(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing column: {0}")]
    MissingColumn(String),
    #[error("input error at {pointer}: {message}")]
    Input { pointer: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
