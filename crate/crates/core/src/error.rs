use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unclassifiable tail: {0}")]
    Unclassifiable(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("axis regularity violated: {0}")]
    AxisRegularity(String),
    #[error("solver stalled at t = {t}: {reason}")]
    Stall { t: f64, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("structural violation: {0}")]
    Structural(String),
    #[error("parity violation: {0}")]
    Parity(String),
    #[error("operator assembly: {0}")]
    Assembly(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("glue failed on [{lo}, {hi}]: {reason}")]
    Glue { lo: f64, hi: f64, reason: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("perturbation too large: {0}")]
    PerturbationSize(String),
    #[error("degenerate metric: {0}")]
    Degenerate(String),
    #[error("cap construction infeasible: {0}")]
    Cap(String),
    #[error("bracket: {0}")]
    Bracket(String),
    #[error("format: {0}")]
    Format(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
