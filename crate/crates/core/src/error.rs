use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration within the singularity floor of the collision set{}", index_suffix(*.index))]
    SingularConfiguration { index: Option<usize> },
    #[error("direction lies on the collision set")]
    SingularDirection,
    #[error("assumption {assumption} violated: {detail}")]
    AssumptionViolation { assumption: String, detail: String },
    #[error("argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("boundary mismatch: {0}")]
    BoundaryMismatch(String),
    #[error("degenerate time grid at sample {0}")]
    DegenerateGrid(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("maximum iterations reached ({0})")]
    MaxIterations(usize),
    #[error("line search failed at iteration {0}")]
    LineSearchFailure(usize),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("direction is not a central configuration (tangential gradient {0:e})")]
    NotCentralConfiguration(f64),
    #[error("fit window too short: {0}")]
    WindowTooShort(String),
    #[error("fitted exponent {fitted} departs from the expected {expected}")]
    ExponentMismatch { fitted: f64, expected: f64 },
    #[error("potential blows up without a limit configuration near t = {t}")]
    AmbiguousEvent { t: f64 },
    #[error("no central configurations found")]
    EmptyCentralSet,
    #[error("quadrature did not reach tolerance: {0}")]
    QuadratureFailure(String),
    #[error("displaced path crosses the collision set")]
    PathThroughSingularity,
    #[error("singular set is not a finite union of linear subspaces")]
    NotSubspaceArrangement,
    #[error("configuration is not on the collision set (distance {0:e})")]
    NotOnDelta(f64),
    #[error("unknown {registry} entry `{name}`")]
    UnknownName { registry: &'static str, name: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn index_suffix(index: Option<usize>) -> String {
    match index {
        Some(i) => format!(" (sample {i})"),
        None => String::new(),
    }
}

impl Error {
    pub fn singular() -> Self {
        Error::SingularConfiguration { index: None }
    }

    pub fn violation(assumption: &str, detail: impl Into<String>) -> Self {
        Error::AssumptionViolation {
            assumption: assumption.to_string(),
            detail: detail.into(),
        }
    }

    /// Attach a sample index to a singular-configuration error.
    pub fn at_index(self, j: usize) -> Self {
        match self {
            Error::SingularConfiguration { .. } => Error::SingularConfiguration { index: Some(j) },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
