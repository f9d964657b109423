use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation accepts.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {what} (expected {expected}, got {got})")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{solver} did not converge within {sweeps} sweeps (last residual {residual:e})")]
    Divergence {
        solver: &'static str,
        sweeps: usize,
        residual: f64,
    },

    #[error("non-finite value at ascent step {step}")]
    Numerical { step: usize },

    #[error("degenerate density: point {point} has zero likelihood under every component")]
    DegenerateDensity { point: usize },

    #[error("MCEM iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for failures caused by floating point blow-ups rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical { .. }
            | Error::DegenerateDensity { .. }
            | Error::Divergence { .. } => true,
            Error::Iteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
