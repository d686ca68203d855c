use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("smallness gate failed: {detail} (margins {margins:?})")]
    Gate { detail: String, margins: Vec<f64> },

    #[error("{context}: no convergence at node {node} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        context: String,
        node: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("fixed-point iteration stopped after {iterations} iterations (last increment {increment:e})")]
    MaxIterations { iterations: usize, increment: f64 },

    #[error("probe error: {0}")]
    Probe(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Attach a context label to a non-convergence error.
    pub fn annotate(self, label: &str) -> Self {
        match self {
            Error::NonConvergence {
                context,
                node,
                iterations,
                residual,
            } => Error::NonConvergence {
                context: format!("{label}: {context}"),
                node,
                iterations,
                residual,
            },
            other => other,
        }
    }

    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Config(_) => "config",
            Error::Gate { .. } => "gate",
            Error::NonConvergence { .. } => "non_convergence",
            Error::MaxIterations { .. } => "max_iterations",
            Error::Probe(_) => "probe",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
