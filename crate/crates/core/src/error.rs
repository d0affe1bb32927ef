use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("cannot take the exterior derivative of a top-degree form")]
    DegreeOverflow,
    #[error("cannot contract a 0-form")]
    DegreeUnderflow,
    #[error("unsupported quadrature request: {0}")]
    Capability(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("volume form coefficient is not strictly positive at the sampled point ({0})")]
    NonPositiveVolume(f64),
    #[error("flow blow-up: state became non-finite at t = {time}{}", node.map(|i| format!(" (node {i})")).unwrap_or_default())]
    BlowUp { time: f64, node: Option<usize> },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("ensemble too small: got {got}, need at least {need}")]
    InsufficientEnsemble { got: usize, need: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unknown corpus name: {0}")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
