use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid training configuration or architecture.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Operand dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Bad user input (empty samples, out-of-range levels, bad bounds, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Non-finite gradient entries while updating a layer.
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    /// Non-finite objective during critic training.
    #[error("non-finite objective at epoch {epoch}")]
    NonFiniteObjective { epoch: usize },

    /// A bootstrap draw failed; wraps the underlying error.
    #[error("bootstrap draw {index} failed: {source}")]
    Draw {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// The exact transport solver refused a problem above its cost-matrix budget.
    #[error("transport problem with {entries} cost entries exceeds budget of {budget}")]
    Capacity { entries: usize, budget: usize },
}

impl Error {
    /// True for numeric and capacity failures, false for input/config/shape problems.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonFiniteGradient { .. }
            | Error::NonFiniteObjective { .. }
            | Error::Capacity { .. } => true,
            Error::Draw { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
