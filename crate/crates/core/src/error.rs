use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported size: {0}")]
    Size(String),

    #[error("non-finite value at index {index}: {context}")]
    NonFinite { index: usize, context: String },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate coordinate range on axis {axis}: min == max == {value}")]
    DegenerateRange { axis: usize, value: f64 },

    #[error(
        "sampling violation: propagation distance {z} m exceeds the alias-free limit {z_max} m"
    )]
    SamplingViolation { z: f64, z_max: f64 },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn non_finite(index: usize, context: impl Into<String>) -> Self {
        Error::NonFinite {
            index,
            context: context.into(),
        }
    }
}

/// Returns the first index holding a NaN or infinity.
pub(crate) fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}
