use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty buffer")]
    EmptyBuffer,

    #[error("index {index} out of range for buffer of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("buffer length {len} is smaller than batch size {batch_size}")]
    BufferTooSmall { len: usize, batch_size: usize },

    #[error("zero total priority mass")]
    ZeroMass,

    #[error("episode terminated")]
    EpisodeTerminated,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}
