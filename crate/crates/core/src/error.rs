use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular covariance matrix: {0}")]
    Singular(String),
    #[error("rank deficiency: {0}")]
    RankDeficient(String),
    #[error("non-finite objective: {0}")]
    NonFinite(String),
    #[error("too few replications: {0}")]
    TooFewReplications(String),
}

pub type Result<T> = std::result::Result<T, Error>;
