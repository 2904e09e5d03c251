use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("predictions missing for documents: {}", .0.join(", "))]
    MissingDocuments(Vec<String>),
    #[error("predictions for unknown documents: {}", .0.join(", "))]
    UnknownDocuments(Vec<String>),
    #[error("need at least 2 document lengths, got {0}")]
    TooFewDocuments(usize),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
