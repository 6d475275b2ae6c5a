use thiserror::Error;

#[derive(Debug, Error)]
pub enum VsmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("observables {first} and {second} do not commute")]
    Commutation { first: usize, second: usize },

    #[error("observable set is not independent: expected projector rank {expected}, found ranks {ranks:?}")]
    Dependence { expected: usize, ranks: Vec<usize> },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("{what} needs {needed} qubits, limit is {limit}")]
    Resource {
        what: &'static str,
        needed: usize,
        limit: usize,
    },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = VsmError> = std::result::Result<T, E>;
