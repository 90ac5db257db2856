use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("partition parse error at byte {pos}: {msg}")]
    PartitionParse { pos: usize, msg: String },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// A state failed a structural invariant (normalization, hermiticity, positivity, trace).
    #[error("state invariant violated: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Precondition on a coarsening relation did not hold.
    #[error("relation error: {0}")]
    Relation(String),

    #[error("state input {path}: {msg}")]
    StateInput { path: String, msg: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidState(_) => 3,
            _ => 2,
        }
    }
}
