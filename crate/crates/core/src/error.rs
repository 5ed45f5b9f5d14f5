use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = CoreError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("no interactions survive the {k}-core filter")]
    EmptyAfterFilter { k: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bad data: {0}")]
    Data(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("cannot sample a negative item for user {user}: it interacted with every item")]
    UnsampleableNegative { user: usize },
    #[error("training diverged at epoch {epoch}, batch {batch}: {reason}")]
    Diverged {
        epoch: usize,
        batch: usize,
        reason: String,
    },
}
