use std::path::PathBuf;

use crate::graph::{Edge, ExternalId};
use crate::actions::ActionId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("line {line}: user {user} is not a node of the social graph")]
    UnknownUser { line: usize, user: ExternalId },

    #[error("unknown node id {0}")]
    UnknownNode(ExternalId),

    #[error("action {0} does not occur in the action log")]
    UnknownAction(ActionId),

    #[error("explicit credit table has no entry for edge {edge} in action {action}")]
    MissingCredit { edge: Edge, action: ActionId },

    #[error("direct credit {value} on edge {edge} in action {action} is outside [0, 1]")]
    CreditOutOfRange {
        edge: Edge,
        action: ActionId,
        value: f64,
    },

    #[error("direct credits of action {0} have not been assigned")]
    Uncredited(ActionId),

    #[error("node {0} performed no action")]
    NoActions(ExternalId),

    #[error("{what}: size {size} exceeds enumeration limit {limit}")]
    GuardExceeded {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("fractional solution cannot be decomposed into independent sets: {0}")]
    Decomposition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
