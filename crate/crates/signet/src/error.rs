//! Crate-wide error type.

use crate::gateway::Capability;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A malformed corpus record under the `fail` policy.
    #[error("line {line}: invalid field `{field}`: {message}")]
    CorpusParse {
        line: usize,
        field: String,
        message: String,
    },

    /// Invalid run configuration; names the offending field.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Transport failure that survived the retry budget.
    #[error("{capability} backend failed after {attempts} attempt(s): {message}")]
    Backend {
        capability: Capability,
        attempts: u32,
        message: String,
    },

    /// A replay-mode request whose digest is not in the fixture.
    #[error("{capability} replay miss for request digest {digest}")]
    Determinism {
        capability: Capability,
        digest: String,
    },

    /// A response body that does not satisfy the wire contract.
    #[error("{capability} protocol violation: {message}")]
    Protocol {
        capability: Capability,
        message: String,
    },

    /// A per-document failure, wrapped so callers know which item broke.
    #[error("document {doc_id} failed in {stage}: {source}")]
    Pipeline {
        doc_id: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn for_doc(self, doc_id: impl Into<String>, stage: &'static str) -> Self {
        Error::Pipeline {
            doc_id: doc_id.into(),
            stage,
            source: Box::new(self),
        }
    }
}
