use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed base facts: {0}")]
    MalformedFacts(String),
    #[error("malformed knowledge graph: {0}")]
    MalformedGraph(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("optimization diverged: {0}")]
    Diverged(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}
