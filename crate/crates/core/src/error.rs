use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {what}: {detail}")]
    NonFinite { what: &'static str, detail: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("architecture mismatch: {0}")]
    Architecture(String),

    #[error("unknown berthing case {0} (expected 1, 2 or 3)")]
    UnknownCase(u32),

    #[error("empty buffer: {0}")]
    EmptyBuffer(&'static str),

    #[error("invalid value for {key}: {msg}")]
    InvalidParameter { key: String, msg: String },

    #[error("config error on line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("missing runs: {0}")]
    MissingRuns(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite {
            what,
            detail: format!("component {i} is {}", values[i]),
        }),
    }
}
