use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample at t={t} s is not after the previous sample at t={prev} s")]
    StreamOrder { t: f64, prev: f64 },

    #[error("non-finite sample at t={t} s")]
    NonFiniteSample { t: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("wrong channel kind: expected {expected}, found {found}")]
    WrongChannel { expected: String, found: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed frame: {0}")]
    Frame(String),

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn require(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: reason() })
    }
}
