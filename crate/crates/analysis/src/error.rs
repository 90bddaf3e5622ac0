use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange { what: String, value: f64, lo: f64, hi: f64 },

    #[error("baseline is zero")]
    ZeroBaseline,

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("missing questionnaire item {0}")]
    MissingItem(u16),

    #[error("decomposition did not converge after {iterations} iterations (residual rms {residual_rms:.3e}, signal range {range:.3e})")]
    NonConvergence { iterations: usize, residual_rms: f64, range: f64 },

    #[error("item key: {0}")]
    ItemKey(String),

    #[error(transparent)]
    Core(#[from] slowbeat_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(what: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange { what: what.to_string(), value, lo, hi })
    }
}
