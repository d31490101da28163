use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The observed rate cannot be produced by the model for any η in range.
    #[error("click rate inconsistent with model: {0}")]
    Saturation(String),

    #[error("observed click rate {n_click_hz} /s does not exceed dark rate {dark_rate_hz} /s")]
    SignalBelowBackground { n_click_hz: f64, dark_rate_hz: f64 },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate result: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Configuration(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
