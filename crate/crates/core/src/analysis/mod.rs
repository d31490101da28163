//! Single-pass analyses over time-tagged trigger/click streams.
//!
//! Everything here is driven by [`TriggerValidator`], a left fold that
//! classifies each tag. Callers that cannot hold a whole stream in memory
//! (long simulations) can drive the fold themselves.

mod darkcounts;
mod intervals;
mod rates;
mod validation;

pub use darkcounts::{
    dark_histogram, surplus_darkcount, DarkCountHistogram, BASELINE_BINS, DEFAULT_BIN_WIDTH_PS,
};
pub use intervals::{mean_prev_event_interval, IntervalAccumulator, IntervalStats};
pub use rates::{measured_rates, MeasuredRates};
pub use validation::{
    eta_expost, eta_expost_from_report, validate_tags, validate_triggers, Classified,
    TriggerValidator, ValidationReport,
};
