//! Detection-efficiency characterization of free-running single-photon
//! avalanche detectors from time-tagged trigger/click streams.
//!
//! Three routes to the intrinsic efficiency η are provided:
//!
//! * [`models::invert_original`]: closed-form inversion of a rate model
//!   with holdoff, overcycling and dark counts;
//! * [`models::invert_amended`]: numeric inversion of the same model with
//!   dark-count suppression reduced to the time not blocked by signal
//!   holdoff;
//! * [`analysis::eta_expost`]: discard every trigger shadowed by an earlier
//!   click and read the click probability directly.
//!
//! [`sim`] generates synthetic streams with known ground truth, including
//! afterpulse-bearing dark counts and rate-dependent efficiency.

pub mod analysis;
pub mod error;
pub mod flux;
pub mod models;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    Channel, DetectorParams, EfficiencyEstimate, Method, PulseTrainParams, TagStream, TimeTag,
};
