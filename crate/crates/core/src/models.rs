//! Rate models for a free-running detector behind a pulsed source, and
//! their inversion to the intrinsic detection efficiency η.
//!
//! Both models predict the total click rate from the pulse rate `f`, the
//! single-pulse click probability `p0 = 1 - exp(-n_ph·η)`, the overcycling
//! factor `m` and the dark rate measured without signal. They differ only in
//! how dark counts preceding a signal detection are suppressed:
//!
//! * original: `exp(-N_dark·D)`
//! * amended:  `exp(-N_dark·D·(1 - p0/(1+m·p0)·f·D))`, i.e. darks can only
//!   occur while the detector is not already blocked by signal holdoff.
//!
//! The amended form is written here with the dimensionless `f·D` factor,
//! consistent with the dark term of both models. See
//! [`AMENDED_EXPONENT_AS_PRINTED`] for the published typesetting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DetectorParams, EfficiencyEstimate, Method, PulseTrainParams, PS_PER_S};

/// The amended suppression exponent as originally typeset, which reads
/// `1 - p0/(1+m·p0)·D` and mixes a pure number with a time. Kept for
/// traceability only; [`predict_rate_amended`] uses `f·D`.
pub const AMENDED_EXPONENT_AS_PRINTED: &str = "-N_dark*D*(1 - p0/(1+m*p0)*D)";

const BISECT_MAX_ITER: usize = 200;
const BISECT_ETA_WIDTH_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelInputs {
    pub detector: DetectorParams,
    pub pulses: PulseTrainParams,
    /// Observed total click rate.
    pub n_click_hz: f64,
    /// Observation time behind `n_click_hz`. Used only for the statistical
    /// uncertainty; `None` reports `u_eta = 0`.
    pub duration_s: Option<f64>,
}

impl ModelInputs {
    fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.pulses.validate()?;
        if !(self.n_click_hz.is_finite() && self.n_click_hz >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "click rate must be nonnegative, got {}",
                self.n_click_hz
            )));
        }
        if self.pulses.n_ph == 0.0 {
            return Err(Error::InvalidInput(
                "mean photon number must be positive to invert".into(),
            ));
        }
        if self.n_click_hz > self.pulses.rep_rate_hz + self.detector.dark_rate_hz {
            log::warn!(
                "click rate {} /s exceeds pulse rate plus dark rate",
                self.n_click_hz
            );
        }
        if self.n_click_hz <= self.detector.dark_rate_hz {
            return Err(Error::SignalBelowBackground {
                n_click_hz: self.n_click_hz,
                dark_rate_hz: self.detector.dark_rate_hz,
            });
        }
        Ok(())
    }
}

/// Poissonian probability that a pulse of mean `n_ph` photons produces a
/// click on an armed detector of efficiency `eta`.
pub fn click_prob_single_pulse(n_ph: f64, eta: f64) -> f64 {
    -(-n_ph * eta).exp_m1()
}

/// Inverse of [`click_prob_single_pulse`].
pub fn eta_from_click_prob(p_click: f64, n_ph: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p_click) {
        return Err(Error::InvalidInput(format!(
            "click probability must lie in [0, 1), got {p_click}"
        )));
    }
    if !(n_ph.is_finite() && n_ph > 0.0) {
        return Err(Error::InvalidInput(format!(
            "mean photon number must be positive, got {n_ph}"
        )));
    }
    Ok(-(-p_click).ln_1p() / n_ph)
}

/// Number of whole pulse intervals hidden inside one holdoff period.
///
/// `m = ceil(D·f) - 1`, floored at zero: a pulse arriving exactly at the end
/// of the holdoff is detectable.
pub fn overcycle_m(holdoff_ps: u64, rep_rate_hz: f64) -> u32 {
    // Integer-valued rep rates get exact arithmetic; D·f lands on integers
    // for common operating points (20 µs at 150 kHz) and must not round up.
    if rep_rate_hz.fract() == 0.0 && rep_rate_hz < 1e15 {
        let num = holdoff_ps as u128 * rep_rate_hz as u128;
        let den = 1_000_000_000_000u128;
        let ceil = num.div_ceil(den);
        return ceil.saturating_sub(1) as u32;
    }
    let df = holdoff_ps as f64 * rep_rate_hz / PS_PER_S;
    (df.ceil() - 1.0).max(0.0) as u32
}

/// Fraction `p0/(1+m·p0)` of pulses that produce a detection in the
/// dark-free steady state.
fn signal_fraction(p0: f64, m: u32) -> f64 {
    p0 / (1.0 + m as f64 * p0)
}

struct RateTerms {
    f: f64,
    d: f64,
    n_dark: f64,
    s: f64,
}

impl RateTerms {
    fn new(detector: &DetectorParams, pulses: &PulseTrainParams, eta: f64) -> Self {
        let m = overcycle_m(detector.holdoff_ps, pulses.rep_rate_hz);
        let p0 = click_prob_single_pulse(pulses.n_ph, eta);
        RateTerms {
            f: pulses.rep_rate_hz,
            d: detector.holdoff_s(),
            n_dark: detector.dark_rate_hz,
            s: signal_fraction(p0, m),
        }
    }

    fn blocked_fraction(&self) -> f64 {
        self.s * self.f * self.d
    }

    fn dark_term(&self) -> f64 {
        self.n_dark * (1.0 - self.blocked_fraction())
    }
}

/// Click rate predicted by the original model.
pub fn predict_rate_original(
    detector: &DetectorParams,
    pulses: &PulseTrainParams,
    eta: f64,
) -> f64 {
    let r = RateTerms::new(detector, pulses, eta);
    r.f * r.s * (-r.n_dark * r.d).exp() + r.dark_term()
}

/// Click rate predicted by the amended model.
pub fn predict_rate_amended(detector: &DetectorParams, pulses: &PulseTrainParams, eta: f64) -> f64 {
    let r = RateTerms::new(detector, pulses, eta);
    r.f * r.s * (-r.n_dark * r.d * (1.0 - r.blocked_fraction())).exp() + r.dark_term()
}

fn closed_form_eta(inputs: &ModelInputs, n_click_hz: f64) -> Result<f64> {
    let det = &inputs.detector;
    let f = inputs.pulses.rep_rate_hz;
    let d = det.holdoff_s();
    let n_dark = det.dark_rate_hz;
    let m = overcycle_m(det.holdoff_ps, f) as f64;

    let denom = (-n_dark * d).exp() - n_dark * d;
    if denom <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "dark rate {n_dark} /s too high for holdoff {d} s"
        )));
    }
    let a = ((n_click_hz - n_dark) / f) / denom;
    let blocked = 1.0 - m * a;
    if blocked <= 0.0 {
        return Err(Error::Saturation(format!(
            "1 - m·a = {blocked} is not positive"
        )));
    }
    let p0 = a / blocked;
    if p0 >= 1.0 {
        return Err(Error::Saturation(format!(
            "implied single-pulse click probability {p0} >= 1"
        )));
    }
    eta_from_click_prob(p0, inputs.pulses.n_ph)
}

fn amended_eta(inputs: &ModelInputs, n_click_hz: f64) -> Result<f64> {
    let det = &inputs.detector;
    let pulses = &inputs.pulses;
    let eta_hi = (50.0 / pulses.n_ph).min(1.0);
    let residual = |eta: f64| predict_rate_amended(det, pulses, eta) - n_click_hz;

    let mut lo = 0.0;
    let mut hi = eta_hi;
    let r_lo = residual(lo);
    let r_hi = residual(hi);
    if r_lo > 0.0 {
        return Err(Error::SignalBelowBackground {
            n_click_hz,
            dark_rate_hz: det.dark_rate_hz,
        });
    }
    if r_hi < 0.0 {
        return Err(Error::Saturation(format!(
            "rate {n_click_hz} /s exceeds the model maximum {} /s",
            r_hi + n_click_hz
        )));
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        // Narrowing the bracket rather than stopping on a small rate residual
        // keeps η accurate where the rate is nearly flat in η.
        if r == 0.0 || hi - lo < BISECT_ETA_WIDTH_TOL {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NumericFailure(format!(
        "bisection did not converge in {BISECT_MAX_ITER} iterations (bracket [{lo}, {hi}])"
    )))
}

/// One binomial standard deviation of the observed click rate.
fn click_rate_sigma(inputs: &ModelInputs, duration_s: f64) -> f64 {
    let f = inputs.pulses.rep_rate_hz;
    let p = (inputs.n_click_hz / f).clamp(0.0, 1.0);
    (f * duration_s * p * (1.0 - p)).sqrt() / duration_s
}

/// Propagates the click-rate sigma through `solve` by a symmetric finite
/// difference, falling back to a one-sided difference near saturation.
fn estimate_with_uncertainty(
    inputs: &ModelInputs,
    method: Method,
    solve: impl Fn(&ModelInputs, f64) -> Result<f64>,
) -> Result<EfficiencyEstimate> {
    inputs.validate()?;
    let eta = solve(inputs, inputs.n_click_hz)?;
    let (u_eta, n_events_used) = match inputs.duration_s {
        Some(t) if t > 0.0 => {
            let sigma = click_rate_sigma(inputs, t);
            let up = solve(inputs, inputs.n_click_hz + sigma).ok();
            let down = solve(inputs, inputs.n_click_hz - sigma).ok();
            let u = match (up, down) {
                (Some(u), Some(d)) => 0.5 * (u - d).abs(),
                (Some(u), None) => (u - eta).abs(),
                (None, Some(d)) => (eta - d).abs(),
                (None, None) => f64::NAN,
            };
            (u, (inputs.n_click_hz * t).round() as u64)
        }
        _ => (0.0, 0),
    };
    Ok(EfficiencyEstimate {
        eta,
        u_eta,
        method,
        n_events_used,
    })
}

/// Closed-form inversion of the original model.
pub fn invert_original(inputs: &ModelInputs) -> Result<EfficiencyEstimate> {
    estimate_with_uncertainty(inputs, Method::Original, closed_form_eta)
}

/// Numeric (bisection) inversion of the amended model.
pub fn invert_amended(inputs: &ModelInputs) -> Result<EfficiencyEstimate> {
    estimate_with_uncertainty(inputs, Method::Amended, amended_eta)
}
