use crate::analysis::{DarkCountHistogram, BASELINE_BINS};
use crate::error::{Error, Result};

use super::SIM_STEP_PS;

/// Synthetic conditional dark-count histogram in simulation-step bins:
/// a flat level `baseline_rate_hz·Δt` plus an exponential afterpulse tail
/// `afterpulse_amp·exp(-(τ - D)/τ_ap)`, both starting at the holdoff.
pub fn synth_dark_model(
    baseline_rate_hz: f64,
    afterpulse_amp: f64,
    afterpulse_tau_ps: u64,
    holdoff_ps: u64,
    span_ps: u64,
) -> Result<DarkCountHistogram> {
    if !(baseline_rate_hz.is_finite() && baseline_rate_hz >= 0.0) {
        return Err(Error::Configuration(format!(
            "baseline rate must be nonnegative, got {baseline_rate_hz}"
        )));
    }
    if !(afterpulse_amp.is_finite() && afterpulse_amp >= 0.0) {
        return Err(Error::Configuration(format!(
            "afterpulse amplitude must be nonnegative, got {afterpulse_amp}"
        )));
    }
    if afterpulse_tau_ps == 0 || holdoff_ps == 0 {
        return Err(Error::Configuration(
            "afterpulse time constant and holdoff must be positive".into(),
        ));
    }
    let dt = SIM_STEP_PS;
    if !span_ps.is_multiple_of(dt) {
        return Err(Error::Configuration(format!(
            "span {span_ps} ps is not a multiple of {dt} ps"
        )));
    }
    if span_ps < holdoff_ps + BASELINE_BINS as u64 * dt {
        return Err(Error::Configuration(format!(
            "span {span_ps} ps must cover the holdoff plus {BASELINE_BINS} bins"
        )));
    }
    let flat = baseline_rate_hz * dt as f64 * 1e-12;
    if flat + afterpulse_amp > 1.0 {
        return Err(Error::Configuration(format!(
            "peak bin probability {} exceeds 1",
            flat + afterpulse_amp
        )));
    }
    let n_bins = (span_ps / dt) as usize;
    let tau_ap = afterpulse_tau_ps as f64;
    let probs = (0..n_bins as u64)
        .map(|i| {
            let tau = i * dt;
            if tau < holdoff_ps {
                0.0
            } else {
                flat + afterpulse_amp * (-((tau - holdoff_ps) as f64) / tau_ap).exp()
            }
        })
        .collect();
    DarkCountHistogram::from_probs(dt, probs, 0)
}

/// Afterpulse amplitude whose tail sums to `total_excess` over bins of
/// width `bin_ps`.
pub fn afterpulse_amp_for_excess(total_excess: f64, afterpulse_tau_ps: u64, bin_ps: u64) -> f64 {
    total_excess * -(-(bin_ps as f64) / afterpulse_tau_ps as f64).exp_m1()
}

/// Cumulative hazard of the per-step dark probabilities, used to draw the
/// waiting time to the next dark count in one step.
///
/// With independent per-step probabilities `p_i` the survival to step `k`
/// is `Π_{i<k}(1 - p_i) = exp(-H_k)`; drawing `E ~ Exp(1)` and taking the
/// first `k` with `H_{k+1} >= E` reproduces a step-by-step Bernoulli scan
/// exactly in distribution. Beyond the histogram the baseline applies.
#[derive(Debug, Clone)]
pub(crate) struct DarkHazard {
    cum: Vec<f64>,
    tail: f64,
}

impl DarkHazard {
    pub(crate) fn new(probs: &[f64], baseline: f64) -> Self {
        let mut cum = Vec::with_capacity(probs.len() + 1);
        let mut h = 0.0;
        cum.push(h);
        for p in probs {
            h += -(-p).ln_1p();
            cum.push(h);
        }
        DarkHazard {
            cum,
            tail: -(-baseline).ln_1p(),
        }
    }

    /// Step index (from the last detection) of the first dark count.
    pub(crate) fn first_dark_step(&self, e: f64) -> Option<u64> {
        let n = self.cum.len() - 1;
        let idx = self.cum[1..].partition_point(|&h| h < e);
        if idx < n {
            return Some(idx as u64);
        }
        self.baseline_step(e - self.cum[n]).map(|k| n as u64 + k)
    }

    /// Step index of the first dark count at the constant baseline level.
    pub(crate) fn baseline_step(&self, e: f64) -> Option<u64> {
        if self.tail <= 0.0 {
            return None;
        }
        let k = (e / self.tail).ceil() - 1.0;
        (k < 1e18).then(|| k.max(0.0) as u64)
    }
}
