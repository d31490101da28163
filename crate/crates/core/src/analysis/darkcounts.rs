use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::validation::{Classified, TriggerValidator};
use crate::error::{Error, Result};
use crate::types::{DetectorParams, PulseTrainParams, TagStream, PS_PER_S};

/// Number of trailing bins averaged into the long-time reference level.
pub const BASELINE_BINS: usize = 5000;

pub const DEFAULT_BIN_WIDTH_PS: u64 = 10_000;

/// Dark-count probability per time bin, conditional on a signal detection
/// at τ = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkCountHistogram {
    pub bin_width_ps: u64,
    pub probs: Vec<f64>,
    /// Mean of the last [`BASELINE_BINS`] bins; `None` for shorter histograms.
    pub baseline: Option<f64>,
    pub n_conditioning_events: u64,
}

impl DarkCountHistogram {
    pub fn from_probs(
        bin_width_ps: u64,
        probs: Vec<f64>,
        n_conditioning_events: u64,
    ) -> Result<Self> {
        if bin_width_ps == 0 {
            return Err(Error::Configuration("bin width must be positive".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Configuration(format!(
                "bin probability {bad} outside [0, 1]"
            )));
        }
        let baseline = baseline_of(&probs);
        Ok(DarkCountHistogram {
            bin_width_ps,
            probs,
            baseline,
            n_conditioning_events,
        })
    }

    pub fn span_ps(&self) -> u64 {
        self.bin_width_ps * self.probs.len() as u64
    }

    /// Recomputes the baseline from the bins.
    pub fn recompute_baseline(&self) -> Option<f64> {
        baseline_of(&self.probs)
    }

    pub fn require_baseline(&self) -> Result<f64> {
        self.baseline.ok_or_else(|| {
            Error::Configuration(format!(
                "histogram has {} bins, at least {BASELINE_BINS} needed for a baseline",
                self.probs.len()
            ))
        })
    }
}

fn baseline_of(probs: &[f64]) -> Option<f64> {
    (probs.len() >= BASELINE_BINS).then(|| {
        let mut acc = Neumaier::default();
        probs[probs.len() - BASELINE_BINS..]
            .iter()
            .for_each(|p| acc.add(*p));
        acc.total() / BASELINE_BINS as f64
    })
}

/// Compensated running sum.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Histograms every click following a signal detection by its delay from
/// that detection, normalized by the number of signal detections.
pub fn dark_histogram(
    stream: &TagStream,
    det: &DetectorParams,
    pulses: &PulseTrainParams,
    span_ps: u64,
    bin_width_ps: u64,
) -> Result<DarkCountHistogram> {
    det.validate()?;
    pulses.validate()?;
    if bin_width_ps == 0 || !span_ps.is_multiple_of(bin_width_ps) {
        return Err(Error::Configuration(format!(
            "span {span_ps} ps is not a whole number of {bin_width_ps} ps bins"
        )));
    }
    let n_bins = (span_ps / bin_width_ps) as usize;
    if n_bins < BASELINE_BINS {
        return Err(Error::Configuration(format!(
            "{n_bins} bins in span, at least {BASELINE_BINS} needed"
        )));
    }
    let rep_interval_ps = PS_PER_S / pulses.rep_rate_hz;
    if span_ps as f64 > rep_interval_ps {
        return Err(Error::Configuration(format!(
            "span {span_ps} ps exceeds the pulse repetition interval {rep_interval_ps:.0} ps"
        )));
    }

    let mut counts = vec![0u64; n_bins];
    let mut anchors: VecDeque<u64> = VecDeque::new();
    let mut validator = TriggerValidator::new(det);
    let mut n_success = 0u64;
    for tag in stream.tags() {
        let class = validator.push(tag);
        if !tag.is_click() {
            continue;
        }
        let t = tag.t_ps;
        while anchors.front().is_some_and(|a| t - a >= span_ps) {
            anchors.pop_front();
        }
        for a in &anchors {
            counts[((t - a) / bin_width_ps) as usize] += 1;
        }
        if class == Classified::Signal {
            n_success += 1;
            anchors.push_back(t);
        }
    }
    if n_success == 0 {
        return Err(Error::Degenerate(
            "no successful triggers to condition on".into(),
        ));
    }
    let norm = n_success as f64;
    let probs = counts.into_iter().map(|c| c as f64 / norm).collect();
    DarkCountHistogram::from_probs(bin_width_ps, probs, n_success)
}

/// Running sum of `probs[i] - baseline`, one entry per bin.
pub fn surplus_darkcount(hist: &DarkCountHistogram) -> Result<Vec<f64>> {
    let baseline = hist.require_baseline()?;
    // Neumaier-compensated so the last entry matches Σprobs - N·baseline
    // to rounding of the result alone.
    let mut acc = Neumaier::default();
    Ok(hist
        .probs
        .iter()
        .map(|p| {
            acc.add(p - baseline);
            acc.total()
        })
        .collect())
}
