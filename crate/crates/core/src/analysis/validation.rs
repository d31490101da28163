use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::eta_from_click_prob;
use crate::types::{DetectorParams, EfficiencyEstimate, Method, TagStream, TimeTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_trigger: u64,
    pub n_trigger_inv: u64,
    pub n_signal: u64,
    pub p_click_true: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub valid_trigger_indices: Option<Vec<u64>>,
}

impl ValidationReport {
    pub fn n_trigger_valid(&self) -> u64 {
        self.n_trigger - self.n_trigger_inv
    }
}

/// What a single tag turned out to be after the validator consumed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classified {
    ValidTrigger,
    ShadowedTrigger,
    /// Click inside the signal window of a valid trigger.
    Signal,
    /// Any other click: dark count, afterpulse, or a click in no window.
    OtherClick,
}

#[derive(Debug, Clone, Copy)]
struct Window {
    start: u64,
    end: u64,
}

/// Chronological trigger validation as a left fold.
///
/// A trigger is shadowed when it arrives less than one holdoff after the
/// most recent click; a gap of exactly one holdoff is valid. Each valid
/// trigger opens a signal window `[t + offset, t + offset + width)` that can
/// absorb at most one click. Feeding a stream in several pieces gives the
/// same result as feeding it whole.
#[derive(Debug, Clone)]
pub struct TriggerValidator {
    det: DetectorParams,
    last_click: Option<u64>,
    open: VecDeque<Window>,
    n_trigger: u64,
    n_trigger_inv: u64,
    n_signal: u64,
    valid_indices: Option<Vec<u64>>,
}

impl TriggerValidator {
    pub fn new(det: &DetectorParams) -> Self {
        TriggerValidator {
            det: *det,
            last_click: None,
            open: VecDeque::new(),
            n_trigger: 0,
            n_trigger_inv: 0,
            n_signal: 0,
            valid_indices: None,
        }
    }

    /// Also record the ordinal (among triggers) of every valid trigger.
    pub fn recording_indices(mut self) -> Self {
        self.valid_indices = Some(Vec::new());
        self
    }

    pub fn push(&mut self, tag: &TimeTag) -> Classified {
        if tag.is_trigger() {
            let index = self.n_trigger;
            self.n_trigger += 1;
            let shadowed = self
                .last_click
                .is_some_and(|c| tag.t_ps.saturating_sub(c) < self.det.holdoff_ps);
            if shadowed {
                self.n_trigger_inv += 1;
                return Classified::ShadowedTrigger;
            }
            if let Some(v) = self.valid_indices.as_mut() {
                v.push(index);
            }
            let start = tag.t_ps + self.det.window_offset_ps;
            self.open.push_back(Window {
                start,
                end: start + self.det.window_width_ps,
            });
            Classified::ValidTrigger
        } else {
            let t = tag.t_ps;
            while self.open.front().is_some_and(|w| w.end <= t) {
                self.open.pop_front();
            }
            self.last_click = Some(t);
            if self.open.front().is_some_and(|w| w.start <= t) {
                self.open.pop_front();
                self.n_signal += 1;
                Classified::Signal
            } else {
                Classified::OtherClick
            }
        }
    }

    pub fn n_trigger(&self) -> u64 {
        self.n_trigger
    }

    pub fn report(&self) -> ValidationReport {
        let valid = self.n_trigger - self.n_trigger_inv;
        let p_click_true = if valid > 0 {
            self.n_signal as f64 / valid as f64
        } else {
            0.0
        };
        ValidationReport {
            n_trigger: self.n_trigger,
            n_trigger_inv: self.n_trigger_inv,
            n_signal: self.n_signal,
            p_click_true,
            valid_trigger_indices: self.valid_indices.clone(),
        }
    }
}

fn checked_report(report: ValidationReport) -> Result<ValidationReport> {
    if report.n_trigger_valid() == 0 {
        return Err(Error::Degenerate("no valid triggers in stream".into()));
    }
    Ok(report)
}

/// Runs [`TriggerValidator`] over a whole stream.
pub fn validate_triggers(stream: &TagStream, det: &DetectorParams) -> Result<ValidationReport> {
    validate_tags(stream.tags().iter(), det, false)
}

/// Like [`validate_triggers`] for any tag source, optionally recording the
/// indices of valid triggers.
pub fn validate_tags<'a>(
    tags: impl IntoIterator<Item = &'a TimeTag>,
    det: &DetectorParams,
    record_indices: bool,
) -> Result<ValidationReport> {
    det.validate()?;
    let mut v = TriggerValidator::new(det);
    if record_indices {
        v = v.recording_indices();
    }
    let mut any = false;
    for tag in tags {
        any = true;
        v.push(tag);
    }
    if !any {
        return Err(Error::EmptyInput("tag stream is empty".into()));
    }
    checked_report(v.report())
}

/// Efficiency from a validation report: η = -ln(1 - p_click,true)/n_ph,
/// with the binomial sigma of `p_click_true` propagated through the log.
pub fn eta_expost_from_report(report: &ValidationReport, n_ph: f64) -> Result<EfficiencyEstimate> {
    let n = report.n_trigger_valid();
    if n == 0 {
        return Err(Error::Degenerate("no valid triggers in stream".into()));
    }
    let p = report.p_click_true;
    let eta = eta_from_click_prob(p, n_ph)?;
    let sigma_p = (p * (1.0 - p) / n as f64).sqrt();
    Ok(EfficiencyEstimate {
        eta,
        u_eta: sigma_p / (n_ph * (1.0 - p)),
        method: Method::Expost,
        n_events_used: n,
    })
}

pub fn eta_expost(
    stream: &TagStream,
    det: &DetectorParams,
    n_ph: f64,
) -> Result<EfficiencyEstimate> {
    eta_expost_from_report(&validate_triggers(stream, det)?, n_ph)
}
