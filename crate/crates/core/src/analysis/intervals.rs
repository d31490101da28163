use serde::{Deserialize, Serialize};

use super::validation::{Classified, TriggerValidator};
use crate::error::{Error, Result};
use crate::types::{DetectorParams, TagStream, TimeTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub mean_prev_interval_ps: f64,
    pub rel_std_of_mean: f64,
    pub n_signal_events: u64,
}

/// Welford accumulator over intervals from a click to its predecessor.
///
/// Only signal detections contribute an interval; the predecessor can be
/// any click. Streams without triggers have no signal windows, and every
/// click is counted instead.
#[derive(Debug, Clone)]
pub struct IntervalAccumulator {
    validator: TriggerValidator,
    prev_click: Option<u64>,
    n_clicks: u64,
    signal: Welford,
    all: Welford,
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn rel_std_of_mean(&self) -> f64 {
        if self.n < 2 || self.mean == 0.0 {
            return 0.0;
        }
        let var = self.m2 / (self.n - 1) as f64;
        (var / self.n as f64).sqrt() / self.mean
    }
}

impl IntervalAccumulator {
    pub fn new(det: &DetectorParams) -> Self {
        IntervalAccumulator {
            validator: TriggerValidator::new(det),
            prev_click: None,
            n_clicks: 0,
            signal: Welford::default(),
            all: Welford::default(),
        }
    }

    pub fn push(&mut self, tag: &TimeTag) {
        let class = self.validator.push(tag);
        if !tag.is_click() {
            return;
        }
        self.n_clicks += 1;
        if let Some(prev) = self.prev_click {
            let dt = (tag.t_ps - prev) as f64;
            self.all.push(dt);
            if class == Classified::Signal {
                self.signal.push(dt);
            }
        }
        self.prev_click = Some(tag.t_ps);
    }

    pub fn finish(&self, det: &DetectorParams) -> Result<IntervalStats> {
        if self.n_clicks < 2 {
            return Err(Error::Degenerate(format!(
                "{} clicks, at least 2 needed",
                self.n_clicks
            )));
        }
        let acc = if self.validator.n_trigger() == 0 {
            &self.all
        } else {
            &self.signal
        };
        if acc.n == 0 {
            return Err(Error::Degenerate(
                "no signal detection with a preceding click".into(),
            ));
        }
        if acc.mean < det.holdoff_ps as f64 {
            log::warn!(
                "mean interval {:.0} ps is shorter than the holdoff {} ps",
                acc.mean,
                det.holdoff_ps
            );
        }
        Ok(IntervalStats {
            mean_prev_interval_ps: acc.mean,
            rel_std_of_mean: acc.rel_std_of_mean(),
            n_signal_events: acc.n,
        })
    }
}

/// Mean time from each signal detection back to the previous click.
pub fn mean_prev_event_interval(stream: &TagStream, det: &DetectorParams) -> Result<IntervalStats> {
    det.validate()?;
    let mut acc = IntervalAccumulator::new(det);
    stream.tags().iter().for_each(|t| acc.push(t));
    acc.finish(det)
}
