//! Value types shared across the crate.
//!
//! All times inside event streams are integer picoseconds. Rates are in Hz
//! (events per second) and stay floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// Source of a time-tagged event.
///
/// `Trigger` orders before `Click`, which gives the tie rule for events
/// sharing a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    Trigger,
    Click,
}

impl Channel {
    pub fn code(self) -> u8 {
        match self {
            Channel::Trigger => 0,
            Channel::Click => 1,
        }
    }
}

impl TryFrom<u8> for Channel {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Channel::Trigger),
            1 => Ok(Channel::Click),
            other => Err(Error::InvalidInput(format!("unsupported channel {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    // Field order matters for the derived Ord: time first, then channel.
    pub t_ps: u64,
    pub channel: Channel,
}

impl TimeTag {
    pub fn trigger(t_ps: u64) -> Self {
        TimeTag {
            t_ps,
            channel: Channel::Trigger,
        }
    }

    pub fn click(t_ps: u64) -> Self {
        TimeTag {
            t_ps,
            channel: Channel::Click,
        }
    }

    pub fn is_click(&self) -> bool {
        self.channel == Channel::Click
    }

    pub fn is_trigger(&self) -> bool {
        self.channel == Channel::Trigger
    }
}

/// A chronologically ordered sequence of tags plus the observation span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagStream {
    tags: Vec<TimeTag>,
    duration_ps: u64,
}

impl TagStream {
    /// Builds a stream from tags in file order.
    ///
    /// Timestamps must be nondecreasing. Tags sharing a timestamp are
    /// reordered so triggers precede clicks. `duration_ps` defaults to the
    /// last timestamp and must not be shorter than it.
    pub fn new(mut tags: Vec<TimeTag>, duration_ps: Option<u64>) -> Result<Self> {
        if let Some(pos) = tags.windows(2).position(|w| w[1].t_ps < w[0].t_ps) {
            return Err(Error::InvalidInput(format!(
                "timestamps decrease at event {} ({} ps after {} ps)",
                pos + 1,
                tags[pos + 1].t_ps,
                tags[pos].t_ps
            )));
        }
        // Only ties can move, so this is cheap on already-normalized input.
        if tags.windows(2).any(|w| w[1] < w[0]) {
            tags.sort();
        }
        let last = tags.last().map_or(0, |t| t.t_ps);
        let duration_ps = duration_ps.unwrap_or(last);
        if duration_ps < last {
            return Err(Error::InvalidInput(format!(
                "duration {duration_ps} ps shorter than last tag at {last} ps"
            )));
        }
        Ok(TagStream { tags, duration_ps })
    }

    pub fn tags(&self) -> &[TimeTag] {
        &self.tags
    }

    pub fn into_tags(self) -> Vec<TimeTag> {
        self.tags
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn n_clicks(&self) -> usize {
        self.tags.iter().filter(|t| t.is_click()).count()
    }

    pub fn n_triggers(&self) -> usize {
        self.tags.iter().filter(|t| t.is_trigger()).count()
    }

    /// Shifts every timestamp (and the duration) by `offset_ps`.
    pub fn shifted(&self, offset_ps: u64) -> TagStream {
        TagStream {
            tags: self
                .tags
                .iter()
                .map(|t| TimeTag {
                    t_ps: t.t_ps + offset_ps,
                    channel: t.channel,
                })
                .collect(),
            duration_ps: self.duration_ps + offset_ps,
        }
    }
}

/// Detector operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Holdoff (dead) time after every click.
    pub holdoff_ps: u64,
    /// Dark-count rate measured without signal light.
    pub dark_rate_hz: f64,
    /// Delay from a trigger to the opening of its signal window.
    pub window_offset_ps: u64,
    pub window_width_ps: u64,
}

impl DetectorParams {
    pub const DEFAULT_WINDOW_WIDTH_PS: u64 = 6_000;

    pub fn new(holdoff_ps: u64, dark_rate_hz: f64) -> Self {
        DetectorParams {
            holdoff_ps,
            dark_rate_hz,
            window_offset_ps: 0,
            window_width_ps: Self::DEFAULT_WINDOW_WIDTH_PS,
        }
    }

    pub fn with_window(mut self, offset_ps: u64, width_ps: u64) -> Self {
        self.window_offset_ps = offset_ps;
        self.window_width_ps = width_ps;
        self
    }

    pub fn holdoff_s(&self) -> f64 {
        self.holdoff_ps as f64 / PS_PER_S
    }

    pub fn validate(&self) -> Result<()> {
        if self.holdoff_ps == 0 {
            return Err(Error::InvalidInput("holdoff must be positive".into()));
        }
        if self.window_width_ps == 0 {
            return Err(Error::InvalidInput(
                "signal window width must be positive".into(),
            ));
        }
        if !(self.dark_rate_hz.is_finite() && self.dark_rate_hz >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "dark rate must be finite and nonnegative, got {}",
                self.dark_rate_hz
            )));
        }
        if self.window_width_ps > self.holdoff_ps / 100 {
            log::warn!(
                "signal window {} ps is not small against holdoff {} ps",
                self.window_width_ps,
                self.holdoff_ps
            );
        }
        Ok(())
    }
}

/// Laser pulse train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrainParams {
    pub rep_rate_hz: f64,
    /// Mean photon number per pulse.
    pub n_ph: f64,
}

impl PulseTrainParams {
    pub fn new(rep_rate_hz: f64, n_ph: f64) -> Self {
        PulseTrainParams { rep_rate_hz, n_ph }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_hz.is_finite() && self.rep_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "repetition rate must be positive, got {}",
                self.rep_rate_hz
            )));
        }
        if !(self.n_ph.is_finite() && self.n_ph >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "mean photon number must be nonnegative, got {}",
                self.n_ph
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Original,
    Amended,
    Expost,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::Amended => "amended",
            Method::Expost => "expost",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Method::Original),
            "amended" => Ok(Method::Amended),
            "expost" => Ok(Method::Expost),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// Intrinsic detection efficiency with its statistical standard uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEstimate {
    pub eta: f64,
    pub u_eta: f64,
    pub method: Method,
    pub n_events_used: u64,
}
