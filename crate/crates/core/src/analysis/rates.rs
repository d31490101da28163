use serde::{Deserialize, Serialize};

use super::validation::{Classified, TriggerValidator};
use crate::error::{Error, Result};
use crate::types::{DetectorParams, TagStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRates {
    pub n_click_hz: f64,
    pub n_dark_hz: f64,
}

fn click_rate(stream: &TagStream) -> Result<f64> {
    if stream.duration_ps() == 0 {
        return Err(Error::InvalidInput("stream has zero duration".into()));
    }
    Ok(stream.n_clicks() as f64 / stream.duration_s())
}

/// Total click rate of `stream`, and the dark rate.
///
/// The dark rate comes from `dark_stream` (recorded without signal pulses)
/// when given. Otherwise it is estimated from the clicks that fall in no
/// signal window: their rate over the time the detector was armed, mapped
/// back to the rate a free-running detector would show, `r/(1 + r·D)`.
pub fn measured_rates(
    stream: &TagStream,
    det: &DetectorParams,
    dark_stream: Option<&TagStream>,
) -> Result<MeasuredRates> {
    if stream.is_empty() {
        return Err(Error::EmptyInput("tag stream is empty".into()));
    }
    let n_click_hz = click_rate(stream)?;
    let n_dark_hz = match dark_stream {
        Some(dark) => click_rate(dark)?,
        None => {
            let mut v = TriggerValidator::new(det);
            let mut n_clicks = 0u64;
            let mut n_other = 0u64;
            for tag in stream.tags() {
                match v.push(tag) {
                    Classified::Signal => n_clicks += 1,
                    Classified::OtherClick => {
                        n_clicks += 1;
                        n_other += 1;
                    }
                    _ => {}
                }
            }
            let dead_s = (n_clicks as f64 * det.holdoff_s()).min(stream.duration_s());
            let live_s = stream.duration_s() - dead_s;
            if live_s <= 0.0 {
                return Err(Error::Degenerate(
                    "detector never armed; dark rate undefined".into(),
                ));
            }
            let armed_rate = n_other as f64 / live_s;
            armed_rate / (1.0 + armed_rate * det.holdoff_s())
        }
    };
    Ok(MeasuredRates {
        n_click_hz,
        n_dark_hz,
    })
}
