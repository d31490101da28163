//! Browser bindings for the spadcal demo page.
//!
//! Each export takes plain numbers and returns a JSON string so the page
//! needs no generated type glue. The `*_json` functions hold the logic and
//! are what the native tests exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use spadcal::analysis::{
    eta_expost_from_report, measured_rates, surplus_darkcount, TriggerValidator,
};
use spadcal::models::{
    invert_amended, invert_original, predict_rate_amended, predict_rate_original, ModelInputs,
};
use spadcal::sim::{
    afterpulse_amp_for_excess, simulate_stream, synth_dark_model, Efficiency, SimConfig,
};
use spadcal::{DetectorParams, PulseTrainParams};

const PS_PER_US: f64 = 1e6;
/// Longest simulated run the page may request, to keep the tab responsive.
pub const MAX_DEMO_DURATION_S: f64 = 20.0;

fn us_to_ps(us: f64) -> Result<u64, String> {
    if us.is_finite() && us > 0.0 {
        Ok((us * PS_PER_US).round() as u64)
    } else {
        Err(format!("time must be positive, got {us} µs"))
    }
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ModelCurves {
    n_ph: Vec<f64>,
    rate_original: Vec<f64>,
    rate_amended: Vec<f64>,
    /// η the original model reports when the amended model is true.
    eta_original_fit: Vec<Option<f64>>,
}

/// Click rates of both models versus mean photon number, and the η the
/// original model would infer from rates generated by the amended one.
pub fn model_curves_json(
    eta: f64,
    rep_rate_hz: f64,
    holdoff_us: f64,
    dark_rate_hz: f64,
    n_ph_max: f64,
    points: usize,
) -> Result<String, String> {
    let det = DetectorParams::new(us_to_ps(holdoff_us)?, dark_rate_hz);
    if points < 2 || n_ph_max.is_nan() || n_ph_max <= 0.0 {
        return Err("need at least two points and a positive photon number".into());
    }
    let mut out = ModelCurves {
        n_ph: vec![],
        rate_original: vec![],
        rate_amended: vec![],
        eta_original_fit: vec![],
    };
    for i in 1..=points {
        let n_ph = n_ph_max * i as f64 / points as f64;
        let pulses = PulseTrainParams::new(rep_rate_hz, n_ph);
        pulses.validate().map_err(|e| e.to_string())?;
        let amended = predict_rate_amended(&det, &pulses, eta);
        let fit = invert_original(&ModelInputs {
            detector: det,
            pulses,
            n_click_hz: amended,
            duration_s: None,
        });
        out.n_ph.push(n_ph);
        out.rate_original
            .push(predict_rate_original(&det, &pulses, eta));
        out.rate_amended.push(amended);
        out.eta_original_fit.push(fit.ok().map(|e| e.eta));
    }
    to_json(&out)
}

#[derive(Serialize)]
struct Estimate {
    eta: Option<f64>,
    u_eta: Option<f64>,
    error: Option<String>,
}

impl From<spadcal::Result<spadcal::EfficiencyEstimate>> for Estimate {
    fn from(r: spadcal::Result<spadcal::EfficiencyEstimate>) -> Self {
        match r {
            Ok(e) => Estimate {
                eta: Some(e.eta),
                u_eta: Some(e.u_eta),
                error: None,
            },
            Err(e) => Estimate {
                eta: None,
                u_eta: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Serialize)]
struct SimFit {
    n_triggers: usize,
    n_clicks: usize,
    n_click_hz: f64,
    n_dark_hz: f64,
    original: Estimate,
    amended: Estimate,
    expost: Estimate,
}

/// Simulates a run with a flat dark rate plus afterpulsing and fits it
/// with all three methods. The dark rate for the models comes from a
/// second, signal-free run.
#[allow(clippy::too_many_arguments)]
pub fn simulate_and_fit_json(
    rep_rate_hz: f64,
    n_ph: f64,
    eta: f64,
    holdoff_us: f64,
    dark_rate_hz: f64,
    afterpulse_excess: f64,
    duration_s: f64,
    seed: u64,
) -> Result<String, String> {
    if !(duration_s > 0.0 && duration_s <= MAX_DEMO_DURATION_S) {
        return Err(format!("duration must be in (0, {MAX_DEMO_DURATION_S}] s"));
    }
    let holdoff_ps = us_to_ps(holdoff_us)?;
    let tau_ps = 20 * PS_PER_US as u64;
    let amp = afterpulse_amp_for_excess(afterpulse_excess, tau_ps, 10_000);
    let dark_model = synth_dark_model(
        dark_rate_hz,
        amp,
        tau_ps,
        holdoff_ps,
        holdoff_ps + 500 * PS_PER_US as u64,
    )
    .map_err(|e| e.to_string())?;
    let det = DetectorParams::new(holdoff_ps, 0.0);
    let cfg = SimConfig::new(
        det,
        PulseTrainParams::new(rep_rate_hz, n_ph),
        Efficiency::Constant(eta),
        dark_model,
        duration_s,
        seed,
    );
    let stream = simulate_stream(&cfg).map_err(|e| e.to_string())?;
    let dark_cfg = SimConfig {
        pulses: PulseTrainParams::new(rep_rate_hz, 0.0),
        stream: 1,
        ..cfg.clone()
    };
    let dark = simulate_stream(&dark_cfg).map_err(|e| e.to_string())?;
    let rates = measured_rates(&stream, &det, Some(&dark)).map_err(|e| e.to_string())?;

    let mut validator = TriggerValidator::new(&det);
    stream.tags().iter().for_each(|t| {
        validator.push(t);
    });
    let inputs = ModelInputs {
        detector: DetectorParams {
            dark_rate_hz: rates.n_dark_hz,
            ..det
        },
        pulses: cfg.pulses,
        n_click_hz: rates.n_click_hz,
        duration_s: Some(stream.duration_s()),
    };
    to_json(&SimFit {
        n_triggers: stream.n_triggers(),
        n_clicks: stream.n_clicks(),
        n_click_hz: rates.n_click_hz,
        n_dark_hz: rates.n_dark_hz,
        original: invert_original(&inputs).into(),
        amended: invert_amended(&inputs).into(),
        expost: eta_expost_from_report(&validator.report(), n_ph).into(),
    })
}

#[derive(Serialize)]
struct SurplusCurve {
    tau_us: Vec<f64>,
    prob: Vec<f64>,
    surplus: Vec<f64>,
}

/// Conditional dark-count probability and its surplus for a synthetic
/// device, decimated to `points` samples for plotting.
pub fn surplus_curve_json(
    dark_rate_hz: f64,
    afterpulse_excess: f64,
    afterpulse_tau_us: f64,
    holdoff_us: f64,
    span_us: f64,
    points: usize,
) -> Result<String, String> {
    let tau_ps = us_to_ps(afterpulse_tau_us)?;
    let bin_ps = 10_000;
    let span_ps = us_to_ps(span_us)? / bin_ps * bin_ps;
    let hist = synth_dark_model(
        dark_rate_hz,
        afterpulse_amp_for_excess(afterpulse_excess, tau_ps, bin_ps),
        tau_ps,
        us_to_ps(holdoff_us)?,
        span_ps,
    )
    .map_err(|e| e.to_string())?;
    let surplus = surplus_darkcount(&hist).map_err(|e| e.to_string())?;
    let step = (hist.probs.len() / points.max(1)).max(1);
    let idx = (0..hist.probs.len()).step_by(step);
    to_json(&SurplusCurve {
        tau_us: idx
            .clone()
            .map(|i| (i as u64 * bin_ps) as f64 / PS_PER_US)
            .collect(),
        prob: idx.clone().map(|i| hist.probs[i]).collect(),
        surplus: idx.map(|i| surplus[i]).collect(),
    })
}

#[wasm_bindgen]
pub fn model_curves(
    eta: f64,
    rep_rate_hz: f64,
    holdoff_us: f64,
    dark_rate_hz: f64,
    n_ph_max: f64,
    points: usize,
) -> Result<String, JsValue> {
    model_curves_json(eta, rep_rate_hz, holdoff_us, dark_rate_hz, n_ph_max, points)
        .map_err(|e| JsValue::from_str(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn simulate_and_fit(
    rep_rate_hz: f64,
    n_ph: f64,
    eta: f64,
    holdoff_us: f64,
    dark_rate_hz: f64,
    afterpulse_excess: f64,
    duration_s: f64,
    seed: u32,
) -> Result<String, JsValue> {
    simulate_and_fit_json(
        rep_rate_hz,
        n_ph,
        eta,
        holdoff_us,
        dark_rate_hz,
        afterpulse_excess,
        duration_s,
        seed.into(),
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn surplus_curve(
    dark_rate_hz: f64,
    afterpulse_excess: f64,
    afterpulse_tau_us: f64,
    holdoff_us: f64,
    span_us: f64,
    points: usize,
) -> Result<String, JsValue> {
    surplus_curve_json(
        dark_rate_hz,
        afterpulse_excess,
        afterpulse_tau_us,
        holdoff_us,
        span_us,
        points,
    )
    .map_err(|e| JsValue::from_str(&e))
}
