use serde_json::Value;
use spadcal_web::{model_curves_json, simulate_and_fit_json, surplus_curve_json};

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn original_fit_drifts_upward_with_photon_number() {
    let v = parse(model_curves_json(0.1, 150e3, 20.0, 870.0, 20.0, 10));
    let fits = floats(&v["eta_original_fit"]);
    assert_eq!(fits.len(), 10);
    assert!(fits.windows(2).all(|w| w[1] > w[0]), "{fits:?}");
    assert!(fits[0] > 0.1);
}

#[test]
fn curves_coincide_without_dark_counts() {
    let v = parse(model_curves_json(0.1, 50e3, 10.0, 0.0, 5.0, 8));
    for (o, a) in floats(&v["rate_original"])
        .iter()
        .zip(floats(&v["rate_amended"]))
    {
        assert!((o - a).abs() <= 1e-12 * o);
    }
}

#[test]
fn quick_run_recovers_eta() {
    let v = parse(simulate_and_fit_json(
        50e3, 1.0, 0.1, 10.0, 870.0, 0.008, 5.0, 1,
    ));
    let eta = v["expost"]["eta"].as_f64().unwrap();
    let u = v["expost"]["u_eta"].as_f64().unwrap();
    assert!((eta - 0.1).abs() < 4.0 * u, "{eta} ± {u}");
    assert!(v["original"]["eta"].as_f64().is_some());
}

#[test]
fn rejects_long_runs() {
    assert!(simulate_and_fit_json(50e3, 1.0, 0.1, 10.0, 870.0, 0.0, 1000.0, 1).is_err());
}

#[test]
fn surplus_plateau_matches_afterpulse_excess() {
    let v = parse(surplus_curve_json(870.0, 0.008, 20.0, 10.0, 500.0, 500));
    let s = floats(&v["surplus"]);
    let prob = floats(&v["prob"]);
    assert_eq!(prob[0], 0.0);
    // Blind-time deficit plus the afterpulse excess.
    let expected = 0.008 - 1000.0 * 870.0 * 1e-8;
    let end = *s.last().unwrap();
    assert!((end - expected).abs() < 5e-4, "{end} vs {expected}");
}
