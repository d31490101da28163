use serde::{Deserialize, Serialize};

/// One line of `fit` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub eta: f64,
    pub u_eta: f64,
    pub n_ph: f64,
    pub rep_rate_hz: f64,
    pub holdoff_ps: u64,
    pub n_click_hz: f64,
    pub n_dark_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_prev_interval_ps: Option<f64>,
    pub run_id: String,
}

impl ResultRecord {
    fn numbers(&self) -> impl Iterator<Item = (&'static str, f64)> {
        [
            ("eta", self.eta),
            ("u_eta", self.u_eta),
            ("n_ph", self.n_ph),
            ("rep_rate_hz", self.rep_rate_hz),
            ("n_click_hz", self.n_click_hz),
            ("n_dark_hz", self.n_dark_hz),
        ]
        .into_iter()
        .chain(
            self.mean_prev_interval_ps
                .map(|v| ("mean_prev_interval_ps", v)),
        )
    }

    /// Serializes to a single JSON line. Non-finite numbers are refused.
    pub fn to_line(&self) -> Result<String, String> {
        if let Some((name, v)) = self.numbers().find(|(_, v)| !v.is_finite()) {
            return Err(format!("{name} is not finite ({v})"));
        }
        serde_json::to_string(self).map_err(|e| e.to_string())
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
