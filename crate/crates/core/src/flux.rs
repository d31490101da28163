//! Mean photon number per pulse from a monitor-diode photocurrent.

use crate::error::{Error, Result};

/// Planck constant, J·s (exact in SI since 2019).
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonFluxInputs {
    /// Monitor photocurrent, A.
    pub i_mon_amp: f64,
    /// Ratio of monitor photocurrent to the photocurrent after the
    /// attenuators at nominal 0 dB.
    pub q_ratio: f64,
    /// Total linear attenuation (power ratio, not dB).
    pub attenuation_linear: f64,
    pub rep_rate_hz: f64,
    /// Calibrated monitor diode sensitivity, A/W.
    pub sensitivity_a_per_w: f64,
    pub wavelength_m: f64,
}

impl PhotonFluxInputs {
    pub fn photon_energy_j(&self) -> f64 {
        PLANCK_J_S * SPEED_OF_LIGHT_M_S / self.wavelength_m
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        if !(self.i_mon_amp.is_finite() && self.i_mon_amp >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "monitor current must be nonnegative, got {}",
                self.i_mon_amp
            )));
        }
        positive("q ratio", self.q_ratio)?;
        positive("attenuation", self.attenuation_linear)?;
        if self.attenuation_linear > 1.0 {
            return Err(Error::InvalidInput(format!(
                "linear attenuation must not exceed 1, got {}",
                self.attenuation_linear
            )));
        }
        positive("repetition rate", self.rep_rate_hz)?;
        positive("sensitivity", self.sensitivity_a_per_w)?;
        positive("wavelength", self.wavelength_m)
    }
}

/// Converts an attenuation in dB to the linear power ratio.
pub fn db_to_linear(att_db: f64) -> f64 {
    10f64.powf(-att_db / 10.0)
}

/// n_ph = i_mon·q·α / (f·s·h·ν).
pub fn mean_photon_number(inp: &PhotonFluxInputs) -> Result<f64> {
    inp.validate()?;
    let optical_power_w =
        inp.i_mon_amp * inp.q_ratio * inp.attenuation_linear / inp.sensitivity_a_per_w;
    Ok(optical_power_w / (inp.rep_rate_hz * inp.photon_energy_j()))
}

/// Quadrature sum of independent relative standard uncertainties.
pub fn combined_rel_uncertainty(rel_u: &[f64]) -> Result<f64> {
    if let Some(bad) = rel_u.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "relative uncertainty must be nonnegative, got {bad}"
        )));
    }
    Ok(rel_u.iter().map(|u| u * u).sum::<f64>().sqrt())
}
