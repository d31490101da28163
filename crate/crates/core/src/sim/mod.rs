//! Monte-Carlo generator of trigger/click streams.
//!
//! The detector is modelled on a fixed 10 ns time grid. At every pulse
//! epoch a trigger is emitted and, if the detector is armed, a signal
//! detection is drawn with `p0 = 1 - exp(-n_ph·η)`. Dark counts are drawn
//! on every armed step (including pulse steps without a signal detection)
//! with the probability of the dark-model bin for the time since the last
//! click; past the end of the dark model its baseline is used. Every click
//! starts a new holdoff.
//!
//! Steps are not visited one by one. The waiting time to the next dark
//! count is drawn from the cumulative hazard of the dark model, which has
//! the same distribution as the per-step scan and makes 100 s streams cheap.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)` and stream number `stream`, so a given
//! configuration yields the same stream on every platform.

mod dark_model;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use dark_model::{afterpulse_amp_for_excess, synth_dark_model};

use crate::analysis::DarkCountHistogram;
use crate::error::{Error, Result};
use crate::models::click_prob_single_pulse;
use crate::types::{DetectorParams, PulseTrainParams, TagStream, TimeTag, PS_PER_S};
use dark_model::DarkHazard;

/// Simulation time step.
pub const SIM_STEP_PS: u64 = 10_000;
/// Default output timestamp resolution.
pub const DEFAULT_QUANTIZE_PS: u64 = 250;

/// Efficiency as a piecewise-linear function of the time since the
/// previous click, held constant beyond the first and last points.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaProfile {
    points: Vec<(u64, f64)>,
}

impl EtaProfile {
    pub fn new(mut points: Vec<(u64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Configuration(
                "efficiency profile has no points".into(),
            ));
        }
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Configuration(
                "efficiency profile repeats an interval".into(),
            ));
        }
        if let Some((_, eta)) = points.iter().find(|(_, e)| !(0.0..=1.0).contains(e)) {
            return Err(Error::Configuration(format!(
                "profile efficiency {eta} outside [0, 1]"
            )));
        }
        Ok(EtaProfile { points })
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn eval(&self, interval_ps: f64) -> f64 {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if interval_ps <= first.0 as f64 {
            return first.1;
        }
        if interval_ps >= last.0 as f64 {
            return last.1;
        }
        let i = pts.partition_point(|p| (p.0 as f64) <= interval_ps);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        let w = (interval_ps - x0 as f64) / (x1 - x0) as f64;
        y0 + w * (y1 - y0)
    }

    /// Value for a detector that has not clicked yet.
    pub fn long_interval_value(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Efficiency {
    Constant(f64),
    Profile(EtaProfile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub detector: DetectorParams,
    pub pulses: PulseTrainParams,
    pub efficiency: Efficiency,
    /// Dark-count probability per 10 ns step versus time since the last click.
    pub dark_model: DarkCountHistogram,
    pub duration_s: f64,
    pub seed: u64,
    /// Independent RNG stream for parameter sweeps sharing one seed.
    pub stream: u64,
    /// Output timestamp resolution; `None` means [`DEFAULT_QUANTIZE_PS`].
    pub quantize_ps: Option<u64>,
}

impl SimConfig {
    pub fn new(
        detector: DetectorParams,
        pulses: PulseTrainParams,
        efficiency: Efficiency,
        dark_model: DarkCountHistogram,
        duration_s: f64,
        seed: u64,
    ) -> Self {
        SimConfig {
            detector,
            pulses,
            efficiency,
            dark_model,
            duration_s,
            seed,
            stream: 0,
            quantize_ps: None,
        }
    }
}

/// Pulse epochs in integer picoseconds, snapped to the first step at or
/// after the exact epoch.
#[derive(Debug, Clone, Copy)]
enum PulseClock {
    IntegerHz(u128),
    Real(f64),
}

impl PulseClock {
    fn new(rep_rate_hz: f64) -> Self {
        if rep_rate_hz.fract() == 0.0 && rep_rate_hz < 1e15 {
            PulseClock::IntegerHz(rep_rate_hz as u128)
        } else {
            PulseClock::Real(rep_rate_hz)
        }
    }

    fn epoch_ps(&self, k: u64) -> u64 {
        let exact = match *self {
            PulseClock::IntegerHz(f) => (k as u128 * 1_000_000_000_000).div_ceil(f) as u64,
            PulseClock::Real(f) => (k as f64 * PS_PER_S / f).ceil() as u64,
        };
        exact.div_ceil(SIM_STEP_PS) * SIM_STEP_PS
    }
}

/// Streaming simulator; yields tags in chronological order.
#[derive(Debug, Clone)]
pub struct Simulator {
    holdoff_ps: u64,
    n_ph: f64,
    efficiency: Efficiency,
    hazard: DarkHazard,
    clock: PulseClock,
    duration_ps: u64,
    quantize_ps: u64,
    rng: ChaCha8Rng,
    pulse_k: u64,
    next_pulse: Option<u64>,
    next_dark: Option<u64>,
    last_click: Option<u64>,
    pending: Option<TimeTag>,
}

impl Simulator {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let cfg_err = |e: Error| match e {
            Error::InvalidInput(m) => Error::Configuration(m),
            other => other,
        };
        cfg.detector.validate().map_err(cfg_err)?;
        cfg.pulses.validate().map_err(cfg_err)?;
        if let Efficiency::Constant(eta) = cfg.efficiency {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::Configuration(format!(
                    "efficiency {eta} outside [0, 1]"
                )));
            }
        }
        if !(cfg.duration_s.is_finite() && cfg.duration_s > 0.0) {
            return Err(Error::Configuration(format!(
                "duration must be positive, got {}",
                cfg.duration_s
            )));
        }
        if PS_PER_S / cfg.pulses.rep_rate_hz < SIM_STEP_PS as f64 {
            return Err(Error::Configuration(format!(
                "repetition interval shorter than the {SIM_STEP_PS} ps step"
            )));
        }
        let dm = &cfg.dark_model;
        if dm.bin_width_ps != SIM_STEP_PS {
            return Err(Error::Configuration(format!(
                "dark model bins are {} ps wide, simulation needs {SIM_STEP_PS} ps",
                dm.bin_width_ps
            )));
        }
        let baseline = dm.require_baseline()?;
        let quantize_ps = cfg.quantize_ps.unwrap_or(DEFAULT_QUANTIZE_PS);
        if quantize_ps == 0 {
            return Err(Error::Configuration(
                "timestamp quantization must be positive".into(),
            ));
        }

        // The detector is blind during holdoff whatever the dark model says.
        let holdoff = cfg.detector.holdoff_ps;
        let probs: Vec<f64> = dm
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if (i as u64) * SIM_STEP_PS < holdoff {
                    0.0
                } else {
                    p
                }
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(cfg.stream);
        let clock = PulseClock::new(cfg.pulses.rep_rate_hz);
        let duration_ps = (cfg.duration_s * PS_PER_S).round() as u64;
        let mut sim = Simulator {
            holdoff_ps: holdoff,
            n_ph: cfg.pulses.n_ph,
            efficiency: cfg.efficiency.clone(),
            hazard: DarkHazard::new(&probs, baseline),
            clock,
            duration_ps,
            quantize_ps,
            rng,
            pulse_k: 0,
            next_pulse: None,
            next_dark: None,
            last_click: None,
            pending: None,
        };
        sim.next_pulse = sim.pulse_at(0);
        let e = sim.exp_draw();
        sim.next_dark = sim
            .hazard
            .baseline_step(e)
            .and_then(|k| sim.step_time(0, k));
        Ok(sim)
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    fn pulse_at(&self, k: u64) -> Option<u64> {
        let t = self.clock.epoch_ps(k);
        (t < self.duration_ps).then_some(t)
    }

    fn step_time(&self, from: u64, steps: u64) -> Option<u64> {
        steps
            .checked_mul(SIM_STEP_PS)
            .and_then(|dt| from.checked_add(dt))
            .filter(|t| *t < self.duration_ps)
    }

    fn exp_draw(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return -u.ln();
            }
        }
    }

    fn register_click(&mut self, t: u64) {
        self.last_click = Some(t);
        let e = self.exp_draw();
        self.next_dark = self
            .hazard
            .first_dark_step(e)
            .and_then(|k| self.step_time(t, k));
    }

    fn quantized(&self, t: u64) -> u64 {
        t / self.quantize_ps * self.quantize_ps
    }

    fn efficiency_at(&self, t: u64) -> f64 {
        match &self.efficiency {
            Efficiency::Constant(eta) => *eta,
            Efficiency::Profile(p) => match self.last_click {
                Some(c) => p.eval((t - c) as f64),
                None => p.long_interval_value(),
            },
        }
    }
}

impl Iterator for Simulator {
    type Item = TimeTag;

    fn next(&mut self) -> Option<TimeTag> {
        if let Some(tag) = self.pending.take() {
            return Some(tag);
        }
        match (self.next_pulse, self.next_dark) {
            (None, None) => None,
            (p, Some(d)) if p.is_none_or(|p| d < p) => {
                self.register_click(d);
                Some(TimeTag::click(self.quantized(d)))
            }
            (Some(p), d) => {
                self.pulse_k += 1;
                self.next_pulse = self.pulse_at(self.pulse_k);
                let armed = self.last_click.is_none_or(|c| p - c >= self.holdoff_ps);
                let mut clicked = d == Some(p);
                if armed && self.n_ph > 0.0 {
                    let p0 = click_prob_single_pulse(self.n_ph, self.efficiency_at(p));
                    let u: f64 = self.rng.random();
                    clicked |= u < p0;
                }
                if clicked {
                    self.register_click(p);
                    self.pending = Some(TimeTag::click(self.quantized(p)));
                }
                Some(TimeTag::trigger(self.quantized(p)))
            }
            (None, Some(_)) => unreachable!(),
        }
    }
}

/// Runs a full simulation into memory.
pub fn simulate_stream(cfg: &SimConfig) -> Result<TagStream> {
    let sim = Simulator::new(cfg)?;
    let duration = sim.duration_ps();
    TagStream::new(sim.collect(), Some(duration))
}
