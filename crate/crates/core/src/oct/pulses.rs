//! Guess fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::timegrid::TimeGrid;
use crate::units::cm_to_hartree;

use super::models::{DoubleLambda, V0, V1, V2, V6, V7};

/// `A e^{-(t - t_c)²/2σ²} cos(ω t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    /// Carrier angular frequency in hartree.
    pub omega: f64,
}

impl GaussianPulse {
    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.sigma;
        self.amplitude * (-0.5 * x * x).exp()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.envelope(t) * (self.omega * t).cos()
    }

    /// Gaussian whose envelope area times `dipole` equals π.
    pub fn pi_pulse(dipole: f64, center: f64, sigma: f64, omega: f64) -> Self {
        let amplitude = PI / (dipole * sigma * (2.0 * PI).sqrt());
        Self { amplitude, center, sigma, omega }
    }

    /// Describes how far the envelope leaks past `[t0, t1]`, if more than
    /// `1e-8` of the peak.
    pub fn overflow(&self, t0: f64, t1: f64) -> Option<String> {
        let worst = self.envelope(t0).abs().max(self.envelope(t1).abs());
        if worst > 1e-8 * self.amplitude.abs() {
            Some(format!(
                "pulse centred at {:.6e} leaks past [{t0:.6e}, {t1:.6e}] (edge/peak = {:.2e})",
                self.center,
                worst / self.amplitude.abs()
            ))
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuessPulse {
    Gaussian(GaussianPulse),
    PiPulseSequence { pulses: Vec<GaussianPulse>, windows: Vec<(f64, f64)> },
}

impl GuessPulse {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            GuessPulse::Gaussian(p) => p.eval(t),
            GuessPulse::PiPulseSequence { pulses, .. } => pulses.iter().map(|p| p.eval(t)).sum(),
        }
    }

    /// One sample per step at the step midpoints, plus warnings for pulses
    /// leaking out of their windows (or out of `[0, T]`).
    pub fn sample(&self, grid: &TimeGrid) -> (Vec<f64>, Vec<String>) {
        let samples = grid.midpoints().into_iter().map(|t| self.eval(t)).collect();
        let total = grid.total_time();
        let warnings = match self {
            GuessPulse::Gaussian(p) => p.overflow(0.0, total).into_iter().collect(),
            GuessPulse::PiPulseSequence { pulses, windows } => {
                pulses.iter().zip(windows).filter_map(|(p, (a, b))| p.overflow(*a, *b)).collect()
            }
        };
        (samples, warnings)
    }
}

/// Width of each π-pulse relative to its subinterval.
pub const PI_SEQUENCE_WIDTH_FRACTION: f64 = 1.0 / 14.0;

/// Four resonant π-pulses climbing v0 → v′6 → v1 → v′7 → v2, one centred in
/// each quarter of `[0, T]`.
pub fn double_lambda_pi_sequence(model: &DoubleLambda, total: f64) -> GuessPulse {
    let ladder = [(V6, V0), (V6, V1), (V7, V1), (V7, V2)];
    let t1 = total / 4.0;
    let sigma = t1 * PI_SEQUENCE_WIDTH_FRACTION;
    let mut pulses = Vec::new();
    let mut windows = Vec::new();
    for (k, (upper, lower)) in ladder.into_iter().enumerate() {
        let omega = cm_to_hartree(model.transition_cm(upper, lower));
        let center = (k as f64 + 0.5) * t1;
        pulses.push(GaussianPulse::pi_pulse(model.dipole, center, sigma, omega));
        windows.push((k as f64 * t1, (k + 1) as f64 * t1));
    }
    GuessPulse::PiPulseSequence { pulses, windows }
}
