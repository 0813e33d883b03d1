//! Spectra of control fields.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::timegrid::TimeGrid;
use crate::units::hartree_to_cm;
use crate::{Error, Result, C64};

/// Two-sided transform `ε̂_k = Δt Σ_n ε_n e^{-2πikn/N}` of a uniformly
/// sampled field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub dt: f64,
    pub values: Vec<C64>,
}

impl Spectrum {
    /// Angular frequency spacing in hartree.
    pub fn d_omega(&self) -> f64 {
        2.0 * PI / (self.values.len() as f64 * self.dt)
    }

    /// Bin spacing in cm⁻¹.
    pub fn bin_cm(&self) -> f64 {
        hartree_to_cm(self.d_omega())
    }

    /// `(frequency in cm⁻¹, |ε̂|)` for the non-negative frequencies.
    pub fn positive(&self) -> Vec<(f64, f64)> {
        let n = self.values.len();
        let dw = self.bin_cm();
        (0..=n / 2).map(|k| (k as f64 * dw, self.values[k].norm())).collect()
    }

    /// `Σ|ε̂|² Δω/2π`, which equals `Σ|ε|² Δt` for the sampled field.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.d_omega() / (2.0 * PI)
    }

    /// Indices (into [`Spectrum::positive`]) of local maxima at least
    /// `rel_threshold` times the largest magnitude.
    pub fn peaks(&self, rel_threshold: f64) -> Vec<usize> {
        let pos = self.positive();
        let max = pos.iter().map(|p| p.1).fold(0.0, f64::max);
        (1..pos.len().saturating_sub(1))
            .filter(|&k| pos[k].1 >= pos[k - 1].1 && pos[k].1 >= pos[k + 1].1 && pos[k].1 >= rel_threshold * max)
            .collect()
    }

    /// Whether a peak (as in [`Spectrum::peaks`]) lies within `bins` bins of
    /// `freq_cm`.
    pub fn has_peak_near(&self, freq_cm: f64, bins: usize, rel_threshold: f64) -> bool {
        let target = freq_cm / self.bin_cm();
        self.peaks(rel_threshold).into_iter().any(|k| (k as f64 - target).abs() <= bins as f64)
    }
}

/// Spectrum of uniformly spaced samples.
pub fn field_spectrum(samples: &[f64], dt: f64) -> Result<Spectrum> {
    if samples.is_empty() || !(dt > 0.0) {
        return Err(Error::Argument("spectrum needs samples and a positive step".into()));
    }
    let mut buf: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter_mut().for_each(|v| *v *= dt);
    Ok(Spectrum { dt, values: buf })
}

/// Spectrum of a per-step field on `grid`. Non-equidistant grids are first
/// resampled onto `n_steps` uniform midpoints by piecewise-constant lookup.
pub fn field_spectrum_on(grid: &TimeGrid, field: &[f64]) -> Result<Spectrum> {
    if field.len() != grid.n_steps() {
        return Err(Error::Dimension { expected: grid.n_steps(), got: field.len() });
    }
    if grid.is_equidistant() {
        return field_spectrum(field, grid.dt_max());
    }
    let n = grid.n_steps();
    let dt = grid.total_time() / n as f64;
    let pts = grid.points();
    let resampled: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            let idx = pts.partition_point(|&p| p <= t).saturating_sub(1).min(n - 1);
            field[idx]
        })
        .collect();
    field_spectrum(&resampled, dt)
}
