//! Global time grids, spectral differentiation and interpolation of sampled
//! state trajectories.
//!
//! Two grid kinds exist: equidistant grids, differentiated by FFT under a
//! periodicity assumption, and Chebychev–Lobatto grids
//! `t_n = (T/2)(1 - cos(nπ/(N-1)))`, stored in ascending time order, on which
//! Chebychev series give derivatives of any order without boundary artifacts.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::hilbert::StateVector;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    Equidistant { dt: f64 },
    ChebyshevLobatto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    kind: GridKind,
    total_time: f64,
    points: Vec<f64>,
}

impl TimeGrid {
    /// `n_steps` equal steps covering `[0, total_time]`.
    pub fn equidistant(total_time: f64, n_steps: usize) -> Result<Self> {
        if n_steps < 1 || !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::Argument(format!(
                "equidistant grid needs n_steps >= 1 and T > 0, got {n_steps}, {total_time}"
            )));
        }
        let dt = total_time / n_steps as f64;
        let mut points: Vec<f64> = (0..=n_steps).map(|n| n as f64 * dt).collect();
        points[n_steps] = total_time;
        Ok(Self { kind: GridKind::Equidistant { dt }, total_time, points })
    }

    /// `n_steps` steps of length `dt`.
    pub fn from_step(dt: f64, n_steps: usize) -> Result<Self> {
        Self::equidistant(dt * n_steps as f64, n_steps)
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn step(&self, n: usize) -> f64 {
        self.points[n + 1] - self.points[n]
    }

    pub fn dt_max(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn is_equidistant(&self) -> bool {
        matches!(self.kind, GridKind::Equidistant { .. })
    }

    /// Midpoints of all steps.
    pub fn midpoints(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Lobatto grid with `n_points` nodes on `[0, T]`, ascending.
pub fn make_chebyshev_grid(total_time: f64, n_points: usize) -> Result<TimeGrid> {
    if n_points < 2 {
        return Err(Error::Argument(format!("Chebychev grid needs >= 2 points, got {n_points}")));
    }
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(Error::Argument(format!("total time must be positive, got {total_time}")));
    }
    let m = (n_points - 1) as f64;
    let points = (0..n_points)
        .map(|n| {
            // cos(nπ/M) written as a sine of an argument antisymmetric in n,
            // so that t_n + t_{M-n} = T to rounding.
            let s = (std::f64::consts::PI * (m - 2.0 * n as f64) / (2.0 * m)).sin();
            0.5 * total_time * (1.0 - s)
        })
        .collect();
    Ok(TimeGrid { kind: GridKind::ChebyshevLobatto, total_time, points })
}

/// State vectors sampled at every point of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTrajectory {
    pub grid: TimeGrid,
    pub values: Vec<StateVector>,
}

impl SampledTrajectory {
    pub fn new(grid: TimeGrid, values: Vec<StateVector>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Dimension { expected: grid.n_points(), got: values.len() });
        }
        if let Some(first) = values.first() {
            let d = first.len();
            if let Some(bad) = values.iter().find(|v| v.len() != d) {
                return Err(Error::Dimension { expected: d, got: bad.len() });
            }
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> StateVector) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self { grid, values }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Applies `op` to the time series of every amplitude component.
    fn map_components(&self, op: impl Fn(&mut Vec<C64>)) -> SampledTrajectory {
        let n_t = self.values.len();
        let dim = self.dim();
        let mut out = vec![StateVector::zeros(dim); n_t];
        let mut series = vec![C64::new(0.0, 0.0); n_t];
        for k in 0..dim {
            for (s, v) in series.iter_mut().zip(&self.values) {
                *s = v[k];
            }
            op(&mut series);
            for (o, s) in out.iter_mut().zip(&series) {
                o[k] = *s;
            }
        }
        SampledTrajectory { grid: self.grid.clone(), values: out }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let dim = self.dim();
        let mut header = vec!["t".to_string()];
        for k in 0..dim {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        wr.write_record(&header)?;
        for (t, v) in self.grid.points().iter().zip(&self.values) {
            let mut row = Vec::with_capacity(2 * dim + 1);
            row.push(format!("{t:.10e}"));
            for a in v.iter() {
                row.push(format!("{:.10e}", a.re));
                row.push(format!("{:.10e}", a.im));
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a trajectory written by [`write_csv`](Self::write_csv). The grid
    /// kind is recognized from the time column.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            if nums.len() % 2 != 1 {
                return Err(Error::Config("trajectory rows need t plus re/im pairs".into()));
            }
            times.push(nums[0]);
            values.push(StateVector::from_vec(nums[1..].chunks(2).map(|p| C64::new(p[0], p[1])).collect()));
        }
        let grid = recognize_grid(&times)?;
        Self::new(grid, values)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn recognize_grid(times: &[f64]) -> Result<TimeGrid> {
    if times.len() < 2 || times[0].abs() > 1e-9 {
        return Err(Error::Config("time column must start at 0 with >= 2 rows".into()));
    }
    let total = *times.last().unwrap();
    let tol = 1e-8 * total.abs().max(1.0);
    let eq = TimeGrid::equidistant(total, times.len() - 1)?;
    if eq.points().iter().zip(times).all(|(a, b)| (a - b).abs() <= tol) {
        return Ok(eq);
    }
    let ch = make_chebyshev_grid(total, times.len())?;
    if ch.points().iter().zip(times).all(|(a, b)| (a - b).abs() <= tol) {
        return Ok(ch);
    }
    Err(Error::UnsupportedGrid("time column is neither equidistant nor Chebychev-Lobatto"))
}

/// Spectral derivative of order 1 or 2 on an equidistant grid, treating each
/// series as periodic with period `N Δt`.
pub fn fft_derivative(traj: &SampledTrajectory, order: usize) -> Result<SampledTrajectory> {
    let dt = match traj.grid.kind() {
        GridKind::Equidistant { dt } => dt,
        GridKind::ChebyshevLobatto => return Err(Error::UnsupportedGrid("FFT derivatives need an equidistant grid")),
    };
    if order == 0 || order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    let n = traj.values.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let dw = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let factors: Vec<C64> = (0..n)
        .map(|k| {
            if order % 2 == 1 && n % 2 == 0 && k == n / 2 {
                return C64::new(0.0, 0.0);
            }
            let q = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            C64::new(0.0, q * dw).powi(order as i32) / n as f64
        })
        .collect();
    Ok(traj.map_components(|s| {
        fwd.process(s);
        for (x, f) in s.iter_mut().zip(&factors) {
            *x *= f;
        }
        inv.process(s);
    }))
}

/// `Y_k = f_0 + (-1)^k f_M + 2 Σ_{j=1}^{M-1} f_j cos(πjk/M)` via an FFT of the
/// even extension.
fn dct1(f: &[C64]) -> Vec<C64> {
    let m = f.len() - 1;
    if m == 0 {
        return vec![2.0 * f[0]];
    }
    let mut y: Vec<C64> = f.iter().copied().chain(f[1..m].iter().rev().copied()).collect();
    FftPlanner::new().plan_fft_forward(2 * m).process(&mut y);
    y.truncate(m + 1);
    y
}

/// Chebychev coefficients `c_k`, `f(x) = Σ_{k=0}^{M} c_k T_k(x)`, from values at
/// `x_j = cos(jπ/M)`.
fn lobatto_coefficients(f: &[C64]) -> Vec<C64> {
    let m = f.len() - 1;
    let mut c = dct1(f);
    if m == 0 {
        return vec![f[0]];
    }
    for x in c.iter_mut() {
        *x /= m as f64;
    }
    c[0] *= 0.5;
    c[m] *= 0.5;
    c
}

/// Values at `x_j = cos(jπ/M)` from coefficients.
fn lobatto_synthesis(c: &[C64]) -> Vec<C64> {
    let m = c.len() - 1;
    if m == 0 {
        return vec![c[0]];
    }
    let y = dct1(c);
    (0..=m)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * (y[j] + c[0] + sign * c[m])
        })
        .collect()
}

/// Zeroes the tail of a Chebychev series from the first index after which
/// eight consecutive coefficients sit below rounding level relative to the
/// largest one. Without this, rounding noise in the highest modes dominates
/// third and higher derivatives near the interval ends.
fn chop_noise(c: &mut [C64]) {
    let cmax = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if cmax == 0.0 {
        return;
    }
    let tau = f64::EPSILON * cmax;
    let n = c.len();
    let run = 8.min(n);
    for k in 1..n {
        let end = (k + run).min(n);
        if c[k..end].iter().all(|x| x.norm() <= tau) {
            c[k..].iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            return;
        }
    }
}

/// Coefficients of the derivative of `Σ c_k T_k`.
fn chebyshev_series_derivative(c: &[C64]) -> Vec<C64> {
    let m = c.len() - 1;
    let mut b = vec![C64::new(0.0, 0.0); m + 2];
    for k in (1..=m).rev() {
        b[k - 1] = b[k + 1] + 2.0 * k as f64 * c[k];
    }
    b[0] *= 0.5;
    b.truncate(m + 1);
    b
}

/// Derivative of any order on a Lobatto grid via Chebychev series calculus.
/// Series coefficients at rounding level are discarded before
/// differentiating.
pub fn chebyshev_derivative(traj: &SampledTrajectory, order: usize) -> Result<SampledTrajectory> {
    if traj.grid.kind() != GridKind::ChebyshevLobatto {
        return Err(Error::UnsupportedGrid("Chebychev derivatives need a Lobatto grid"));
    }
    if order == 0 {
        return Err(Error::UnsupportedOrder(order));
    }
    let chain = 2.0 / traj.grid.total_time();
    Ok(traj.map_components(|s| {
        // Ascending times correspond to descending x_j = cos(jπ/M).
        s.reverse();
        let mut c = lobatto_coefficients(s);
        chop_noise(&mut c);
        for _ in 0..order {
            c = chebyshev_series_derivative(&c);
            for x in c.iter_mut() {
                *x *= chain;
            }
        }
        *s = lobatto_synthesis(&c);
        s.reverse();
    }))
}

/// Barycentric interpolation: trigonometric on equidistant grids (period
/// `N Δt`), Chebychev on Lobatto grids. Returns samples unchanged at nodes.
pub fn interpolate(traj: &SampledTrajectory, t: f64) -> Result<StateVector> {
    let total = traj.grid.total_time();
    if !(t >= 0.0 && t <= total) {
        return Err(Error::OutOfRange { t, total });
    }
    let pts = traj.grid.points();
    if let Some(j) = pts.iter().position(|&p| p == t) {
        return Ok(traj.values[j].clone());
    }
    let n = pts.len();
    let weights: Vec<f64> = match traj.grid.kind() {
        GridKind::Equidistant { dt } => {
            let period = n as f64 * dt;
            pts.iter()
                .enumerate()
                .map(|(j, &p)| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let arg = std::f64::consts::PI * (t - p) / period;
                    if n % 2 == 1 { sign / arg.sin() } else { sign / arg.tan() }
                })
                .collect()
        }
        GridKind::ChebyshevLobatto => pts
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let half = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                sign * half / (t - p)
            })
            .collect(),
    };
    let denom: f64 = weights.iter().sum();
    let mut out = StateVector::zeros(traj.dim());
    for (w, v) in weights.iter().zip(&traj.values) {
        out.axpy(C64::new(w / denom, 0.0), v);
    }
    Ok(out)
}
