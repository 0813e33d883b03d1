//! Convergence and cost scans over order `m` and step size.
//!
//! Every cell is an independent run produced by a caller-supplied runner
//! from a [`PropagatorConfig`]; it is compared against a high-accuracy
//! reference run on the populations `|ψ_i(t)|²` at the cell's grid points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::inhom::{PhiMode, Propagation, PropagatorConfig, Scheme};
use crate::timegrid::{interpolate, make_chebyshev_grid, SampledTrajectory, TimeGrid};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanGrid {
    Equidistant,
    Lobatto,
}

/// One cell of the scan: order and either a step (equidistant) or a number
/// of steps (Lobatto).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub m: usize,
    pub dt: Option<f64>,
    pub n_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub orders: Vec<usize>,
    /// Step sizes in a.u. for equidistant scans.
    #[serde(default)]
    pub steps: Vec<f64>,
    /// Step counts for Lobatto scans.
    #[serde(default)]
    pub n_steps: Vec<usize>,
    pub grid: ScanGrid,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub phi_mode: Option<PhiMode>,
    pub total_time: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Reference cell; defaults to the smallest step (largest count) at the
    /// highest order.
    #[serde(default)]
    pub reference: Option<CellSpec>,
}

fn default_scheme() -> Scheme {
    Scheme::Full
}

fn default_threshold() -> f64 {
    1e-6
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::Config("scan needs a non-empty list of orders >= 1".into()));
        }
        if !(self.total_time > 0.0) {
            return Err(Error::Config(format!("total_time must be positive, got {}", self.total_time)));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Config("threshold must be positive".into()));
        }
        match self.grid {
            ScanGrid::Equidistant => {
                if self.steps.is_empty() || self.steps.iter().any(|d| !(*d > 0.0)) {
                    return Err(Error::Config("equidistant scans need a non-empty list of positive steps".into()));
                }
            }
            ScanGrid::Lobatto => {
                if self.n_steps.is_empty() || self.n_steps.contains(&0) {
                    return Err(Error::Config("Lobatto scans need a non-empty list of step counts".into()));
                }
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &m in &self.orders {
            match self.grid {
                ScanGrid::Equidistant => {
                    out.extend(self.steps.iter().map(|&dt| CellSpec { m, dt: Some(dt), n_steps: None }))
                }
                ScanGrid::Lobatto => {
                    out.extend(self.n_steps.iter().map(|&n| CellSpec { m, dt: None, n_steps: Some(n) }))
                }
            }
        }
        out
    }

    pub fn reference_cell(&self) -> CellSpec {
        if let Some(r) = self.reference {
            return r;
        }
        let m = *self.orders.iter().max().unwrap();
        match self.grid {
            ScanGrid::Equidistant => {
                CellSpec { m, dt: Some(self.steps.iter().copied().fold(f64::INFINITY, f64::min)), n_steps: None }
            }
            ScanGrid::Lobatto => CellSpec { m, dt: None, n_steps: Some(*self.n_steps.iter().max().unwrap()) },
        }
    }

    pub fn grid_for(&self, cell: &CellSpec) -> Result<TimeGrid> {
        match (self.grid, cell.dt, cell.n_steps) {
            (ScanGrid::Equidistant, Some(dt), _) => {
                let n = (self.total_time / dt).round();
                if n < 1.0 || ((n * dt - self.total_time) / self.total_time).abs() > 1e-9 {
                    return Err(Error::Config(format!("step {dt} does not divide total_time {}", self.total_time)));
                }
                TimeGrid::equidistant(self.total_time, n as usize)
            }
            (ScanGrid::Lobatto, _, Some(n)) => make_chebyshev_grid(self.total_time, n + 1),
            _ => Err(Error::Config("cell does not match the scan grid kind".into())),
        }
    }

    pub fn config_for(&self, cell: &CellSpec) -> Result<PropagatorConfig> {
        let mut cfg = PropagatorConfig::new(cell.m, self.grid_for(cell)?).with_scheme(self.scheme);
        if let Some(mode) = self.phi_mode {
            cfg = cfg.with_phi_mode(mode);
        }
        if let Some(tol) = self.tolerance {
            cfg = cfg.with_tolerance(tol);
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub m: usize,
    pub dt: Option<f64>,
    pub dt_max: f64,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    #[serde(rename = "N_cheb")]
    pub n_cheb: usize,
    #[serde(rename = "H_applications")]
    pub h_applications: u64,
    pub wall_seconds: f64,
    pub converged: bool,
    pub error_vs_reference: f64,
}

#[derive(Clone, Debug)]
pub struct ScanResult {
    pub reference: ScanRow,
    pub rows: Vec<ScanRow>,
    /// Per cell, `(t, max_i ||ψ_i|² - |ψ_i^ref|²|)` at the cell's grid points.
    pub traces: Vec<Vec<(f64, f64)>>,
}

fn populations(traj: &SampledTrajectory, k: usize) -> Vec<f64> {
    traj.values[k].iter().map(|a| a.norm_sqr()).collect()
}

/// Population deviation of `cell` from `reference` at every point of the
/// cell grid. Nested equidistant grids are compared point by point, anything
/// else through interpolation of the reference.
pub fn deviation_trace(cell: &SampledTrajectory, reference: &SampledTrajectory) -> Result<Vec<(f64, f64)>> {
    let pts = cell.grid.points();
    let rpts = reference.grid.points();
    let nested = if cell.grid.is_equidistant() && reference.grid.is_equidistant() {
        let ratio = cell.grid.dt_max() / reference.grid.dt_max();
        let r = ratio.round();
        if r >= 1.0 && (ratio - r).abs() < 1e-9 * ratio && (cell.grid.n_steps() as f64 * r) as usize == reference.grid.n_steps() {
            Some(r as usize)
        } else {
            None
        }
    } else {
        None
    };
    pts.iter()
        .enumerate()
        .map(|(k, &t)| {
            let want = match nested {
                Some(r) => populations(reference, k * r),
                None => {
                    let idx = rpts.iter().position(|&p| (p - t).abs() <= 1e-12 * reference.grid.total_time());
                    match idx {
                        Some(i) => populations(reference, i),
                        None => interpolate(reference, t)?.iter().map(|a| a.norm_sqr()).collect(),
                    }
                }
            };
            let got = populations(cell, k);
            let dev = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok((t, dev))
        })
        .collect()
}

fn row(cell: &CellSpec, p: &Propagation, err: f64, threshold: f64) -> ScanRow {
    ScanRow {
        m: cell.m,
        dt: p.report.dt,
        dt_max: p.report.dt_max,
        n_t: p.report.n_t,
        n_cheb: p.report.n_cheb_max(),
        h_applications: p.report.h_applications,
        wall_seconds: p.report.wall_seconds,
        converged: err < threshold,
        error_vs_reference: err,
    }
}

/// Runs the reference, then all cells in parallel. Rows come back in spec
/// order. A failing reference aborts the scan; a failing cell is an error
/// too, reported with its order and step.
pub fn run_scan<F>(spec: &ScanSpec, runner: F) -> Result<ScanResult>
where
    F: Fn(&PropagatorConfig) -> Result<Propagation> + Sync,
{
    spec.validate()?;
    let rcell = spec.reference_cell();
    let reference = runner(&spec.config_for(&rcell)?)?;
    let cells = spec.cells();
    let results: Vec<Result<(ScanRow, Vec<(f64, f64)>)>> = cells
        .par_iter()
        .map(|cell| {
            let p = runner(&spec.config_for(cell)?).map_err(|e| {
                Error::Config(format!("scan cell m={}, dt={:?}, N={:?} failed: {e}", cell.m, cell.dt, cell.n_steps))
            })?;
            let trace = deviation_trace(&p.trajectory, &reference.trajectory)?;
            let err = trace.iter().map(|x| x.1).fold(0.0, f64::max);
            Ok((row(cell, &p, err, spec.threshold), trace))
        })
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut traces = Vec::with_capacity(cells.len());
    for r in results {
        let (row, trace) = r?;
        rows.push(row);
        traces.push(trace);
    }
    Ok(ScanResult { reference: row(&rcell, &reference, 0.0, spec.threshold), rows, traces })
}
