//! Brute-force reference solutions for small dense Hamiltonians.
//!
//! Nothing here is used by the propagators; these functions exist to check
//! them. Exponentials come from a full eigendecomposition, and the Duhamel
//! integral `∫ e^{-iH(T-s)} Φ(s) ds` from composite Gauss–Legendre quadrature
//! whose panel count is doubled until the result stops changing.

use nalgebra::{DMatrix, DVector};

use crate::hilbert::{DenseHamiltonian, HamiltonianOp, StateVector};
use crate::timegrid::{SampledTrajectory, TimeGrid};
use crate::{Error, Result, C64};

const MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    /// Initial panels per field segment.
    pub substeps: usize,
    pub tolerance: f64,
    pub max_doublings: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { nodes: 16, substeps: 1, tolerance: 1e-12, max_doublings: 20 }
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

struct Eigen {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
}

fn eigen(h: &DenseHamiltonian, field: f64) -> Result<Eigen> {
    let n = h.dim();
    if n > MAX_DIM {
        return Err(Error::Argument(format!("oracle limited to dimension {MAX_DIM}, got {n}")));
    }
    let eig = h.matrix(field).symmetric_eigen();
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen);
    }
    Ok(Eigen { values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors })
}

fn to_dv(v: &StateVector) -> DVector<C64> {
    DVector::from_column_slice(v.as_slice())
}

fn from_dv(v: &DVector<C64>) -> StateVector {
    StateVector::from_vec(v.iter().copied().collect())
}

/// `e^{-iH(field)t} ψ` by eigendecomposition.
pub fn dense_expm(h: &DenseHamiltonian, field: f64, t: f64, psi: &StateVector) -> Result<StateVector> {
    if psi.len() != h.dim() {
        return Err(Error::Dimension { expected: h.dim(), got: psi.len() });
    }
    let e = eigen(h, field)?;
    let mut c = e.vectors.adjoint() * to_dv(psi);
    for (k, x) in c.iter_mut().enumerate() {
        *x *= C64::from_polar(1.0, -e.values[k] * t);
    }
    Ok(from_dv(&(&e.vectors * c)))
}

/// `∫_a^b e^{-iH(b-s)} Φ(s) ds` in eigenbasis coordinates, with `panels`
/// Gauss–Legendre panels.
fn duhamel_segment(
    e: &Eigen,
    phi: &dyn Fn(f64) -> StateVector,
    a: f64,
    b: f64,
    panels: usize,
    rule: &(Vec<f64>, Vec<f64>),
) -> DVector<C64> {
    let n = e.values.len();
    let mut acc = DVector::from_element(n, C64::new(0.0, 0.0));
    let width = (b - a) / panels as f64;
    let uh = e.vectors.adjoint();
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let s = lo + 0.5 * width * (x + 1.0);
            let c = &uh * to_dv(&phi(s));
            for k in 0..n {
                acc[k] += c[k] * C64::from_polar(0.5 * width * w, -e.values[k] * (b - s));
            }
        }
    }
    acc
}

fn converged_segment(
    e: &Eigen,
    phi: &dyn Fn(f64) -> StateVector,
    a: f64,
    b: f64,
    cfg: &OracleConfig,
    rule: &(Vec<f64>, Vec<f64>),
) -> Result<DVector<C64>> {
    let mut panels = cfg.substeps.max(1);
    let mut prev = duhamel_segment(e, phi, a, b, panels, rule);
    for _ in 0..cfg.max_doublings {
        panels *= 2;
        let next = duhamel_segment(e, phi, a, b, panels, rule);
        let diff = (&next - &prev).norm();
        if diff <= cfg.tolerance * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(cfg.max_doublings))
}

/// One exact step over `[a, b]` at constant field.
fn exact_step(
    h: &DenseHamiltonian,
    psi: &StateVector,
    phi: &dyn Fn(f64) -> StateVector,
    field: f64,
    a: f64,
    b: f64,
    cfg: &OracleConfig,
    rule: &(Vec<f64>, Vec<f64>),
) -> Result<StateVector> {
    let e = eigen(h, field)?;
    let mut c = e.vectors.adjoint() * to_dv(psi);
    for (k, x) in c.iter_mut().enumerate() {
        *x *= C64::from_polar(1.0, -e.values[k] * (b - a));
    }
    c += converged_segment(&e, phi, a, b, cfg, rule)?;
    Ok(from_dv(&(&e.vectors * c)))
}

/// `ψ(T)` for `dψ/dt = -iH[ε]ψ + Φ(t)`, `ψ(0) = ψ₀`. The field is piecewise
/// constant on `field.len()` equal segments of `[0, T]`.
pub fn duhamel_reference(
    psi0: &StateVector,
    phi: &dyn Fn(f64) -> StateVector,
    h: &DenseHamiltonian,
    field: &[f64],
    total_time: f64,
    cfg: &OracleConfig,
) -> Result<StateVector> {
    if psi0.len() != h.dim() {
        return Err(Error::Dimension { expected: h.dim(), got: psi0.len() });
    }
    let rule = gauss_legendre(cfg.nodes);
    let field: &[f64] = if field.is_empty() { &[0.0] } else { field };
    let seg = total_time / field.len() as f64;
    let mut psi = psi0.clone();
    for (k, &eps) in field.iter().enumerate() {
        let a = k as f64 * seg;
        let b = if k + 1 == field.len() { total_time } else { (k + 1) as f64 * seg };
        psi = exact_step(h, &psi, phi, eps, a, b, cfg, &rule)?;
    }
    Ok(psi)
}

/// Reference solution at every point of `grid`, with `field[n]` acting on
/// step `n` (empty means no field).
pub fn duhamel_trajectory(
    psi0: &StateVector,
    phi: &dyn Fn(f64) -> StateVector,
    h: &DenseHamiltonian,
    field: &[f64],
    grid: &TimeGrid,
    cfg: &OracleConfig,
) -> Result<SampledTrajectory> {
    if psi0.len() != h.dim() {
        return Err(Error::Dimension { expected: h.dim(), got: psi0.len() });
    }
    if !field.is_empty() && field.len() != grid.n_steps() {
        return Err(Error::Dimension { expected: grid.n_steps(), got: field.len() });
    }
    let rule = gauss_legendre(cfg.nodes);
    let pts = grid.points();
    let mut values = vec![psi0.clone()];
    for n in 0..grid.n_steps() {
        let eps = if field.is_empty() { 0.0 } else { field[n] };
        let next = exact_step(h, values.last().unwrap(), phi, eps, pts[n], pts[n + 1], cfg, &rule)?;
        values.push(next);
    }
    SampledTrajectory::new(grid.clone(), values)
}

/// Largest `‖(ψ_{n+1} - ψ_{n-1})/(t_{n+1} - t_{n-1}) + iHψ_n - Φ(t_n)‖` over
/// interior nodes. The field at node `n` is the mean of the adjacent steps.
pub fn residual_check(
    traj: &SampledTrajectory,
    h: &dyn HamiltonianOp,
    field: &[f64],
    phi: &dyn Fn(f64) -> StateVector,
) -> Result<f64> {
    let n = traj.values.len();
    if n < 3 {
        return Err(Error::Argument("residual needs at least three points".into()));
    }
    if !field.is_empty() && field.len() != n - 1 {
        return Err(Error::Dimension { expected: n - 1, got: field.len() });
    }
    let pts = traj.grid.points();
    let mut worst = 0.0f64;
    let mut hpsi = vec![C64::new(0.0, 0.0); h.dim()];
    for k in 1..n - 1 {
        let eps = if field.is_empty() { 0.0 } else { 0.5 * (field[k - 1] + field[k]) };
        h.apply_into(traj.values[k].as_slice(), eps, &mut hpsi);
        let inv = 1.0 / (pts[k + 1] - pts[k - 1]);
        let src = phi(pts[k]);
        let mut r = 0.0;
        for j in 0..h.dim() {
            let d = (traj.values[k + 1][j] - traj.values[k - 1][j]) * inv + C64::new(0.0, 1.0) * hpsi[j] - src[j];
            r += d.norm_sqr();
        }
        worst = worst.max(r.sqrt());
    }
    Ok(worst)
}
