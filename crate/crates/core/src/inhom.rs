//! Order-`m` propagation of `dψ/dt = -iHψ + Φ(t)`.
//!
//! Within a step of length `Δt` the source is represented by its local
//! Taylor coefficients `Φ^(j)` at the step start, `Φ(τ) ≈ Σ_{j<m} τ^j/j! Φ^(j)`.
//! They are obtained either from derivatives on the global time grid
//! ([`PhiMode::TaylorCoeffs`]) or from a Chebychev fit over the step that is
//! converted to monomials ([`PhiMode::UniformCheb`]). The step itself is
//!
//! ```text
//!     ψ(t+Δt) = Σ_{j<m} Δt^j/j! λ^(j) + f_m(H) λ^(m)
//! ```
//!
//! with a single expansion of `f_m`, costing `N_cheb + m` Hamiltonian
//! applications. Two further schemes exist for comparison: the
//! Taylor-approximate step `e^{-iHΔt}ψ + Σ_j Δt^{j+1}/(j+1)! Φ^(j)` and the
//! symmetrical step, which averages `Φ` over the step and works in the
//! eigenbasis of a dense `H`.
//!
//! The field is piecewise constant: step `n`, between `t_n` and `t_{n+1}`,
//! uses `field[n]`, conventionally sampled at the step midpoint.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chebkernel::{
    apply_expansion, build_expansion, fm_scalar, ChebyshevExpansion, FmSpec, DEFAULT_EPS_SWITCH,
    DEFAULT_TOLERANCE,
};
use crate::hilbert::{HamiltonianOp, SpectralBounds, StateVector};
use crate::timegrid::{chebyshev_derivative, fft_derivative, interpolate, GridKind, SampledTrajectory, TimeGrid};
use crate::{ApplyCounter, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Full,
    TaylorApprox,
    Symmetrical,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Full => "full",
            Scheme::TaylorApprox => "taylor_approx",
            Scheme::Symmetrical => "symmetrical",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMode {
    TaylorCoeffs,
    UniformCheb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug)]
pub struct PropagatorConfig {
    pub m: usize,
    pub scheme: Scheme,
    pub phi_mode: PhiMode,
    pub grid: TimeGrid,
    pub tolerance: f64,
    pub eps_switch: f64,
    /// Samples per step for the uniform fit of `Φ`.
    pub n_cheb_sample: usize,
    pub direction: Direction,
}

impl PropagatorConfig {
    /// Full scheme, forward in time, with the default `Φ` representation for
    /// the grid kind and order.
    pub fn new(m: usize, grid: TimeGrid) -> Self {
        let phi_mode = match grid.kind() {
            GridKind::Equidistant { .. } if m > 3 => PhiMode::UniformCheb,
            _ => PhiMode::TaylorCoeffs,
        };
        Self {
            m,
            scheme: Scheme::Full,
            phi_mode,
            grid,
            tolerance: DEFAULT_TOLERANCE,
            eps_switch: DEFAULT_EPS_SWITCH,
            n_cheb_sample: m,
            direction: Direction::Forward,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_phi_mode(mut self, phi_mode: PhiMode) -> Self {
        self.phi_mode = phi_mode;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Argument("order m must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Argument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.eps_switch > 0.0) {
            return Err(Error::Argument(format!("eps_switch must be positive, got {}", self.eps_switch)));
        }
        if self.scheme == Scheme::TaylorApprox && self.phi_mode != PhiMode::TaylorCoeffs {
            return Err(Error::Argument("the Taylor-approximate scheme needs Taylor coefficients of Φ".into()));
        }
        if self.phi_mode == PhiMode::UniformCheb && self.n_cheb_sample < self.m {
            return Err(Error::Argument(format!(
                "n_cheb_sample ({}) must be at least m ({})",
                self.n_cheb_sample, self.m
            )));
        }
        if self.phi_mode == PhiMode::TaylorCoeffs && self.grid.is_equidistant() && self.m > 3 {
            return Err(Error::UnsupportedOrder(self.m - 1));
        }
        Ok(())
    }
}

/// The source term `Φ(t)`.
#[derive(Clone)]
pub enum InhomogeneousTerm {
    Zero,
    Analytic(Arc<dyn Fn(f64) -> StateVector + Send + Sync>),
    Sampled(SampledTrajectory),
}

impl fmt::Debug for InhomogeneousTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InhomogeneousTerm::Zero => f.write_str("Zero"),
            InhomogeneousTerm::Analytic(_) => f.write_str("Analytic(..)"),
            InhomogeneousTerm::Sampled(s) => write!(f, "Sampled({} points)", s.values.len()),
        }
    }
}

impl InhomogeneousTerm {
    pub fn analytic(f: impl Fn(f64) -> StateVector + Send + Sync + 'static) -> Self {
        InhomogeneousTerm::Analytic(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InhomogeneousTerm::Zero)
    }

    /// `Φ(t)` at an arbitrary time; sampled terms are interpolated.
    pub fn eval(&self, t: f64, dim: usize) -> Result<StateVector> {
        match self {
            InhomogeneousTerm::Zero => Ok(StateVector::zeros(dim)),
            InhomogeneousTerm::Analytic(f) => Ok(f(t)),
            InhomogeneousTerm::Sampled(s) => interpolate(s, t),
        }
    }

    /// Samples on `grid`; sampled terms must already live there.
    pub fn on_grid(&self, grid: &TimeGrid, dim: usize) -> Result<SampledTrajectory> {
        match self {
            InhomogeneousTerm::Zero => Ok(SampledTrajectory::from_fn(grid.clone(), |_| StateVector::zeros(dim))),
            InhomogeneousTerm::Analytic(f) => Ok(SampledTrajectory::from_fn(grid.clone(), |t| f(t))),
            InhomogeneousTerm::Sampled(s) => {
                if s.grid.points() != grid.points() {
                    return Err(Error::Argument("sampled source lives on a different time grid".into()));
                }
                Ok(s.clone())
            }
        }
    }
}

/// Transforms Chebychev coefficients `A_k` of `Σ A_k T_k(x)` into `B_j` with
/// `Σ A_k T_k(x) = Σ_j B_j x^j/j!`.
pub fn cheb_to_monomial(a: &[StateVector]) -> Result<Vec<StateVector>> {
    let n = a.len();
    if n == 0 {
        return Err(Error::Argument("no Chebychev coefficients given".into()));
    }
    let dim = a[0].len();
    // c[k][j]: coefficient of x^j/j! in T_k.
    let mut c: Vec<Vec<f64>> = Vec::with_capacity(n);
    c.push(vec![1.0]);
    if n > 1 {
        c.push(vec![0.0, 1.0]);
    }
    for k in 1..n.saturating_sub(1) {
        let mut next = vec![0.0; k + 2];
        next[0] = -c[k - 1][0];
        for j in 1..=k + 1 {
            let from_prev = if j - 1 < c[k].len() { 2.0 * j as f64 * c[k][j - 1] } else { 0.0 };
            let from_prev2 = if j < c[k - 1].len() { c[k - 1][j] } else { 0.0 };
            next[j] = from_prev - from_prev2;
        }
        c.push(next);
    }
    let mut b = vec![StateVector::zeros(dim); n];
    for (k, ak) in a.iter().enumerate() {
        for (j, ckj) in c[k].iter().enumerate() {
            if *ckj != 0.0 {
                b[j].axpy(C64::new(*ckj, 0.0), ak);
            }
        }
    }
    Ok(b)
}

/// Taylor coefficients of `Φ` at every grid point: entry `j` holds the `j`-th
/// time derivative, `j < m`.
pub fn prepare_phi_taylor(phi: &SampledTrajectory, m: usize) -> Result<Vec<SampledTrajectory>> {
    let mut out = vec![phi.clone()];
    for j in 1..m {
        let d = match phi.grid.kind() {
            GridKind::Equidistant { .. } => fft_derivative(phi, j)?,
            GridKind::ChebyshevLobatto => chebyshev_derivative(phi, j)?,
        };
        out.push(d);
    }
    Ok(out)
}

/// Local Taylor coefficients of `Φ` over `[t_start, t_start + dt]` from a
/// Chebychev fit through `n_samples` roots. `dt` may be negative.
pub fn prepare_phi_uniform(
    mut sample: impl FnMut(f64) -> Result<StateVector>,
    t_start: f64,
    dt: f64,
    m: usize,
    n_samples: usize,
) -> Result<Vec<StateVector>> {
    if m == 0 || n_samples < m {
        return Err(Error::Argument(format!("need 1 <= m <= n_samples, got m={m}, n={n_samples}")));
    }
    let ns = n_samples as f64;
    let thetas: Vec<f64> = (0..n_samples).map(|k| std::f64::consts::PI * (k as f64 + 0.5) / ns).collect();
    let samples: Vec<StateVector> = thetas
        .iter()
        .map(|th| sample(t_start + 0.5 * dt * (th.cos() + 1.0)))
        .collect::<Result<_>>()?;
    let dim = samples[0].len();
    let mut cheb = vec![StateVector::zeros(dim); m];
    for (j, cj) in cheb.iter_mut().enumerate() {
        let w = if j == 0 { 1.0 / ns } else { 2.0 / ns };
        for (th, s) in thetas.iter().zip(&samples) {
            cj.axpy(C64::new(w * (j as f64 * th).cos(), 0.0), s);
        }
    }
    let b = cheb_to_monomial(&cheb)?;
    // Φ(τ) = Σ_i B_i x^i/i! with x = aτ - 1, so the j-th derivative at τ=0 is
    // a^j Σ_{i>=j} B_i (-1)^{i-j}/(i-j)!.
    let a = 2.0 / dt;
    let mut out = vec![StateVector::zeros(dim); m];
    for (j, o) in out.iter_mut().enumerate() {
        let mut fact = 1.0;
        for (d, bi) in b.iter().enumerate().skip(j) {
            let k = d - j;
            if k > 0 {
                fact *= k as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            o.axpy(C64::new(sign / fact, 0.0), bi);
        }
        o.scale(C64::new(a.powi(j as i32), 0.0));
    }
    Ok(out)
}

fn check_phis(phis: &[StateVector], m: usize, dim: usize) -> Result<()> {
    if phis.len() != m {
        return Err(Error::Dimension { expected: m, got: phis.len() });
    }
    for p in phis {
        if p.len() != dim {
            return Err(Error::Dimension { expected: dim, got: p.len() });
        }
    }
    Ok(())
}

/// `λ^(0) = ψ₀`, `λ^(j) = -iHλ^(j-1) + Φ^(j-1)` for `j = 1..=m`.
pub fn lambda_recursion(
    h: &dyn HamiltonianOp,
    field: f64,
    psi0: &StateVector,
    phis: &[StateVector],
    m: usize,
    counter: &ApplyCounter,
) -> Result<Vec<StateVector>> {
    check_phis(phis, m, psi0.len())?;
    let mut lambdas = Vec::with_capacity(m + 1);
    lambdas.push(psi0.clone());
    for phi in phis {
        let mut next = crate::apply_hamiltonian(h, lambdas.last().unwrap(), field, counter)?;
        next.scale(C64::new(0.0, -1.0));
        next.axpy(C64::new(1.0, 0.0), phi);
        lambdas.push(next);
    }
    Ok(lambdas)
}

/// One step of the full order-`m` scheme; `exp` is the expansion of `f_m`
/// for this step, with `m = phis.len()`.
pub fn propagate_step(
    psi: &StateVector,
    phis: &[StateVector],
    h: &dyn HamiltonianOp,
    field: f64,
    exp: &ChebyshevExpansion,
    counter: &ApplyCounter,
) -> Result<StateVector> {
    let m = exp.m;
    if m == 0 {
        return Err(Error::Argument("full scheme needs an expansion of f_m with m >= 1".into()));
    }
    let lambdas = lambda_recursion(h, field, psi, phis, m, counter)?;
    let mut out = apply_expansion(exp, h, field, &lambdas[m], counter)?;
    let mut w = 1.0;
    for (j, l) in lambdas[..m].iter().enumerate() {
        if j > 0 {
            w *= exp.t / j as f64;
        }
        out.axpy(C64::new(w, 0.0), l);
    }
    Ok(out)
}

/// `e^{-iHΔt}ψ₀ + Σ_j f_{j+1}(H) Φ^(j)` with one expansion per term.
#[allow(clippy::too_many_arguments)]
pub fn formal_solution_alt(
    psi: &StateVector,
    phis: &[StateVector],
    h: &dyn HamiltonianOp,
    field: f64,
    dt: f64,
    bounds: &SpectralBounds,
    tolerance: f64,
    eps_switch: f64,
    counter: &ApplyCounter,
) -> Result<StateVector> {
    check_phis(phis, phis.len(), psi.len())?;
    let f0 = build_expansion(&FmSpec::new(0, dt).with_eps_switch(eps_switch), bounds, tolerance)?;
    let mut out = apply_expansion(&f0, h, field, psi, counter)?;
    for (j, phi) in phis.iter().enumerate() {
        let e = build_expansion(&FmSpec::new(j + 1, dt).with_eps_switch(eps_switch), bounds, tolerance)?;
        out.axpy(C64::new(1.0, 0.0), &apply_expansion(&e, h, field, phi, counter)?);
    }
    Ok(out)
}

/// `e^{-iHΔt}ψ₀ + Σ_j Δt^{j+1}/(j+1)! Φ^(j)`; `exp` expands `f_0`.
pub fn propagate_step_taylor_approx(
    psi: &StateVector,
    phis: &[StateVector],
    h: &dyn HamiltonianOp,
    field: f64,
    exp: &ChebyshevExpansion,
    counter: &ApplyCounter,
) -> Result<StateVector> {
    if exp.m != 0 {
        return Err(Error::Argument("Taylor-approximate step needs the f_0 expansion".into()));
    }
    check_phis(phis, phis.len(), psi.len())?;
    let mut out = apply_expansion(exp, h, field, psi, counter)?;
    let mut w = 1.0;
    for (j, phi) in phis.iter().enumerate() {
        w *= exp.t / (j + 1) as f64;
        out.axpy(C64::new(w, 0.0), phi);
    }
    Ok(out)
}

/// Symmetrical step with `Φ̄ = (Φ_a + Φ_b)/2`, evaluated in the eigenbasis of
/// the dense `H(field)`.
pub fn propagate_step_symmetrical(
    psi: &StateVector,
    phi_a: &StateVector,
    phi_b: &StateVector,
    h: &dyn HamiltonianOp,
    field: f64,
    dt: f64,
    eps_switch: f64,
) -> Result<StateVector> {
    let dense = h.as_dense().ok_or(Error::RequiresDense)?;
    check_phis(std::slice::from_ref(phi_a), 1, psi.len())?;
    check_phis(std::slice::from_ref(phi_b), 1, psi.len())?;
    let eig = dense.matrix(field).symmetric_eigen();
    let u = &eig.eigenvectors;
    let mut phi_bar = phi_a.clone();
    phi_bar.axpy(C64::new(1.0, 0.0), phi_b);
    phi_bar.scale(C64::new(0.5, 0.0));
    let cp = u.adjoint() * DVector::from_column_slice(psi.as_slice());
    let cf = u.adjoint() * DVector::from_column_slice(phi_bar.as_slice());
    let f0 = FmSpec::new(0, dt);
    let f1 = FmSpec::new(1, dt).with_eps_switch(eps_switch);
    let mut coords = cp.clone();
    for k in 0..coords.len() {
        let z = C64::new(eig.eigenvalues[k], 0.0);
        coords[k] = fm_scalar(&f0, z) * cp[k] + fm_scalar(&f1, z) * cf[k];
    }
    Ok(StateVector::from_vec((u * coords).iter().copied().collect()))
}

fn dt_key(m: usize, dt: f64) -> (usize, String) {
    (m, format!("{dt:.12e}"))
}

/// Step engine holding spectral bounds, cached expansions and the
/// Hamiltonian-application counter of one run.
pub struct Propagator<'a> {
    h: &'a dyn HamiltonianOp,
    m: usize,
    scheme: Scheme,
    tolerance: f64,
    eps_switch: f64,
    field_max: f64,
    bounds: SpectralBounds,
    cache: HashMap<(usize, String), Arc<ChebyshevExpansion>>,
    counter: ApplyCounter,
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a dyn HamiltonianOp, cfg: &PropagatorConfig, field_max: f64) -> Result<Self> {
        cfg.validate()?;
        let field_max = field_max.abs();
        Ok(Self {
            h,
            m: cfg.m,
            scheme: cfg.scheme,
            tolerance: cfg.tolerance,
            eps_switch: cfg.eps_switch,
            field_max,
            bounds: h.spectral_bounds(field_max),
            cache: HashMap::new(),
            counter: ApplyCounter::new(),
        })
    }

    /// Fixes the spectral interval instead of deriving it from `H`.
    pub fn with_bounds(mut self, bounds: SpectralBounds) -> Self {
        self.bounds = bounds;
        self.field_max = f64::INFINITY;
        self.cache.clear();
        self
    }

    pub fn counter(&self) -> &ApplyCounter {
        &self.counter
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Widens the spectral bounds if `field` exceeds the range they were
    /// built for.
    fn admit_field(&mut self, field: f64) -> Result<()> {
        if !field.is_finite() {
            return Err(Error::Argument(format!("non-finite field value {field}")));
        }
        if field.abs() > self.field_max {
            self.field_max = 1.25 * field.abs();
            self.bounds = self.h.spectral_bounds(self.field_max);
            self.cache.clear();
        }
        Ok(())
    }

    pub fn expansion(&mut self, m: usize, dt: f64) -> Result<Arc<ChebyshevExpansion>> {
        let key = dt_key(m, dt);
        if let Some(e) = self.cache.get(&key) {
            return Ok(e.clone());
        }
        let spec = FmSpec::new(m, dt).with_eps_switch(self.eps_switch);
        let e = Arc::new(build_expansion(&spec, &self.bounds, self.tolerance)?);
        self.cache.insert(key, e.clone());
        Ok(e)
    }

    /// `(Δt, N_cheb)` of every cached expansion, sorted by `Δt`.
    pub fn n_cheb_table(&self) -> Vec<(f64, usize, usize)> {
        let mut v: Vec<(f64, usize, usize)> = self.cache.values().map(|e| (e.t, e.m, e.n_cheb())).collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        v
    }

    /// Standard Chebychev step `e^{-iHΔt}ψ`.
    pub fn step_homogeneous(&mut self, psi: &StateVector, field: f64, dt: f64) -> Result<StateVector> {
        self.admit_field(field)?;
        let e = self.expansion(0, dt)?;
        apply_expansion(&e, self.h, field, psi, &self.counter)
    }

    /// One step of the configured scheme from Taylor coefficients of `Φ` at
    /// the step start.
    pub fn step(&mut self, psi: &StateVector, phis: &[StateVector], field: f64, dt: f64) -> Result<StateVector> {
        self.admit_field(field)?;
        match self.scheme {
            Scheme::Full => {
                let e = self.expansion(self.m, dt)?;
                propagate_step(psi, phis, self.h, field, &e, &self.counter)
            }
            Scheme::TaylorApprox => {
                let e = self.expansion(0, dt)?;
                propagate_step_taylor_approx(psi, phis, self.h, field, &e, &self.counter)
            }
            Scheme::Symmetrical => Err(Error::Argument("symmetrical steps need endpoint values of Φ".into())),
        }
    }

    pub fn step_symmetrical(
        &mut self,
        psi: &StateVector,
        phi_a: &StateVector,
        phi_b: &StateVector,
        field: f64,
        dt: f64,
    ) -> Result<StateVector> {
        self.admit_field(field)?;
        propagate_step_symmetrical(psi, phi_a, phi_b, self.h, field, dt, self.eps_switch)
    }
}

/// Run summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: String,
    pub m: usize,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    pub dt: Option<f64>,
    pub dt_max: f64,
    #[serde(rename = "N_cheb")]
    pub n_cheb: Vec<usize>,
    #[serde(rename = "H_applications")]
    pub h_applications: u64,
    pub wall_seconds: f64,
}

impl RunReport {
    /// Largest `N_cheb` over all step lengths.
    pub fn n_cheb_max(&self) -> usize {
        self.n_cheb.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct Propagation {
    pub trajectory: SampledTrajectory,
    pub report: RunReport,
}

/// Midpoint samples of a field function, one per step of `grid`.
pub fn midpoint_field(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    grid.midpoints().into_iter().map(f).collect()
}

/// Propagates over the whole grid. `psi0` is the state at `t = 0` for
/// forward runs and at `t = T` for backward runs; `field` holds one value per
/// step (empty means no field). The returned trajectory is in ascending time.
pub fn propagate(
    psi0: &StateVector,
    phi: &InhomogeneousTerm,
    h: &dyn HamiltonianOp,
    field: &[f64],
    cfg: &PropagatorConfig,
) -> Result<Propagation> {
    cfg.validate()?;
    let grid = &cfg.grid;
    let n_steps = grid.n_steps();
    let dim = h.dim();
    if psi0.len() != dim {
        return Err(Error::Dimension { expected: dim, got: psi0.len() });
    }
    if !field.is_empty() && field.len() != n_steps {
        return Err(Error::Dimension { expected: n_steps, got: field.len() });
    }
    let field_at = |n: usize| if field.is_empty() { 0.0 } else { field[n] };
    let field_max = field.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let started = Instant::now();
    let mut prop = Propagator::new(h, cfg, field_max)?;

    let pts = grid.points();
    let taylor = match (phi, cfg.scheme, cfg.phi_mode) {
        (InhomogeneousTerm::Zero, _, _) | (_, Scheme::Symmetrical, _) | (_, _, PhiMode::UniformCheb) => None,
        _ => Some(prepare_phi_taylor(&phi.on_grid(grid, dim)?, cfg.m)?),
    };
    let endpoint_values = match (phi, cfg.scheme) {
        (InhomogeneousTerm::Zero, _) => None,
        (_, Scheme::Symmetrical) => Some(phi.on_grid(grid, dim)?),
        _ => None,
    };

    let mut values = vec![StateVector::zeros(dim); n_steps + 1];
    let order: Vec<usize> = match cfg.direction {
        Direction::Forward => (0..n_steps).collect(),
        Direction::Backward => (0..n_steps).rev().collect(),
    };
    let (mut cur_idx, mut psi) = match cfg.direction {
        Direction::Forward => (0, psi0.clone()),
        Direction::Backward => (n_steps, psi0.clone()),
    };
    values[cur_idx] = psi.clone();
    for n in order {
        let (start, end) = match cfg.direction {
            Direction::Forward => (n, n + 1),
            Direction::Backward => (n + 1, n),
        };
        debug_assert_eq!(start, cur_idx);
        let dt = pts[end] - pts[start];
        let eps = field_at(n);
        let next = (|| -> Result<StateVector> {
            if phi.is_zero() {
                return prop.step_homogeneous(&psi, eps, dt);
            }
            match cfg.scheme {
                Scheme::Symmetrical => {
                    let v = endpoint_values.as_ref().unwrap();
                    prop.step_symmetrical(&psi, &v.values[start], &v.values[end], eps, dt)
                }
                _ => {
                    let phis = match &taylor {
                        Some(d) => d.iter().map(|s| s.values[start].clone()).collect(),
                        None => prepare_phi_uniform(|t| phi.eval(t, dim), pts[start], dt, cfg.m, cfg.n_cheb_sample)?,
                    };
                    prop.step(&psi, &phis, eps, dt)
                }
            }
        })()
        .map_err(|e| e.at_step(n))?;
        if !next.is_finite() {
            return Err(Error::Step { step: n, source: Box::new(Error::Argument("non-finite state".into())) });
        }
        psi = next;
        cur_idx = end;
        values[cur_idx] = psi.clone();
    }

    let mut n_cheb: Vec<usize> = prop.n_cheb_table().into_iter().map(|(_, _, n)| n).collect();
    n_cheb.sort_unstable();
    n_cheb.dedup();
    let report = RunReport {
        scheme: if phi.is_zero() { "homogeneous".into() } else { cfg.scheme.to_string() },
        m: cfg.m,
        n_t: n_steps,
        dt: match grid.kind() {
            GridKind::Equidistant { dt } => Some(dt),
            GridKind::ChebyshevLobatto => None,
        },
        dt_max: grid.dt_max(),
        n_cheb,
        h_applications: prop.counter().get(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(Propagation { trajectory: SampledTrajectory::new(grid.clone(), values)?, report })
}
