//! Krotov optimal control with an inhomogeneous backward equation.
//!
//! The functional maximized is
//!
//! ```text
//!     J = λ₀⟨φ(T)|D|φ(T)⟩ - ∫ λ_a (ε - ε_r)² dt + λ_b ∫ ⟨φ(t)|G(t)|φ(t)⟩ dt
//! ```
//!
//! The field penalty is reported as the (non-positive) term `J_a`, so that
//! `J = J₀ + J_a + J_b`. The backward state obeys
//! `dψ/dt = -iHψ + λ_b G(t) φ(t)` with `ψ(T) = -λ₀ D φ(T)`, and the field is
//! updated step by step during the following forward sweep:
//!
//! ```text
//!     ε_new(t) = ε_r(t) - Im⟨ψ(t)|μ|φ_new(t)⟩ / λ_a(t)
//! ```
//!
//! with `μ = ∂H/∂ε` and `ε_r` the previous field. The overlap for step `n`
//! is taken at the step start `t_n`.

pub mod models;
pub mod pulses;
pub mod spectrum;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::hilbert::{HamiltonianOp, StateVector};
use crate::inhom::{
    prepare_phi_uniform, propagate, Direction, InhomogeneousTerm, PhiMode, Propagation, Propagator, PropagatorConfig,
    RunReport, Scheme,
};
use crate::timegrid::{GridKind, SampledTrajectory, TimeGrid};
use crate::{Error, Result, C64};

/// Orthogonal projector.
#[derive(Clone, Debug, PartialEq)]
pub enum Projector {
    /// Diagonal in the working basis: keeps the components marked `true`.
    Mask(Vec<bool>),
    /// Onto the span of orthonormal states.
    Span(Vec<StateVector>),
}

impl Projector {
    /// Projector onto basis states `levels` of a `dim`-dimensional space.
    pub fn levels(dim: usize, levels: &[usize]) -> Self {
        let mut mask = vec![false; dim];
        for &l in levels {
            mask[l] = true;
        }
        Projector::Mask(mask)
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Projector::Mask(m) => Some(m.len()),
            Projector::Span(s) => s.first().map(|v| v.len()),
        }
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        match self {
            Projector::Mask(m) => {
                if m.len() != v.len() {
                    return Err(Error::Dimension { expected: m.len(), got: v.len() });
                }
                Ok(StateVector::from_vec(
                    v.iter().zip(m).map(|(a, &keep)| if keep { *a } else { C64::new(0.0, 0.0) }).collect(),
                ))
            }
            Projector::Span(states) => {
                let mut out = StateVector::zeros(v.len());
                for s in states {
                    out.axpy(s.inner(v)?, s);
                }
                Ok(out)
            }
        }
    }

    /// `⟨v|P|v⟩`.
    pub fn expectation(&self, v: &StateVector) -> f64 {
        match self {
            Projector::Mask(m) => v.iter().zip(m).filter(|(_, &keep)| keep).map(|(a, _)| a.norm_sqr()).sum(),
            Projector::Span(states) => states.iter().map(|s| s.inner(v).map(|z| z.norm_sqr()).unwrap_or(f64::NAN)).sum(),
        }
    }

    pub fn matrix(&self, dim: usize) -> Result<DMatrix<C64>> {
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let col = self.apply(&StateVector::basis(dim, k))?;
            for j in 0..dim {
                m[(j, k)] = col[j];
            }
        }
        Ok(m)
    }

    /// Checks that a spanning set is orthonormal (so that `P² = P`) and lives
    /// in `dim` dimensions.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(d) = self.dim() {
            if d != dim {
                return Err(Error::Dimension { expected: dim, got: d });
            }
        }
        if let Projector::Span(states) = self {
            for (i, a) in states.iter().enumerate() {
                for (j, b) in states.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    if (a.inner(b)? - C64::new(want, 0.0)).norm() > 1e-12 {
                        return Err(Error::Argument("projector states are not orthonormal".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Smoothed step `Γ(x) = 1/(1 + e^{-kx})`; `k = ∞` gives the Heaviside
/// function with `Θ(0) = 1/2`.
pub fn smooth_step(k: f64, x: f64) -> f64 {
    if k.is_infinite() {
        return if x > 0.0 {
            1.0
        } else if x < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    1.0 / (1.0 + (-k * x).exp())
}

/// Projector schedule `G(t) = Σ_w g_w(t) P_w` over four consecutive windows
/// separated at `T₁ < T₂ < T₃ < T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeDependentTarget {
    pub projectors: [Projector; 4],
    pub switches: [f64; 3],
    pub total: f64,
    pub k: f64,
}

impl TimeDependentTarget {
    /// Window weights `Γ(T₁-t)`, `Γ(t-T₁)Γ(T₂-t)`, `Γ(t-T₂)Γ(T₃-t)`,
    /// `Γ(t-T₃)Γ(T-t)`.
    pub fn weights(&self, t: f64) -> [f64; 4] {
        let g = |x: f64| smooth_step(self.k, x);
        let [t1, t2, t3] = self.switches;
        [g(t1 - t), g(t - t1) * g(t2 - t), g(t - t2) * g(t3 - t), g(t - t3) * g(self.total - t)]
    }

    pub fn apply(&self, t: f64, v: &StateVector) -> Result<StateVector> {
        let mut out = StateVector::zeros(v.len());
        for (w, p) in self.weights(t).iter().zip(&self.projectors) {
            if *w != 0.0 {
                out.axpy(C64::new(*w, 0.0), &p.apply(v)?);
            }
        }
        Ok(out)
    }

    pub fn expectation(&self, t: f64, v: &StateVector) -> f64 {
        self.weights(t).iter().zip(&self.projectors).map(|(w, p)| w * p.expectation(v)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetSpec {
    /// Final-time projector only; `G = 0`.
    FinalTime { d: Projector },
    /// Final-time projector plus a time-independent allowed subspace.
    StateConstraint { d: Projector, p_allow: Projector },
    /// Projector schedule, no final-time term.
    TimeDependent(TimeDependentTarget),
}

impl TargetSpec {
    pub fn final_projector(&self) -> Option<&Projector> {
        match self {
            TargetSpec::FinalTime { d } | TargetSpec::StateConstraint { d, .. } => Some(d),
            TargetSpec::TimeDependent(_) => None,
        }
    }

    pub fn has_running_term(&self) -> bool {
        !matches!(self, TargetSpec::FinalTime { .. })
    }

    /// `G(t) v`.
    pub fn apply_g(&self, t: f64, v: &StateVector) -> Result<StateVector> {
        match self {
            TargetSpec::FinalTime { .. } => Ok(StateVector::zeros(v.len())),
            TargetSpec::StateConstraint { p_allow, .. } => p_allow.apply(v),
            TargetSpec::TimeDependent(td) => td.apply(t, v),
        }
    }

    /// `⟨v|G(t)|v⟩`.
    pub fn g_expectation(&self, t: f64, v: &StateVector) -> f64 {
        match self {
            TargetSpec::FinalTime { .. } => 0.0,
            TargetSpec::StateConstraint { p_allow, .. } => p_allow.expectation(v),
            TargetSpec::TimeDependent(td) => td.expectation(t, v),
        }
    }

    pub fn validate(&self, dim: usize, total: f64) -> Result<()> {
        match self {
            TargetSpec::FinalTime { d } => d.validate(dim),
            TargetSpec::StateConstraint { d, p_allow } => {
                d.validate(dim)?;
                p_allow.validate(dim)
            }
            TargetSpec::TimeDependent(td) => {
                for p in &td.projectors {
                    p.validate(dim)?;
                }
                let [t1, t2, t3] = td.switches;
                if !(0.0 < t1 && t1 < t2 && t2 < t3 && t3 < td.total) {
                    return Err(Error::Argument(format!("switch times must satisfy 0 < T1 < T2 < T3 < T, got {t1}, {t2}, {t3}, {}", td.total)));
                }
                if (td.total - total).abs() > 1e-9 * total.abs().max(1.0) {
                    return Err(Error::Argument(format!("target horizon {} differs from grid length {total}", td.total)));
                }
                if !(td.k > 0.0) {
                    return Err(Error::Argument(format!("steepness must be positive, got {}", td.k)));
                }
                Ok(())
            }
        }
    }
}

/// Ladder v′6 → v1 → v′7 → v2 of the double-Λ model over four equal
/// subintervals of `[0, T]`.
pub fn build_time_dependent_target(total: f64, k: f64) -> Result<TargetSpec> {
    use models::{V1, V2, V6, V7};
    if !(total > 0.0 && k > 0.0) {
        return Err(Error::Argument(format!("need T > 0 and k > 0, got T={total}, k={k}")));
    }
    let p = |l: usize| Projector::levels(5, &[l]);
    Ok(TargetSpec::TimeDependent(TimeDependentTarget {
        projectors: [p(V6), p(V1), p(V7), p(V2)],
        switches: [0.25 * total, 0.5 * total, 0.75 * total],
        total,
        k,
    }))
}

/// Control field with its reference and weights; `samples`, `reference` and
/// `lambda_a` hold one value per time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    pub samples: Vec<f64>,
    pub reference: Vec<f64>,
    pub lambda_a: Vec<f64>,
    pub lambda_b: f64,
    pub lambda_0: f64,
}

impl ControlField {
    /// Constant `λ_a`; the reference starts equal to the samples.
    pub fn new(samples: Vec<f64>, lambda_a: f64, lambda_b: f64, lambda_0: f64) -> Self {
        let n = samples.len();
        Self { reference: samples.clone(), samples, lambda_a: vec![lambda_a; n], lambda_b, lambda_0 }
    }

    /// Divides `λ_a` by `sin²(πt/T)` (floored at `1e-3`) so that updates
    /// vanish towards both ends of the interval.
    pub fn with_sin2_shape(mut self, grid: &TimeGrid) -> Self {
        let total = grid.total_time();
        for (l, t) in self.lambda_a.iter_mut().zip(grid.midpoints()) {
            let s = (std::f64::consts::PI * t / total).sin().powi(2).max(1e-3);
            *l /= s;
        }
        self
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let n = grid.n_steps();
        for len in [self.samples.len(), self.reference.len(), self.lambda_a.len()] {
            if len != n {
                return Err(Error::Dimension { expected: n, got: len });
            }
        }
        if self.lambda_a.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Argument("λ_a must be positive and finite".into()));
        }
        if self.samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("non-finite field sample".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub iteration: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "J0")]
    pub j0: f64,
    #[serde(rename = "J_a")]
    pub ja: f64,
    #[serde(rename = "J_b")]
    pub jb: f64,
    #[serde(rename = "J_norm")]
    pub j_norm: f64,
}

/// `J₀ = λ₀⟨φ(T)|D|φ(T)⟩`, `J_a = -Σ_n λ_a Δt_n (ε_n - ε_r,n)²` (exact for the
/// piecewise-constant field), `J_b = λ_b ∫⟨φ|G(t)|φ⟩dt` by the trapezoid rule
/// and `J_norm = J/(λ₀ + λ_b T)`, with either weight dropped when its term is
/// absent from the target.
pub fn evaluate_functional(
    phi: &SampledTrajectory,
    field: &ControlField,
    target: &TargetSpec,
    iteration: usize,
) -> Result<FunctionalReport> {
    let grid = &phi.grid;
    field.validate(grid)?;
    let pts = grid.points();
    let total = grid.total_time();
    let j0 = match target.final_projector() {
        Some(d) => field.lambda_0 * d.expectation(phi.values.last().unwrap()),
        None => 0.0,
    };
    let mut ja = 0.0;
    for n in 0..grid.n_steps() {
        let d = field.samples[n] - field.reference[n];
        ja -= field.lambda_a[n] * grid.step(n).abs() * d * d;
    }
    let mut jb = 0.0;
    if target.has_running_term() {
        let g: Vec<f64> = pts.iter().zip(&phi.values).map(|(&t, v)| target.g_expectation(t, v)).collect();
        for n in 0..grid.n_steps() {
            jb += 0.5 * (pts[n + 1] - pts[n]) * (g[n] + g[n + 1]);
        }
        jb *= field.lambda_b;
    }
    let j = j0 + ja + jb;
    let mut denom = 0.0;
    if target.final_projector().is_some() {
        denom += field.lambda_0;
    }
    if target.has_running_term() {
        denom += field.lambda_b * total;
    }
    let j_norm = if denom != 0.0 { j / denom } else { f64::NAN };
    Ok(FunctionalReport { iteration, j, j0, ja, jb, j_norm })
}

/// Homogeneous forward propagation from `phi0` at `t = 0`.
pub fn forward_propagate(
    phi0: &StateVector,
    field: &[f64],
    h: &dyn HamiltonianOp,
    cfg: &PropagatorConfig,
) -> Result<SampledTrajectory> {
    let cfg = cfg.clone().with_direction(Direction::Forward);
    Ok(propagate(phi0, &InhomogeneousTerm::Zero, h, field, &cfg)?.trajectory)
}

/// Terminal condition `ψ(T) = -λ₀ D φ(T)` (zero without a final-time term).
pub fn terminal_state(phi_t: &StateVector, field: &ControlField, target: &TargetSpec) -> Result<StateVector> {
    match target.final_projector() {
        Some(d) => Ok(d.apply(phi_t)?.scaled(C64::new(-field.lambda_0, 0.0))),
        None => Ok(StateVector::zeros(phi_t.len())),
    }
}

/// Solves `dψ/dt = -iH[ε]ψ + λ_b G(t)φ(t)` from `T` back to `0`.
///
/// With [`PhiMode::TaylorCoeffs`] (and for the symmetrical scheme) the
/// source is sampled on the grid and differentiated there. With
/// [`PhiMode::UniformCheb`] the source is sampled inside each step, where
/// `φ` is rebuilt exactly from the grid value at the step start as
/// `e^{-iH[ε_n]τ}φ(t_n)`; those extra propagations are not counted in the
/// report.
pub fn backward_inhomogeneous(
    phi: &SampledTrajectory,
    field: &ControlField,
    target: &TargetSpec,
    h: &dyn HamiltonianOp,
    cfg: &PropagatorConfig,
) -> Result<Propagation> {
    let cfg = cfg.clone().with_direction(Direction::Backward);
    cfg.validate()?;
    let grid = &cfg.grid;
    if phi.grid.points() != grid.points() {
        return Err(Error::Argument("forward trajectory lives on a different time grid".into()));
    }
    field.validate(grid)?;
    target.validate(h.dim(), grid.total_time())?;
    let psi_t = terminal_state(phi.values.last().unwrap(), field, target)?;
    if !target.has_running_term() || field.lambda_b == 0.0 {
        return propagate(&psi_t, &InhomogeneousTerm::Zero, h, &field.samples, &cfg);
    }
    let source = |t: f64, v: &StateVector| -> Result<StateVector> {
        Ok(target.apply_g(t, v)?.scaled(C64::new(field.lambda_b, 0.0)))
    };
    if cfg.phi_mode == PhiMode::TaylorCoeffs || cfg.scheme == Scheme::Symmetrical {
        let values = grid.points().iter().zip(&phi.values).map(|(&t, v)| source(t, v)).collect::<Result<Vec<_>>>()?;
        let sampled = SampledTrajectory::new(grid.clone(), values)?;
        return propagate(&psi_t, &InhomogeneousTerm::Sampled(sampled), h, &field.samples, &cfg);
    }

    let started = std::time::Instant::now();
    let field_max = field.samples.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut prop = Propagator::new(h, &cfg, field_max)?;
    let mut rebuild = Propagator::new(h, &cfg, field_max)?;
    let pts = grid.points();
    let n_steps = grid.n_steps();
    let mut values = vec![StateVector::zeros(h.dim()); n_steps + 1];
    values[n_steps] = psi_t.clone();
    let mut psi = psi_t;
    for n in (0..n_steps).rev() {
        let eps = field.samples[n];
        let dt = pts[n] - pts[n + 1];
        let step = (|| -> Result<StateVector> {
            let phis = prepare_phi_uniform(
                |t| {
                    let tau = t - pts[n];
                    let v = if tau == 0.0 { phi.values[n].clone() } else { rebuild.step_homogeneous(&phi.values[n], eps, tau)? };
                    source(t, &v)
                },
                pts[n + 1],
                dt,
                cfg.m,
                cfg.n_cheb_sample,
            )?;
            prop.step(&psi, &phis, eps, dt)
        })()
        .map_err(|e| e.at_step(n))?;
        psi = step;
        values[n] = psi.clone();
    }
    let mut n_cheb: Vec<usize> = prop.n_cheb_table().into_iter().map(|(_, _, n)| n).collect();
    n_cheb.sort_unstable();
    n_cheb.dedup();
    let report = RunReport {
        scheme: cfg.scheme.to_string(),
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

#[derive(Clone, Debug)]
pub struct KrotovConfig {
    pub propagator: PropagatorConfig,
    pub iterations: usize,
    /// Allowed decrease of `J` between iterations before it is flagged.
    pub monotonic_tolerance: f64,
}

impl KrotovConfig {
    pub fn new(propagator: PropagatorConfig, iterations: usize) -> Self {
        Self { propagator, iterations, monotonic_tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct KrotovResult {
    /// Entry 0 is the guess field.
    pub reports: Vec<FunctionalReport>,
    pub field: ControlField,
    pub trajectory: SampledTrajectory,
    /// Iterations at which `J` dropped by more than the tolerance.
    pub violations: Vec<usize>,
}

impl KrotovResult {
    pub fn monotonic(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn last(&self) -> &FunctionalReport {
        self.reports.last().unwrap()
    }
}

/// Runs `cfg.iterations` Krotov iterations: a backward solve under the old
/// field, then a forward sweep that updates the field step by step with the
/// new forward state. `on_iteration` sees each report as it is produced.
pub fn krotov_iterate(
    phi0: &StateVector,
    field: ControlField,
    target: &TargetSpec,
    h: &dyn HamiltonianOp,
    cfg: &KrotovConfig,
    mut on_iteration: impl FnMut(&FunctionalReport),
) -> Result<KrotovResult> {
    let pcfg = cfg.propagator.clone().with_direction(Direction::Forward);
    pcfg.validate()?;
    let grid = pcfg.grid.clone();
    field.validate(&grid)?;
    target.validate(h.dim(), grid.total_time())?;
    if phi0.len() != h.dim() {
        return Err(Error::Dimension { expected: h.dim(), got: phi0.len() });
    }
    let mut field = field;
    let mut trajectory = forward_propagate(phi0, &field.samples, h, &pcfg)?;
    let first = evaluate_functional(&trajectory, &field, target, 0)?;
    on_iteration(&first);
    let mut reports = vec![first];
    let mut violations = Vec::new();
    let pts = grid.points().to_vec();
    let n_steps = grid.n_steps();
    let field_max = field.samples.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut prop = Propagator::new(h, &pcfg, field_max)?;
    let mut mu_phi = vec![C64::new(0.0, 0.0); h.dim()];

    for it in 1..=cfg.iterations {
        let backward = backward_inhomogeneous(&trajectory, &field, target, h, &cfg.propagator)?.trajectory;
        let reference = field.samples.clone();
        let mut samples = Vec::with_capacity(n_steps);
        let mut values = Vec::with_capacity(n_steps + 1);
        let mut phi = phi0.clone();
        values.push(phi.clone());
        for n in 0..n_steps {
            h.apply_coupling_into(phi.as_slice(), &mut mu_phi);
            let overlap: C64 = backward.values[n].iter().zip(&mu_phi).map(|(a, b)| a.conj() * b).sum();
            let eps = reference[n] - overlap.im / field.lambda_a[n];
            phi = prop.step_homogeneous(&phi, eps, pts[n + 1] - pts[n]).map_err(|e| e.at_step(n))?;
            samples.push(eps);
            values.push(phi.clone());
        }
        field.reference = reference;
        field.samples = samples;
        trajectory = SampledTrajectory::new(grid.clone(), values)?;
        let report = evaluate_functional(&trajectory, &field, target, it)?;
        if report.j < reports.last().unwrap().j - cfg.monotonic_tolerance {
            violations.push(it);
        }
        on_iteration(&report);
        reports.push(report);
    }
    Ok(KrotovResult { reports, field, trajectory, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::DenseHamiltonian;
    use crate::oracle::dense_expm;
    use models::build_double_lambda;
    use pulses::GaussianPulse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_level(omega: f64, dipole: f64) -> DenseHamiltonian {
        DenseHamiltonian::from_real(&[&[0.0, 0.0], &[0.0, omega]], Some(&[&[0.0, dipole], &[dipole, 0.0]])).unwrap()
    }

    #[test]
    fn window_weights() {
        let total = 400.0;
        let sharp = build_time_dependent_target(total, f64::INFINITY).unwrap();
        let TargetSpec::TimeDependent(td) = &sharp else { panic!() };
        assert_eq!(td.weights(150.0), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(td.weights(100.0), [0.5, 0.5, 0.0, 0.0]);
        let steep = build_time_dependent_target(total, 1e4).unwrap();
        let TargetSpec::TimeDependent(td) = &steep else { panic!() };
        let w = td.weights(150.0);
        assert!((w[1] - 1.0).abs() < 1e-6 && w[0] < 1e-6 && w[2] < 1e-6 && w[3] < 1e-6);
        let w = td.weights(100.0);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-12);
        let flat = build_time_dependent_target(crate::units::ps_to_au(5.4), 1e-4).unwrap();
        let TargetSpec::TimeDependent(td) = &flat else { panic!() };
        for t in [0.0, 0.1 * td.total, 0.6 * td.total, td.total] {
            let s: f64 = td.weights(t).iter().sum();
            assert!(s > 0.0 && s < 2.0);
        }
        for t in [0.25 * td.total, 0.52 * td.total, 0.74 * td.total] {
            assert!(td.weights(t).iter().filter(|w| **w > 0.05).count() >= 2, "{t}");
        }
    }

    #[test]
    fn sharp_projector_schedule_is_idempotent() {
        let target = build_time_dependent_target(100.0, f64::INFINITY).unwrap();
        let TargetSpec::TimeDependent(td) = &target else { panic!() };
        for t in [3.0, 30.0, 60.0, 99.0] {
            let mut g = DMatrix::<C64>::zeros(5, 5);
            for (w, p) in td.weights(t).iter().zip(&td.projectors) {
                g += p.matrix(5).unwrap() * C64::new(*w, 0.0);
            }
            assert!((&g * &g - &g).norm() == 0.0);
        }
    }

    #[test]
    fn span_projector() {
        let a = StateVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]);
        let p = Projector::Span(vec![a.clone()]);
        p.validate(3).unwrap();
        let m = p.matrix(3).unwrap();
        assert!((&m * &m - &m).norm() < 1e-15);
        assert!((&m - m.adjoint()).norm() < 1e-15);
        assert!((p.expectation(&a) - 1.0).abs() < 1e-15);
        let bad = Projector::Span(vec![a.scaled(C64::new(2.0, 0.0))]);
        assert!(bad.validate(3).is_err());
    }

    #[test]
    fn functional_matches_slow_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let grid = TimeGrid::equidistant(50.0, 40).unwrap();
        let values: Vec<StateVector> = (0..41)
            .map(|_| StateVector::from_vec((0..5).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()))
            .collect();
        let traj = SampledTrajectory::new(grid.clone(), values.clone()).unwrap();
        let mut field = ControlField::new((0..40).map(|_| rng.gen_range(-1.0..1.0)).collect(), 2.5, 0.3, 0.7);
        field.reference = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = build_time_dependent_target(50.0, 0.5).unwrap();
        let r = evaluate_functional(&traj, &field, &target, 3).unwrap();
        let TargetSpec::TimeDependent(td) = &target else { panic!() };
        let pts = grid.points();
        let mut jb = 0.0;
        for n in 0..40 {
            let f = |k: usize| {
                let w = td.weights(pts[k]);
                let idx = [3, 1, 4, 2];
                (0..4).map(|i| w[i] * values[k][idx[i]].norm_sqr()).sum::<f64>()
            };
            jb += 0.3 * 0.5 * (pts[n + 1] - pts[n]) * (f(n) + f(n + 1));
        }
        let ja: f64 = (0..40).map(|n| -2.5 * 1.25 * (field.samples[n] - field.reference[n]).powi(2)).sum();
        assert!((r.jb - jb).abs() < 1e-12);
        assert!((r.ja - ja).abs() < 1e-12);
        assert_eq!(r.j0, 0.0);
        assert!((r.j_norm - (ja + jb) / (0.3 * 50.0)).abs() < 1e-12);
    }

    #[test]
    fn functional_trivial_cases() {
        let grid = TimeGrid::equidistant(10.0, 10).unwrap();
        let inside = StateVector::basis(5, 0);
        let traj = SampledTrajectory::new(grid.clone(), vec![inside.clone(); 11]).unwrap();
        let field = ControlField::new(vec![0.1; 10], 1.0, 0.2, 1.0);
        let target = TargetSpec::StateConstraint { d: Projector::levels(5, &[0]), p_allow: Projector::levels(5, &[0, 1, 2]) };
        let r = evaluate_functional(&traj, &field, &target, 0).unwrap();
        assert!((r.j_norm - 1.0).abs() < 1e-14);
        let target = build_time_dependent_target(10.0, 1e4).unwrap();
        let r = evaluate_functional(&traj, &ControlField::new(vec![0.0; 10], 1.0, 0.2, 0.0), &target, 0).unwrap();
        assert_eq!(r.jb, 0.0);
    }

    #[test]
    fn forward_eigenstate_and_rabi() {
        let model = build_double_lambda();
        let h = &model.hamiltonian;
        let grid = TimeGrid::equidistant(200.0, 100).unwrap();
        let cfg = PropagatorConfig::new(1, grid.clone()).with_tolerance(1e-15);
        let traj = forward_propagate(&StateVector::basis(5, 1), &[], h, &cfg).unwrap();
        for v in &traj.values {
            assert!((v[1].norm_sqr() - 1.0).abs() < 1e-12, "{}", v[1].norm_sqr() - 1.0);
        }

        // Resonant π-pulse on an isolated two-level system.
        let omega = 0.05;
        let h2 = two_level(omega, 1.0);
        let total = 20000.0;
        let sigma = total / 14.0;
        let p = GaussianPulse::pi_pulse(1.0, total / 2.0, sigma, omega);
        let grid = TimeGrid::equidistant(total, 20000).unwrap();
        let field: Vec<f64> = grid.midpoints().into_iter().map(|t| p.eval(t)).collect();
        let traj = forward_propagate(&StateVector::basis(2, 0), &field, &h2, &PropagatorConfig::new(1, grid)).unwrap();
        assert!((traj.values.last().unwrap()[1].norm_sqr() - 1.0).abs() < 1e-3);
        for v in &traj.values {
            assert!((v.norm() - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn backward_homogeneous_and_first_step() {
        let model = build_double_lambda();
        let h = &model.hamiltonian;
        let grid = TimeGrid::equidistant(200.0, 100).unwrap();
        let cfg = PropagatorConfig::new(2, grid.clone()).with_phi_mode(PhiMode::UniformCheb);
        let phi0 = StateVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.0), C64::new(0.64, 0.0), C64::new(0.0, 0.48), C64::new(0.0, 0.0)]);
        let samples: Vec<f64> = grid.midpoints().iter().map(|t| 1e-3 * (0.05 * t).cos()).collect();
        let phi = forward_propagate(&phi0, &samples, h, &cfg).unwrap();

        let field = ControlField::new(samples.clone(), 1.0, 0.0, 1.0);
        let target = TargetSpec::StateConstraint { d: Projector::levels(5, &[2]), p_allow: Projector::levels(5, &[0, 1, 2]) };
        let back = backward_inhomogeneous(&phi, &field, &target, h, &cfg).unwrap().trajectory;
        let n_t = back.values.last().unwrap().norm();
        assert!((n_t - phi.values.last().unwrap()[2].norm()).abs() < 1e-15, "{n_t}");
        for v in &back.values {
            assert!((v.norm() - n_t).abs() < 1e-11);
        }

        let field = ControlField::new(samples.clone(), 1.0, 0.3, 0.0);
        let target = build_time_dependent_target(200.0, 1e-2).unwrap();
        let back = backward_inhomogeneous(&phi, &field, &target, h, &cfg).unwrap().trajectory;
        assert_eq!(back.values[100].norm(), 0.0);
        // ψ(T-δ) = -∫_{T-δ}^{T} e^{-iH(s-T+δ)} λ_b G φ(s) ds to first order.
        let delta = 2.0;
        let g_t = target.apply_g(200.0, phi.values.last().unwrap()).unwrap().scaled(C64::new(-0.3 * delta, 0.0));
        let diff = back.values[99].max_abs_diff(&g_t);
        assert!(diff < 0.3 * delta * delta * 0.05, "{diff}");
    }

    #[test]
    fn backward_matches_exact_step_solution() {
        // Two-level system with constant field: compare against a fine
        // quadrature of the Duhamel integral computed with dense exponentials.
        let h = two_level(0.3, 0.2);
        let total = 30.0;
        let grid = TimeGrid::equidistant(total, 30).unwrap();
        let samples = vec![0.5; 30];
        let cfg = PropagatorConfig::new(4, grid.clone()).with_phi_mode(PhiMode::UniformCheb);
        let phi0 = StateVector::basis(2, 0);
        let phi = forward_propagate(&phi0, &samples, &h, &cfg).unwrap();
        let field = ControlField::new(samples, 1.0, 0.1, 0.0);
        let target = build_time_dependent_target(total, 0.3).unwrap();
        // Reuse the five-level schedule weights on a two-level system.
        let TargetSpec::TimeDependent(td) = target else { panic!() };
        let td = TimeDependentTarget {
            projectors: [Projector::levels(2, &[1]), Projector::levels(2, &[0]), Projector::levels(2, &[1]), Projector::levels(2, &[0])],
            ..td
        };
        let target = TargetSpec::TimeDependent(td.clone());
        let back = backward_inhomogeneous(&phi, &field, &target, &h, &cfg).unwrap().trajectory;

        let phi_exact = |t: f64| dense_expm(&h, 0.5, t, &phi0).unwrap();
        let src = |t: f64| td.apply(t, &phi_exact(t)).unwrap().scaled(C64::new(0.1, 0.0));
        // ψ(0) = -∫_0^T e^{iHs} Φ(s) ds by composite Gauss-Legendre.
        let (x, w) = crate::oracle::gauss_legendre(20);
        let mut acc = StateVector::zeros(2);
        let panels = 60;
        let hp = total / panels as f64;
        for k in 0..panels {
            for (xi, wi) in x.iter().zip(&w) {
                let s = k as f64 * hp + 0.5 * hp * (xi + 1.0);
                acc.axpy(C64::new(-0.5 * hp * wi, 0.0), &dense_expm(&h, 0.5, -s, &src(s)).unwrap());
            }
        }
        let err = back.values[0].max_abs_diff(&acc);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn krotov_two_level_final_time() {
        let omega = 0.1;
        let h = two_level(omega, 1.0);
        let total = 200.0;
        let grid = TimeGrid::equidistant(total, 400).unwrap();
        let guess: Vec<f64> = grid.midpoints().iter().map(|t| 2e-3 * (std::f64::consts::PI * t / total).sin().powi(2) * (omega * t).cos()).collect();
        let field = ControlField::new(guess, 5.0, 0.0, 1.0).with_sin2_shape(&grid);
        let target = TargetSpec::FinalTime { d: Projector::levels(2, &[1]) };
        let cfg = KrotovConfig::new(PropagatorConfig::new(1, grid), 30);
        let res = krotov_iterate(&StateVector::basis(2, 0), field, &target, &h, &cfg, |_| {}).unwrap();
        assert!(res.monotonic(), "{:?}", res.violations);
        let j0: Vec<f64> = res.reports.iter().map(|r| r.j0).collect();
        for w in j0.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        assert!(j0[0] < 0.05 && *j0.last().unwrap() > 0.9, "{j0:?}");
    }

    #[test]
    fn krotov_gradient_matches_finite_difference() {
        gradient_check(1.0, 0.0);
        gradient_check(0.0, 0.05);
        gradient_check(1.0, 0.05);
    }

    fn gradient_check(lam_0: f64, lam_b: f64) {
        // The first update direction (λ_a → ∞ limit) is the functional gradient.
        let h = two_level(0.1, 1.0);
        let total = 40.0;
        let grid = TimeGrid::equidistant(total, 160).unwrap();
        let guess: Vec<f64> = grid.midpoints().iter().map(|t| 0.02 * (0.1 * t).cos()).collect();
        let target = TargetSpec::StateConstraint { d: Projector::levels(2, &[1]), p_allow: Projector::levels(2, &[0]) };
        let cfg = PropagatorConfig::new(3, grid.clone()).with_phi_mode(PhiMode::UniformCheb);
        let lam_a = 1e9;
        let field = ControlField::new(guess.clone(), lam_a, lam_b, lam_0);
        let phi0 = StateVector::basis(2, 0);
        let res = krotov_iterate(&phi0, field.clone(), &target, &h, &KrotovConfig::new(cfg.clone(), 1), |_| {}).unwrap();
        let objective = |f: &[f64]| {
            let traj = forward_propagate(&phi0, f, &h, &cfg).unwrap();
            let r = evaluate_functional(&traj, &ControlField::new(f.to_vec(), 1.0, lam_b, lam_0), &target, 0).unwrap();
            r.j0 + r.jb
        };
        // The update samples the gradient at the step start, the finite
        // difference sees the whole step, so compare on the gradient scale.
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for n in (5..160).step_by(15) {
            let mut fp = guess.clone();
            let mut fm = guess.clone();
            fp[n] += 1e-5;
            fm[n] -= 1e-5;
            let fd = (objective(&fp) - objective(&fm)) / 2e-5;
            // δε_n = (∂J/∂ε_n) / (2 λ_a Δt_n).
            let predicted = 2.0 * lam_a * grid.step(n) * (res.field.samples[n] - guess[n]);
            worst = worst.max((predicted - fd).abs());
            scale = scale.max(fd.abs());
        }
        assert!(worst < 0.02 * scale, "λ0={lam_0} λb={lam_b}: {worst} vs {scale}");
    }
}
