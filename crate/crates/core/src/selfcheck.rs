//! Oracle-backed invariant checks, runnable from the command line.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chebkernel::{
    bessel_coefficients, build_expansion, cosine_transform_coefficients, external_phase_f0, FmSpec,
    DEFAULT_EPS_SWITCH, DEFAULT_TOLERANCE,
};
use crate::hilbert::{DenseHamiltonian, HamiltonianOp, SpectralBounds, StateVector};
use crate::inhom::{cheb_to_monomial, formal_solution_alt, propagate_step, Propagator, PropagatorConfig};
use crate::oct::models::{build_double_lambda, V0, V6};
use crate::oracle::{duhamel_reference, OracleConfig};
use crate::units::CM_PER_HARTREE;
use crate::timegrid::TimeGrid;
use crate::{ApplyCounter, Result, C64};

/// Deliberate corruption used to prove that a check can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Perturbs one numerically computed Chebychev coefficient.
    CorruptCoefficient,
    /// Drops the highest Taylor coefficient of the source.
    DropSourceTerm,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "corrupt_coefficient" => Ok(Fault::CorruptCoefficient),
            "drop_source_term" => Ok(Fault::DropSourceTerm),
            other => Err(format!("unknown fault '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfCheckReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl SelfCheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

fn outcome(name: &'static str, max_error: f64, tolerance: f64, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed: max_error.is_finite() && max_error <= tolerance, max_error, tolerance, detail }
}

fn failed(name: &'static str, tolerance: f64, err: crate::Error) -> CheckOutcome {
    CheckOutcome { name, passed: false, max_error: f64::INFINITY, tolerance, detail: err.to_string() }
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> DenseHamiltonian {
    let mut m = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    DenseHamiltonian::new(m, None).expect("symmetrized matrix is Hermitian")
}

pub fn random_state(rng: &mut impl Rng, dim: usize) -> StateVector {
    StateVector::from_vec((0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
}

/// Random Hermitian matrix scaled to spectral radius 1.
fn unit_hermitian(rng: &mut impl Rng, dim: usize) -> DenseHamiltonian {
    let h = random_hermitian(rng, dim);
    let b = h.spectral_bounds(0.0);
    let r = b.e_min.abs().max(b.e_max.abs());
    DenseHamiltonian::new(h.h0() * C64::new(1.0 / r, 0.0), None).expect("scaled Hermitian matrix")
}

fn bounds_of(h: &DenseHamiltonian) -> SpectralBounds {
    h.spectral_bounds(0.0)
}

/// Cosine-transform coefficients of `e^{-iHt}` against the Bessel series.
pub fn check_bessel(fault: Option<Fault>) -> CheckOutcome {
    let tol = 1e-12;
    let b = SpectralBounds::new(-0.4, 1.6).expect("valid bounds");
    let n_pts = 256;
    let mut worst = 0.0f64;
    for &x in &[0.1, 1.0, 10.0, 50.0] {
        let t = 2.0 * x / b.delta_e();
        let mut numeric = cosine_transform_coefficients(&FmSpec::new(0, t), &b, n_pts);
        if fault == Some(Fault::CorruptCoefficient) {
            numeric[3] += C64::new(1e-9, 0.0);
        }
        let analytic = bessel_coefficients(n_pts / 2, &b, t);
        let phase = external_phase_f0(&b, t);
        for n in 0..n_pts / 2 {
            worst = worst.max((numeric[n] - phase * analytic[n]).norm());
        }
    }
    outcome("bessel_coefficients", worst, tol, "ΔE·t/2 ∈ {0.1, 1, 10, 50}, first 128 terms".into())
}

/// Single-expansion step against the one-expansion-per-term formal solution.
pub fn check_alternative_form(rng: &mut impl Rng) -> CheckOutcome {
    let tol = 1e-11;
    let name = "alternative_form";
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let m = 1 + inst % 4;
        let dim = rng.gen_range(2..=8);
        let h = random_hermitian(rng, dim);
        let b = bounds_of(&h);
        let psi = random_state(rng, dim);
        let phis: Vec<StateVector> = (0..m).map(|_| random_state(rng, dim)).collect();
        let dt = rng.gen_range(0.2..2.0);
        let counter = ApplyCounter::new();
        let res = build_expansion(&FmSpec::new(m, dt), &b, 1e-13).and_then(|e| {
            let a = propagate_step(&psi, &phis, &h, 0.0, &e, &counter)?;
            let alt = formal_solution_alt(&psi, &phis, &h, 0.0, dt, &b, 1e-13, DEFAULT_EPS_SWITCH, &counter)?;
            Ok(a.max_abs_diff(&alt))
        });
        match res {
            Ok(d) => worst = worst.max(d),
            Err(e) => return failed(name, tol, e),
        }
    }
    outcome(name, worst, tol, "20 random instances, m = 1..4".into())
}

/// Chebychev-to-scaled-monomial coefficient transform at random points.
pub fn check_monomial_transform(rng: &mut impl Rng) -> CheckOutcome {
    let tol = 1e-12;
    let name = "monomial_transform";
    let mut worst = 0.0f64;
    for deg in 0..=10 {
        let a: Vec<StateVector> = (0..=deg).map(|_| StateVector::from_real(&[rng.gen_range(-1.0..1.0)])).collect();
        let b = match cheb_to_monomial(&a) {
            Ok(b) => b,
            Err(e) => return failed(name, tol, e),
        };
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let (mut tp, mut tc) = (1.0, x);
            let mut cheb = a[0][0].re;
            for (k, ak) in a.iter().enumerate().skip(1) {
                if k > 1 {
                    let tn = 2.0 * x * tc - tp;
                    tp = tc;
                    tc = tn;
                }
                cheb += ak[0].re * tc;
            }
            let mut mono = 0.0;
            let mut w = 1.0;
            for (j, bj) in b.iter().enumerate() {
                if j > 0 {
                    w *= x / j as f64;
                }
                mono += bj[0].re * w;
            }
            worst = worst.max((cheb - mono).abs());
        }
    }
    outcome(name, worst, tol, "degrees 0..10, 100 points each".into())
}

/// A degree-(m-1) polynomial source with constant `H` is integrated exactly
/// by one order-`m` step, up to the series truncation. Inputs are of unit
/// size (unit vectors, spectral radius at most 1) so that the truncation
/// tolerance bounds the absolute error.
pub fn check_polynomial_exactness(rng: &mut impl Rng, fault: Option<Fault>) -> CheckOutcome {
    let tol = 10.0 * DEFAULT_TOLERANCE;
    let name = "polynomial_exactness";
    let mut worst = 0.0f64;
    for m in 1..=4 {
        let dim = 6;
        let h = unit_hermitian(rng, dim);
        let psi = random_state(rng, dim).normalized();
        let coeffs: Vec<StateVector> = (0..m).map(|_| random_state(rng, dim).normalized()).collect();
        let dt = 1.0;
        let cs = coeffs.clone();
        let phi = move |t: f64| {
            let mut out = StateVector::zeros(cs[0].len());
            let mut p = 1.0;
            for c in &cs {
                out.axpy(C64::new(p, 0.0), c);
                p *= t;
            }
            out
        };
        // Taylor coefficients at t = 0: Φ^(j)(0) = j! c_j.
        let mut phis: Vec<StateVector> = Vec::with_capacity(m);
        let mut fact = 1.0;
        for (j, c) in coeffs.iter().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            phis.push(c.scaled(C64::new(fact, 0.0)));
        }
        if fault == Some(Fault::DropSourceTerm) {
            phis[m - 1] = StateVector::zeros(dim);
        }
        let res = (|| -> Result<f64> {
            let oracle = OracleConfig { tolerance: 1e-15, ..OracleConfig::default() };
            let want = duhamel_reference(&psi, &phi, &h, &[], dt, &oracle)?;
            let e = build_expansion(&FmSpec::new(m, dt), &bounds_of(&h), DEFAULT_TOLERANCE)?;
            let got = propagate_step(&psi, &phis, &h, 0.0, &e, &ApplyCounter::new())?;
            Ok(got.max_abs_diff(&want))
        })();
        match res {
            Ok(d) => worst = worst.max(d),
            Err(e) => return failed(name, tol, e),
        }
    }
    outcome(name, worst, tol, "m = 1..4, one step of Δt = 1".into())
}

/// Tolerance for long unitary runs. Truncation errors at the default
/// tolerance add up coherently over many steps (about 1e-14 per step).
pub const UNITARITY_TOLERANCE: f64 = 1e-14;

/// Norm drift of a long homogeneous propagation of the double-Λ model under
/// a resonant field, from a random initial state.
pub fn check_unitarity(rng: &mut impl Rng) -> CheckOutcome {
    let tol = 1e-11;
    let name = "unitarity";
    let model = build_double_lambda();
    let h = &model.hamiltonian;
    let n_steps = 10_000;
    let res = (|| -> Result<f64> {
        let grid = TimeGrid::equidistant(n_steps as f64, n_steps)?;
        let cfg = PropagatorConfig::new(1, grid.clone()).with_tolerance(UNITARITY_TOLERANCE);
        let omega = model.transition_cm(V6, V0) / CM_PER_HARTREE;
        let field: Vec<f64> = grid.midpoints().iter().map(|t| 0.01 * (omega * t).cos()).collect();
        let mut prop = Propagator::new(h, &cfg, 0.01)?;
        let mut psi = random_state(rng, h.dim()).normalized();
        let mut worst = 0.0f64;
        for (n, &eps) in field.iter().enumerate() {
            psi = prop.step_homogeneous(&psi, eps, grid.step(n))?;
            worst = worst.max((psi.norm() - 1.0).abs());
        }
        Ok(worst)
    })();
    match res {
        Ok(d) => outcome(name, d, tol, format!("{n_steps} steps of the driven double-Λ model")),
        Err(e) => failed(name, tol, e),
    }
}

/// Runs every check with a seeded generator.
pub fn run_selfcheck(seed: u64, fault: Option<Fault>) -> SelfCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        check_bessel(fault),
        check_alternative_form(&mut rng),
        check_monomial_transform(&mut rng),
        check_polynomial_exactness(&mut rng, fault),
        check_unitarity(&mut rng),
    ];
    SelfCheckReport { seed, checks }
}
