//! The propagator functions `f_m` and their Chebychev expansions.
//!
//! Coefficients `a_n` always refer to `T_n(H_norm)`, the Chebychev
//! polynomials of the renormalized Hamiltonian. The operator recursion in
//! [`apply_expansion`] produces `φ_n = (-i)^n T_n(H_norm) v`, so the sum is
//! accumulated as `Σ a_n i^n φ_n`.

use rustfft::FftPlanner;

use crate::hilbert::{HamiltonianOp, SpectralBounds, StateVector};
use crate::{ApplyCounter, Error, Result, C64};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Below this `|z t|` the series branch of `f_m` is used. Cancellation in the
/// closed form costs roughly `m! e^{|zt|} / |zt|^m` ulps, so the series is
/// preferred over the whole unit disc.
pub const DEFAULT_EPS_SWITCH: f64 = 1.0;

const MAX_SAMPLE_POINTS: usize = 1 << 20;

/// Parameters of `f_m(z) = (-iz)^{-m} (e^{-izt} - Σ_{j<m} (-izt)^j/j!)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FmSpec {
    pub m: usize,
    pub t: f64,
    pub eps_switch: f64,
}

impl FmSpec {
    pub fn new(m: usize, t: f64) -> Self {
        Self { m, t, eps_switch: DEFAULT_EPS_SWITCH }
    }

    pub fn with_eps_switch(mut self, eps_switch: f64) -> Self {
        self.eps_switch = eps_switch;
        self
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Closed form of `f_m`, exact in exact arithmetic for `z t != 0`.
pub fn fm_direct(m: usize, t: f64, z: C64) -> C64 {
    let w = C64::new(0.0, -1.0) * z * t;
    let mut partial = C64::new(0.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    for j in 0..m {
        partial += term;
        term = term * w / (j + 1) as f64;
    }
    (w.exp() - partial) / (C64::new(0.0, -1.0) * z).powi(m as i32)
}

/// Series form `t^m Σ_j (-izt)^j/(j+m)!`.
pub fn fm_taylor(m: usize, t: f64, z: C64) -> C64 {
    let w = C64::new(0.0, -1.0) * z * t;
    let mut term = C64::new(1.0 / factorial(m), 0.0);
    let mut sum = term;
    for j in 1..40 {
        term = term * w / (j + m) as f64;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum * t.powi(m as i32)
}

pub fn fm_scalar(spec: &FmSpec, z: C64) -> C64 {
    if spec.m == 0 {
        return (C64::new(0.0, -1.0) * z * spec.t).exp();
    }
    if (z * spec.t).norm() > spec.eps_switch {
        fm_direct(spec.m, spec.t, z)
    } else {
        fm_taylor(spec.m, spec.t, z)
    }
}

/// Bessel functions `J_0(x)..J_{n_max}(x)` by Miller's backward recurrence,
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_all(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = n_max.max(ax.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / ax * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let idx = k - 1;
        if idx <= n_max {
            out[idx] = j_cur;
        }
        if idx % 2 == 0 {
            norm += if idx == 0 { j_cur } else { 2.0 * j_cur };
        }
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Truncated Chebychev series of `f_m` on a spectral interval.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevExpansion {
    pub coeffs: Vec<C64>,
    pub bounds: SpectralBounds,
    pub t: f64,
    pub m: usize,
    pub phase_external: C64,
}

impl ChebyshevExpansion {
    /// Number of Hamiltonian applications per use.
    pub fn n_cheb(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Scalar value of the truncated series at energy `e`.
    pub fn eval(&self, e: f64) -> C64 {
        let x = 2.0 * (e - self.bounds.e_min) / self.bounds.delta_e() - 1.0;
        let (mut t_prev, mut t_cur) = (1.0, x);
        let mut sum = self.coeffs[0];
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            if n > 1 {
                let t_next = 2.0 * x * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = t_next;
            }
            sum += c * t_cur;
        }
        sum * self.phase_external
    }
}

/// Index of the last coefficient with modulus at least `tol`.
fn last_significant(coeffs: &[C64], tol: f64) -> Option<usize> {
    coeffs.iter().rposition(|c| c.norm() >= tol)
}

/// The requested tolerance, raised to the rounding floor of sampled
/// coefficients when `f_m` itself is large (`|f_m| ~ t^m/m!` for long steps).
fn effective_tolerance(raw: &[C64], tolerance: f64) -> f64 {
    let scale = raw.iter().map(|c| c.norm()).fold(0.0, f64::max);
    tolerance.max(1e-14 * scale)
}

/// Untruncated `(2 - δ_{n0}) (-i)^n J_n(ΔE t/2)`.
pub fn bessel_coefficients(n_max: usize, bounds: &SpectralBounds, t: f64) -> Vec<C64> {
    let x = 0.5 * bounds.delta_e() * t;
    let j = bessel_j_all(n_max, x);
    let mut rot = C64::new(1.0, 0.0);
    j.iter()
        .enumerate()
        .map(|(n, &jn)| {
            let a = rot * jn * if n == 0 { 1.0 } else { 2.0 };
            rot *= C64::new(0.0, -1.0);
            a
        })
        .collect()
}

pub fn external_phase_f0(bounds: &SpectralBounds, t: f64) -> C64 {
    C64::from_polar(1.0, -(0.5 * bounds.delta_e() + bounds.e_min) * t)
}

/// Analytic expansion of `e^{-iHt}`: Bessel coefficients and the external
/// phase for the spectral shift.
pub fn coefficients_analytic_f0(
    n_max: usize,
    bounds: &SpectralBounds,
    t: f64,
    tolerance: f64,
) -> Result<ChebyshevExpansion> {
    if n_max < 1 {
        return Err(Error::Argument("n_max must be >= 1".into()));
    }
    let raw = bessel_coefficients(n_max, bounds, t);
    let x = (0.5 * bounds.delta_e() * t).abs();
    let last = last_significant(&raw, tolerance).unwrap_or(0);
    if last == n_max || (n_max as f64) < x {
        return Err(Error::Truncation { n_terms: n_max + 1, last: raw[n_max].norm() });
    }
    Ok(ChebyshevExpansion {
        coeffs: raw[..=last].to_vec(),
        bounds: *bounds,
        t,
        m: 0,
        phase_external: external_phase_f0(bounds, t),
    })
}

/// Untruncated `((2 - δ_{n0})/N) Σ_k g(x_k) cos(n θ_k)` for `n < N`, with
/// `g = f_m ∘ E` sampled at the roots `x_k = cos θ_k`, `θ_k = π(k+½)/N`.
pub fn cosine_transform_coefficients(spec: &FmSpec, bounds: &SpectralBounds, n_points: usize) -> Vec<C64> {
    let n = n_points;
    let samples: Vec<C64> = (0..n)
        .map(|k| {
            let x = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
            fm_scalar(spec, C64::new(bounds.energy_at(x), 0.0))
        })
        .collect();
    dct2(&samples)
        .into_iter()
        .enumerate()
        .map(|(j, c)| c * if j == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 })
        .collect()
}

/// `C_n = Σ_k g_k cos(π n (k+½)/N)` through a length-2N FFT.
pub fn dct2(g: &[C64]) -> Vec<C64> {
    let n = g.len();
    let mut y: Vec<C64> = g.iter().chain(g.iter().rev()).copied().collect();
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut y);
    (0..n)
        .map(|j| 0.5 * C64::from_polar(1.0, -std::f64::consts::PI * j as f64 / (2.0 * n as f64)) * y[j])
        .collect()
}

/// Numeric expansion of `f_m` from `n_points` root samples. The spectral
/// shift is part of the sampled function, so the external phase is 1.
pub fn coefficients_numeric(
    spec: &FmSpec,
    bounds: &SpectralBounds,
    n_points: usize,
    tolerance: f64,
) -> Result<ChebyshevExpansion> {
    if !(tolerance > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tolerance}")));
    }
    if n_points < 2 {
        return Err(Error::Argument("need at least two sample points".into()));
    }
    let raw = cosine_transform_coefficients(spec, bounds, n_points);
    let last = last_significant(&raw, effective_tolerance(&raw, tolerance)).unwrap_or(0);
    // The upper half of a length-N transform is polluted by aliasing.
    if 2 * last >= n_points {
        return Err(Error::Truncation { n_terms: n_points, last: raw[n_points - 1].norm() });
    }
    Ok(ChebyshevExpansion {
        coeffs: raw[..=last].to_vec(),
        bounds: *bounds,
        t: spec.t,
        m: spec.m,
        phase_external: C64::new(1.0, 0.0),
    })
}

/// Expansion of `f_m` for the given step, growing the sample count until the
/// series converges. `m = 0` uses the Bessel route.
pub fn build_expansion(spec: &FmSpec, bounds: &SpectralBounds, tolerance: f64) -> Result<ChebyshevExpansion> {
    let x = (0.5 * bounds.delta_e() * spec.t).abs();
    // Beyond this the series would need more terms than are ever sampled.
    if !x.is_finite() || 2.0 * x > MAX_SAMPLE_POINTS as f64 {
        return Err(Error::Truncation { n_terms: MAX_SAMPLE_POINTS, last: f64::NAN });
    }
    if spec.m == 0 {
        let n_max = (2.0 * x + 60.0 + 10.0 * x.cbrt()) as usize;
        return coefficients_analytic_f0(n_max, bounds, spec.t, tolerance);
    }
    let mut n = (2.0 * x).ceil() as usize + 64;
    loop {
        match coefficients_numeric(spec, bounds, n, tolerance) {
            Err(Error::Truncation { .. }) if 2 * n <= MAX_SAMPLE_POINTS => n *= 2,
            other => return other,
        }
    }
}

/// `phase · Σ a_n T_n(H_norm) v` by the recursion
/// `φ_0 = v, φ_1 = -i H_norm v, φ_n = -2i H_norm φ_{n-1} + φ_{n-2}`,
/// using exactly `N` Hamiltonian applications for `N+1` coefficients.
pub fn apply_expansion<H: HamiltonianOp + ?Sized>(
    exp: &ChebyshevExpansion,
    h: &H,
    field: f64,
    v: &StateVector,
    counter: &ApplyCounter,
) -> Result<StateVector> {
    let dim = h.dim();
    if v.len() != dim {
        return Err(Error::Dimension { expected: dim, got: v.len() });
    }
    if !field.is_finite() {
        return Err(Error::Argument(format!("non-finite field value {field}")));
    }
    let de = exp.bounds.delta_e();
    if !(de > 0.0) {
        return Err(Error::DegenerateSpectrum(de));
    }
    let a = 2.0 / de;
    let b = -2.0 * exp.bounds.e_min / de - 1.0;
    let minus_i = C64::new(0.0, -1.0);

    let v = v.as_slice();
    let mut acc: Vec<C64> = v.iter().map(|x| x * exp.coeffs[0]).collect();
    if exp.coeffs.len() > 1 {
        let mut prev = v.to_vec();
        let mut cur = vec![C64::new(0.0, 0.0); dim];
        let mut hv = vec![C64::new(0.0, 0.0); dim];
        // φ_1 = -i H_norm v
        h.apply_into(v, field, &mut hv);
        counter.bump();
        for ((c, hx), x) in cur.iter_mut().zip(&hv).zip(v) {
            *c = minus_i * (hx * a + x * b);
        }
        let mut i_pow = C64::new(0.0, 1.0);
        let w = exp.coeffs[1] * i_pow;
        for (s, c) in acc.iter_mut().zip(&cur) {
            *s += w * c;
        }
        for coeff in &exp.coeffs[2..] {
            h.apply_into(&cur, field, &mut hv);
            counter.bump();
            // prev <- -2i H_norm cur + prev, then swap roles
            for ((p, hx), x) in prev.iter_mut().zip(&hv).zip(&cur) {
                *p += 2.0 * minus_i * (hx * a + x * b);
            }
            std::mem::swap(&mut prev, &mut cur);
            i_pow *= C64::new(0.0, 1.0);
            let w = coeff * i_pow;
            for (s, c) in acc.iter_mut().zip(&cur) {
                *s += w * c;
            }
        }
    }
    if exp.phase_external != C64::new(1.0, 0.0) {
        for s in acc.iter_mut() {
            *s *= exp.phase_external;
        }
    }
    Ok(StateVector::from_vec(acc))
}
