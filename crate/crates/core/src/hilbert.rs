//! Spatial grids, state vectors and Hamiltonians.
//!
//! Two Hamiltonian representations are provided. [`FourierGridHamiltonian`]
//! couples several electronic channels, each carrying a vibrational
//! Hamiltonian `T + V_i(R)` on a periodic Fourier grid; the kinetic term is
//! applied in momentum space. [`DenseHamiltonian`] is a small Hermitian matrix
//! `H₀ + ε H₁` for level models and for brute-force checks.
//!
//! Every application of a Hamiltonian through [`apply_hamiltonian`] bumps an
//! [`ApplyCounter`]; the cost model of the propagators is stated in these
//! counts.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Uniform periodic grid on `[r_min, r_max)` with `n_points` intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub n_points: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl SpatialGrid {
    pub fn new(n_points: usize, r_min: f64, r_max: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::Argument(format!("n_points must be >= 2, got {n_points}")));
        }
        if !(r_max > r_min) || !r_min.is_finite() || !r_max.is_finite() {
            return Err(Error::Argument(format!("need r_max > r_min, got [{r_min}, {r_max}]")));
        }
        Ok(Self { n_points, r_min, r_max })
    }

    pub fn spacing(&self) -> f64 {
        (self.r_max - self.r_min) / self.n_points as f64
    }

    pub fn momentum_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n_points as f64 * self.spacing())
    }

    pub fn points(&self) -> Vec<f64> {
        let dr = self.spacing();
        (0..self.n_points).map(|j| self.r_min + j as f64 * dr).collect()
    }

    /// Momenta in FFT ordering (0, dk, ..., -dk). The Nyquist bin of an
    /// even grid carries `-π/Δr`.
    pub fn momenta(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = self.momentum_spacing();
        (0..n)
            .map(|j| {
                let q = if j < (n + 1) / 2 { j as f64 } else { j as f64 - n as f64 };
                q * dk
            })
            .collect()
    }

    /// Kinetic energies `p²/2μ` in FFT ordering.
    pub fn kinetic_spectrum(&self, mass: f64) -> Vec<f64> {
        self.momenta().into_iter().map(|p| p * p / (2.0 * mass)).collect()
    }
}

/// Complex amplitudes, channel-major for multi-channel grids.
#[derive(Clone, PartialEq, Default)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.amps.iter()).finish()
    }
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        Self { amps: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.amps[k] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_vec(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self { amps: values.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.amps
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.amps
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.amps.iter()
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_len(self.len(), other.len())?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: C64, x: &StateVector) {
        debug_assert_eq!(self.len(), x.len());
        for (y, xi) in self.amps.iter_mut().zip(&x.amps) {
            *y += alpha * xi;
        }
    }

    pub fn scale(&mut self, alpha: C64) {
        for y in &mut self.amps {
            *y *= alpha;
        }
    }

    pub fn scaled(&self, alpha: C64) -> StateVector {
        let mut v = self.clone();
        v.scale(alpha);
        v
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        let mut v = self.clone();
        v.axpy(C64::new(-1.0, 0.0), other);
        v
    }

    /// Largest componentwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn normalized(&self) -> StateVector {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scaled(C64::new(1.0 / n, 0.0))
        }
    }
}

impl Index<usize> for StateVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.amps[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.amps[i]
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// Counts Hamiltonian applications. Cheap to share across threads; each
/// propagation run normally owns its own.
#[derive(Debug, Default)]
pub struct ApplyCounter(AtomicU64);

impl ApplyCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Interval `[e_min, e_max]` enclosing the spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub e_min: f64,
    pub e_max: f64,
}

impl SpectralBounds {
    pub fn new(e_min: f64, e_max: f64) -> Result<Self> {
        if !(e_max > e_min) || !e_min.is_finite() || !e_max.is_finite() {
            return Err(Error::DegenerateSpectrum(e_max - e_min));
        }
        Ok(Self { e_min, e_max })
    }

    /// Builds bounds from an enclosure that may be degenerate (`H ∝ 1`),
    /// widening it to a small finite width.
    pub fn enclosing(lo: f64, hi: f64) -> Self {
        let pad = 1e-8 * lo.abs().max(hi.abs()).max(1.0);
        if hi - lo < pad {
            let mid = 0.5 * (lo + hi);
            Self { e_min: mid - 0.5 * pad, e_max: mid + 0.5 * pad }
        } else {
            Self { e_min: lo, e_max: hi }
        }
    }

    pub fn delta_e(&self) -> f64 {
        self.e_max - self.e_min
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.e_min && e <= self.e_max
    }

    /// Maps `x ∈ [-1, 1]` onto the energy interval.
    pub fn energy_at(&self, x: f64) -> f64 {
        0.5 * self.delta_e() * (x + 1.0) + self.e_min
    }
}

/// Action of a Hamiltonian `H(ε)` on state vectors.
pub trait HamiltonianOp: Send + Sync {
    fn dim(&self) -> usize;

    /// `out = H(field) psi`. Does not count; use [`apply_hamiltonian`] or
    /// count explicitly.
    fn apply_into(&self, psi: &[C64], field: f64, out: &mut [C64]);

    /// `out = μ psi`, the part of `H` multiplied by the field.
    fn apply_coupling_into(&self, psi: &[C64], out: &mut [C64]);

    /// Enclosure of the spectrum of `H(ε)` valid for all `|ε| <= field_max`.
    fn spectral_bounds(&self, field_max: f64) -> SpectralBounds;

    /// Full matrix of `H(field)`, where that is affordable.
    fn dense_matrix(&self, _field: f64) -> Option<DMatrix<C64>> {
        None
    }

    fn as_dense(&self) -> Option<&DenseHamiltonian> {
        None
    }
}

/// `H(field) ψ`, counted once on `counter`.
pub fn apply_hamiltonian<H: HamiltonianOp + ?Sized>(
    h: &H,
    psi: &StateVector,
    field: f64,
    counter: &ApplyCounter,
) -> Result<StateVector> {
    check_len(h.dim(), psi.len())?;
    if !field.is_finite() {
        return Err(Error::Argument(format!("non-finite field value {field}")));
    }
    let mut out = StateVector::zeros(psi.len());
    h.apply_into(psi.as_slice(), field, out.as_mut_slice());
    counter.bump();
    Ok(out)
}

/// `H_norm ψ` with `H_norm = 2(H - E_min)/ΔE - 1`.
pub fn normalize_action<H: HamiltonianOp + ?Sized>(
    h: &H,
    bounds: &SpectralBounds,
    psi: &StateVector,
    field: f64,
    counter: &ApplyCounter,
) -> Result<StateVector> {
    let de = bounds.delta_e();
    if !(de > 0.0) {
        return Err(Error::DegenerateSpectrum(de));
    }
    let mut out = apply_hamiltonian(h, psi, field, counter)?;
    let a = 2.0 / de;
    let b = -2.0 * bounds.e_min / de - 1.0;
    for (o, p) in out.as_mut_slice().iter_mut().zip(psi.as_slice()) {
        *o = *o * a + *p * b;
    }
    Ok(out)
}

/// Field-independent dipole coupling between two channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub dipole: f64,
}

/// Multi-channel vibrational Hamiltonian on a Fourier grid,
/// `H = Σ_i (T + V_i(R)) |e_i⟩⟨e_i| + ε μ Σ_(i,j) (|e_i⟩⟨e_j| + h.c.)`.
#[derive(Clone)]
pub struct FourierGridHamiltonian {
    grid: SpatialGrid,
    mass: f64,
    potentials: Vec<Vec<f64>>,
    kinetic: Vec<f64>,
    couplings: Vec<Coupling>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierGridHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGridHamiltonian")
            .field("grid", &self.grid)
            .field("mass", &self.mass)
            .field("n_channels", &self.potentials.len())
            .field("couplings", &self.couplings)
            .finish()
    }
}

impl FourierGridHamiltonian {
    /// `couplings` lists unordered channel pairs; listing both `(i, j)` and
    /// `(j, i)` is accepted when the dipoles agree.
    pub fn new(
        grid: SpatialGrid,
        mass: f64,
        potentials: Vec<Vec<f64>>,
        couplings: Vec<Coupling>,
    ) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::Argument(format!("mass must be positive, got {mass}")));
        }
        if potentials.is_empty() {
            return Err(Error::Argument("at least one channel is required".into()));
        }
        for v in &potentials {
            check_len(grid.n_points, v.len())?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Argument("non-finite potential value".into()));
            }
        }
        let n_ch = potentials.len();
        let mut pairs: Vec<Coupling> = Vec::new();
        for c in couplings {
            if c.i >= n_ch || c.j >= n_ch || c.i == c.j {
                return Err(Error::Argument(format!("bad coupling ({}, {})", c.i, c.j)));
            }
            let (i, j) = (c.i.min(c.j), c.i.max(c.j));
            match pairs.iter().find(|p| p.i == i && p.j == j) {
                Some(p) if (p.dipole - c.dipole).abs() > 1e-15 * p.dipole.abs().max(1.0) => {
                    return Err(Error::Argument(format!(
                        "asymmetric coupling ({i}, {j}): {} vs {}",
                        p.dipole, c.dipole
                    )));
                }
                Some(_) => {}
                None => pairs.push(Coupling { i, j, dipole: c.dipole }),
            }
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.n_points);
        let ifft = planner.plan_fft_inverse(grid.n_points);
        let kinetic = grid.kinetic_spectrum(mass);
        Ok(Self { grid, mass, potentials, kinetic, couplings: pairs, fft, ifft })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn n_channels(&self) -> usize {
        self.potentials.len()
    }

    pub fn potentials(&self) -> &[Vec<f64>] {
        &self.potentials
    }

    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    /// Dense single-channel Hamiltonian `T + V_c`, for eigenstates.
    pub fn channel_matrix(&self, channel: usize) -> DMatrix<C64> {
        let n = self.grid.n_points;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            e.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            e[k] = C64::new(1.0, 0.0);
            let mut out = vec![C64::new(0.0, 0.0); n];
            self.kinetic_into(&e, &mut out, &mut scratch);
            for j in 0..n {
                m[(j, k)] = out[j];
            }
            m[(k, k)] += self.potentials[channel][k];
        }
        m
    }

    fn kinetic_into(&self, psi: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let n = psi.len();
        out.copy_from_slice(psi);
        self.fft.process_with_scratch(out, scratch);
        let inv_n = 1.0 / n as f64;
        for (o, t) in out.iter_mut().zip(&self.kinetic) {
            *o *= t * inv_n;
        }
        self.ifft.process_with_scratch(out, scratch);
    }
}

impl HamiltonianOp for FourierGridHamiltonian {
    fn dim(&self) -> usize {
        self.grid.n_points * self.potentials.len()
    }

    fn apply_into(&self, psi: &[C64], field: f64, out: &mut [C64]) {
        let n = self.grid.n_points;
        let scratch_len = self.fft.get_inplace_scratch_len().max(self.ifft.get_inplace_scratch_len());
        let mut scratch = vec![C64::new(0.0, 0.0); scratch_len];
        for (c, v) in self.potentials.iter().enumerate() {
            let src = &psi[c * n..(c + 1) * n];
            let dst = &mut out[c * n..(c + 1) * n];
            self.kinetic_into(src, dst, &mut scratch);
            for ((o, p), vr) in dst.iter_mut().zip(src).zip(v) {
                *o += p * vr;
            }
        }
        if field != 0.0 {
            for c in &self.couplings {
                let w = field * c.dipole;
                for k in 0..n {
                    let (a, b) = (psi[c.i * n + k], psi[c.j * n + k]);
                    out[c.i * n + k] += b * w;
                    out[c.j * n + k] += a * w;
                }
            }
        }
    }

    fn apply_coupling_into(&self, psi: &[C64], out: &mut [C64]) {
        let n = self.grid.n_points;
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for c in &self.couplings {
            for k in 0..n {
                out[c.i * n + k] += psi[c.j * n + k] * c.dipole;
                out[c.j * n + k] += psi[c.i * n + k] * c.dipole;
            }
        }
    }

    fn spectral_bounds(&self, field_max: f64) -> SpectralBounds {
        let vmin = self.potentials.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let vmax = self.potentials.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let tmax = self.kinetic.iter().copied().fold(0.0, f64::max);
        let w: f64 = self.couplings.iter().map(|c| c.dipole.abs()).sum::<f64>() * field_max.abs();
        SpectralBounds::enclosing(vmin - w, tmax + vmax + w)
    }

    fn dense_matrix(&self, field: f64) -> Option<DMatrix<C64>> {
        let dim = self.dim();
        if dim > 4096 {
            return None;
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![C64::new(0.0, 0.0); dim];
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for k in 0..dim {
            e.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            e[k] = C64::new(1.0, 0.0);
            self.apply_into(&e, field, &mut out);
            for j in 0..dim {
                m[(j, k)] = out[j];
            }
        }
        Some(m)
    }
}

/// Dense Hermitian `H₀ + ε H₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseHamiltonian {
    h0: DMatrix<C64>,
    h1: Option<DMatrix<C64>>,
}

fn check_hermitian(m: &DMatrix<C64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
    }
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    for i in 0..m.nrows() {
        for j in 0..=i {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-12 * scale {
                return Err(Error::Argument(format!("matrix not Hermitian at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

impl DenseHamiltonian {
    pub fn new(h0: DMatrix<C64>, h1: Option<DMatrix<C64>>) -> Result<Self> {
        check_hermitian(&h0)?;
        if let Some(h1) = &h1 {
            check_hermitian(h1)?;
            check_len(h0.nrows(), h1.nrows())?;
        }
        Ok(Self { h0, h1 })
    }

    pub fn from_real(h0: &[&[f64]], h1: Option<&[&[f64]]>) -> Result<Self> {
        let to_m = |rows: &[&[f64]]| {
            let n = rows.len();
            DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0))
        };
        Self::new(to_m(h0), h1.map(to_m))
    }

    pub fn diagonal(energies: &[f64]) -> Self {
        let n = energies.len();
        let h0 = DMatrix::from_fn(n, n, |i, j| {
            if i == j { C64::new(energies[i], 0.0) } else { C64::new(0.0, 0.0) }
        });
        Self { h0, h1: None }
    }

    pub fn h0(&self) -> &DMatrix<C64> {
        &self.h0
    }

    pub fn h1(&self) -> Option<&DMatrix<C64>> {
        self.h1.as_ref()
    }

    pub fn matrix(&self, field: f64) -> DMatrix<C64> {
        match &self.h1 {
            Some(h1) if field != 0.0 => &self.h0 + h1 * C64::new(field, 0.0),
            _ => self.h0.clone(),
        }
    }
}

fn matvec_into(m: &DMatrix<C64>, x: &[C64], scale: f64, out: &mut [C64]) {
    let n = m.nrows();
    for j in 0..n {
        let xj = x[j] * scale;
        if xj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = m.column(j);
        for i in 0..n {
            out[i] += col[i] * xj;
        }
    }
}

impl HamiltonianOp for DenseHamiltonian {
    fn dim(&self) -> usize {
        self.h0.nrows()
    }

    fn apply_into(&self, psi: &[C64], field: f64, out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        matvec_into(&self.h0, psi, 1.0, out);
        if let Some(h1) = &self.h1 {
            if field != 0.0 {
                matvec_into(h1, psi, field, out);
            }
        }
    }

    fn apply_coupling_into(&self, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        if let Some(h1) = &self.h1 {
            matvec_into(h1, psi, 1.0, out);
        }
    }

    fn spectral_bounds(&self, field_max: f64) -> SpectralBounds {
        let n = self.dim();
        let fm = field_max.abs();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            let center = self.h0[(i, i)].re;
            let mut diag_spread = 0.0;
            for j in 0..n {
                if j != i {
                    radius += self.h0[(i, j)].norm();
                    if let Some(h1) = &self.h1 {
                        radius += fm * h1[(i, j)].norm();
                    }
                }
            }
            if let Some(h1) = &self.h1 {
                diag_spread = fm * h1[(i, i)].re.abs();
            }
            lo = lo.min(center - diag_spread - radius);
            hi = hi.max(center + diag_spread + radius);
        }
        SpectralBounds::enclosing(lo, hi)
    }

    fn dense_matrix(&self, field: f64) -> Option<DMatrix<C64>> {
        Some(self.matrix(field))
    }

    fn as_dense(&self) -> Option<&DenseHamiltonian> {
        Some(self)
    }
}

/// Either supported Hamiltonian representation.
#[derive(Clone, Debug)]
pub enum Hamiltonian {
    FourierGrid(FourierGridHamiltonian),
    Dense(DenseHamiltonian),
}

impl From<DenseHamiltonian> for Hamiltonian {
    fn from(h: DenseHamiltonian) -> Self {
        Hamiltonian::Dense(h)
    }
}

impl From<FourierGridHamiltonian> for Hamiltonian {
    fn from(h: FourierGridHamiltonian) -> Self {
        Hamiltonian::FourierGrid(h)
    }
}

impl HamiltonianOp for Hamiltonian {
    fn dim(&self) -> usize {
        match self {
            Hamiltonian::FourierGrid(h) => h.dim(),
            Hamiltonian::Dense(h) => h.dim(),
        }
    }

    fn apply_into(&self, psi: &[C64], field: f64, out: &mut [C64]) {
        match self {
            Hamiltonian::FourierGrid(h) => h.apply_into(psi, field, out),
            Hamiltonian::Dense(h) => h.apply_into(psi, field, out),
        }
    }

    fn apply_coupling_into(&self, psi: &[C64], out: &mut [C64]) {
        match self {
            Hamiltonian::FourierGrid(h) => h.apply_coupling_into(psi, out),
            Hamiltonian::Dense(h) => h.apply_coupling_into(psi, out),
        }
    }

    fn spectral_bounds(&self, field_max: f64) -> SpectralBounds {
        match self {
            Hamiltonian::FourierGrid(h) => h.spectral_bounds(field_max),
            Hamiltonian::Dense(h) => h.spectral_bounds(field_max),
        }
    }

    fn dense_matrix(&self, field: f64) -> Option<DMatrix<C64>> {
        match self {
            Hamiltonian::FourierGrid(h) => h.dense_matrix(field),
            Hamiltonian::Dense(h) => h.dense_matrix(field),
        }
    }

    fn as_dense(&self) -> Option<&DenseHamiltonian> {
        match self {
            Hamiltonian::Dense(d) => Some(d),
            Hamiltonian::FourierGrid(_) => None,
        }
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}
