//! Concrete control models: the five-level double-Λ system and a
//! three-surface Morse surrogate for the Rb₂ vibrational problem.

use nalgebra::DMatrix;

use crate::hilbert::{Coupling, DenseHamiltonian, FourierGridHamiltonian, SpatialGrid, StateVector};
use crate::units::{cm_to_hartree, hartree_to_cm, ME_PER_AMU};
use crate::{Result, C64};

use super::Projector;

/// Level energies of the double-Λ model in cm⁻¹: v=0, v=1, v=2, v′=6, v′=7.
pub const DOUBLE_LAMBDA_LEVELS_CM: [f64; 5] = [0.0, 58.0, 116.0, 11130.0, 11172.0];
pub const DOUBLE_LAMBDA_LABELS: [&str; 5] = ["v0", "v1", "v2", "v'6", "v'7"];

/// Indices into the double-Λ basis.
pub const V0: usize = 0;
pub const V1: usize = 1;
pub const V2: usize = 2;
pub const V6: usize = 3;
pub const V7: usize = 4;

#[derive(Clone, Debug)]
pub struct DoubleLambda {
    pub hamiltonian: DenseHamiltonian,
    pub energies: [f64; 5],
    pub dipole: f64,
}

impl DoubleLambda {
    pub fn labels(&self) -> &'static [&'static str; 5] {
        &DOUBLE_LAMBDA_LABELS
    }

    /// Bohr frequency `E_upper - E_lower` in cm⁻¹.
    pub fn transition_cm(&self, upper: usize, lower: usize) -> f64 {
        hartree_to_cm(self.energies[upper] - self.energies[lower])
    }

    /// The six ground↔excited transitions as `(upper, lower, cm⁻¹)`.
    pub fn transitions(&self) -> Vec<(usize, usize, f64)> {
        let mut v = Vec::new();
        for upper in [V6, V7] {
            for lower in [V0, V1, V2] {
                v.push((upper, lower, self.transition_cm(upper, lower)));
            }
        }
        v
    }

    pub fn level_projector(&self, level: usize) -> Projector {
        Projector::levels(5, &[level])
    }
}

/// Five-level model with equal dipoles between the ground levels
/// {v0, v1, v2} and the excited levels {v′6, v′7}.
pub fn build_double_lambda() -> DoubleLambda {
    build_double_lambda_with_dipole(1.0)
}

pub fn build_double_lambda_with_dipole(dipole: f64) -> DoubleLambda {
    let energies = DOUBLE_LAMBDA_LEVELS_CM.map(cm_to_hartree);
    let h0 = DMatrix::from_fn(5, 5, |i, j| if i == j { C64::new(energies[i], 0.0) } else { C64::new(0.0, 0.0) });
    let h1 = DMatrix::from_fn(5, 5, |i, j| {
        let ground = |k: usize| k <= V2;
        if ground(i) != ground(j) {
            C64::new(dipole, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let hamiltonian = DenseHamiltonian::new(h0, Some(h1)).expect("double-Λ Hamiltonian is Hermitian");
    DoubleLambda { hamiltonian, energies, dipole }
}

/// Morse curve `T_e + D_e (1 - e^{-a (r - r_e)})²`, all in atomic units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Morse {
    pub te: f64,
    pub de: f64,
    pub re: f64,
    pub a: f64,
}

impl Morse {
    pub fn eval(&self, r: f64) -> f64 {
        let x = 1.0 - (-self.a * (r - self.re)).exp();
        self.te + self.de * x * x
    }
}

/// Rb₂ reduced mass in electron masses.
pub const RB2_REDUCED_MASS: f64 = 0.5 * 84.911_789_7 * ME_PER_AMU;

/// Surrogate curves for the three electronic states. The spacing between the
/// first and second surfaces mirrors that between the second and third, so
/// that strong fields leak population into the third surface.
pub const SURROGATE_CURVES: [Morse; 3] = [
    Morse { te: 0.0, de: 0.0180, re: 7.9, a: 0.42 },
    Morse { te: 0.0520, de: 0.0250, re: 8.6, a: 0.33 },
    Morse { te: 0.1040, de: 0.0300, re: 9.3, a: 0.28 },
];

#[derive(Clone, Debug)]
pub struct SurrogateRb2 {
    pub hamiltonian: FourierGridHamiltonian,
    pub curves: [Morse; 3],
    /// Lowest vibrational eigenstates of the first surface, embedded in the
    /// full three-channel space.
    pub ground_levels: Vec<StateVector>,
    /// Their energies in hartree.
    pub ground_energies: Vec<f64>,
}

impl SurrogateRb2 {
    pub fn n_points(&self) -> usize {
        self.hamiltonian.grid().n_points
    }

    /// Projector onto whole electronic channels.
    pub fn channel_projector(&self, channels: &[usize]) -> Projector {
        let n = self.n_points();
        let mut mask = vec![false; 3 * n];
        for &c in channels {
            mask[c * n..(c + 1) * n].iter_mut().for_each(|m| *m = true);
        }
        Projector::Mask(mask)
    }

    /// Projector onto vibrational level `v` of the ground surface.
    pub fn ground_level_projector(&self, v: usize) -> Projector {
        Projector::Span(vec![self.ground_levels[v].clone()])
    }
}

/// Three-surface surrogate on `n_points` grid points over `[5.5, 16] a₀`,
/// with unit transition dipoles for 1↔2 and 2↔3. Keeps `n_levels` ground
/// vibrational eigenstates.
pub fn build_surrogate_rb2(n_points: usize, n_levels: usize) -> Result<SurrogateRb2> {
    let grid = SpatialGrid::new(n_points, 5.5, 16.0)?;
    let r = grid.points();
    let potentials: Vec<Vec<f64>> = SURROGATE_CURVES.iter().map(|c| r.iter().map(|&x| c.eval(x)).collect()).collect();
    let couplings = vec![Coupling { i: 0, j: 1, dipole: 1.0 }, Coupling { i: 1, j: 2, dipole: 1.0 }];
    let hamiltonian = FourierGridHamiltonian::new(grid, RB2_REDUCED_MASS, potentials, couplings)?;

    let eig = hamiltonian.channel_matrix(0).symmetric_eigen();
    let mut order: Vec<usize> = (0..n_points).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut ground_levels = Vec::new();
    let mut ground_energies = Vec::new();
    for &k in order.iter().take(n_levels.min(n_points)) {
        let col = eig.eigenvectors.column(k);
        // Fix the arbitrary phase so the largest component is real positive.
        let (imax, _) = col.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        let phase = col[imax].conj() / col[imax].norm();
        let mut amps = vec![C64::new(0.0, 0.0); 3 * n_points];
        for i in 0..n_points {
            amps[i] = col[i] * phase;
        }
        ground_levels.push(StateVector::from_vec(amps).normalized());
        ground_energies.push(eig.eigenvalues[k]);
    }
    Ok(SurrogateRb2 { hamiltonian, curves: SURROGATE_CURVES, ground_levels, ground_energies })
}
