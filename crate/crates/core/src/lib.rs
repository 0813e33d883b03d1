//! Chebychev propagators for time-dependent inhomogeneous Schrödinger
//! equations, written throughout as
//!
//! ```text
//!     d/dt |ψ(t)⟩ = -iH |ψ(t)⟩ + |Φ(t)⟩ ,
//! ```
//!
//! with the factor `-i` absorbed into the source `Φ`. Around the propagators
//! sit the pieces needed to drive them: Fourier-grid and dense Hamiltonians,
//! global time grids with spectral differentiation, brute-force reference
//! solvers, and a Krotov optimal-control loop whose backward (adjoint)
//! equation is inhomogeneous.
//!
//! The order-`m` propagator advances one step as
//!
//! ```text
//!     ψ(t+Δt) = Σ_{j<m} Δt^j/j! λ⁽ʲ⁾ + f_m(H) λ⁽ᵐ⁾ ,
//!     λ⁽⁰⁾ = ψ(t),   λ⁽ʲ⁾ = -iH λ⁽ʲ⁻¹⁾ + Φ⁽ʲ⁻¹⁾ ,
//! ```
//!
//! where `f_m(z) = (-iz)^{-m} (e^{-izΔt} - Σ_{j<m} (-izΔt)^j/j!)` is applied
//! through a single truncated Chebychev series in the renormalized Hamiltonian.
//! See [`inhom`] for the schemes and [`chebkernel`] for the expansions.

pub mod chebkernel;
pub mod config;
pub mod error;
pub mod hilbert;
pub mod inhom;
pub mod oct;
pub mod oracle;
pub mod scan;
pub mod selfcheck;
pub mod timegrid;
pub mod units;

pub use error::{Error, Result};
pub use hilbert::{
    apply_hamiltonian, ApplyCounter, DenseHamiltonian, FourierGridHamiltonian, Hamiltonian,
    HamiltonianOp, SpatialGrid, SpectralBounds, StateVector,
};

/// Complex double used for all amplitudes.
pub type C64 = num_complex::Complex64;
