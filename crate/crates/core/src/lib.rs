//! A numerical laboratory for information scrambling in mesoscopic spin
//! ensembles.
//!
//! The crate computes out-of-time-order correlators (OTOCs) in the
//! transverse-field Sherrington-Kirkpatrick model by exact diagonalization,
//! simulates the interferometric two-copy measurement circuit that reads the
//! same correlators out of an ancilla qubit, and fits the resulting
//! scrambling curves to extract Lyapunov exponents for comparison with the
//! `2πT` chaos bound.
//!
//! Units are `ħ = k_B = 1` throughout: energies in units of the coupling
//! scale `J`, times in `1/J`, temperatures in `J`.
//!
//! Modules follow the pipeline order:
//!
//! - [`spinspace`]: dense operators on tensor-product spin-1/2 registers.
//! - [`hamiltonians`]: disorder sampling and Hamiltonian assembly.
//! - [`spectral`]: Hermitian eigendecomposition, thermal states, propagators.
//! - [`correlators`]: `R(t)`, `C(t)`, `F(t)`, `F₂(t)`, `C₂(t)` and disorder
//!   ensembles.
//! - [`protocol`]: the two-copies-plus-ancilla interferometric circuit,
//!   simulated exactly as an independent route to `F₂`.
//! - [`analysis`]: dissipation times, joint scrambling-curve fits, bound
//!   comparison.
//! - [`experiment`]: config-driven end-to-end runs with reproducible on-disk
//!   artifacts (this is what the `otoclab` binary drives).

// Force the OpenBLAS link for `ndarray`'s BLAS-backed matrix products.
extern crate blas_src;

pub mod analysis;
pub mod correlators;
pub mod error;
pub mod experiment;
pub mod hamiltonians;
pub mod output;
pub mod protocol;
pub mod spectral;
pub mod spinspace;

pub use error::{Error, Result};

/// Complex scalar used for all operator entries.
pub type C64 = num_complex::Complex64;
