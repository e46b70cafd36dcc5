//! Dense operators on tensor-product spin-1/2 registers.
//!
//! Everything downstream (Hamiltonians, gates, density matrices, the SWAP
//! observable) is a dense complex matrix on a `2^n`-dimensional Hilbert
//! space, wrapped in [`Operator`]. Dense storage is deliberate: at the
//! scales this lab targets (direct correlators up to 12 spins, an 11-qubit
//! protocol register) diagonalization dominates the cost and sparse paths
//! would buy nothing.
//!
//! Ordering convention, frozen here and asserted in tests: **site 1 is the
//! most significant qubit** of the basis index, and the doubled register of
//! the measurement protocol is laid out as
//! `(copy 1, sites 1..N) ⊗ (copy 2, sites 1..N) ⊗ (ancilla)`, ancilla least
//! significant.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::linalg::kron;
use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Default cap on operator dimension (2^14): a refusal to allocate, not a
/// physical limit.
pub const DEFAULT_MAX_DIMENSION: usize = 1 << 14;

static MAX_DIMENSION: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_DIMENSION);

/// Current dimension guard. Allocating any operator larger than this fails
/// with [`Error::DimensionGuard`] instead of exhausting memory.
pub fn max_dimension() -> usize {
    MAX_DIMENSION.load(Ordering::Relaxed)
}

/// Raise or lower the dimension guard (process-global).
pub fn set_max_dimension(dim: usize) {
    MAX_DIMENSION.store(dim, Ordering::Relaxed);
}

/// Tolerance for the Hermitian tag-check at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for the unitary tag-check at construction.
pub const UNITARY_TOL: f64 = 1e-10;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::BadDimension { dim });
    }
    let max = max_dimension();
    if dim > max {
        return Err(Error::DimensionGuard { dim, max });
    }
    Ok(())
}

/// A dense operator on a `2^n`-dimensional spin Hilbert space.
///
/// Immutable after construction; cheap to share by reference across threads.
#[derive(Debug, Clone)]
pub struct Operator {
    dim: usize,
    entries: Array2<C64>,
}

impl Operator {
    /// Wrap a square matrix whose dimension is a power of two within the
    /// guard. No algebraic properties are assumed.
    pub fn from_matrix(entries: Array2<C64>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        check_dim(rows)?;
        Ok(Operator { dim: rows, entries })
    }

    /// Wrap a matrix declared Hermitian; fails if `max|A - A†|` exceeds
    /// [`HERMITIAN_TOL`].
    pub fn hermitian(entries: Array2<C64>) -> Result<Self> {
        let op = Operator::from_matrix(entries)?;
        let dev = op.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(op)
    }

    /// Wrap a matrix declared unitary; fails if `max|A†A - I|` exceeds
    /// [`UNITARY_TOL`].
    pub fn unitary(entries: Array2<C64>) -> Result<Self> {
        let op = Operator::from_matrix(entries)?;
        let dev = op.unitarity_deviation();
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Ok(op)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Operator {
            dim,
            entries: Array2::eye(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of spin-1/2 sites, `log2(dim)`.
    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.entries
    }

    pub fn dagger(&self) -> Operator {
        let mut t = self.entries.t().to_owned();
        t.mapv_inplace(|z| z.conj());
        Operator {
            dim: self.dim,
            entries: t,
        }
    }

    /// Matrix product `self · other`.
    pub fn dot(&self, other: &Operator) -> Result<Operator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(Operator {
            dim: self.dim,
            entries: self.entries.dot(&other.entries),
        })
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max|A - A†|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = (self.entries[[i, j]] - self.entries[[j, i]].conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    /// `max|A†A - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.dagger().entries.dot(&self.entries);
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                dev = dev.max((prod[[i, j]] - target).norm());
            }
        }
        dev
    }

    /// True iff every entry is exactly real.
    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }
}

/// `max|A - B|` entrywise.
pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    assert_eq!(a.dim(), b.dim(), "operator dimensions differ");
    a.entries
        .iter()
        .zip(b.entries.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

/// Pauli axis selector for single-site operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// The 2x2 Pauli matrix for `axis`.
pub fn pauli(axis: PauliAxis) -> Array2<C64> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match axis {
        PauliAxis::X => array![[o, l], [l, o]],
        PauliAxis::Y => array![[o, -i], [i, o]],
        PauliAxis::Z => array![[l, o], [o, -l]],
    }
}

/// `I ⊗ … ⊗ σ^axis ⊗ … ⊗ I` with the Pauli at 1-based position `site` of an
/// `n`-site register (site 1 most significant). Hermitian, unitary,
/// traceless.
pub fn site_operator(n: usize, site: usize, axis: PauliAxis) -> Result<Operator> {
    if site < 1 || site > n {
        return Err(Error::SiteOutOfRange { site, n });
    }
    let dim = 1usize
        .checked_shl(n as u32)
        .ok_or(Error::BadDimension { dim: usize::MAX })?;
    check_dim(dim)?;
    let mask = 1usize << (n - site);
    let mut m = Array2::<C64>::zeros((dim, dim));
    match axis {
        PauliAxis::Z => {
            for b in 0..dim {
                let sign = if b & mask == 0 { 1.0 } else { -1.0 };
                m[[b, b]] = C64::new(sign, 0.0);
            }
        }
        PauliAxis::X => {
            for b in 0..dim {
                m[[b ^ mask, b]] = C64::new(1.0, 0.0);
            }
        }
        PauliAxis::Y => {
            for b in 0..dim {
                // sigma_y |0> = i|1>, sigma_y |1> = -i|0>
                let phase = if b & mask == 0 { 1.0 } else { -1.0 };
                m[[b ^ mask, b]] = C64::new(0.0, phase);
            }
        }
    }
    Ok(Operator { dim, entries: m })
}

/// Kronecker product with `a` on the more significant factor, consistent
/// with the register ordering above.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator> {
    let dim = a
        .dim
        .checked_mul(b.dim)
        .ok_or(Error::BadDimension { dim: usize::MAX })?;
    check_dim(dim)?;
    Ok(Operator {
        dim,
        entries: kron(&a.entries, &b.entries),
    })
}

/// The doubled-system-plus-ancilla register of the interferometric protocol:
/// `(copy 1, sites 1..N) ⊗ (copy 2, sites 1..N) ⊗ (ancilla)`.
///
/// Immutable; every protocol operator is assembled against one layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterLayout {
    n_per_copy: usize,
}

impl RegisterLayout {
    pub fn new(n_per_copy: usize) -> Result<Self> {
        if n_per_copy == 0 {
            return Err(Error::TooFewSpins { n: 0 });
        }
        let layout = RegisterLayout { n_per_copy };
        check_dim(layout.dim())?;
        Ok(layout)
    }

    pub fn n_per_copy(&self) -> usize {
        self.n_per_copy
    }

    /// Hilbert-space dimension of one copy, `2^N`.
    pub fn copy_dim(&self) -> usize {
        1 << self.n_per_copy
    }

    pub fn total_qubits(&self) -> usize {
        2 * self.n_per_copy + 1
    }

    /// Total register dimension, `2^(2N+1)`.
    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }
}

/// SWAP between two same-size copies (no ancilla): maps `|a⟩⊗|b⟩` to
/// `|b⟩⊗|a⟩`. A 0/1 permutation matrix; Hermitian, unitary, involutive.
pub fn copy_swap(n_per_copy: usize) -> Result<Operator> {
    if n_per_copy == 0 {
        return Err(Error::TooFewSpins { n: 0 });
    }
    let copy_dim = 1usize << n_per_copy;
    let dim = copy_dim * copy_dim;
    check_dim(dim)?;
    let mut m = Array2::<C64>::zeros((dim, dim));
    for a in 0..copy_dim {
        for b in 0..copy_dim {
            let from = a * copy_dim + b;
            let to = b * copy_dim + a;
            m[[to, from]] = C64::new(1.0, 0.0);
        }
    }
    Ok(Operator { dim, entries: m })
}

/// SWAP of the two copies of `layout`, identity on the ancilla:
/// `S(|a⟩⊗|b⟩⊗|c⟩) = |b⟩⊗|a⟩⊗|c⟩`.
pub fn swap_operator(layout: RegisterLayout) -> Result<Operator> {
    let pair = copy_swap(layout.n_per_copy())?;
    tensor(&pair, &Operator::identity(2)?)
}
