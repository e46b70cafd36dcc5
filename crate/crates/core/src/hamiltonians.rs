//! Disorder sampling and Hamiltonian assembly.
//!
//! The model is a transverse-field Sherrington-Kirkpatrick chain:
//!
//! ```text
//! H = -1/2 Σ_{i≠j} J_ij σ_i^z σ_j^z  -  Γ Σ_j σ_j^x
//! ```
//!
//! with all-to-all Gaussian couplings of zero mean and standard deviation
//! `J/√N`. (The customary σ = √(J²/N) is dimensionally a standard
//! deviation, and that is how it is implemented here.) An alternative
//! coupling profile with a Rydberg-blockade plateau,
//! `J_ij = C̃₆ / (|r_i − r_j|⁶ + ã_B⁶)`, feeds the same builder.
//!
//! Couplings are sampled from a `ChaCha8` stream seeded with a plain `u64`,
//! upper triangle in row-major order, via the ziggurat standard-normal
//! transform — bit-reproducible across platforms and thread counts.

use ndarray::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinspace::{check_dim, Operator};
use crate::C64;

/// Model parameters for one ensemble: spin count, coupling scale `J`, and
/// transverse field `Γ`, all in units where `ħ = k_B = 1` and energies are
/// measured in `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfskParams {
    pub n: usize,
    pub j_scale: f64,
    pub gamma: f64,
}

impl TfskParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::TooFewSpins { n: self.n });
        }
        if !(self.j_scale >= 0.0) {
            return Err(Error::NegativeScale(self.j_scale));
        }
        if !self.gamma.is_finite() {
            return Err(Error::BadCouplings(format!(
                "transverse field must be finite, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Geometry and scales for blockade-profile couplings
/// `J_ij = c6_eff / (|r_i − r_j|⁶ + blockade_radius⁶)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RydbergCouplingSpec {
    /// 1D coordinates of the emitters, in the same length unit as
    /// `blockade_radius`.
    pub positions: Vec<f64>,
    /// Effective van der Waals coefficient (energy × length⁶). Site-dependent
    /// detunings are folded into this single constant.
    pub c6_eff: f64,
    /// Blockade radius regularizing the short-distance divergence; > 0.
    pub blockade_radius: f64,
}

/// Symmetric zero-diagonal coupling matrix plus the provenance needed to
/// regenerate it: `(n, seed, j_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "CouplingMatrixWire")]
pub struct CouplingMatrix {
    n: usize,
    seed: u64,
    j_scale: f64,
    j: Array2<f64>,
}

/// On-disk form: plain row-major nested lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CouplingMatrixWire {
    n: usize,
    seed: u64,
    j_scale: f64,
    rows: Vec<Vec<f64>>,
}

impl From<CouplingMatrix> for CouplingMatrixWire {
    fn from(c: CouplingMatrix) -> Self {
        let rows = c
            .j
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect::<Vec<_>>();
        CouplingMatrixWire {
            n: c.n,
            seed: c.seed,
            j_scale: c.j_scale,
            rows,
        }
    }
}

impl TryFrom<CouplingMatrixWire> for CouplingMatrix {
    type Error = Error;

    fn try_from(w: CouplingMatrixWire) -> Result<Self> {
        if w.rows.len() != w.n || w.rows.iter().any(|r| r.len() != w.n) {
            return Err(Error::BadCouplings(format!(
                "expected {0}x{0} rows, got {1} rows of lengths {2:?}",
                w.n,
                w.rows.len(),
                w.rows.iter().map(|r| r.len()).collect::<Vec<_>>()
            )));
        }
        let mut j = Array2::<f64>::zeros((w.n, w.n));
        for (i, row) in w.rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                j[[i, k]] = v;
            }
        }
        CouplingMatrix::new(j, w.seed, w.j_scale)
    }
}

impl<'de> Deserialize<'de> for CouplingMatrix {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let wire = CouplingMatrixWire::deserialize(deserializer)?;
        CouplingMatrix::try_from(wire).map_err(serde::de::Error::custom)
    }
}

impl CouplingMatrix {
    /// Wrap an explicit matrix, enforcing the structural invariants:
    /// square, finite, zero diagonal, and exactly symmetric.
    pub fn new(j: Array2<f64>, seed: u64, j_scale: f64) -> Result<Self> {
        let (rows, cols) = j.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows < 1 {
            return Err(Error::TooFewSpins { n: rows });
        }
        for i in 0..rows {
            if j[[i, i]] != 0.0 {
                return Err(Error::BadCouplings(format!(
                    "diagonal entry ({i},{i}) = {} must be zero",
                    j[[i, i]]
                )));
            }
            for k in 0..cols {
                let v = j[[i, k]];
                if !v.is_finite() {
                    return Err(Error::BadCouplings(format!(
                        "entry ({i},{k}) = {v} is not finite"
                    )));
                }
                if v != j[[k, i]] {
                    return Err(Error::BadCouplings(format!(
                        "entries ({i},{k}) = {v} and ({k},{i}) = {} break symmetry",
                        j[[k, i]]
                    )));
                }
            }
        }
        Ok(CouplingMatrix {
            n: rows,
            seed,
            j_scale,
            j,
        })
    }

    /// The trivial (all-zero) coupling matrix on `n` sites.
    pub fn zeros(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::TooFewSpins { n });
        }
        Ok(CouplingMatrix {
            n,
            seed: 0,
            j_scale: 0.0,
            j: Array2::zeros((n, n)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn j_scale(&self) -> f64 {
        self.j_scale
    }

    /// Coupling between 0-based sites `i` and `k`.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.j[[i, k]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.j.view()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("coupling matrix serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::BadCouplings(e.to_string()))
    }
}

/// Draw all-to-all Gaussian couplings: independent `J_ik` for `i < k` from
/// `Normal(0, (j_scale/√n)²)`, symmetrized, zero diagonal. Identical
/// `(n, j_scale, seed)` gives bit-identical output.
pub fn sample_couplings(n: usize, j_scale: f64, seed: u64) -> Result<CouplingMatrix> {
    if n < 2 {
        return Err(Error::TooFewSpins { n });
    }
    if !(j_scale >= 0.0) {
        return Err(Error::NegativeScale(j_scale));
    }
    let sd = j_scale / (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut j = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for k in (i + 1)..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = sd * z;
            j[[i, k]] = v;
            j[[k, i]] = v;
        }
    }
    Ok(CouplingMatrix {
        n,
        seed,
        j_scale,
        j,
    })
}

/// Blockade-profile couplings `J_ik = c6_eff / (|r_i − r_k|⁶ + ã_B⁶)`.
///
/// Deep inside the blockade (`|r_i − r_k| ≪ ã_B` for all pairs) this
/// plateaus at the uniform all-to-all value `c6_eff / ã_B⁶`; far outside it
/// decays as `1/r⁶`. The stored `j_scale` is that plateau value and the
/// stored seed is 0 (the geometry, not an RNG, is the provenance).
pub fn rydberg_couplings(spec: &RydbergCouplingSpec) -> Result<CouplingMatrix> {
    let n = spec.positions.len();
    if n < 2 {
        return Err(Error::TooFewSpins { n });
    }
    if !(spec.blockade_radius > 0.0) || !spec.blockade_radius.is_finite() {
        return Err(Error::BadBlockadeRadius(spec.blockade_radius));
    }
    if !spec.c6_eff.is_finite() {
        return Err(Error::BadCouplings(format!(
            "c6_eff must be finite, got {}",
            spec.c6_eff
        )));
    }
    for (i, &r) in spec.positions.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::BadCouplings(format!("position {i} = {r} is not finite")));
        }
    }
    let ab6 = spec.blockade_radius.powi(6);
    let mut j = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for k in (i + 1)..n {
            let r = spec.positions[i] - spec.positions[k];
            if r == 0.0 {
                return Err(Error::CoincidentPositions {
                    i,
                    j: k,
                    r: spec.positions[i],
                });
            }
            let v = spec.c6_eff / (r.powi(6) + ab6);
            j[[i, k]] = v;
            j[[k, i]] = v;
        }
    }
    Ok(CouplingMatrix {
        n,
        seed: 0,
        j_scale: spec.c6_eff / ab6,
        j,
    })
}

/// Assemble the dense `2^n x 2^n` Hamiltonian
/// `H = −Σ_{i<k} J_ik σ_i^z σ_k^z − Γ Σ_i σ_i^x` (each unordered pair once,
/// which is the 1/2-compensated double sum). Real symmetric by construction.
pub fn build_tfsk(couplings: &CouplingMatrix, gamma: f64) -> Result<Operator> {
    if !gamma.is_finite() {
        return Err(Error::BadCouplings(format!(
            "transverse field must be finite, got {gamma}"
        )));
    }
    let n = couplings.n;
    let dim = 1usize
        .checked_shl(n as u32)
        .ok_or(Error::BadDimension { dim: usize::MAX })?;
    check_dim(dim)?;

    let mut h = Array2::<C64>::zeros((dim, dim));
    // sign of site i (1-based MSB ordering): +1 when its bit is 0
    let spin = |b: usize, i: usize| -> f64 {
        if b & (1usize << (n - 1 - i)) == 0 {
            1.0
        } else {
            -1.0
        }
    };
    for b in 0..dim {
        let mut e = 0.0;
        for i in 0..n {
            let si = spin(b, i);
            for k in (i + 1)..n {
                e -= couplings.j[[i, k]] * si * spin(b, k);
            }
        }
        h[[b, b]] = C64::new(e, 0.0);
        for i in 0..n {
            h[[b ^ (1usize << (n - 1 - i)), b]] += C64::new(-gamma, 0.0);
        }
    }
    Operator::from_matrix(h)
}

/// Classical Ising energy `−Σ_{i<k} J_ik s_i s_k` of the z-basis state `b`
/// (bit 0 ↦ spin +1). This is the `Γ = 0` diagonal of [`build_tfsk`].
pub fn classical_energy(couplings: &CouplingMatrix, b: usize) -> f64 {
    let n = couplings.n;
    let mut e = 0.0;
    for i in 0..n {
        let si = if b & (1usize << (n - 1 - i)) == 0 { 1.0 } else { -1.0 };
        for k in (i + 1)..n {
            let sk = if b & (1usize << (n - 1 - k)) == 0 { 1.0 } else { -1.0 };
            e -= couplings.j[[i, k]] * si * sk;
        }
    }
    e
}
