//! Brute-force reference implementations for the integration tests,
//! coded straight from the operator definitions: explicit Kronecker
//! products, Taylor-series matrix exponentials with scaling and squaring,
//! and direct trace formulas. Nothing here shares machinery with the
//! library's spectral fast paths.

#![allow(dead_code)]

use ndarray::prelude::*;
use otoclab::hamiltonians::CouplingMatrix;
use otoclab::C64;

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn eye(dim: usize) -> Array2<C64> {
    Array2::eye(dim)
}

pub fn pauli_matrix(axis: char) -> Array2<C64> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match axis {
        'x' => array![[o, l], [l, o]],
        'y' => array![[o, -i], [i, o]],
        'z' => array![[l, o], [o, -l]],
        other => panic!("unknown Pauli axis {other}"),
    }
}

/// `I ⊗ … ⊗ σ ⊗ … ⊗ I`, the Pauli at 1-based `site` of `n`, site 1 on the
/// most significant factor.
pub fn site_pauli(n: usize, site: usize, axis: char) -> Array2<C64> {
    assert!((1..=n).contains(&site));
    let mut out = eye(1);
    for s in 1..=n {
        let factor = if s == site {
            pauli_matrix(axis)
        } else {
            eye(2)
        };
        out = kron(&out, &factor);
    }
    out
}

/// `H = −Σ_{i<k} J_ik σ^z_i σ^z_k − Γ Σ_i σ^x_i` assembled operator by
/// operator.
pub fn dense_tfsk(couplings: &CouplingMatrix, gamma: f64) -> Array2<C64> {
    let n = couplings.n();
    let dim = 1usize << n;
    let mut h = Array2::<C64>::zeros((dim, dim));
    for i in 0..n {
        for k in (i + 1)..n {
            let zz = site_pauli(n, i + 1, 'z').dot(&site_pauli(n, k + 1, 'z'));
            h = h - zz.mapv(|v| v * couplings.entry(i, k));
        }
        h = h - site_pauli(n, i + 1, 'x').mapv(|v| v * gamma);
    }
    h
}

fn inf_norm(a: &Array2<C64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^A` by Taylor series after scaling `A` down to norm ≤ 1/4, then
/// repeated squaring.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let dim = a.nrows();
    let norm = inf_norm(a);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / C64::new(2f64.powi(squarings as i32), 0.0));

    let mut result = eye(dim);
    let mut term = eye(dim);
    for k in 1..200 {
        term = term.dot(&scaled).mapv(|z| z / C64::new(k as f64, 0.0));
        result = result + &term;
        if inf_norm(&term) < 1e-300_f64.max(1e-22 * inf_norm(&result)) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// `e^{−iHt}`.
pub fn propagator(h: &Array2<C64>, t: f64) -> Array2<C64> {
    expm(&h.mapv(|z| z * C64::new(0.0, -t)))
}

/// `e^{−βH} / Tr e^{−βH}`. The energy origin is shifted to the smallest
/// diagonal entry first, which changes nothing after normalization but
/// keeps the series away from overflow.
pub fn thermal(h: &Array2<C64>, beta: f64) -> Array2<C64> {
    let shift = h
        .diag()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    let mut shifted = h.mapv(|z| z * C64::new(-beta, 0.0));
    for k in 0..shifted.nrows() {
        shifted[[k, k]] += C64::new(beta * shift, 0.0);
    }
    let boltzmann = expm(&shifted);
    let z: C64 = boltzmann.diag().sum();
    boltzmann.mapv(|v| v / z)
}

fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

/// Heisenberg evolution `W(t) = U† W U` with `U = e^{−iHt}`.
pub fn evolved(h: &Array2<C64>, w: &Array2<C64>, t: f64) -> Array2<C64> {
    let u = propagator(h, t);
    dagger(&u).dot(w).dot(&u)
}

/// `Re Tr[ρ_β σ(t) σ]`.
pub fn oracle_r(h: &Array2<C64>, beta: f64, probe: &Array2<C64>, t: f64) -> f64 {
    let rho = thermal(h, beta);
    trace(&rho.dot(&evolved(h, probe, t)).dot(probe)).re
}

/// `Tr[ρ_β W†(t) V† W(t) V]`.
pub fn oracle_f(
    h: &Array2<C64>,
    beta: f64,
    w: &Array2<C64>,
    v: &Array2<C64>,
    t: f64,
) -> C64 {
    let rho = thermal(h, beta);
    let wt = evolved(h, w, t);
    trace(&rho.dot(&dagger(&wt)).dot(&dagger(v)).dot(&wt).dot(v))
}

/// `−Tr[ρ_β [W(t),V]²]` for Hermitian probes.
pub fn oracle_c(
    h: &Array2<C64>,
    beta: f64,
    w: &Array2<C64>,
    v: &Array2<C64>,
    t: f64,
) -> f64 {
    let rho = thermal(h, beta);
    let wt = evolved(h, w, t);
    let commutator = wt.dot(v) - v.dot(&wt);
    -trace(&rho.dot(&commutator).dot(&commutator)).re
}

/// `Tr[V† ρ_{β/2} W†(t) V ρ_{β/2} W(t)]` with normalized thermal factors.
pub fn oracle_f2(
    h: &Array2<C64>,
    beta: f64,
    w: &Array2<C64>,
    v: &Array2<C64>,
    t: f64,
) -> C64 {
    let q = thermal(h, beta / 2.0);
    let wt = evolved(h, w, t);
    trace(&dagger(v).dot(&q).dot(&dagger(&wt)).dot(v).dot(&q).dot(&wt))
}

/// `−Tr[ρ_{β/2} [W(t),V] ρ_{β/2} [W(t),V]]`, raw and divided by the purity
/// `Tr[ρ_{β/2}²]`.
pub fn oracle_c2(
    h: &Array2<C64>,
    beta: f64,
    w: &Array2<C64>,
    v: &Array2<C64>,
    t: f64,
) -> (f64, f64) {
    let q = thermal(h, beta / 2.0);
    let wt = evolved(h, w, t);
    let commutator = wt.dot(v) - v.dot(&wt);
    let raw = -trace(&q.dot(&commutator).dot(&q).dot(&commutator)).re;
    let purity = trace(&q.dot(&q)).re;
    (raw, raw / purity)
}
