//! The brute-force oracle has to be trustworthy before it can judge the
//! library: check it against closed forms and elementary identities.

mod common;

use common::*;
use ndarray::prelude::*;
use otoclab::hamiltonians::{build_tfsk, sample_couplings};
use otoclab::C64;

fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

#[test]
fn site_paulis_have_the_documented_layout() {
    // site 1 acts on the most significant bit
    let z1 = site_pauli(2, 1, 'z');
    for (b, want) in [1.0, 1.0, -1.0, -1.0].into_iter().enumerate() {
        assert_eq!(z1[[b, b]], C64::new(want, 0.0));
    }
    let x2 = site_pauli(2, 2, 'x');
    assert_eq!(x2[[0, 1]], C64::new(1.0, 0.0));
    assert_eq!(x2[[2, 3]], C64::new(1.0, 0.0));
    assert_eq!(x2[[0, 2]], C64::new(0.0, 0.0));
}

#[test]
fn expm_matches_entrywise_exponential_on_diagonals() {
    let a = array![
        [C64::new(0.3, -1.2), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(-2.0, 0.4)]
    ];
    let e = expm(&a);
    assert!((e[[0, 0]] - a[[0, 0]].exp()).norm() < 1e-14);
    assert!((e[[1, 1]] - a[[1, 1]].exp()).norm() < 1e-14);
    assert!(e[[0, 1]].norm() < 1e-15 && e[[1, 0]].norm() < 1e-15);
}

#[test]
fn expm_reproduces_pauli_rotations() {
    // e^{−iθσ^x} = cos θ · I − i sin θ · σ^x, with θ big enough to force
    // scaling and squaring
    let theta = 2.7;
    let sx = pauli_matrix('x');
    let rot = expm(&sx.mapv(|z| z * C64::new(0.0, -theta)));
    let want = eye(2).mapv(|z| z * C64::new(theta.cos(), 0.0))
        + sx.mapv(|z| z * C64::new(0.0, -theta.sin()));
    assert!(max_abs_diff(&rot, &want) < 1e-13);
}

#[test]
fn propagator_is_unitary() {
    let couplings = sample_couplings(3, 1.0, 5).unwrap();
    let h = dense_tfsk(&couplings, 1.35);
    let u = propagator(&h, 3.7);
    let gram = u.t().mapv(|z| z.conj()).dot(&u);
    assert!(max_abs_diff(&gram, &eye(8)) < 1e-12);
}

#[test]
fn thermal_state_matches_the_two_level_closed_form() {
    // H = −Γσ^x: ρ_β = (I + tanh(βΓ) σ^x) / 2
    let gamma = 1.35;
    let beta = 2.4;
    let h = pauli_matrix('x').mapv(|z| z * C64::new(-gamma, 0.0));
    let rho = thermal(&h, beta);
    let th = (beta * gamma).tanh();
    let want = (eye(2) + pauli_matrix('x').mapv(|z| z * C64::new(th, 0.0)))
        .mapv(|z| z * C64::new(0.5, 0.0));
    assert!(max_abs_diff(&rho, &want) < 1e-14);
}

#[test]
fn thermal_state_handles_a_nonzero_energy_origin() {
    // diagonal H with min entry ≠ 0, so the internal shift actually fires
    let beta = 1.7;
    let energies = [2.0, 3.5, 5.0, 9.0];
    let mut h = Array2::<C64>::zeros((4, 4));
    for (k, &e) in energies.iter().enumerate() {
        h[[k, k]] = C64::new(e, 0.0);
    }
    let rho = thermal(&h, beta);
    let z: f64 = energies.iter().map(|&e| (-beta * (e - 2.0)).exp()).sum();
    for (k, &e) in energies.iter().enumerate() {
        let want = (-beta * (e - 2.0)).exp() / z;
        assert!((rho[[k, k]].re - want).abs() < 1e-14);
    }
}

#[test]
fn dense_assembly_agrees_with_the_library_hamiltonian() {
    let couplings = sample_couplings(4, 1.0, 17).unwrap();
    let ours = dense_tfsk(&couplings, 1.35);
    let theirs = build_tfsk(&couplings, 1.35).unwrap();
    assert!(max_abs_diff(&ours, theirs.entries()) < 1e-12);
}

#[test]
fn single_spin_autocorrelation_is_a_cosine_at_any_temperature() {
    // H = −Γσ^x: Re Tr[ρ_β σ^z(t) σ^z] = cos(2Γt) independently of β
    let gamma = 0.9;
    let h = pauli_matrix('x').mapv(|z| z * C64::new(-gamma, 0.0));
    let probe = pauli_matrix('z');
    for beta in [0.0, 1.0, 5.0] {
        for t in [0.0, 0.4, 1.9, 6.3] {
            let r = oracle_r(&h, beta, &probe, t);
            assert!(
                (r - (2.0 * gamma * t).cos()).abs() < 1e-12,
                "beta {beta}, t {t}: {r}"
            );
        }
    }
}
