//! Circuit-level simulation of the interferometric measurement of the
//! regulated OTOC.
//!
//! The register holds two copies of the system plus one ancilla qubit (see
//! [`RegisterLayout`]). Both copies start in the thermal state at half the
//! target inverse temperature and the ancilla in `|+⟩`; a probe `V` is
//! applied to both copies conditioned on the ancilla being `|↓⟩`, both
//! copies evolve under the same Hamiltonian, then `W` is applied to both
//! conditioned on `|↑⟩`. Reading out `σ^x ⊗ S` and `σ^y ⊗ S` — ancilla
//! Pauli correlated with the copy-swap — returns the real and imaginary
//! parts of `F₂(t)`.
//!
//! Conditioning convention: `V` rides the `↓` branch *before* evolution
//! and `W` the `↑` branch *after*. The opposite assignment measures the
//! complex conjugate instead; the convention here is pinned by the
//! numerical identity with `correlators::regulated_f2`, which the tests
//! assert to 1e-10.
//!
//! Everything is exact density-matrix arithmetic — no trajectory noise —
//! so the protocol serves as an independent oracle for the eigenbasis
//! correlator code. An optional shot-sampling mode models a finite
//! measurement budget on top of the exact expectation values.

use ndarray::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::hamiltonians::{build_tfsk, CouplingMatrix};
use crate::spectral::{diagonalize, propagator, thermal_state, SpectralDecomposition};
use crate::spinspace::{
    site_operator, swap_operator, tensor, Operator, PauliAxis, RegisterLayout,
};
use crate::C64;

/// Dense density-matrix evolution guard: two copies plus ancilla.
pub const MAX_REGISTER_QUBITS: usize = 11;

/// Which ancilla basis state a controlled probe fires on. `Up` is the
/// computational `|0⟩` (spin +1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncillaState {
    Up,
    Down,
}

/// One protocol execution: model, temperature, probe sites, time.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    layout: RegisterLayout,
    couplings: CouplingMatrix,
    gamma: f64,
    beta: f64,
    w_site: usize,
    v_site: usize,
    t: f64,
}

impl ProtocolRun {
    pub fn new(
        couplings: &CouplingMatrix,
        gamma: f64,
        beta: f64,
        w_site: usize,
        v_site: usize,
        t: f64,
    ) -> Result<Self> {
        let n = couplings.n();
        let layout = RegisterLayout::new(n)?;
        if layout.total_qubits() > MAX_REGISTER_QUBITS {
            return Err(Error::RegisterTooLarge {
                qubits: layout.total_qubits(),
                max: MAX_REGISTER_QUBITS,
            });
        }
        check_probe_site(n, w_site)?;
        check_probe_site(n, v_site)?;
        if n > 1 && w_site == v_site {
            return Err(Error::ProbesCoincide { site: w_site });
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::BadBeta(beta));
        }
        if !t.is_finite() {
            return Err(Error::BadTime(t));
        }
        Ok(ProtocolRun {
            layout,
            couplings: couplings.clone(),
            gamma,
            beta,
            w_site,
            v_site,
            t,
        })
    }

    pub fn layout(&self) -> RegisterLayout {
        self.layout
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn time(&self) -> f64 {
        self.t
    }
}

fn check_probe_site(n: usize, site: usize) -> Result<()> {
    if site < 1 || site > n {
        return Err(Error::SiteOutOfRange { site, n });
    }
    Ok(())
}

fn ancilla_projector(state: AncillaState) -> Operator {
    let mut m = Array2::<C64>::zeros((2, 2));
    let idx = match state {
        AncillaState::Up => 0,
        AncillaState::Down => 1,
    };
    m[[idx, idx]] = C64::new(1.0, 0.0);
    Operator::from_matrix(m).expect("2x2 projector is valid")
}

fn flipped(state: AncillaState) -> AncillaState {
    match state {
        AncillaState::Up => AncillaState::Down,
        AncillaState::Down => AncillaState::Up,
    }
}

/// Ancilla-controlled double probe: applies `probe` to the same site of
/// *both* copies when the ancilla is in `condition`, nothing otherwise.
/// `probe` acts on one copy (dimension `layout.copy_dim()`) and must be
/// Hermitian and unitary; the result is then unitary and involutive.
pub fn controlled_probe(
    layout: RegisterLayout,
    probe: &Operator,
    condition: AncillaState,
) -> Result<Operator> {
    if probe.dim() != layout.copy_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.copy_dim(),
            got: probe.dim(),
        });
    }
    let herm = probe.hermiticity_deviation();
    if herm > 1e-10 {
        return Err(Error::NotHermitian { deviation: herm });
    }
    let unit = probe.unitarity_deviation();
    if unit > 1e-10 {
        return Err(Error::NotUnitary { deviation: unit });
    }
    let both = tensor(&tensor(probe, probe)?, &ancilla_projector(condition))?;
    let id = Operator::identity(layout.copy_dim() * layout.copy_dim())?;
    let rest = tensor(&id, &ancilla_projector(flipped(condition)))?;
    Operator::from_matrix(both.entries() + rest.entries())
}

/// Shared context for a grid of protocol evaluations: one copy-space
/// diagonalization plus the fixed register operators.
struct Circuit {
    layout: RegisterLayout,
    spec: SpectralDecomposition,
    cw: Operator,
    cv: Operator,
    readout_x: Array2<C64>,
    readout_y: Array2<C64>,
}

impl Circuit {
    fn new(run: &ProtocolRun) -> Result<Self> {
        let h = build_tfsk(&run.couplings, run.gamma)?;
        let spec = diagonalize(&h)?;
        let n = run.couplings.n();
        let w = site_operator(n, run.w_site, PauliAxis::Z)?;
        let v = site_operator(n, run.v_site, PauliAxis::Z)?;
        let cw = controlled_probe(run.layout, &w, AncillaState::Up)?;
        let cv = controlled_probe(run.layout, &v, AncillaState::Down)?;
        let swap = swap_operator(run.layout)?;
        let pair = copy_identity_pair(run.layout)?;
        let sx = tensor(&pair, &sigma_on_ancilla(PauliAxis::X)?)?;
        let sy = tensor(&pair, &sigma_on_ancilla(PauliAxis::Y)?)?;
        let readout_x = swap.entries().dot(sx.entries());
        let readout_y = swap.entries().dot(sy.entries());
        Ok(Circuit {
            layout: run.layout,
            spec,
            cw,
            cv,
            readout_x,
            readout_y,
        })
    }

    /// `G = CW · (U(t) ⊗ U(t) ⊗ I) · CV`.
    fn gate(&self, t: f64) -> Result<Array2<C64>> {
        let u = propagator(&self.spec, t)?;
        let evolve = tensor(&tensor(&u, &u)?, &Operator::identity(2)?)?;
        Ok(self
            .cw
            .entries()
            .dot(evolve.entries())
            .dot(self.cv.entries()))
    }

    /// Initial register state `ρ₁ ⊗ ρ₂ ⊗ |+⟩⟨+|` from per-copy states.
    fn initial_state(&self, rho1: &Operator, rho2: &Operator) -> Result<Array2<C64>> {
        let plus = {
            let mut m = Array2::<C64>::zeros((2, 2));
            m.fill(C64::new(0.5, 0.0));
            Operator::from_matrix(m)?
        };
        let full = tensor(&tensor(rho1, rho2)?, &plus)?;
        Ok(full.into_matrix())
    }

    /// Evolve and read out: `(Tr[ρ(t) S⊗σˣ], Tr[ρ(t) S⊗σʸ])`.
    fn measure(&self, rho0: &Array2<C64>, t: f64) -> Result<(f64, f64)> {
        let g = self.gate(t)?;
        let rho_t = g.dot(rho0).dot(&g.mapv(|z| z.conj()).reversed_axes());
        let dim = self.layout.dim();
        let mut x = C64::new(0.0, 0.0);
        let mut y = C64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                x += rho_t[[i, j]] * self.readout_x[[j, i]];
                y += rho_t[[i, j]] * self.readout_y[[j, i]];
            }
        }
        // both readout operators are Hermitian, so the traces are real
        for (label, val) in [("F2_protocol re", x), ("F2_protocol im", y)] {
            if val.im.abs() >= crate::correlators::REAL_IMAG_TOL {
                return Err(Error::ImaginaryLeak {
                    kind: label,
                    imag: val.im,
                    t,
                });
            }
        }
        Ok((x.re, y.re))
    }
}

fn copy_identity_pair(layout: RegisterLayout) -> Result<Operator> {
    Operator::identity(layout.copy_dim() * layout.copy_dim())
}

fn sigma_on_ancilla(axis: PauliAxis) -> Result<Operator> {
    Operator::from_matrix(crate::spinspace::pauli(axis))
}

/// Execute the full interferometric circuit once and return the two
/// readouts, `(Re F₂(t), Im F₂(t))`. The coherence term the circuit
/// builds is the conjugate of `F₂`, and the σ^y trace carries its own
/// minus sign — the two cancel, so the raw readouts already match
/// `correlators::regulated_f2` componentwise.
pub fn run_protocol(run: &ProtocolRun) -> Result<(f64, f64)> {
    let circuit = Circuit::new(run)?;
    let rho = thermal_state(&circuit.spec, run.beta / 2.0)?;
    let rho0 = circuit.initial_state(rho.rho(), rho.rho())?;
    circuit.measure(&rho0, run.t)
}

/// Protocol variant with copy 2 at infinite temperature: measures the
/// singly-regulated OTOC `Tr[ρ_{β/2} W(t) V W(t) V]` — the plain `F` at
/// inverse temperature β/2 — with the maximally-mixed copy's `2^{−n}`
/// normalization divided back out.
pub fn protocol_infinite_copy(run: &ProtocolRun) -> Result<(f64, f64)> {
    let circuit = Circuit::new(run)?;
    let rho1 = thermal_state(&circuit.spec, run.beta / 2.0)?;
    let rho2 = thermal_state(&circuit.spec, 0.0)?;
    let rho0 = circuit.initial_state(rho1.rho(), rho2.rho())?;
    let (x, y) = circuit.measure(&rho0, run.t)?;
    let scale = run.layout.copy_dim() as f64;
    Ok((x * scale, y * scale))
}

/// Protocol readouts over a (β, t) grid with one shared diagonalization.
/// Returns one `TimeSeries` of kind `F2_protocol` per β, holding
/// `re + i·im` per time point; `seed` only tags the series.
pub fn protocol_series(
    couplings: &CouplingMatrix,
    gamma: f64,
    seed: u64,
    betas: &[f64],
    times: &[f64],
    w_site: usize,
    v_site: usize,
) -> Result<Vec<crate::correlators::TimeSeries>> {
    use crate::correlators::{SeriesKind, TimeSeries};
    if betas.is_empty() {
        return Err(Error::BadBeta(f64::NAN));
    }
    let t0 = *times.first().ok_or(Error::BadTimeGrid)?;
    let probe = ProtocolRun::new(couplings, gamma, betas[0], w_site, v_site, t0)?;
    let circuit = Circuit::new(&probe)?;
    let states: Vec<Array2<C64>> = betas
        .iter()
        .map(|&beta| {
            if !beta.is_finite() || beta < 0.0 {
                return Err(Error::BadBeta(beta));
            }
            let rho = thermal_state(&circuit.spec, beta / 2.0)?;
            circuit.initial_state(rho.rho(), rho.rho())
        })
        .collect::<Result<_>>()?;
    let mut values: Vec<Vec<C64>> = vec![Vec::with_capacity(times.len()); betas.len()];
    for &t in times {
        for (vals, rho0) in values.iter_mut().zip(states.iter()) {
            let (x, y) = circuit.measure(rho0, t)?;
            vals.push(C64::new(x, y));
        }
    }
    betas
        .iter()
        .zip(values)
        .map(|(&beta, vals)| {
            TimeSeries::new(SeriesKind::F2Protocol, beta, seed, times.to_vec(), vals)
        })
        .collect()
}

/// One shot-sampled readout: empirical mean of `shots` two-outcome (±1)
/// measurements and its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub shots: u64,
}

/// Simulate a finite measurement budget for a ±1 observable with exact
/// expectation `value`: draws `shots` Bernoulli outcomes with
/// `p(+1) = (1+value)/2` and returns the empirical estimate. Deterministic
/// in `seed`.
pub fn sample_readout(value: f64, shots: u64, seed: u64) -> Result<ShotEstimate> {
    if shots == 0 {
        return Err(Error::BadFitInput("shot count must be positive".into()));
    }
    if !value.is_finite() || value.abs() > 1.0 + 1e-9 {
        return Err(Error::BadFitInput(format!(
            "readout expectation {value} outside [-1, 1]"
        )));
    }
    let p = ((1.0 + value) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Binomial::new(shots, p)
        .map_err(|e| Error::BadFitInput(format!("binomial setup failed: {e}")))?;
    let k = dist.sample(&mut rng) as f64;
    let n = shots as f64;
    let p_hat = k / n;
    Ok(ShotEstimate {
        mean: 2.0 * p_hat - 1.0,
        // propagated binomial error of 2p̂−1; zero when every shot agrees
        stderr: 2.0 * (p_hat * (1.0 - p_hat) / n).sqrt(),
        shots,
    })
}

/// Shot-sampled protocol: the two readouts measured with `shots` samples
/// each (independent streams derived from `seed`).
pub fn run_protocol_sampled(
    run: &ProtocolRun,
    shots: u64,
    seed: u64,
) -> Result<(ShotEstimate, ShotEstimate)> {
    let (re, im) = run_protocol(run)?;
    let re_est = sample_readout(re, shots, seed)?;
    let im_est = sample_readout(im, shots, seed.wrapping_add(1))?;
    Ok((re_est, im_est))
}
