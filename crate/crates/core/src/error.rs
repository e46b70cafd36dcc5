//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator dimension {dim} exceeds the configured guard of {max}; raise it with spinspace::set_max_dimension if this is intentional")]
    DimensionGuard { dim: usize, max: usize },

    #[error("operator dimension {dim} is not a power of two >= 2")]
    BadDimension { dim: usize },

    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },

    #[error("site {site} out of range 1..={n}")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("operator is not Hermitian: max|A - A†| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary: max|A†A - I| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coupling matrix needs at least 2 spins, got {n}")]
    TooFewSpins { n: usize },

    #[error("invalid coupling matrix: {0}")]
    BadCouplings(String),

    #[error("coupling scale must be >= 0, got {0}")]
    NegativeScale(f64),

    #[error("positions {i} and {j} coincide (r = {r}); pairwise-distinct coordinates required")]
    CoincidentPositions { i: usize, j: usize, r: f64 },

    #[error("blockade radius must be > 0, got {0}")]
    BadBlockadeRadius(f64),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("inverse temperature must be finite and >= 0, got {0}")]
    BadBeta(f64),

    #[error("time must be finite, got {0}")]
    BadTime(f64),

    #[error("not a density matrix: trace deviates from 1 by {trace_deviation:.3e}")]
    NotDensityMatrix { trace_deviation: f64 },

    #[error("time grid must be strictly ascending and finite")]
    BadTimeGrid,

    #[error("series of kind {kind} has imaginary part {imag:.3e} at t = {t}; expected a real observable")]
    ImaginaryLeak { kind: &'static str, imag: f64, t: f64 },

    #[error("series of kind {kind} has a non-finite value at t = {t}")]
    NonFinite { kind: &'static str, t: f64 },

    #[error("probe sites i = j = {site}; the scrambling correlator needs separated probes")]
    ProbesCoincide { site: usize },

    #[error("protocol register of {qubits} qubits exceeds the dense-evolution guard of {max}")]
    RegisterTooLarge { qubits: usize, max: usize },

    #[error("disorder realization with seed {seed} failed: {source}")]
    Realization {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("need at least one realization")]
    NoRealizations,

    #[error("fit window [{lo}, {hi}] for the beta = {beta} curve contains only {points} grid points; need at least {min}")]
    WindowTooNarrow {
        beta: f64,
        lo: f64,
        hi: f64,
        points: usize,
        min: usize,
    },

    #[error("fit window [{lo}, {hi}] for the beta = {beta} curve lies outside the data range [{t_min}, {t_max}]")]
    WindowOutOfRange {
        beta: f64,
        lo: f64,
        hi: f64,
        t_min: f64,
        t_max: f64,
    },

    #[error("singular Jacobian: parameter `{parameter}` has no sensitivity over the fit windows")]
    SingularJacobian { parameter: String },

    #[error("fit input invalid: {0}")]
    BadFitInput(String),

    #[error("fit did not converge; call sites that require convergence must check FitResult::converged")]
    FitNotConverged,

    #[error("autocorrelation series does not start at R(0) = 1 (got {0})")]
    BadAutocorrelation(f64),

    #[error("config error(s):\n{0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
