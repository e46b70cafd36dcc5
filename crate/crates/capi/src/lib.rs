//! C ABI over the core library: an opaque disorder-realization handle,
//! buffer-filling correlator series, and interferometric-protocol
//! readouts. The generated header lands in `include/otoclab.h`.
//!
//! Conventions: every fallible call returns [`Status`]; on anything but
//! `Ok` a thread-local message (valid until the next failing call on the
//! same thread) is readable via [`otoclab_last_error_message`]. Output
//! buffers are caller-owned and written only on `Ok`. Panics never cross
//! the boundary; they surface as `Status::Panicked`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use otoclab::correlators::{
    autocorrelation, otoc_f, regulated_c2, regulated_f2, scrambling_c, Realization,
};
use otoclab::hamiltonians::{build_tfsk, sample_couplings, CouplingMatrix};
use otoclab::protocol::{run_protocol, run_protocol_sampled, ProtocolRun};
use otoclab::spinspace::{site_operator, Operator, PauliAxis};
use otoclab::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    /// A required pointer argument was null (or a length was zero).
    NullArgument = 1,
    /// Arguments were rejected by validation; see the error message.
    BadArgument = 2,
    /// Inputs were well-formed but the computation failed.
    ComputeFailed = 3,
    /// An internal invariant broke; the handle is still safe to free.
    Panicked = 4,
}

/// One diagonalized disorder realization plus the couplings that built
/// it, shared by all correlator and protocol calls.
pub struct System {
    realization: Realization,
    couplings: CouplingMatrix,
    gamma: f64,
}

/// Shot-sampled readout: empirical mean of a ±1 observable and its
/// binomial standard error. (`std_err`, not `stderr`: the latter is a
/// macro once `<stdio.h>` is included.)
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ShotReadout {
    pub mean: f64,
    pub std_err: f64,
    pub shots: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: Status, message: &str) -> Status {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NULs stripped");
    });
    status
}

fn fail_with(err: &Error) -> Status {
    let status = match err {
        Error::Eigen(_)
        | Error::SingularJacobian { .. }
        | Error::FitNotConverged
        | Error::Realization { .. } => Status::ComputeFailed,
        _ => Status::BadArgument,
    };
    fail(status, &err.to_string())
}

fn guarded(body: impl FnOnce() -> Status) -> Status {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(Status::Panicked, &format!("internal panic: {message}"))
        }
    }
}

/// Message for the most recent failure on this thread. Never null; empty
/// before the first failure. The pointer is invalidated by the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn otoclab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn otoclab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a transverse-field spin-glass realization: `n` spins, Gaussian
/// couplings of scale `j_scale` drawn from `seed`, transverse field
/// `gamma`. Diagonalization happens here, so construction is the
/// expensive call. Free with `otoclab_system_free`.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn otoclab_tfsk_new(
    n: usize,
    j_scale: f64,
    gamma: f64,
    seed: u64,
    out: *mut *mut System,
) -> Status {
    if out.is_null() {
        return fail(Status::NullArgument, "out handle pointer is null");
    }
    guarded(|| {
        let built = (|| -> Result<System, Error> {
            let couplings = if n >= 2 {
                sample_couplings(n, j_scale, seed)?
            } else {
                CouplingMatrix::zeros(n)?
            };
            let h = build_tfsk(&couplings, gamma)?;
            Ok(System {
                realization: Realization::from_hamiltonian(&h, seed)?,
                couplings,
                gamma,
            })
        })();
        match built {
            Ok(system) => {
                ptr::write(out, Box::into_raw(Box::new(system)));
                Status::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Release a handle from `otoclab_tfsk_new`. Null is a no-op.
///
/// # Safety
/// `system` must be a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn otoclab_system_free(system: *mut System) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Number of spins in the system; 0 for a null handle.
///
/// # Safety
/// `system` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn otoclab_system_sites(system: *const System) -> usize {
    system.as_ref().map_or(0, |s| s.realization.n())
}

unsafe fn input_times<'a>(times: *const f64, n_times: usize) -> Result<&'a [f64], Status> {
    if times.is_null() {
        return Err(fail(Status::NullArgument, "times pointer is null"));
    }
    if n_times == 0 {
        return Err(fail(Status::NullArgument, "n_times is zero"));
    }
    Ok(slice::from_raw_parts(times, n_times))
}

unsafe fn output<'a>(buf: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Status> {
    if buf.is_null() {
        return Err(fail(
            Status::NullArgument,
            &format!("{name} output pointer is null"),
        ));
    }
    Ok(slice::from_raw_parts_mut(buf, len))
}

fn probe(n: usize, site: usize) -> Result<Operator, Error> {
    site_operator(n, site, PauliAxis::Z)
}

/// Thermal autocorrelation `R(t)` of the site-`site` σᶻ probe on the
/// given time grid. Sites are 1-based.
///
/// # Safety
/// `times` must point to `n_times` readable doubles and `out` to
/// `n_times` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn otoclab_autocorrelation(
    system: *const System,
    beta: f64,
    site: usize,
    times: *const f64,
    n_times: usize,
    out: *mut f64,
) -> Status {
    let Some(system) = system.as_ref() else {
        return fail(Status::NullArgument, "system handle is null");
    };
    guarded(|| {
        let grid = match input_times(times, n_times) {
            Ok(g) => g,
            Err(s) => return s,
        };
        let out = match output(out, n_times, "R") {
            Ok(b) => b,
            Err(s) => return s,
        };
        match autocorrelation(&system.realization, beta, site, grid) {
            Ok(series) => {
                for (dst, v) in out.iter_mut().zip(series.values()) {
                    *dst = v.re;
                }
                Status::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Squared-commutator scrambling correlator `C(t)` for σᶻ probes at
/// `w_site` and `v_site` (1-based, distinct).
///
/// # Safety
/// `times` must point to `n_times` readable doubles and `out` to
/// `n_times` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn otoclab_scrambling(
    system: *const System,
    beta: f64,
    w_site: usize,
    v_site: usize,
    times: *const f64,
    n_times: usize,
    out: *mut f64,
) -> Status {
    let Some(system) = system.as_ref() else {
        return fail(Status::NullArgument, "system handle is null");
    };
    guarded(|| {
        let grid = match input_times(times, n_times) {
            Ok(g) => g,
            Err(s) => return s,
        };
        let out = match output(out, n_times, "C") {
            Ok(b) => b,
            Err(s) => return s,
        };
        match scrambling_c(&system.realization, beta, w_site, v_site, grid) {
            Ok(series) => {
                for (dst, v) in out.iter_mut().zip(series.values()) {
                    *dst = v.re;
                }
                Status::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Thermal out-of-time-order function `F(t)` for σᶻ probes, split into
/// real and imaginary buffers.
///
/// # Safety
/// `times` must point to `n_times` readable doubles; `out_re` and
/// `out_im` to `n_times` writable doubles each.
#[no_mangle]
pub unsafe extern "C" fn otoclab_otoc(
    system: *const System,
    beta: f64,
    w_site: usize,
    v_site: usize,
    times: *const f64,
    n_times: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> Status {
    complex_series(system, beta, w_site, v_site, times, n_times, out_re, out_im, false)
}

/// Regulated out-of-time-order function `F₂(t)` (thermal factors split
/// symmetrically around the probes), split into real and imaginary
/// buffers.
///
/// # Safety
/// `times` must point to `n_times` readable doubles; `out_re` and
/// `out_im` to `n_times` writable doubles each.
#[no_mangle]
pub unsafe extern "C" fn otoclab_regulated_otoc(
    system: *const System,
    beta: f64,
    w_site: usize,
    v_site: usize,
    times: *const f64,
    n_times: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> Status {
    complex_series(system, beta, w_site, v_site, times, n_times, out_re, out_im, true)
}

#[allow(clippy::too_many_arguments)]
unsafe fn complex_series(
    system: *const System,
    beta: f64,
    w_site: usize,
    v_site: usize,
    times: *const f64,
    n_times: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    regulated: bool,
) -> Status {
    let Some(system) = system.as_ref() else {
        return fail(Status::NullArgument, "system handle is null");
    };
    guarded(|| {
        let grid = match input_times(times, n_times) {
            Ok(g) => g,
            Err(s) => return s,
        };
        let re = match output(out_re, n_times, "re") {
            Ok(b) => b,
            Err(s) => return s,
        };
        let im = match output(out_im, n_times, "im") {
            Ok(b) => b,
            Err(s) => return s,
        };
        let n = system.realization.n();
        let series = (|| -> Result<_, Error> {
            let w = probe(n, w_site)?;
            let v = probe(n, v_site)?;
            if regulated {
                regulated_f2(&system.realization, beta, &w, &v, grid)
            } else {
                otoc_f(&system.realization, beta, &w, &v, grid)
            }
        })();
        match series {
            Ok(series) => {
                for (k, v) in series.values().iter().enumerate() {
                    re[k] = v.re;
                    im[k] = v.im;
                }
                Status::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Regulated squared commutator: raw `C₂(t)` and its purity-normalized
/// companion in two real buffers.
///
/// # Safety
/// `times` must point to `n_times` readable doubles; `out_raw` and
/// `out_normalized` to `n_times` writable doubles each.
#[no_mangle]
pub unsafe extern "C" fn otoclab_regulated_scrambling(
    system: *const System,
    beta: f64,
    w_site: usize,
    v_site: usize,
    times: *const f64,
    n_times: usize,
    out_raw: *mut f64,
    out_normalized: *mut f64,
) -> Status {
    let Some(system) = system.as_ref() else {
        return fail(Status::NullArgument, "system handle is null");
    };
    guarded(|| {
        let grid = match input_times(times, n_times) {
            Ok(g) => g,
            Err(s) => return s,
        };
        let raw = match output(out_raw, n_times, "raw") {
            Ok(b) => b,
            Err(s) => return s,
        };
        let normalized = match output(out_normalized, n_times, "normalized") {
            Ok(b) => b,
            Err(s) => return s,
        };
        let n = system.realization.n();
        let pair = (|| -> Result<_, Error> {
            let w = probe(n, w_site)?;
            let v = probe(n, v_site)?;
            regulated_c2(&system.realization, beta, &w, &v, grid)
        })();
        match pair {
            Ok((raw_series, normalized_series)) => {
                for (dst, v) in raw.iter_mut().zip(raw_series.values()) {
                    *dst = v.re;
                }
                for (dst, v) in normalized.iter_mut().zip(normalized_series.values()) {
                    *dst = v.re;
                }
                Status::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Exact two-copy interferometric readout at one time: writes
/// `(Re F₂, Im F₂)` as measured on the ancilla. Register is
/// `2n + 1` qubits, so `n ≤ 5`.
///
/// # Safety
/// `out_re` and `out_im` must each point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn otoclab_protocol_readout(
    system: *const System,
    beta: f64,
    w_site: usize,
    v_site: usize,
    t: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> Status {
    let Some(system) = system.as_ref() else {
        return fail(Status::NullArgument, "system handle is null");
    };
    if out_re.is_null() || out_im.is_null() {
        return fail(Status::NullArgument, "readout output pointer is null");
    }
    guarded(|| {
        let run = match ProtocolRun::new(&system.couplings, system.gamma, beta, w_site, v_site, t)
        {
            Ok(run) => run,
            Err(e) => return fail_with(&e),
        };
        match run_protocol(&run) {
            Ok((re, im)) => {
                ptr::write(out_re, re);
                ptr::write(out_im, im);
                Status::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Shot-sampled interferometric readout: both ancilla observables
/// estimated from `shots` two-outcome measurements each, deterministic in
/// `seed`.
///
/// # Safety
/// `out_re` and `out_im` must each point to one writable
/// `otoclab_shot_readout`.
#[no_mangle]
pub unsafe extern "C" fn otoclab_protocol_readout_sampled(
    system: *const System,
    beta: f64,
    w_site: usize,
    v_site: usize,
    t: f64,
    shots: u64,
    seed: u64,
    out_re: *mut ShotReadout,
    out_im: *mut ShotReadout,
) -> Status {
    let Some(system) = system.as_ref() else {
        return fail(Status::NullArgument, "system handle is null");
    };
    if out_re.is_null() || out_im.is_null() {
        return fail(Status::NullArgument, "readout output pointer is null");
    }
    guarded(|| {
        let run = match ProtocolRun::new(&system.couplings, system.gamma, beta, w_site, v_site, t)
        {
            Ok(run) => run,
            Err(e) => return fail_with(&e),
        };
        match run_protocol_sampled(&run, shots, seed) {
            Ok((re, im)) => {
                ptr::write(
                    out_re,
                    ShotReadout {
                        mean: re.mean,
                        std_err: re.stderr,
                        shots: re.shots,
                    },
                );
                ptr::write(
                    out_im,
                    ShotReadout {
                        mean: im.mean,
                        std_err: im.stderr,
                        shots: im.shots,
                    },
                );
                Status::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}
