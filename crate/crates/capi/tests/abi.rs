//! Drives the C surface from Rust, standing in for a C caller: handle
//! lifecycle, buffer contracts, error reporting, and agreement with the
//! core library it wraps.

use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use otoclab_capi::{
    otoclab_autocorrelation, otoclab_last_error_message, otoclab_otoc,
    otoclab_protocol_readout, otoclab_protocol_readout_sampled, otoclab_regulated_otoc,
    otoclab_regulated_scrambling, otoclab_scrambling, otoclab_system_free,
    otoclab_system_sites, otoclab_tfsk_new, otoclab_version, ShotReadout, Status, System,
};

fn new_system(n: usize, seed: u64) -> *mut System {
    let mut handle: *mut System = ptr::null_mut();
    let status = unsafe { otoclab_tfsk_new(n, 1.0, 1.35, seed, &mut handle) };
    assert_eq!(status, Status::Ok);
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(otoclab_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

#[test]
fn version_is_a_nonempty_c_string() {
    let v = unsafe { CStr::from_ptr(otoclab_version()) };
    assert!(!v.to_bytes().is_empty());
}

#[test]
fn handle_lifecycle_and_site_count() {
    let sys = new_system(4, 11);
    assert_eq!(unsafe { otoclab_system_sites(sys) }, 4);
    unsafe { otoclab_system_free(sys) };
    assert_eq!(unsafe { otoclab_system_sites(ptr::null()) }, 0);
    unsafe { otoclab_system_free(ptr::null_mut()) };
}

#[test]
fn null_arguments_are_rejected_with_messages() {
    let status = unsafe { otoclab_tfsk_new(3, 1.0, 1.35, 0, ptr::null_mut()) };
    assert_eq!(status, Status::NullArgument);
    assert!(!last_error().is_empty());

    let sys = new_system(3, 0);
    let times = [0.0, 1.0];
    let mut out = [0.0; 2];
    let status = unsafe {
        otoclab_autocorrelation(sys, 1.0, 1, ptr::null(), 2, out.as_mut_ptr())
    };
    assert_eq!(status, Status::NullArgument);
    let status =
        unsafe { otoclab_autocorrelation(sys, 1.0, 1, times.as_ptr(), 0, out.as_mut_ptr()) };
    assert_eq!(status, Status::NullArgument);
    let status =
        unsafe { otoclab_autocorrelation(sys, 1.0, 1, times.as_ptr(), 2, ptr::null_mut()) };
    assert_eq!(status, Status::NullArgument);
    unsafe { otoclab_system_free(sys) };
}

#[test]
fn validation_errors_surface_as_bad_argument() {
    let sys = new_system(3, 0);
    let times = [0.0, 1.0];
    let mut out = [0.0; 2];
    let status =
        unsafe { otoclab_autocorrelation(sys, 1.0, 9, times.as_ptr(), 2, out.as_mut_ptr()) };
    assert_eq!(status, Status::BadArgument);
    assert!(last_error().contains("site"), "got: {}", last_error());

    // coincident probes
    let status = unsafe {
        otoclab_scrambling(sys, 1.0, 2, 2, times.as_ptr(), 2, out.as_mut_ptr())
    };
    assert_eq!(status, Status::BadArgument);
    unsafe { otoclab_system_free(sys) };
}

#[test]
fn series_match_the_library_they_wrap() {
    use otoclab::correlators::{
        autocorrelation, otoc_f, regulated_c2, scrambling_c, Realization,
    };
    use otoclab::hamiltonians::{build_tfsk, sample_couplings};

    let (n, seed) = (4, 23);
    let sys = new_system(n, seed);
    let times = [0.0, 0.4, 1.3, 2.9, 6.0];
    let beta = 1.7;

    let couplings = sample_couplings(n, 1.0, seed).unwrap();
    let h = build_tfsk(&couplings, 1.35).unwrap();
    let realization = Realization::from_hamiltonian(&h, seed).unwrap();
    let w = otoclab::spinspace::site_operator(n, 1, otoclab::spinspace::PauliAxis::Z).unwrap();
    let v = otoclab::spinspace::site_operator(n, n, otoclab::spinspace::PauliAxis::Z).unwrap();

    let mut r = [0.0; 5];
    assert_eq!(
        unsafe { otoclab_autocorrelation(sys, beta, 1, times.as_ptr(), 5, r.as_mut_ptr()) },
        Status::Ok
    );
    assert!((r[0] - 1.0).abs() < 1e-12);
    let r_direct = autocorrelation(&realization, beta, 1, &times).unwrap();
    for (got, want) in r.iter().zip(r_direct.values()) {
        assert!((got - want.re).abs() < 1e-14);
    }

    let mut c = [0.0; 5];
    assert_eq!(
        unsafe { otoclab_scrambling(sys, beta, 1, n, times.as_ptr(), 5, c.as_mut_ptr()) },
        Status::Ok
    );
    let c_direct = scrambling_c(&realization, beta, 1, n, &times).unwrap();
    for (got, want) in c.iter().zip(c_direct.values()) {
        assert!((got - want.re).abs() < 1e-14);
    }

    let (mut f_re, mut f_im) = ([0.0; 5], [0.0; 5]);
    assert_eq!(
        unsafe {
            otoclab_otoc(
                sys,
                beta,
                1,
                n,
                times.as_ptr(),
                5,
                f_re.as_mut_ptr(),
                f_im.as_mut_ptr(),
            )
        },
        Status::Ok
    );
    let f_direct = otoc_f(&realization, beta, &w, &v, &times).unwrap();
    for (k, want) in f_direct.values().iter().enumerate() {
        assert!((f_re[k] - want.re).abs() < 1e-14);
        assert!((f_im[k] - want.im).abs() < 1e-14);
    }

    let (mut raw, mut normalized) = ([0.0; 5], [0.0; 5]);
    assert_eq!(
        unsafe {
            otoclab_regulated_scrambling(
                sys,
                beta,
                1,
                n,
                times.as_ptr(),
                5,
                raw.as_mut_ptr(),
                normalized.as_mut_ptr(),
            )
        },
        Status::Ok
    );
    let (raw_direct, normalized_direct) =
        regulated_c2(&realization, beta, &w, &v, &times).unwrap();
    for k in 0..5 {
        assert!((raw[k] - raw_direct.values()[k].re).abs() < 1e-14);
        assert!((normalized[k] - normalized_direct.values()[k].re).abs() < 1e-14);
    }

    unsafe { otoclab_system_free(sys) };
}

#[test]
fn protocol_readout_agrees_with_the_regulated_otoc() {
    let (n, seed) = (2, 5);
    let sys = new_system(n, seed);
    let times = [0.0, 0.8, 2.5];
    let beta = 3.0;

    let (mut f2_re, mut f2_im) = ([0.0; 3], [0.0; 3]);
    assert_eq!(
        unsafe {
            otoclab_regulated_otoc(
                sys,
                beta,
                1,
                2,
                times.as_ptr(),
                3,
                f2_re.as_mut_ptr(),
                f2_im.as_mut_ptr(),
            )
        },
        Status::Ok
    );
    for (k, &t) in times.iter().enumerate() {
        let (mut re, mut im) = (f64::NAN, f64::NAN);
        assert_eq!(
            unsafe { otoclab_protocol_readout(sys, beta, 1, 2, t, &mut re, &mut im) },
            Status::Ok
        );
        assert!((re - f2_re[k]).abs() < 1e-10);
        assert!((im - f2_im[k]).abs() < 1e-10);
    }
    unsafe { otoclab_system_free(sys) };
}

#[test]
fn sampled_readout_is_deterministic_and_tightens_with_shots() {
    let sys = new_system(2, 9);
    let blank = ShotReadout {
        mean: 0.0,
        std_err: 0.0,
        shots: 0,
    };
    let (mut a_re, mut a_im) = (blank, blank);
    let (mut b_re, mut b_im) = (blank, blank);
    let (mut big_re, mut big_im) = (blank, blank);
    unsafe {
        assert_eq!(
            otoclab_protocol_readout_sampled(sys, 1.0, 1, 2, 0.9, 400, 7, &mut a_re, &mut a_im),
            Status::Ok
        );
        assert_eq!(
            otoclab_protocol_readout_sampled(sys, 1.0, 1, 2, 0.9, 400, 7, &mut b_re, &mut b_im),
            Status::Ok
        );
        assert_eq!(
            otoclab_protocol_readout_sampled(
                sys, 1.0, 1, 2, 0.9, 160000, 7, &mut big_re, &mut big_im,
            ),
            Status::Ok
        );
    }
    assert_eq!(a_re.mean, b_re.mean);
    assert_eq!(a_im.mean, b_im.mean);
    assert_eq!(a_re.shots, 400);
    assert!(big_re.std_err < a_re.std_err);

    // the exact readout should sit within a few standard errors
    let (mut re, mut im) = (f64::NAN, f64::NAN);
    unsafe {
        assert_eq!(
            otoclab_protocol_readout(sys, 1.0, 1, 2, 0.9, &mut re, &mut im),
            Status::Ok
        );
    }
    assert!((big_re.mean - re).abs() < 5.0 * big_re.std_err.max(1e-3));
    assert!((big_im.mean - im).abs() < 5.0 * big_im.std_err.max(1e-3));
    unsafe { otoclab_system_free(sys) };
}

#[test]
fn generated_header_declares_the_full_surface() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/otoclab.h");
    let text = std::fs::read_to_string(&header).expect("header generated at build time");
    for symbol in [
        "otoclab_status",
        "otoclab_system",
        "otoclab_shot_readout",
        "otoclab_version",
        "otoclab_last_error_message",
        "otoclab_tfsk_new",
        "otoclab_system_free",
        "otoclab_system_sites",
        "otoclab_autocorrelation",
        "otoclab_scrambling",
        "otoclab_otoc",
        "otoclab_regulated_otoc",
        "otoclab_regulated_scrambling",
        "otoclab_protocol_readout",
        "otoclab_protocol_readout_sampled",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }

    // syntax-check a realistic translation unit (stdio first: its macros
    // must not collide with our declarations) when a compiler is around
    let dir = tempfile::tempdir().unwrap();
    let tu = dir.path().join("use_header.c");
    std::fs::write(
        &tu,
        format!(
            "#include <stdio.h>\n#include \"{}\"\nint main(void) {{ return 0; }}\n",
            header.display()
        ),
    )
    .unwrap();
    for cc in ["cc", "gcc", "clang"] {
        let probe = Command::new(cc)
            .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
            .arg(&tu)
            .status();
        if let Ok(status) = probe {
            assert!(status.success(), "{cc} rejected the generated header");
            return;
        }
    }
}
