//! Exercises the C surface exactly as a foreign caller would: raw pointers,
//! status codes, the thread-local error message.

use std::ffi::{c_char, CString};

use tppq_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { tppq_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    assert!(n > 0);
    let end = buf.iter().position(|&b| b == 0).unwrap();
    String::from_utf8_lossy(&buf[..end]).into_owned()
}

#[test]
fn null_handles_are_rejected() {
    let mut f = 0.0f64;
    let status = unsafe {
        tppq_gate_fidelity(std::ptr::null(), TppqGate::RxP, 0.1, 100, 1, &mut f as *mut f64)
    };
    assert_eq!(status, TppqStatus::NullPointer);
    assert!(last_error().contains("NULL"));
    unsafe { tppq_system_free(std::ptr::null_mut()) };
}

#[test]
fn bad_config_path_reports_error() {
    let path = CString::new("/nonexistent/tppq.toml").unwrap();
    let sys = unsafe { tppq_system_from_config(path.as_ptr()) };
    assert!(sys.is_null());
    assert!(last_error().contains("nonexistent"));
}

#[test]
fn spectrum_and_levels_match_reference_device() {
    let sys = tppq_system_new();
    assert!(!sys.is_null());
    let (mut bt, mut bp, mut dt, mut dp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let status = unsafe { tppq_spectrum(sys, &mut bt, &mut bp, &mut dt, &mut dp) };
    assert_eq!(status, TppqStatus::Ok);
    assert!((bt - 2.882738).abs() < 1e-5, "bare f01_T = {bt}");
    assert!((bp - 2.846704).abs() < 1e-5, "bare f12_P = {bp}");
    assert!((dt - 2.883).abs() < 1e-4, "dressed f01_T = {dt}");
    assert!((dp - 2.847).abs() < 1e-4, "dressed f12_P = {dp}");

    let mut energies = [0.0f64; 4];
    let mut parities = [0i32; 4];
    let n = unsafe {
        tppq_qubit_levels(sys, TppqSubsystem::Ppq, energies.as_mut_ptr(), parities.as_mut_ptr(), 4)
    };
    assert_eq!(n, 4);
    assert_eq!(energies[0], 0.0);
    assert!(energies.windows(2).all(|w| w[0] < w[1]));
    // Levels 1 and 2 share parity; level 0 differs.
    assert_eq!(parities[1], parities[2]);
    assert_ne!(parities[0], parities[1]);
    unsafe { tppq_system_free(sys) };
}

#[test]
fn gate_fidelity_and_block_roundtrip() {
    let sys = tppq_system_new();
    assert!(!sys.is_null());
    // Coarse step keeps the test quick; the R_X,P pulse is 20 ns.
    let mut f = 0.0f64;
    let status = unsafe { tppq_gate_fidelity(sys, TppqGate::RxP, 5e-3, 2000, 7, &mut f) };
    assert_eq!(status, TppqStatus::Ok);
    assert!(f > 0.99, "R_X,P fidelity {f}");

    let mut re = [0.0f64; 16];
    let mut im = [0.0f64; 16];
    let status = unsafe { tppq_gate_comp_block(sys, TppqGate::RxP, 5e-3, re.as_mut_ptr(), im.as_mut_ptr()) };
    assert_eq!(status, TppqStatus::Ok);
    // Column norms of a low-leakage gate stay near 1.
    for j in 0..4 {
        let norm: f64 = (0..4).map(|i| re[4 * i + j].powi(2) + im[4 * i + j].powi(2)).sum();
        assert!((norm - 1.0).abs() < 1e-2, "column {j} norm² = {norm}");
    }

    // Invalid arguments are flagged.
    let status = unsafe { tppq_gate_fidelity(sys, TppqGate::RxP, -1.0, 100, 7, &mut f) };
    assert_eq!(status, TppqStatus::InvalidArgument);
    unsafe { tppq_system_free(sys) };
}

#[test]
fn trotter_error_and_calibration() {
    let sys = tppq_system_new();
    let mut coarse = 0.0f64;
    let mut fine = 0.0f64;
    unsafe {
        assert_eq!(tppq_trotter_state_error(sys, 1e-1, 2.0, &mut coarse), TppqStatus::Ok);
        assert_eq!(tppq_trotter_state_error(sys, 1e-2, 2.0, &mut fine), TppqStatus::Ok);
    }
    assert!(coarse > fine, "coarse {coarse} vs fine {fine}");

    let mut phi = -1.0f64;
    let status = unsafe { tppq_calibrate_flux(sys, 2.85, &mut phi) };
    assert_eq!(status, TppqStatus::Ok);
    assert!(phi > 0.0 && phi < std::f64::consts::FRAC_PI_2);
    // Unreachable target surfaces as a numerical error with a message.
    let status = unsafe { tppq_calibrate_flux(sys, 10.0, &mut phi) };
    assert_eq!(status, TppqStatus::NumericalError);
    assert!(last_error().contains("calibration"));
    unsafe { tppq_system_free(sys) };
}

#[test]
fn version_string_present() {
    let v = tppq_version();
    assert!(!v.is_null());
}
