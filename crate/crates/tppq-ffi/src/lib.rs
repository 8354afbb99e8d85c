//! C ABI for the transmon/PPQ pulse-level simulator.
//!
//! The surface follows the usual opaque-handle pattern: create a
//! [`TppqSystem`] from the built-in reference parameters or a TOML config,
//! query spectra, score gates, run the Trotter-error diagnostic, free the
//! handle. Every function returns a [`TppqStatus`]; on failure a
//! per-thread message is retrievable via [`tppq_last_error_message`].
//!
//! All pointers must be valid for the documented lengths; passing NULL where
//! a non-NULL pointer is expected yields `TPPQ_STATUS_NULL_POINTER` rather
//! than undefined behavior.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use tppq_sim::config::RunConfig;
use tppq_sim::device::CompositeModel;
use tppq_sim::evolve::TrotterEngine;
use tppq_sim::metrics::{ideal_cnot_tp, ideal_rx_p, ideal_rx_t, IdealGate};
use tppq_sim::optimize::{score_schedule_columns, GateTemplate};
use tppq_sim::pulses::Channel;

/// Status code returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TppqStatus {
    Ok = 0,
    NullPointer = 1,
    ConfigError = 2,
    NumericalError = 3,
    InvalidArgument = 4,
    /// An internal panic was caught at the FFI boundary.
    Panic = 5,
}

/// Gate selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TppqGate {
    CnotTp = 0,
    RxT = 1,
    RxP = 2,
}

/// Subsystem selector for spectrum queries.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TppqSubsystem {
    Transmon = 0,
    Ppq = 1,
}

/// Opaque simulator handle: parsed config plus the assembled 64-dim model.
pub struct TppqSystem {
    config: RunConfig,
    model: CompositeModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

/// Copy the last error message of the calling thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes, or be NULL (then only
/// the length is returned).
#[no_mangle]
pub unsafe extern "C" fn tppq_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Always terminate.
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Library version string (static storage, do not free).
#[no_mangle]
pub extern "C" fn tppq_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

fn build_system(config: RunConfig) -> Result<TppqSystem, String> {
    let model = CompositeModel::from_spec(&config.device.to_spec()).map_err(|e| e.to_string())?;
    Ok(TppqSystem { config, model })
}

/// Create a system from the built-in reference parameters. Returns NULL on
/// failure. Free with [`tppq_system_free`].
#[no_mangle]
pub extern "C" fn tppq_system_new() -> *mut TppqSystem {
    match catch_unwind(|| build_system(RunConfig::default())) {
        Ok(Ok(sys)) => Box::into_raw(Box::new(sys)),
        Ok(Err(e)) => {
            set_error(&e);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic during system construction");
            std::ptr::null_mut()
        }
    }
}

/// Create a system from a TOML run config. Returns NULL on failure (check
/// [`tppq_last_error_message`]).
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tppq_system_from_config(path: *const c_char) -> *mut TppqSystem {
    if path.is_null() {
        set_error("config path is NULL");
        return std::ptr::null_mut();
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p.to_string(),
        Err(_) => {
            set_error("config path is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    match catch_unwind(|| -> Result<TppqSystem, String> {
        let config = RunConfig::load(Path::new(&path)).map_err(|e| e.to_string())?;
        build_system(config)
    }) {
        Ok(Ok(sys)) => Box::into_raw(Box::new(sys)),
        Ok(Err(e)) => {
            set_error(&e);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic during system construction");
            std::ptr::null_mut()
        }
    }
}

/// Destroy a system handle. NULL is accepted and ignored.
///
/// # Safety
/// `sys` must be a pointer previously returned by a constructor of this
/// library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tppq_system_free(sys: *mut TppqSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

unsafe fn system_ref<'a>(sys: *const TppqSystem) -> Option<&'a TppqSystem> {
    if sys.is_null() {
        set_error("system handle is NULL");
        None
    } else {
        Some(&*sys)
    }
}

fn gate_template(sys: &TppqSystem, gate: TppqGate) -> GateTemplate {
    match gate {
        TppqGate::CnotTp => sys.config.schedule.to_template(),
        TppqGate::RxT => sys.config.single_qubit.rx_t.to_template(Channel::Transmon),
        TppqGate::RxP => sys.config.single_qubit.rx_p.to_template(Channel::Ppq),
    }
}

fn gate_ideal(gate: TppqGate) -> IdealGate {
    match gate {
        TppqGate::CnotTp => ideal_cnot_tp(),
        TppqGate::RxT => ideal_rx_t(std::f64::consts::FRAC_PI_2),
        TppqGate::RxP => ideal_rx_p(std::f64::consts::FRAC_PI_2),
    }
}

/// Bare and dressed qubit transition frequencies, GHz.
///
/// # Safety
/// All out-pointers must be valid or NULL (NULL outputs are skipped).
#[no_mangle]
pub unsafe extern "C" fn tppq_spectrum(
    sys: *const TppqSystem,
    f01_t_bare_ghz: *mut f64,
    f12_p_bare_ghz: *mut f64,
    f01_t_dressed_ghz: *mut f64,
    f12_p_dressed_ghz: *mut f64,
) -> TppqStatus {
    let Some(sys) = system_ref(sys) else {
        return TppqStatus::NullPointer;
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        let t = &sys.model.transmon;
        let p = &sys.model.ppq;
        let store = |ptr: *mut f64, v: f64| {
            if !ptr.is_null() {
                *ptr = v;
            }
        };
        store(f01_t_bare_ghz, t.f01_ghz());
        store(f12_p_bare_ghz, p.f12_ghz());
        store(f01_t_dressed_ghz, sys.model.frame_omega_t / tppq_sim::device::GHZ);
        store(f12_p_dressed_ghz, sys.model.frame_omega_p / tppq_sim::device::GHZ);
    }));
    match result {
        Ok(()) => TppqStatus::Ok,
        Err(_) => {
            set_error("internal panic in tppq_spectrum");
            TppqStatus::Panic
        }
    }
}

/// Idle eigenenergies (GHz, ground-referenced) and parity labels of one
/// qubit's retained levels. Parity codes: 0 even, 1 odd, 2 mixed.
///
/// # Safety
/// `energies_ghz` and `parities` must each point to at least `len` elements
/// (or be NULL to skip). Returns the number of retained levels.
#[no_mangle]
pub unsafe extern "C" fn tppq_qubit_levels(
    sys: *const TppqSystem,
    subsystem: TppqSubsystem,
    energies_ghz: *mut f64,
    parities: *mut i32,
    len: usize,
) -> usize {
    let Some(sys) = system_ref(sys) else {
        return 0;
    };
    let qubit = match subsystem {
        TppqSubsystem::Transmon => &sys.model.transmon,
        TppqSubsystem::Ppq => &sys.model.ppq,
    };
    let n = qubit.dim();
    for i in 0..n.min(len) {
        if !energies_ghz.is_null() {
            *energies_ghz.add(i) = qubit.energies[i] / tppq_sim::device::GHZ;
        }
        if !parities.is_null() {
            *parities.add(i) = match qubit.parity[i] {
                tppq_sim::device::Parity::Even => 0,
                tppq_sim::device::Parity::Odd => 1,
                tppq_sim::device::Parity::Mixed => 2,
            };
        }
    }
    n
}

/// Average gate fidelity of a configured schedule against its ideal target.
/// `tau_ns` and `samples` of 0 fall back to the config's run options.
///
/// # Safety
/// `fidelity_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tppq_gate_fidelity(
    sys: *const TppqSystem,
    gate: TppqGate,
    tau_ns: f64,
    samples: usize,
    seed: u64,
    fidelity_out: *mut f64,
) -> TppqStatus {
    let Some(sys) = system_ref(sys) else {
        return TppqStatus::NullPointer;
    };
    if fidelity_out.is_null() {
        set_error("fidelity_out is NULL");
        return TppqStatus::NullPointer;
    }
    if tau_ns < 0.0 {
        set_error("tau_ns must be non-negative");
        return TppqStatus::InvalidArgument;
    }
    let tau = if tau_ns > 0.0 { tau_ns } else { sys.config.run.tau_ns };
    let samples = if samples > 0 { samples } else { sys.config.run.fidelity_samples };
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<f64, String> {
        let engine = TrotterEngine::new(&sys.model).map_err(|e| e.to_string())?;
        let template = gate_template(sys, gate);
        let report = score_schedule_columns(&engine, &template, &gate_ideal(gate), tau, samples, seed)
            .map_err(|e| e.to_string())?;
        Ok(report.fidelity)
    }));
    match result {
        Ok(Ok(f)) => {
            *fidelity_out = f;
            TppqStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e);
            TppqStatus::NumericalError
        }
        Err(_) => {
            set_error("internal panic in tppq_gate_fidelity");
            TppqStatus::Panic
        }
    }
}

/// Frame-adjusted 4×4 computational block of a configured gate, row-major.
///
/// # Safety
/// `re_out` and `im_out` must each point to at least 16 doubles.
#[no_mangle]
pub unsafe extern "C" fn tppq_gate_comp_block(
    sys: *const TppqSystem,
    gate: TppqGate,
    tau_ns: f64,
    re_out: *mut f64,
    im_out: *mut f64,
) -> TppqStatus {
    let Some(sys) = system_ref(sys) else {
        return TppqStatus::NullPointer;
    };
    if re_out.is_null() || im_out.is_null() {
        set_error("block output pointers must not be NULL");
        return TppqStatus::NullPointer;
    }
    let tau = if tau_ns > 0.0 { tau_ns } else { sys.config.run.tau_ns };
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<Vec<Vec<[f64; 2]>>, String> {
        let engine = TrotterEngine::new(&sys.model).map_err(|e| e.to_string())?;
        let template = gate_template(sys, gate);
        let report = score_schedule_columns(
            &engine,
            &template,
            &gate_ideal(gate),
            tau,
            sys.config.run.fidelity_samples,
            sys.config.run.rng_seed,
        )
        .map_err(|e| e.to_string())?;
        Ok(report.comp_block)
    }));
    match result {
        Ok(Ok(block)) => {
            for (i, row) in block.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    *re_out.add(4 * i + j) = c[0];
                    *im_out.add(4 * i + j) = c[1];
                }
            }
            TppqStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e);
            TppqStatus::NumericalError
        }
        Err(_) => {
            set_error("internal panic in tppq_gate_comp_block");
            TppqStatus::Panic
        }
    }
}

/// Suzuki-Trotter vs exact-diagonalization state error for a free evolution
/// of `duration_ns` from |++⟩ at step `tau_ns`.
///
/// # Safety
/// `error_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tppq_trotter_state_error(
    sys: *const TppqSystem,
    tau_ns: f64,
    duration_ns: f64,
    error_out: *mut f64,
) -> TppqStatus {
    let Some(sys) = system_ref(sys) else {
        return TppqStatus::NullPointer;
    };
    if error_out.is_null() {
        set_error("error_out is NULL");
        return TppqStatus::NullPointer;
    }
    if !(tau_ns > 0.0) || !(duration_ns > 0.0) {
        set_error("tau_ns and duration_ns must be positive");
        return TppqStatus::InvalidArgument;
    }
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<f64, String> {
        let engine = TrotterEngine::new(&sys.model).map_err(|e| e.to_string())?;
        let scan = engine.trotter_error_scan(&[tau_ns], duration_ns).map_err(|e| e.to_string())?;
        Ok(scan[0].1)
    }));
    match result {
        Ok(Ok(err)) => {
            *error_out = err;
            TppqStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e);
            TppqStatus::NumericalError
        }
        Err(_) => {
            set_error("internal panic in tppq_trotter_state_error");
            TppqStatus::Panic
        }
    }
}

/// Flux bias (radians) that calibrates the transmon f01 to `target_f01_ghz`.
///
/// # Safety
/// `phi_e_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tppq_calibrate_flux(
    sys: *const TppqSystem,
    target_f01_ghz: f64,
    phi_e_out: *mut f64,
) -> TppqStatus {
    let Some(sys) = system_ref(sys) else {
        return TppqStatus::NullPointer;
    };
    if phi_e_out.is_null() {
        set_error("phi_e_out is NULL");
        return TppqStatus::NullPointer;
    }
    let result = catch_unwind(AssertUnwindSafe(|| {
        tppq_sim::device::calibrate_flux(&sys.config.device.to_spec(), target_f01_ghz)
            .map_err(|e| e.to_string())
    }));
    match result {
        Ok(Ok(phi)) => {
            *phi_e_out = phi;
            TppqStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e);
            TppqStatus::NumericalError
        }
        Err(_) => {
            set_error("internal panic in tppq_calibrate_flux");
            TppqStatus::Panic
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_static_nul_terminated() {
        let v = tppq_version();
        let s = unsafe { CStr::from_ptr(v) }.to_str().unwrap();
        assert!(!s.is_empty());
    }
}
