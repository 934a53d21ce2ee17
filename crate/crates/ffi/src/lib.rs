//! C ABI over the simulator.
//!
//! Every function returns a status code (`VDPCM_OK` on success). After a
//! failure, `vdpcm_last_error_message` returns the message for the calling
//! thread. Simulations are opaque handles created by `vdpcm_simulation_new`
//! and released with `vdpcm_simulation_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use vdpcm::experiments::total_current;
use vdpcm::io::cli::exit_code;
use vdpcm::io::RunConfig;
use vdpcm::stepper::Simulation;
use vdpcm::Error;

pub const VDPCM_OK: i32 = 0;
pub const VDPCM_ERR_NULL: i32 = 1;
/// Bad configuration, parameter or argument.
pub const VDPCM_ERR_INVALID: i32 = 2;
pub const VDPCM_ERR_SIMULATION: i32 = 3;
/// Energy increase or broken state invariant.
pub const VDPCM_ERR_VIOLATION: i32 = 4;
pub const VDPCM_ERR_BUFFER: i32 = 5;
pub const VDPCM_ERR_PANIC: i32 = 6;

pub const VDPCM_FIELD_U1: i32 = 0;
pub const VDPCM_FIELD_U2: i32 = 1;
pub const VDPCM_FIELD_U0: i32 = 2;
pub const VDPCM_FIELD_V0: i32 = 3;
pub const VDPCM_FIELD_V1: i32 = 4;
pub const VDPCM_FIELD_V2: i32 = 5;

/// Opaque simulation handle.
pub struct VdpcmSimulation {
    sim: Simulation,
}

/// Energy ledger summary at the current time.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VdpcmEnergy {
    pub phi: f64,
    pub psi: f64,
    pub psi_tot: f64,
    /// Largest per-step increase of `psi_tot` so far (negative when it always decreased).
    pub max_increase: f64,
    pub max_balance_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> i32 {
    match exit_code(e) {
        1 => VDPCM_ERR_INVALID,
        3 => VDPCM_ERR_VIOLATION,
        _ => VDPCM_ERR_SIMULATION,
    }
}

fn fail(e: Error) -> i32 {
    let code = status_of(&e);
    set_error(e.to_string());
    code
}

/// Runs `f`, turning panics into `VDPCM_ERR_PANIC`.
fn guard(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            VDPCM_ERR_PANIC
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("`", stringify!($p), "` is null"));
            return VDPCM_ERR_NULL;
        })+
    };
}

/// Creates a simulation from a TOML configuration, or from the shipped
/// defaults when `config_toml` is null.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be valid
/// for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_new(
    config_toml: *const c_char,
    out: *mut *mut VdpcmSimulation,
) -> i32 {
    guard(|| {
        non_null!(out);
        let config = if config_toml.is_null() {
            RunConfig::shipped()
        } else {
            let text = match unsafe { CStr::from_ptr(config_toml) }.to_str() {
                Ok(t) => t,
                Err(_) => {
                    set_error("configuration is not valid UTF-8");
                    return VDPCM_ERR_INVALID;
                }
            };
            match RunConfig::from_toml_str(text) {
                Ok(c) => c,
                Err(e) => return fail(e),
            }
        };
        let built = config
            .validate()
            .and_then(|r| Simulation::new(r.spec, r.mesh, config.solver.clone(), r.initial));
        match built {
            Ok(sim) => {
                unsafe { *out = Box::into_raw(Box::new(VdpcmSimulation { sim })) };
                VDPCM_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from `vdpcm_simulation_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_free(sim: *mut VdpcmSimulation) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Integrates to `t_end`. On failure the handle keeps the last accepted state.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_advance(sim: *mut VdpcmSimulation, t_end: f64) -> i32 {
    guard(|| {
        non_null!(sim);
        let s = unsafe { &mut (*sim).sim };
        if !(t_end.is_finite() && t_end > s.state().time) {
            set_error(format!("t_end = {t_end} must exceed the current time {}", s.state().time));
            return VDPCM_ERR_INVALID;
        }
        match s.advance(t_end) {
            Ok(()) => VDPCM_OK,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `sim` must be a live handle and `t` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_time(sim: *const VdpcmSimulation, t: *mut f64) -> i32 {
    guard(|| {
        non_null!(sim, t);
        unsafe { *t = (*sim).sim.state().time };
        VDPCM_OK
    })
}

/// # Safety
/// `sim` must be a live handle and `n` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_n_cells(sim: *const VdpcmSimulation, n: *mut usize) -> i32 {
    guard(|| {
        non_null!(sim, n);
        unsafe { *n = (*sim).sim.mesh().n_cells };
        VDPCM_OK
    })
}

/// # Safety
/// `sim` must be a live handle and `steps` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_steps(sim: *const VdpcmSimulation, steps: *mut usize) -> i32 {
    guard(|| {
        non_null!(sim, steps);
        unsafe { *steps = (*sim).sim.steps() };
        VDPCM_OK
    })
}

/// Copies one cell field (`VDPCM_FIELD_*`) into `buf`, which must hold at
/// least `n_cells` values.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_copy_field(
    sim: *const VdpcmSimulation,
    field: i32,
    buf: *mut f64,
    len: usize,
) -> i32 {
    guard(|| {
        non_null!(sim, buf);
        let st = unsafe { (*sim).sim.state() };
        let src: &[f64] = match field {
            VDPCM_FIELD_U1 => &st.u1,
            VDPCM_FIELD_U2 => &st.u2,
            VDPCM_FIELD_U0 => &st.u0,
            VDPCM_FIELD_V0 => &st.v0,
            VDPCM_FIELD_V1 => &st.v1,
            VDPCM_FIELD_V2 => &st.v2,
            other => {
                set_error(format!("unknown field {other}"));
                return VDPCM_ERR_INVALID;
            }
        };
        if len < src.len() {
            set_error(format!("buffer holds {len} values, need {}", src.len()));
            return VDPCM_ERR_BUFFER;
        }
        unsafe { std::slice::from_raw_parts_mut(buf, src.len()) }.copy_from_slice(src);
        VDPCM_OK
    })
}

/// # Safety
/// `sim` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_energy(sim: *const VdpcmSimulation, out: *mut VdpcmEnergy) -> i32 {
    guard(|| {
        non_null!(sim, out);
        let ledger = unsafe { (*sim).sim.ledger() };
        let Some(last) = ledger.last() else {
            set_error("empty ledger");
            return VDPCM_ERR_SIMULATION;
        };
        unsafe {
            *out = VdpcmEnergy {
                phi: last.phi,
                psi: last.psi,
                psi_tot: last.psi_tot,
                max_increase: ledger.max_increase(),
                max_balance_residual: ledger.max_balance_residual(),
            }
        };
        VDPCM_OK
    })
}

/// Spatial mean of the total current over interior edges.
///
/// # Safety
/// `sim` must be a live handle and `current` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_simulation_total_current(sim: *const VdpcmSimulation, current: *mut f64) -> i32 {
    guard(|| {
        non_null!(sim, current);
        let s = unsafe { &(*sim).sim };
        unsafe { *current = total_current(s.state(), s.spec(), s.mesh(), s.config()).0 };
        VDPCM_OK
    })
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length without the NUL,
/// 0 when there is none. A null `buf` only queries the length.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vdpcm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            let dst = unsafe { std::slice::from_raw_parts_mut(buf.cast::<u8>(), n + 1) };
            dst[..n].copy_from_slice(&bytes[..n]);
            dst[n] = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vdpcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
