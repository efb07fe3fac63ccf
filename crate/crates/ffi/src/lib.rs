//! C ABI for melab.
//!
//! Every function returns a [`MelabStatus`]; on failure the message is kept
//! per thread and read with [`melab_last_error`]. Simulations are opaque
//! handles created by [`melab_simulation_new`] and released with
//! [`melab_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use melab::analysis::bessel_j1_zero;
use melab::energy::energy_total;
use melab::experiment::{run_experiment, ExperimentConfig, RunOptions};
use melab::model::{GriddedForcing, State};
use melab::periodic::{r_critical, RcrConstants};
use melab::stepper::Integrator;
use melab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Diverged = 3,
    Io = 4,
    Config = 5,
    GridMismatch = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Failure = 9,
}

/// Opaque simulation handle.
pub struct MelabSimulation {
    cfg: ExperimentConfig,
    forcing: GriddedForcing,
    state: State,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MelabStatus {
    match e {
        Error::Diverged { .. } => MelabStatus::Diverged,
        Error::Io(_) | Error::Csv(_) | Error::Archive(_) => MelabStatus::Io,
        Error::Config(_) | Error::Json(_) => MelabStatus::Config,
        Error::GridMismatch(_) | Error::DimensionMismatch { .. } => MelabStatus::GridMismatch,
        Error::Parameter(_)
        | Error::BoundaryContract { .. }
        | Error::Domain(_)
        | Error::Unsupported(_) => MelabStatus::InvalidArgument,
        _ => MelabStatus::Failure,
    }
}

type Outcome = Result<(), (MelabStatus, String)>;

fn fail(e: Error) -> (MelabStatus, String) {
    (status_of(&e), e.to_string())
}

fn guard(f: impl FnOnce() -> Outcome) -> MelabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MelabStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            MelabStatus::Panic
        }
    }
}

fn null(what: &str) -> (MelabStatus, String) {
    (MelabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MelabStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MelabStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn sim_ref<'a>(
    sim: *const MelabSimulation,
) -> Result<&'a MelabSimulation, (MelabStatus, String)> {
    sim.as_ref().ok_or_else(|| null("simulation"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn melab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). `required` receives the full size including the NUL.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null; `required` may be null.
#[no_mangle]
pub unsafe extern "C" fn melab_last_error(
    buf: *mut c_char,
    len: usize,
    required: *mut usize,
) -> MelabStatus {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[0u8][..], |c| c.as_bytes_with_nul());
        if !required.is_null() {
            *required = bytes.len();
        }
        if buf.is_null() || len == 0 {
            return if bytes.len() <= 1 {
                MelabStatus::Ok
            } else {
                MelabStatus::BufferTooSmall
            };
        }
        let n = bytes.len().min(len);
        std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
        *buf.add(n - 1) = 0;
        if n < bytes.len() {
            MelabStatus::BufferTooSmall
        } else {
            MelabStatus::Ok
        }
    })
}

/// Creates a simulation from a JSON experiment config (grid, material,
/// dissipation, forcing, stepper, initial data, seed).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn melab_simulation_new(
    config_json: *const c_char,
    out: *mut *mut MelabSimulation,
) -> MelabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let text = str_arg(config_json, "config_json")?;
        let cfg = ExperimentConfig::from_json(text).map_err(fail)?;
        cfg.validate().map_err(fail)?;
        let forcing = GriddedForcing::new(&cfg.forcing(), cfg.grid).map_err(fail)?;
        let state = cfg.initial_state().map_err(fail)?;
        *out = Box::into_raw(Box::new(MelabSimulation {
            cfg,
            forcing,
            state,
        }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`melab_simulation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn melab_simulation_free(sim: *mut MelabSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances `steps` steps of the configured size. On divergence the state
/// is left at the last good step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn melab_simulation_step(
    sim: *mut MelabSimulation,
    steps: usize,
) -> MelabStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("simulation"))?;
        let integ = Integrator::new(
            &sim.cfg.material,
            &sim.cfg.dissipation,
            &sim.forcing,
            &sim.cfg.stepper,
        )
        .map_err(fail)?;
        for _ in 0..steps {
            sim.state = integ.step(&sim.state).map_err(fail)?;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle and `t` writable.
#[no_mangle]
pub unsafe extern "C" fn melab_simulation_time(
    sim: *const MelabSimulation,
    t: *mut f64,
) -> MelabStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        *t.as_mut().ok_or_else(|| null("t"))? = sim.state.t;
        Ok(())
    })
}

/// Total energy of the current state.
///
/// # Safety
/// `sim` must be a live handle and `energy` writable.
#[no_mangle]
pub unsafe extern "C" fn melab_simulation_energy(
    sim: *const MelabSimulation,
    energy: *mut f64,
) -> MelabStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        *energy.as_mut().ok_or_else(|| null("energy"))? =
            energy_total(&sim.state, &sim.cfg.material);
        Ok(())
    })
}

/// Number of grid nodes, the length of every field buffer.
///
/// # Safety
/// `sim` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn melab_simulation_node_count(
    sim: *const MelabSimulation,
    count: *mut usize,
) -> MelabStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        *count.as_mut().ok_or_else(|| null("count"))? = sim.state.grid().node_count();
        Ok(())
    })
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize, what: &str) -> Outcome {
    if dst.is_null() {
        return Err(null(what));
    }
    if len < src.len() {
        return Err((
            MelabStatus::BufferTooSmall,
            format!("{what} holds {len} values, {} needed", src.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Copies the magnetic field `h` (node order `j * (nx + 1) + i`).
///
/// # Safety
/// `sim` must be a live handle; `buf` must be valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn melab_simulation_copy_h(
    sim: *const MelabSimulation,
    buf: *mut f64,
    len: usize,
) -> MelabStatus {
    guard(|| copy_out(sim_ref(sim)?.state.h.values(), buf, len, "buf"))
}

/// Copies the displacement (`velocity = 0`) or the velocity (`velocity != 0`).
///
/// # Safety
/// `sim` must be a live handle; `ux`, `uy` must be valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn melab_simulation_copy_u(
    sim: *const MelabSimulation,
    velocity: c_int,
    ux: *mut f64,
    uy: *mut f64,
    len: usize,
) -> MelabStatus {
    guard(|| {
        let s = &sim_ref(sim)?.state;
        let f = if velocity != 0 { &s.ut } else { &s.u };
        copy_out(f.ux(), ux, len, "ux")?;
        copy_out(f.uy(), uy, len, "uy")
    })
}

/// Runs a config file as the command-line runner does. `output_dir` may be
/// null to use the config's directory. `exit_code` receives the runner's
/// exit status (0, 2, 3 or 4).
///
/// # Safety
/// Strings must be NUL-terminated; `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn melab_run_experiment(
    config_path: *const c_char,
    output_dir: *const c_char,
    strict: bool,
    exit_code: *mut c_int,
) -> MelabStatus {
    guard(|| {
        let code = exit_code.as_mut().ok_or_else(|| null("exit_code"))?;
        let path = PathBuf::from(str_arg(config_path, "config_path")?);
        let output = if output_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(str_arg(output_dir, "output_dir")?))
        };
        let cfg = ExperimentConfig::load(&path).map_err(fail)?;
        let out = run_experiment(
            &cfg,
            &RunOptions {
                strict,
                output,
                output_root: None,
            },
        )
        .map_err(fail)?;
        *code = out.status.code();
        if let Some(m) = out.message {
            set_error(m);
        }
        Ok(())
    })
}

/// `m`-th positive zero of `J1`, `1 <= m <= 50`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn melab_bessel_j1_zero(m: u32, out: *mut f64) -> MelabStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = bessel_j1_zero(m as usize).map_err(fail)?;
        Ok(())
    })
}

/// Critical radius of the ball-invariance argument. `value` is NaN when the
/// denominator is not positive.
///
/// # Safety
/// `value` and `admissible` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn melab_r_critical(
    f_l1_norm: f64,
    alpha: f64,
    nu1: f64,
    period: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    eps: f64,
    value: *mut f64,
    admissible: *mut bool,
) -> MelabStatus {
    guard(|| {
        let (v, a) = (
            value.as_mut().ok_or_else(|| null("value"))?,
            admissible.as_mut().ok_or_else(|| null("admissible"))?,
        );
        let r = r_critical(
            f_l1_norm,
            alpha,
            nu1,
            period,
            &RcrConstants { c1, c2, c3, eps },
        )
        .map_err(fail)?;
        *v = r.r_cr;
        *a = r.admissible;
        Ok(())
    })
}
