//! C ABI over the simulator: environment handles, network inference, exact
//! route lengths and baseline shifts.
//!
//! Every fallible call returns an [`OpStatus`]. On failure the message is kept
//! per thread and can be copied out with [`op_last_error`]. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use orderpick::baselines::{run_baseline, BaselineSpec};
use orderpick::env::{Action, Env, EnvOptions, RewardParams};
use orderpick::nn::QNetwork;
use orderpick::orders::ArrivalProcess;
use orderpick::routing::{optimal_route, PickList};
use orderpick::warehouse::{SlotLocation, WarehouseConfig};
use orderpick::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InfeasibleAction = 3,
    ShapeMismatch = 4,
    CorruptCheckpoint = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

/// Simulator with the default warehouse and Poisson arrivals.
pub struct OpEnv {
    inner: Env<ArrivalProcess>,
}

/// Loaded Q-network.
pub struct OpQNet {
    inner: QNetwork,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OpStepResult {
    pub reward: f64,
    pub elapsed: f64,
    pub picked: u32,
    pub moved: f64,
    pub clock: f64,
}

/// Shift metrics; `atdo` and `aoct` are NaN when no order completed.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OpMetrics {
    pub atdo: f64,
    pub aoct: f64,
    pub puo: f64,
    pub total_distance: f64,
    pub completed: u64,
    pub arrived: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> OpStatus {
    match e {
        Error::InfeasibleAction { .. } => OpStatus::InfeasibleAction,
        Error::ShapeMismatch(_) => OpStatus::ShapeMismatch,
        Error::CorruptCheckpoint(_) => OpStatus::CorruptCheckpoint,
        Error::Io(_) => OpStatus::Io,
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::EmptyPickList => OpStatus::InvalidArgument,
        _ => OpStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), OpStatus>) -> OpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            OpStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside the library".into());
            OpStatus::Panic
        }
    }
}

fn fail(e: Error) -> OpStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> OpStatus {
    set_error(format!("{what} is null"));
    OpStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, OpStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        OpStatus::InvalidArgument
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn op_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates an environment on the default warehouse with arrival rate
/// `lambda` and unload weight `alpha`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`op_env_free`].
#[no_mangle]
pub unsafe extern "C" fn op_env_new(lambda: f64, alpha: f64, seed: u64, out: *mut *mut OpEnv) -> OpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = WarehouseConfig::default();
        let source = ArrivalProcess::poisson(lambda, seed, &cfg).map_err(fail)?;
        let reward = RewardParams::for_config(&cfg, alpha);
        let env = Env::new(cfg, reward, EnvOptions::default(), source).map_err(fail)?;
        *out = Box::into_raw(Box::new(OpEnv { inner: env }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`op_env_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn op_env_free(env: *mut OpEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Length of the state vector, `4 + 2N`.
///
/// # Safety
/// `env` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn op_env_state_len(env: *const OpEnv) -> usize {
    env.as_ref().map_or(0, |e| 4 + 2 * e.inner.config().n_aisles)
}

/// Writes the current state features into `out[0..len]`.
///
/// # Safety
/// `env` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn op_env_state(env: *const OpEnv, out: *mut f64, len: usize) -> OpStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = env.inner.state().to_vec();
        if len != v.len() {
            return Err(fail(Error::ShapeMismatch(format!("state has {} values, buffer {len}", v.len()))));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), out, len);
        Ok(())
    })
}

/// Writes the feasibility of actions 0..5 as 0/1 into `out[0..5]`.
///
/// # Safety
/// `env` must be a live handle and `out` must point to 5 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn op_env_mask(env: *const OpEnv, out: *mut u8) -> OpStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        for (i, ok) in env.inner.mask().0.iter().enumerate() {
            *out.add(i) = u8::from(*ok);
        }
        Ok(())
    })
}

/// Applies `action` (0 stay, 1 right, 2 left, 3 up, 4 down).
///
/// # Safety
/// `env` must be a live handle; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn op_env_step(env: *mut OpEnv, action: u8, out: *mut OpStepResult) -> OpStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let a = Action::from_index(action as usize).map_err(fail)?;
        let r = env.inner.step(a).map_err(fail)?;
        if let Some(out) = out.as_mut() {
            *out = OpStepResult {
                reward: r.reward,
                elapsed: r.elapsed,
                picked: r.picked as u32,
                moved: r.moved,
                clock: env.inner.clock(),
            };
        }
        Ok(())
    })
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer; free the
/// handle with [`op_qnet_free`].
#[no_mangle]
pub unsafe extern "C" fn op_qnet_load(path: *const c_char, out: *mut *mut OpQNet) -> OpStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let net = QNetwork::load(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(OpQNet { inner: net }));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`op_qnet_load`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn op_qnet_free(net: *mut OpQNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Q-values of one state (`len` = picker plus order features) into `out[0..5]`.
///
/// # Safety
/// `x` must point to `len` doubles and `out` to 5 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn op_qnet_forward(net: *const OpQNet, x: *const f64, len: usize, out: *mut f64) -> OpStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if x.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let p = net.inner.spec().picker_in;
        let x = std::slice::from_raw_parts(x, len);
        if len < p {
            return Err(fail(Error::ShapeMismatch(format!("{len} features"))));
        }
        let q = net.inner.forward(&x[..p], &x[p..]).map_err(fail)?;
        ptr::copy_nonoverlapping(q.as_ptr(), out, q.len());
        Ok(())
    })
}

/// Length in meters of the shortest depot-to-depot tour through the given
/// slots on the default warehouse. Slots are 1-based `(aisles[i], depths[i])`.
///
/// # Safety
/// `aisles` and `depths` must point to `n` values each; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn op_optimal_route_length(
    aisles: *const u32,
    depths: *const u32,
    n: usize,
    out: *mut f64,
) -> OpStatus {
    guard(|| {
        if out.is_null() || (n > 0 && (aisles.is_null() || depths.is_null())) {
            return Err(null("buffer"));
        }
        let cfg = WarehouseConfig::default();
        let slots: Vec<SlotLocation> = (0..n)
            .map(|i| SlotLocation::new(*aisles.add(i) as usize, *depths.add(i) as usize))
            .collect();
        for s in &slots {
            cfg.check_slot(*s).map_err(fail)?;
        }
        let list = PickList::from_slots(cfg.depot(), &slots);
        *out = if slots.is_empty() {
            0.0
        } else {
            optimal_route(&list, &cfg).map_err(fail)?.length
        };
        Ok(())
    })
}

/// Simulates one shift of the named baseline on the default warehouse.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn op_run_baseline(
    name: *const c_char,
    lambda: f64,
    seed: u64,
    shift_seconds: f64,
    out: *mut OpMetrics,
) -> OpStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = WarehouseConfig::default();
        let spec = BaselineSpec::by_name(name, &cfg).map_err(fail)?;
        let source = ArrivalProcess::poisson(lambda, seed, &cfg).map_err(fail)?;
        let m = run_baseline(&spec, source, &cfg, shift_seconds).map_err(fail)?.metrics(seed);
        *out = OpMetrics {
            atdo: m.atdo.unwrap_or(f64::NAN),
            aoct: m.aoct.unwrap_or(f64::NAN),
            puo: m.puo,
            total_distance: m.total_distance,
            completed: m.completed as u64,
            arrived: m.arrived as u64,
        };
        Ok(())
    })
}
