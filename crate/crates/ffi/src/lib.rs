//! C ABI for `swapnet`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_from_*`
//! functions and released with the matching `*_free`. Every function returns
//! a [`SwapnetStatus`]; on failure a message is available from
//! [`swapnet_last_error`] on the same thread. Panics are caught and reported
//! as [`SwapnetStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use swapnet::asymptotics::DiffusionSpec;
use swapnet::exactss::{steady_state, steady_state_infinite_f, wait_probability_exact, SteadyStateDist};
use swapnet::model::{load_config_str, Network, Regime};
use swapnet::sim::{run_ctmc, RunSpec, SimPath};
use swapnet::Error;

/// Charger count meaning "one charger per battery".
pub const SWAPNET_UNLIMITED: u64 = u64::MAX;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapnetRegime {
    LimitedChargers = 0,
    UnlimitedChargers = 1,
    SwapUnconstrained = 2,
}

impl From<SwapnetRegime> for Regime {
    fn from(r: SwapnetRegime) -> Regime {
        match r {
            SwapnetRegime::LimitedChargers => Regime::LimitedChargers,
            SwapnetRegime::UnlimitedChargers => Regime::UnlimitedChargers,
            SwapnetRegime::SwapUnconstrained => Regime::SwapUnconstrained,
        }
    }
}

/// Validated network.
pub struct SwapnetNetwork(Network);

/// Exact single-station stationary distribution.
pub struct SwapnetSteadyState(SteadyStateDist);

/// Sampled simulation path.
pub struct SwapnetSimPath(SimPath);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SwapnetStatus {
    match e {
        Error::InvalidConfig(_) | Error::Parse(_) => SwapnetStatus::InvalidConfig,
        Error::StepFailure { .. } | Error::Numerical(_) | Error::Stage { .. } => SwapnetStatus::Numerical,
        Error::Io(_) => SwapnetStatus::Io,
        _ => SwapnetStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SwapnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SwapnetStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SwapnetStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SwapnetStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let slot = as_mut(out, "out")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

fn bad(msg: &str) -> Fail {
    Fail::Lib(Error::InvalidArgument(msg.into()))
}

/// Message for the last failure on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn swapnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Parses a TOML network description.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_network_from_toml(
    toml: *const c_char,
    out: *mut *mut SwapnetNetwork,
) -> SwapnetStatus {
    guard(|| {
        if toml.is_null() {
            return Err(Fail::Null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| Fail::Lib(Error::Parse("config is not UTF-8".into())))?;
        put(out, SwapnetNetwork(load_config_str(text)?))
    })
}

/// Single station with `b` spares and `f` chargers
/// (`SWAPNET_UNLIMITED` for one per battery).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_network_single(
    lambda: f64,
    mu: f64,
    r: u64,
    b: u64,
    f: u64,
    out: *mut *mut SwapnetNetwork,
) -> SwapnetStatus {
    guard(|| {
        let f = (f != SWAPNET_UNLIMITED).then_some(f);
        put(out, SwapnetNetwork(Network::single(lambda, mu, r, b, f)?))
    })
}

/// # Safety
/// `net` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swapnet_network_free(net: *mut SwapnetNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_network_stations(net: *const SwapnetNetwork, out: *mut usize) -> SwapnetStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(net, "net")?.0.stations();
        Ok(())
    })
}

/// Copies spares and chargers per station into arrays of length `len`.
/// Unlimited chargers are reported as `SWAPNET_UNLIMITED`.
///
/// # Safety
/// `b_out` and `f_out` must each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn swapnet_network_capacities(
    net: *const SwapnetNetwork,
    b_out: *mut u64,
    f_out: *mut u64,
    len: usize,
) -> SwapnetStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        if b_out.is_null() || f_out.is_null() {
            return Err(Fail::Null("capacity buffers"));
        }
        let caps = net.capacities();
        if len < caps.len() {
            return Err(bad("capacity buffers too short"));
        }
        for (j, c) in caps.iter().enumerate() {
            *b_out.add(j) = c.b;
            *f_out.add(j) = c.f.unwrap_or(SWAPNET_UNLIMITED);
        }
        Ok(())
    })
}

/// Exact stationary queue-length distribution of one station.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_steady_state_new(
    b: u64,
    f: u64,
    r: u64,
    lambda: f64,
    mu: f64,
    out: *mut *mut SwapnetSteadyState,
) -> SwapnetStatus {
    guard(|| {
        let dist = if f == SWAPNET_UNLIMITED {
            steady_state_infinite_f(b, r, lambda, mu)?
        } else {
            steady_state(b, f, r, lambda, mu)?
        };
        put(out, SwapnetSteadyState(dist))
    })
}

/// # Safety
/// `ss` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn swapnet_steady_state_free(ss: *mut SwapnetSteadyState) {
    if !ss.is_null() {
        drop(Box::from_raw(ss));
    }
}

/// # Safety
/// `ss` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_steady_state_len(ss: *const SwapnetSteadyState, out: *mut usize) -> SwapnetStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(ss, "ss")?.0.len();
        Ok(())
    })
}

/// Copies `π_0..π_{len-1}`; `len` must equal the distribution length.
///
/// # Safety
/// `buf` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn swapnet_steady_state_probs(
    ss: *const SwapnetSteadyState,
    buf: *mut f64,
    len: usize,
) -> SwapnetStatus {
    guard(|| {
        let ss = &as_ref(ss, "ss")?.0;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        if len != ss.len() {
            return Err(bad("buffer length must equal the distribution length"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&ss.probs());
        Ok(())
    })
}

/// Stationary probability of no charged spare, given `b` spares.
///
/// # Safety
/// `ss` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_steady_state_wait_probability(
    ss: *const SwapnetSteadyState,
    b: u64,
    out: *mut f64,
) -> SwapnetStatus {
    guard(|| {
        let p = wait_probability_exact(&as_ref(ss, "ss")?.0, b)?;
        *as_mut(out, "out")? = p;
        Ok(())
    })
}

/// Limiting probability of waiting in the QED regime.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_wait_probability_limit(
    lambda: f64,
    mu: f64,
    beta: f64,
    gamma: f64,
    regime: SwapnetRegime,
    out: *mut f64,
) -> SwapnetStatus {
    guard(|| {
        let spec = DiffusionSpec::new(lambda, mu, beta, gamma, regime.into())?;
        *as_mut(out, "out")? = spec.wait_probability();
        Ok(())
    })
}

/// Limiting diffusion density at `x`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_diffusion_density(
    lambda: f64,
    mu: f64,
    beta: f64,
    gamma: f64,
    regime: SwapnetRegime,
    x: f64,
    out: *mut f64,
) -> SwapnetStatus {
    guard(|| {
        let spec = DiffusionSpec::new(lambda, mu, beta, gamma, regime.into())?;
        *as_mut(out, "out")? = spec.density(x);
        Ok(())
    })
}

/// Runs the exponential CTMC from `q0` (one entry per station).
///
/// # Safety
/// `net` must be a live handle, `q0` must hold `len` elements and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_simulate_ctmc(
    net: *const SwapnetNetwork,
    q0: *const u64,
    len: usize,
    horizon: f64,
    sample_dt: f64,
    seed: u64,
    stream: u64,
    out: *mut *mut SwapnetSimPath,
) -> SwapnetStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        if q0.is_null() {
            return Err(Fail::Null("q0"));
        }
        let q0 = std::slice::from_raw_parts(q0, len);
        let run = RunSpec::new(horizon, sample_dt);
        put(out, SwapnetSimPath(run_ctmc(net, q0, &run, seed, stream)?))
    })
}

/// # Safety
/// `path` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn swapnet_sim_path_free(path: *mut SwapnetSimPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of samples and stations of a path.
///
/// # Safety
/// `path` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_sim_path_shape(
    path: *const SwapnetSimPath,
    samples: *mut usize,
    stations: *mut usize,
) -> SwapnetStatus {
    guard(|| {
        let p = &as_ref(path, "path")?.0;
        *as_mut(samples, "samples")? = p.sample_times.len();
        *as_mut(stations, "stations")? = p.q_samples.first().map_or(0, Vec::len);
        Ok(())
    })
}

/// Copies sample times (`samples` entries) and queue lengths (row-major,
/// `samples * stations` entries).
///
/// # Safety
/// Buffers must have the sizes reported by `swapnet_sim_path_shape`.
#[no_mangle]
pub unsafe extern "C" fn swapnet_sim_path_copy(
    path: *const SwapnetSimPath,
    times: *mut f64,
    queues: *mut u64,
    samples: usize,
    stations: usize,
) -> SwapnetStatus {
    guard(|| {
        let p = &as_ref(path, "path")?.0;
        if times.is_null() || queues.is_null() {
            return Err(Fail::Null("buffers"));
        }
        let s = p.q_samples.first().map_or(0, Vec::len);
        if samples != p.sample_times.len() || stations != s {
            return Err(bad("buffer shape does not match the path"));
        }
        std::slice::from_raw_parts_mut(times, samples).copy_from_slice(&p.sample_times);
        let q = std::slice::from_raw_parts_mut(queues, samples * stations);
        for (row, sample) in q.chunks_mut(stations.max(1)).zip(&p.q_samples) {
            row.copy_from_slice(sample);
        }
        Ok(())
    })
}

/// Fraction of arrivals that waited, and invariant violations seen.
///
/// # Safety
/// `path` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn swapnet_sim_path_stats(
    path: *const SwapnetSimPath,
    waited_fraction: *mut f64,
    violations: *mut u64,
) -> SwapnetStatus {
    guard(|| {
        let p = &as_ref(path, "path")?.0;
        *as_mut(waited_fraction, "waited_fraction")? = p.waited_fraction();
        *as_mut(violations, "violations")? = p.violations;
        Ok(())
    })
}
