//! C ABI over the chargeshare model.
//!
//! Every fallible function returns a `CsStatus`; on failure the message is
//! available from `cs_last_error` on the same thread. Handles are opaque and
//! must be released with their `_free` function. Strings returned to the
//! caller are owned by the caller and released with `cs_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chargeshare::availability::{AvailabilityModel, BetaKind};
use chargeshare::coverage::{CoverageModel, CoveragePath};
use chargeshare::economics::{decision_queue_model, sharing_fee};
use chargeshare::params::{Association, ParamSet, PolicyDecision, ServingPolicy, StationKind};
use chargeshare::queueing::{ev_wait, uav_wait, QueueContext, QueueModel};
use chargeshare::simulator::{run_experiment, Experiment, ExperimentOptions, SimConfig};
use chargeshare::{association, Error};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    InvalidParam = 5,
    Invariant = 6,
    Domain = 7,
    Unstable = 8,
    Numerical = 9,
    Simulation = 10,
    Io = 11,
    Panic = 12,
}

/// Values accepted by `kind` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStationKind {
    Ev = 0,
    Dedicated = 1,
}

/// Values accepted by `policy` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsServingPolicy {
    Fifs = 0,
    EvFirst = 1,
}

/// Values accepted by `association` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsAssociation {
    NoSharing = 0,
    Biased = 1,
    Thinning = 2,
}

/// Values accepted by `path` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsCoveragePath {
    Exact = 0,
    Approx = 1,
}

/// Opaque parameter set.
pub struct CsParams(ParamSet);

struct Failure(CsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) | Error::UnknownKey(_) => CsStatus::Parse,
            Error::InvalidParam { .. } => CsStatus::InvalidParam,
            Error::Invariant(_) => CsStatus::Invariant,
            Error::Domain { .. } | Error::FormulaDomain(_) | Error::Unreachable { .. } => CsStatus::Domain,
            Error::Unstable { .. } => CsStatus::Unstable,
            Error::Quadrature { .. } | Error::FixedPoint { .. } | Error::Optimize(_) => CsStatus::Numerical,
            Error::Simulation(_) => CsStatus::Simulation,
            Error::UnknownExperiment(_) => CsStatus::InvalidArgument,
            Error::Io(_) => CsStatus::Io,
        };
        Failure(code, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic");
            CsStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure(CsStatus::NullPointer, "null pointer argument".into())
}

fn invalid(what: &str, v: i32) -> Failure {
    Failure(CsStatus::InvalidArgument, format!("invalid {what} value {v}"))
}

unsafe fn params<'a>(p: *const CsParams) -> Result<&'a ParamSet, Failure> {
    p.as_ref().map(|h| &h.0).ok_or_else(null)
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|_| Failure(CsStatus::InvalidUtf8, "string is not valid UTF-8".into()))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    out.write(v);
    Ok(())
}

fn station_kind(v: i32) -> Result<StationKind, Failure> {
    match v {
        x if x == CsStationKind::Ev as i32 => Ok(StationKind::Ev),
        x if x == CsStationKind::Dedicated as i32 => Ok(StationKind::Uav),
        _ => Err(invalid("station kind", v)),
    }
}

fn serving_policy(v: i32) -> Result<ServingPolicy, Failure> {
    match v {
        x if x == CsServingPolicy::Fifs as i32 => Ok(ServingPolicy::Fifs),
        x if x == CsServingPolicy::EvFirst as i32 => Ok(ServingPolicy::EvFirst),
        _ => Err(invalid("serving policy", v)),
    }
}

fn coverage_path(v: i32) -> Result<CoveragePath, Failure> {
    match v {
        x if x == CsCoveragePath::Exact as i32 => Ok(CoveragePath::Exact),
        x if x == CsCoveragePath::Approx as i32 => Ok(CoveragePath::Approx),
        _ => Err(invalid("coverage path", v)),
    }
}

fn decision(association: i32, beta: f64, delta_lambda_c_d: f64) -> Result<PolicyDecision, Failure> {
    let a = match association {
        x if x == CsAssociation::NoSharing as i32 => Association::IndependentThinning(0.0),
        x if x == CsAssociation::Biased as i32 => Association::BiasedDistance(beta),
        x if x == CsAssociation::Thinning as i32 => Association::IndependentThinning(beta),
        _ => return Err(invalid("association", association)),
    };
    Ok(PolicyDecision::new(a, delta_lambda_c_d)?)
}

/// Library version string. Static; do not free.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// New parameter set holding the defaults. Never NULL.
#[no_mangle]
pub extern "C" fn cs_params_default() -> *mut CsParams {
    Box::into_raw(Box::new(CsParams(ParamSet::default())))
}

/// Parses `key = value` config text on top of the defaults.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_params_from_config(config: *const c_char, out: *mut *mut CsParams) -> CsStatus {
    guard(|| {
        let p = ParamSet::from_config_str(text(config)?)?;
        write(out, Box::into_raw(Box::new(CsParams(p))))
    })
}

/// Copy of `p`, or NULL if `p` is NULL.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_params_clone(p: *const CsParams) -> *mut CsParams {
    match p.as_ref() {
        Some(h) => Box::into_raw(Box::new(CsParams(h.0.clone()))),
        None => ptr::null_mut(),
    }
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `p` must be NULL or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_params_free(p: *mut CsParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Sets one parameter by config key, re-validating the whole set. On
/// failure `p` is unchanged.
///
/// # Safety
/// `p` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cs_params_set(p: *mut CsParams, key: *const c_char, value: *const c_char) -> CsStatus {
    guard(|| {
        let h = p.as_mut().ok_or_else(null)?;
        let kv = format!("{}={}", text(key)?, text(value)?);
        h.0 = h.0.with_overrides([kv.as_str()])?;
        Ok(())
    })
}

/// Serializes every parameter as config text into `*out`.
///
/// # Safety
/// `p` must be a live handle; `out` writable. Free the string with
/// `cs_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cs_params_to_config(p: *const CsParams, out: *mut *mut c_char) -> CsStatus {
    guard(|| {
        let s = params(p)?.to_config_string();
        write(out, CString::new(s).map_err(|_| invalid("config text", 0))?.into_raw())
    })
}

/// Share of UAVs associating with EV stations under distance bias `beta_d`.
///
/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_association_ev(p: *const CsParams, beta_d: f64, out: *mut f64) -> CsStatus {
    guard(|| {
        let split = association::association_split(params(p)?, &PolicyDecision::biased(beta_d))?;
        write(out, split.a_ev)
    })
}

/// UAV availability `P_a` under a decision. `beta` is ignored for
/// `CS_ASSOCIATION_NO_SHARING`; `delta_lambda_c_d` is in stations per m².
///
/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_availability(
    p: *const CsParams,
    association: i32,
    beta: f64,
    delta_lambda_c_d: f64,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let d = decision(association, beta, delta_lambda_c_d)?;
        let m = AvailabilityModel::new(params(p)?, QueueModel::default())?;
        write(out, m.evaluate(&d)?.p_a)
    })
}

/// Coverage probability of a typical user for availability `p_a`.
///
/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_coverage(p: *const CsParams, p_a: f64, path: i32, out: *mut f64) -> CsStatus {
    guard(|| {
        let path = coverage_path(path)?;
        write(out, CoverageModel::new(params(p)?, p_a)?.breakdown(path)?.total)
    })
}

/// Mean UAV wait (min) at a station of kind `kind` shared by `n_uavs`.
///
/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_uav_wait(p: *const CsParams, kind: i32, n_uavs: u32, out: *mut f64) -> CsStatus {
    guard(|| {
        let ctx = QueueContext::from_params(params(p)?, station_kind(kind)?, n_uavs)?;
        write(out, uav_wait(&ctx, &QueueModel::default())?)
    })
}

/// Mean EV wait (min) at an EV station shared by `n_uavs`, with the
/// Pollaczek-Khinchine no-UAV baseline.
///
/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_ev_wait(p: *const CsParams, n_uavs: u32, policy: i32, out: *mut f64) -> CsStatus {
    guard(|| {
        let ctx = QueueContext::from_params(params(p)?, StationKind::Ev, n_uavs)?;
        write(out, ev_wait(&ctx, serving_policy(policy)?, &decision_queue_model())?)
    })
}

/// Yearly sharing fee (USD) per EV station.
///
/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_sharing_fee(p: *const CsParams, mean_uavs: f64, mean_cycle_min: f64, out: *mut f64) -> CsStatus {
    guard(|| write(out, sharing_fee(mean_uavs, mean_cycle_min, params(p)?)?))
}

/// Runs a named sweep (`fig-wait-uav`, `fig-wait-ev`, `fig-coverage`,
/// `fig-beta`, `fig-economics`) and returns its CSV in `*out_csv`.
/// `realizations` and `draws` of 0 select the defaults; `association` picks
/// the `fig-beta` policy (biased or thinning).
///
/// # Safety
/// `p` must be a live handle; `name` NUL-terminated; `out_csv` writable.
/// Free the string with `cs_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cs_run_experiment(
    p: *const CsParams,
    name: *const c_char,
    seed: u64,
    realizations: usize,
    draws: usize,
    association: i32,
    out_csv: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        let exp: Experiment = text(name)?.parse()?;
        let policy = match association {
            x if x == CsAssociation::Biased as i32 => BetaKind::Biased,
            x if x == CsAssociation::Thinning as i32 => BetaKind::Thinning,
            _ => return Err(invalid("association", association)),
        };
        let mut cfg = SimConfig::new(params(p)?.clone(), seed)?;
        if realizations > 0 {
            cfg.realizations = realizations;
        }
        let mut opts = ExperimentOptions { policy, ..ExperimentOptions::default() };
        if draws > 0 {
            opts.draws = draws;
        }
        let csv = run_experiment(exp, &cfg, &opts)?.to_csv();
        write(out_csv, CString::new(csv).map_err(|_| invalid("csv", 0))?.into_raw())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
