//! C ABI for rovscope.
//!
//! Objects cross the boundary as opaque handles created by a `*_from_*`
//! or `*_catalog` function and released with the matching `*_free`. Functions
//! return a [`RovscopeStatus`]; on failure [`rovscope_last_error`] describes
//! what went wrong on the calling thread. Structured results come back as
//! JSON strings owned by the caller and released with
//! [`rovscope_string_free`].
//!
//! Panics never unwind into C: they are caught and reported as
//! [`RovscopeStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rovscope::experiment::{
    infer_filtering, run_filter_experiment, run_prefer_valid_experiment, SimDriver, Variant,
};
use rovscope::inference::{CustomerScope, Pipeline};
use rovscope::rib::ParseOptions;
use rovscope::sim::{plant_scenario, Scenario, ScenarioKind};
use rovscope::{Asn, IpPrefix, RibSnapshot, RoaSet, ValidationState};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RovscopeStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Input text (CSV, JSONL, JSON, prefix) could not be parsed.
    ParseError = 3,
    /// An argument was out of range.
    InvalidArgument = 4,
    /// The inference, simulation or experiment failed.
    RunError = 5,
    /// A bug inside the library; the message says where.
    Panic = 6,
}

/// RFC 6811 route state.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RovscopeValidationState {
    Valid = 0,
    Invalid = 1,
    NotFound = 2,
}

/// Which controlled experiment to run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RovscopeVariant {
    Base = 0,
    WithdrawReannounce = 1,
    PreferValid = 2,
}

/// A set of validated ROA payloads.
pub struct RovscopeRoaSet(RoaSet);

/// A collector RIB snapshot.
pub struct RovscopeRib(RibSnapshot);

/// A simulation scenario with its topology, policies and plan.
pub struct RovscopeScenario(Scenario);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

type FfiResult<T> = Result<T, (RovscopeStatus, String)>;

/// Runs `f`, records any error message and converts panics.
fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> RovscopeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RovscopeStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RovscopeStatus::Panic
        }
    }
}

fn parse_err(e: impl std::fmt::Display) -> (RovscopeStatus, String) {
    (RovscopeStatus::ParseError, e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> (RovscopeStatus, String) {
    (RovscopeStatus::RunError, e.to_string())
}

/// # Safety
/// `p` is NULL or a NUL-terminated string valid for the call.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err((RovscopeStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RovscopeStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

/// # Safety
/// `p` is NULL or points to a live handle.
unsafe fn handle<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| (RovscopeStatus::NullArgument, format!("{name} is NULL")))
}

/// # Safety
/// `out` is NULL or writable.
unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err((RovscopeStatus::NullArgument, "output pointer is NULL".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// # Safety
/// `out` is NULL or writable.
unsafe fn put_json(out: *mut *mut c_char, value: serde_json::Value) -> FfiResult<()> {
    if out.is_null() {
        return Err((RovscopeStatus::NullArgument, "output pointer is NULL".into()));
    }
    let text = value.to_string();
    *out = CString::new(text).map_err(run_err)?.into_raw();
    Ok(())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn rovscope_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rovscope_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` is NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rovscope_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses VRP CSV (`prefix,maxlen,asn` header).
///
/// # Safety
/// `csv` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rovscope_roaset_from_csv(csv: *const c_char, out: *mut *mut RovscopeRoaSet) -> RovscopeStatus {
    guard(|| {
        let text = str_arg(csv, "csv")?;
        let roas = RoaSet::from_csv(text.as_bytes()).map_err(parse_err)?;
        put(out, RovscopeRoaSet(roas))
    })
}

/// Number of distinct VRPs; 0 for NULL.
///
/// # Safety
/// `roas` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rovscope_roaset_len(roas: *const RovscopeRoaSet) -> usize {
    roas.as_ref().map_or(0, |r| r.0.len())
}

/// # Safety
/// `roas` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rovscope_roaset_free(roas: *mut RovscopeRoaSet) {
    if !roas.is_null() {
        drop(Box::from_raw(roas));
    }
}

/// RFC 6811 state of `prefix` originated by `origin`.
///
/// # Safety
/// `roas` is a live handle, `prefix` a NUL-terminated string, `state`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rovscope_validate(
    roas: *const RovscopeRoaSet,
    prefix: *const c_char,
    origin: u32,
    state: *mut RovscopeValidationState,
) -> RovscopeStatus {
    guard(|| {
        let roas = handle(roas, "roas")?;
        let prefix: IpPrefix = str_arg(prefix, "prefix")?.parse().map_err(parse_err)?;
        if state.is_null() {
            return Err((RovscopeStatus::NullArgument, "state is NULL".into()));
        }
        *state = match roas.0.validate(Asn(origin), &prefix) {
            ValidationState::Valid => RovscopeValidationState::Valid,
            ValidationState::Invalid => RovscopeValidationState::Invalid,
            ValidationState::NotFound => RovscopeValidationState::NotFound,
        };
        Ok(())
    })
}

/// Parses a canonical JSONL RIB, tolerating up to `max_malformed` (a
/// fraction) unparseable records.
///
/// # Safety
/// `jsonl` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rovscope_rib_from_jsonl(
    jsonl: *const c_char,
    max_malformed: f64,
    out: *mut *mut RovscopeRib,
) -> RovscopeStatus {
    guard(|| {
        let text = str_arg(jsonl, "jsonl")?;
        if !(0.0..=1.0).contains(&max_malformed) {
            return Err((RovscopeStatus::InvalidArgument, format!("max_malformed {max_malformed} not in [0, 1]")));
        }
        let opts = ParseOptions {
            max_malformed_fraction: max_malformed,
        };
        let (snap, _) = RibSnapshot::parse_jsonl(text.as_bytes(), opts).map_err(parse_err)?;
        put(out, RovscopeRib(snap))
    })
}

/// Number of RIB entries; 0 for NULL.
///
/// # Safety
/// `rib` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rovscope_rib_len(rib: *const RovscopeRib) -> usize {
    rib.as_ref().map_or(0, |r| r.0.len())
}

/// # Safety
/// `rib` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rovscope_rib_free(rib: *mut RovscopeRib) {
    if !rib.is_null() {
        drop(Box::from_raw(rib));
    }
}

/// The passive inference over every vantage point of `rib`, as JSON with
/// `threshold`, `non_enforcing`, `candidates` (AS to origins) and
/// `enforcing`.
///
/// # Safety
/// `rib` and `roas` are live handles; `json_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rovscope_infer(
    rib: *const RovscopeRib,
    roas: *const RovscopeRoaSet,
    threshold: u32,
    json_out: *mut *mut c_char,
) -> RovscopeStatus {
    guard(|| {
        let rib = handle(rib, "rib")?;
        let roas = handle(roas, "roas")?;
        let result = Pipeline::new(&rib.0, &roas.0, None, CustomerScope::Direct)
            .run(None, threshold)
            .map_err(|e| (RovscopeStatus::InvalidArgument, e.to_string()))?;
        put_json(json_out, serde_json::to_value(&result).map_err(run_err)?)
    })
}

/// A catalog scenario by name (`a`-`f` or the full name).
///
/// # Safety
/// `name` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rovscope_scenario_catalog(
    name: *const c_char,
    out: *mut *mut RovscopeScenario,
) -> RovscopeStatus {
    guard(|| {
        let kind: ScenarioKind = str_arg(name, "name")?
            .parse()
            .map_err(|e| (RovscopeStatus::InvalidArgument, format!("{e}")))?;
        put(out, RovscopeScenario(plant_scenario(kind)))
    })
}

/// A scenario from its JSON form.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rovscope_scenario_from_json(
    json: *const c_char,
    out: *mut *mut RovscopeScenario,
) -> RovscopeStatus {
    guard(|| {
        let s = Scenario::from_json(str_arg(json, "json")?).map_err(parse_err)?;
        put(out, RovscopeScenario(s))
    })
}

/// # Safety
/// `scenario` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rovscope_scenario_free(scenario: *mut RovscopeScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario's plan on the simulator and returns JSON with the
/// experiment `outcome` (or `prefer_valid` outcome) and the `inference`.
///
/// # Safety
/// `scenario` is a live handle; `json_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rovscope_experiment_run(
    scenario: *const RovscopeScenario,
    variant: RovscopeVariant,
    json_out: *mut *mut c_char,
) -> RovscopeStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.0;
        let plan = s
            .plan
            .as_ref()
            .ok_or_else(|| (RovscopeStatus::InvalidArgument, format!("scenario {} has no plan", s.name)))?;
        let base: RoaSet = s.initial_roas.iter().filter(|v| !plan.controls(v)).copied().collect();
        let mut driver = SimDriver::new(s.topology().map_err(run_err)?, base);
        let report = match variant {
            RovscopeVariant::PreferValid => {
                let out = run_prefer_valid_experiment(&mut driver, plan).map_err(run_err)?;
                serde_json::json!({ "inference": out.inference, "prefer_valid": out })
            }
            RovscopeVariant::Base | RovscopeVariant::WithdrawReannounce => {
                let v = if variant == RovscopeVariant::Base {
                    Variant::Base
                } else {
                    Variant::WithdrawReannounce
                };
                let out = run_filter_experiment(&mut driver, plan, v).map_err(run_err)?;
                serde_json::json!({ "inference": infer_filtering(&out.observations), "outcome": out })
            }
        };
        put_json(json_out, report)
    })
}
