//! C ABI surface over the simulator.
//!
//! Scenarios are opaque handles created from TOML files; every analysis
//! returns its report as a JSON string the caller must release with
//! [`isac_string_free`]. Functions report an [`IsacStatus`]; on failure a
//! thread-local message, readable through [`isac_last_error`], carries the
//! detail. Panics are caught at the boundary and surfaced as
//! `ISAC_STATUS_INTERNAL` rather than unwinding into the caller.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use isacsim::scenario::{run_budget, run_kpi, run_simulate, run_sync_eval, Scenario};

/// Outcome of an FFI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsacStatus {
    /// The call succeeded.
    IsacStatusOk = 0,
    /// A required pointer argument was null.
    IsacStatusNullArgument = 1,
    /// A string argument was not valid UTF-8.
    IsacStatusInvalidUtf8 = 2,
    /// The scenario file could not be read or failed validation.
    IsacStatusConfig = 3,
    /// The simulation or analysis failed at runtime.
    IsacStatusRuntime = 4,
    /// An internal invariant was violated; see `isac_last_error`.
    IsacStatusInternal = 5,
}

use IsacStatus::*;

/// Opaque scenario handle; create with `isac_scenario_load`, destroy with
/// `isac_scenario_free`.
pub struct IsacScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized: Vec<u8> = message.bytes().filter(|&b| b != 0).collect();
    let owned = CString::new(sanitized).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn guard<F: FnOnce() -> IsacStatus>(body: F) -> IsacStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic of unknown type".to_string());
            set_last_error(&message);
            IsacStatusInternal
        }
    }
}

fn json_out(value: serde_json::Value, out_json: *mut *mut c_char) -> IsacStatus {
    let text = serde_json::to_string_pretty(&value).unwrap_or_default();
    match CString::new(text) {
        Ok(owned) => {
            unsafe { *out_json = owned.into_raw() };
            IsacStatusOk
        }
        Err(_) => {
            set_last_error("report contained an interior NUL byte");
            IsacStatusInternal
        }
    }
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn isac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread, as a
/// NUL-terminated string. The pointer stays valid until the next failing
/// call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn isac_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load a scenario from a TOML file at `path` into a new handle written to
/// `out_scenario`.
///
/// # Safety
/// `path` must point to a NUL-terminated string and `out_scenario` to a
/// writable pointer slot; both stay borrowed only for the call.
#[no_mangle]
pub unsafe extern "C" fn isac_scenario_load(
    path: *const c_char,
    out_scenario: *mut *mut IsacScenario,
) -> IsacStatus {
    guard(|| {
        if path.is_null() || out_scenario.is_null() {
            set_last_error("path and out_scenario must be non-null");
            return IsacStatusNullArgument;
        }
        let text = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(text) => text,
            Err(_) => {
                set_last_error("path is not valid UTF-8");
                return IsacStatusInvalidUtf8;
            }
        };
        match Scenario::load(Path::new(text)) {
            Ok(inner) => {
                let handle = Box::new(IsacScenario { inner });
                unsafe { *out_scenario = Box::into_raw(handle) };
                IsacStatusOk
            }
            Err(err) => {
                set_last_error(&err.to_string());
                IsacStatusConfig
            }
        }
    })
}

/// Release a handle from `isac_scenario_load`; a null pointer is ignored.
///
/// # Safety
/// `scenario` must be null or a pointer previously returned by
/// `isac_scenario_load` that has not been freed already.
#[no_mangle]
pub unsafe extern "C" fn isac_scenario_free(scenario: *mut IsacScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Override the Monte-Carlo base seed of a loaded scenario.
///
/// # Safety
/// `scenario` must be a live handle from `isac_scenario_load`.
#[no_mangle]
pub unsafe extern "C" fn isac_scenario_set_seed(
    scenario: *mut IsacScenario,
    seed: u64,
) -> IsacStatus {
    guard(|| {
        let Some(handle) = (unsafe { scenario.as_mut() }) else {
            set_last_error("scenario must be non-null");
            return IsacStatusNullArgument;
        };
        handle.inner.monte_carlo.base_seed = seed;
        IsacStatusOk
    })
}

fn run_report<F>(
    scenario: *const IsacScenario,
    out_json: *mut *mut c_char,
    body: F,
) -> IsacStatus
where
    F: FnOnce(&Scenario) -> isacsim::error::Result<serde_json::Value>,
{
    guard(|| {
        let Some(handle) = (unsafe { scenario.as_ref() }) else {
            set_last_error("scenario must be non-null");
            return IsacStatusNullArgument;
        };
        if out_json.is_null() {
            set_last_error("out_json must be non-null");
            return IsacStatusNullArgument;
        }
        match body(&handle.inner) {
            Ok(value) => json_out(value, out_json),
            Err(err) => {
                set_last_error(&err.to_string());
                IsacStatusRuntime
            }
        }
    })
}

/// Compute the waveform KPI report and return it as JSON in `out_json`.
///
/// # Safety
/// `scenario` must be a live handle and `out_json` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn isac_kpi_json(
    scenario: *const IsacScenario,
    out_json: *mut *mut c_char,
) -> IsacStatus {
    run_report(scenario, out_json, |s| {
        run_kpi(s).map(|r| serde_json::to_value(r).expect("kpi report serializes"))
    })
}

/// Solve the detection-range budget and return the report as JSON in
/// `out_json`. Curve files are not written; use the CLI for file output.
///
/// # Safety
/// `scenario` must be a live handle and `out_json` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn isac_budget_json(
    scenario: *const IsacScenario,
    out_json: *mut *mut c_char,
) -> IsacStatus {
    run_report(scenario, out_json, |s| {
        run_budget(s, None).map(|r| serde_json::to_value(r).expect("budget report serializes"))
    })
}

/// Run the Monte-Carlo simulation and return the report as JSON in
/// `out_json`. Periodogram exports are skipped; use the CLI for file output.
///
/// # Safety
/// `scenario` must be a live handle and `out_json` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn isac_simulate_json(
    scenario: *const IsacScenario,
    out_json: *mut *mut c_char,
) -> IsacStatus {
    run_report(scenario, out_json, |s| {
        run_simulate(s, None).map(|r| serde_json::to_value(r).expect("simulate report serializes"))
    })
}

/// Run the synchronization estimator sweep and return the report as JSON in
/// `out_json`.
///
/// # Safety
/// `scenario` must be a live handle and `out_json` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn isac_sync_eval_json(
    scenario: *const IsacScenario,
    out_json: *mut *mut c_char,
) -> IsacStatus {
    run_report(scenario, out_json, |s| {
        run_sync_eval(s, None).map(|r| serde_json::to_value(r).expect("sync report serializes"))
    })
}

/// Release a string returned through an `out_json` slot; a null pointer is
/// ignored.
///
/// # Safety
/// `text` must be null or a pointer previously returned by this library
/// that has not been freed already.
#[no_mangle]
pub unsafe extern "C" fn isac_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}
