//! C interface to the ethdaq simulator.
//!
//! Scenarios and results are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns an
//! [`EthdaqStatus`]; the message of the last failure on the calling thread is
//! available from [`ethdaq_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ethdaq::scenario::{self, apply_param, render, run_doc, Outcome, ScenarioDoc, ScenarioError};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EthdaqStatus {
    Ok = 0,
    /// The scenario failed to parse or validate.
    Invalid = 1,
    UnknownScenario = 2,
    /// Bad `KEY=VALUE` override.
    Param = 3,
    /// Reading input or writing reports failed.
    Io = 4,
    /// The simulation aborted.
    Sim = 5,
    NullArgument = 6,
    /// A string argument was not UTF-8.
    Utf8 = 7,
    /// Index or key out of range.
    NotFound = 8,
    /// The output buffer was too small; the required size was reported.
    BufferTooSmall = 9,
    Panic = 10,
}

/// One or more parsed scenario documents.
pub struct EthdaqScenario {
    docs: Vec<ScenarioDoc>,
}

/// Result of running one scenario document.
pub struct EthdaqRun {
    outcome: Outcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(EthdaqStatus, String);

impl From<ScenarioError> for Fail {
    fn from(e: ScenarioError) -> Self {
        let status = match &e {
            ScenarioError::Invalid(_) => EthdaqStatus::Invalid,
            ScenarioError::UnknownScenario { .. } => EthdaqStatus::UnknownScenario,
            ScenarioError::Param { .. } => EthdaqStatus::Param,
            ScenarioError::Io { .. } | ScenarioError::Export(_) => EthdaqStatus::Io,
            ScenarioError::Sim(_) => EthdaqStatus::Sim,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EthdaqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EthdaqStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EthdaqStatus::Panic
        }
    }
}

unsafe fn arg_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(EthdaqStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(EthdaqStatus::Utf8, format!("{name} is not valid UTF-8")))
}

unsafe fn arg_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(EthdaqStatus::NullArgument, format!("{name} is null")))
}

fn null_out(name: &str) -> Fail {
    Fail(EthdaqStatus::NullArgument, format!("{name} is null"))
}

/// Copies `s` NUL-terminated into `buf`. `*len` receives the size needed,
/// terminator included.
unsafe fn copy_out(s: &str, buf: *mut c_char, cap: usize, len: *mut usize) -> Result<(), Fail> {
    let need = s.len() + 1;
    if !len.is_null() {
        *len = need;
    }
    if buf.is_null() || cap < need {
        return Err(Fail(EthdaqStatus::BufferTooSmall, format!("{need} bytes needed")));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn ethdaq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a canned scenario by name, or a scenario file by path.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_scenario_load(name: *const c_char, out: *mut *mut EthdaqScenario) -> EthdaqStatus {
    guard(|| {
        let name = arg_str(name, "name")?;
        if out.is_null() {
            return Err(null_out("out"));
        }
        let docs = scenario::load(name)?;
        *out = Box::into_raw(Box::new(EthdaqScenario { docs }));
        Ok(())
    })
}

/// Parses a single scenario document from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_scenario_parse(text: *const c_char, out: *mut *mut EthdaqScenario) -> EthdaqStatus {
    guard(|| {
        let text = arg_str(text, "text")?;
        if out.is_null() {
            return Err(null_out("out"));
        }
        let doc = scenario::parse(text)?;
        *out = Box::into_raw(Box::new(EthdaqScenario { docs: vec![doc] }));
        Ok(())
    })
}

/// Number of documents in the scenario; 0 for NULL.
///
/// # Safety
/// `sc` must be NULL or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_scenario_count(sc: *const EthdaqScenario) -> usize {
    sc.as_ref().map_or(0, |s| s.docs.len())
}

/// Copies the name of document `index` into `buf`.
///
/// # Safety
/// `sc` must be a live handle; `buf` must hold `cap` bytes or be NULL;
/// `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_scenario_name(
    sc: *const EthdaqScenario,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> EthdaqStatus {
    guard(|| {
        let doc = doc_at(arg_ref(sc, "scenario")?, index)?;
        copy_out(&doc.name, buf, cap, len)
    })
}

/// Renders document `index` back to TOML into `buf`.
///
/// # Safety
/// As for [`ethdaq_scenario_name`].
#[no_mangle]
pub unsafe extern "C" fn ethdaq_scenario_render(
    sc: *const EthdaqScenario,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> EthdaqStatus {
    guard(|| {
        let doc = doc_at(arg_ref(sc, "scenario")?, index)?;
        copy_out(&render(doc), buf, cap, len)
    })
}

fn doc_at(sc: &EthdaqScenario, index: usize) -> Result<&ScenarioDoc, Fail> {
    sc.docs
        .get(index)
        .ok_or_else(|| Fail(EthdaqStatus::NotFound, format!("document {index} of {}", sc.docs.len())))
}

/// Applies a `KEY=VALUE` override, e.g. `alpha` = `0.5`, to every document.
/// On failure the scenario is left unchanged.
///
/// # Safety
/// `sc` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_scenario_set_param(sc: *mut EthdaqScenario, key: *const c_char, value: *const c_char) -> EthdaqStatus {
    guard(|| {
        let sc = sc.as_mut().ok_or_else(|| null_out("scenario"))?;
        let key = arg_str(key, "key")?;
        let value = arg_str(value, "value")?;
        let docs = sc.docs.iter().map(|d| apply_param(d, key, value)).collect::<Result<Vec<_>, _>>()?;
        sc.docs = docs;
        Ok(())
    })
}

/// Runs document `index`. Reports are written to `out_dir` unless it is NULL.
///
/// # Safety
/// `sc` must be a live handle, `out_dir` NULL or a NUL-terminated string,
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_scenario_run(
    sc: *const EthdaqScenario,
    index: usize,
    out_dir: *const c_char,
    out: *mut *mut EthdaqRun,
) -> EthdaqStatus {
    guard(|| {
        let doc = doc_at(arg_ref(sc, "scenario")?, index)?;
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(Path::new(arg_str(out_dir, "out_dir")?))
        };
        if out.is_null() {
            return Err(null_out("out"));
        }
        let outcome = run_doc(doc, dir)?;
        *out = Box::into_raw(Box::new(EthdaqRun { outcome }));
        Ok(())
    })
}

/// Releases a scenario. NULL is ignored.
///
/// # Safety
/// `sc` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_scenario_free(sc: *mut EthdaqScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Number of simulations the run performed (sweep points, bisection probes).
///
/// # Safety
/// `run` must be NULL or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_run_points(run: *const EthdaqRun) -> usize {
    run.as_ref().map_or(0, |r| r.outcome.points.len())
}

fn lookup<'a>(run: &'a EthdaqRun, point: usize, key: &str) -> Result<&'a str, Fail> {
    if let Some(v) = run.outcome.results.get(key) {
        return Ok(v);
    }
    let p = run
        .outcome
        .points
        .get(point)
        .ok_or_else(|| Fail(EthdaqStatus::NotFound, format!("point {point} of {}", run.outcome.points.len())))?;
    p.metrics
        .summary(key)
        .ok_or_else(|| Fail(EthdaqStatus::NotFound, format!("no summary value {key:?}")))
}

/// Looks up a numeric value. Experiment results such as `bisect.threshold`
/// are searched first, then the summary of simulation `point`.
///
/// # Safety
/// `run` must be a live handle, `key` a NUL-terminated string, `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_run_value(run: *const EthdaqRun, point: usize, key: *const c_char, value: *mut f64) -> EthdaqStatus {
    guard(|| {
        let run = arg_ref(run, "run")?;
        let key = arg_str(key, "key")?;
        if value.is_null() {
            return Err(null_out("value"));
        }
        let s = lookup(run, point, key)?;
        *value = s
            .parse()
            .map_err(|_| Fail(EthdaqStatus::NotFound, format!("{key} = {s:?} is not numeric")))?;
        Ok(())
    })
}

/// Like [`ethdaq_run_value`] but copies the value as text.
///
/// # Safety
/// `run` must be a live handle, `key` a NUL-terminated string; `buf` must hold
/// `cap` bytes or be NULL; `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_run_text(
    run: *const EthdaqRun,
    point: usize,
    key: *const c_char,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> EthdaqStatus {
    guard(|| {
        let run = arg_ref(run, "run")?;
        let key = arg_str(key, "key")?;
        copy_out(lookup(run, point, key)?, buf, cap, len)
    })
}

/// Releases a run. NULL is ignored.
///
/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ethdaq_run_free(run: *mut EthdaqRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
