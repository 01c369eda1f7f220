//! C ABI for curvesolve.
//!
//! Scenarios and runs are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`CsStatus`]; the message of the last failure on the calling thread is
//! available from [`cs_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use curvesolve::curvature::CurvatureFunction;
use curvesolve::pipeline::{self, RunArtifact, RunOptions, RunOutcome};
use curvesolve::scenario::Scenario;
use curvesolve::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    /// A required pointer was null, a string was not UTF-8 or a buffer was too small.
    InvalidArgument = 1,
    /// Scenario parse or configuration error.
    Parse = 2,
    /// Barrier ordering, barrier inequality or right-hand side bound violation.
    Barrier = 3,
    /// Path, monitor or convergence failure.
    Path = 4,
    /// Any other solver error.
    Internal = 5,
    /// A panic was caught at the boundary.
    Panic = 6,
}

/// Curvature functions selectable through [`cs_curvature_evaluate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsCurvature {
    Mean = 0,
    GaussRoot = 1,
    SigmaKRoot = 2,
}

/// Opaque parsed scenario.
pub struct CsScenario(Scenario);

/// Opaque completed run.
pub struct CsRun(RunArtifact);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: CsStatus, msg: String) -> CsStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> CsStatus {
    match e.exit_code() {
        2 => CsStatus::Parse,
        3 => CsStatus::Barrier,
        4 => CsStatus::Path,
        _ => CsStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> CsStatus) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CsStatus::Panic, msg)
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains a NUL"),
    };
    VERSION.as_ptr()
}

/// Message of the last failure on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses scenario text into a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_scenario_parse(text: *const c_char, out: *mut *mut CsScenario) -> CsStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return fail(CsStatus::InvalidArgument, "null argument".into());
        }
        // SAFETY: checked non-null; the caller guarantees NUL termination.
        let Ok(s) = unsafe { CStr::from_ptr(text) }.to_str() else {
            return fail(CsStatus::InvalidArgument, "scenario text is not UTF-8".into());
        };
        match Scenario::parse(s) {
            Ok(sc) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(CsScenario(sc))) };
                CsStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a scenario handle. Null is ignored.
///
/// # Safety
/// `sc` must come from [`cs_scenario_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cs_scenario_free(sc: *mut CsScenario) {
    if !sc.is_null() {
        // SAFETY: the caller passes a pointer from Box::into_raw.
        drop(unsafe { Box::from_raw(sc) });
    }
}

/// Runs the full pipeline on a scenario.
///
/// # Safety
/// `sc` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_run(sc: *const CsScenario, out: *mut *mut CsRun) -> CsStatus {
    guard(|| {
        if sc.is_null() || out.is_null() {
            return fail(CsStatus::InvalidArgument, "null argument".into());
        }
        // SAFETY: checked non-null; the caller guarantees it is live.
        let sc = unsafe { &(*sc).0 };
        match pipeline::run(sc, &RunOptions::default(), &mut |_| {}) {
            Ok(RunOutcome::Completed(a)) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(CsRun(*a))) };
                CsStatus::Ok
            }
            Ok(RunOutcome::Halted(_)) => fail(CsStatus::Internal, "run halted without a halt request".into()),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a run handle. Null is ignored.
///
/// # Safety
/// `run` must come from [`cs_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cs_run_free(run: *mut CsRun) {
    if !run.is_null() {
        // SAFETY: the caller passes a pointer from Box::into_raw.
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Number of grid nodes of a run, 0 for null.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn cs_run_n_nodes(run: *const CsRun) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { run.as_ref() }.map_or(0, |r| r.0.solution.len())
}

/// Number of accepted continuation steps, 0 for null.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn cs_run_n_steps(run: *const CsRun) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { run.as_ref() }.map_or(0, |r| r.0.trace.steps.len())
}

/// Final homotopy parameter, NaN for null.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn cs_run_final_t(run: *const CsRun) -> f64 {
    // SAFETY: null or live per the contract.
    unsafe { run.as_ref() }.map_or(f64::NAN, |r| r.0.final_t)
}

/// Copies the final nodal values into `buf`, which holds `len` doubles.
///
/// # Safety
/// `run` must be a live run handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cs_run_final_u(run: *const CsRun, buf: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        // SAFETY: null or live per the contract.
        let Some(run) = (unsafe { run.as_ref() }) else {
            return fail(CsStatus::InvalidArgument, "null run".into());
        };
        let n = run.0.solution.len();
        if buf.is_null() || len < n {
            return fail(CsStatus::InvalidArgument, format!("buffer must hold {n} values"));
        }
        // SAFETY: checked non-null and at least n long.
        let dst = unsafe { std::slice::from_raw_parts_mut(buf, n) };
        for (d, row) in dst.iter_mut().zip(&run.0.solution) {
            *d = row.u;
        }
        CsStatus::Ok
    })
}

/// Evaluates a curvature function at `n` principal curvatures.
///
/// `k` is only read for [`CsCurvature::SigmaKRoot`].
///
/// # Safety
/// `kappa` must be valid for `n` reads and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_curvature_evaluate(
    kind: CsCurvature,
    k: usize,
    kappa: *const f64,
    n: usize,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        if kappa.is_null() || out.is_null() || n == 0 {
            return fail(CsStatus::InvalidArgument, "null argument or empty kappa".into());
        }
        let f = match kind {
            CsCurvature::Mean => CurvatureFunction::Mean,
            CsCurvature::GaussRoot => CurvatureFunction::GaussRoot,
            CsCurvature::SigmaKRoot => CurvatureFunction::SigmaKRoot { k },
        };
        if let Err(e) = f.check_dimension(n) {
            return fail(CsStatus::InvalidArgument, e.to_string());
        }
        // SAFETY: checked non-null; the caller guarantees n readable values.
        let kappa = unsafe { std::slice::from_raw_parts(kappa, n) };
        match f.evaluate(kappa) {
            Ok(v) => {
                // SAFETY: checked non-null.
                unsafe { *out = v };
                CsStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}
