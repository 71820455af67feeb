//! C ABI over `lowrank-rsaa`.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`LrStatus`] and writes results through
//!   out-pointers. On failure the out-pointer is left untouched and
//!   [`lr_last_error_message`] describes the problem.
//! * Objects are opaque handles created by `lr_*_new`/`lr_*_from_json`/solvers
//!   and released with the matching `lr_*_free`. Freeing NULL is a no-op.
//! * Strings returned through `char **` are owned by the caller and must be
//!   released with [`lr_string_free`].
//! * Panics never cross the boundary; they surface as `LR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lowrank_rsaa::penalty::{mcp_derivative, mcp_prox_scalar, mcp_value};
use lowrank_rsaa::problems::{
    excess_risk_with, make_problem_with, sample, BatchDocument, Family, ProblemConfig, ProblemDocument,
};
use lowrank_rsaa::solvers::{solve_nuclear, solve_pipeline, solve_saa};
use lowrank_rsaa::theory::{evaluate_all, tuned_mcp, TheoryInputs};
use lowrank_rsaa::{Error, McpParams, ProblemInstance, SampleBatch, SolveReport, SolverConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrStatus {
    Ok = 0,
    InvalidInput = 1,
    NumericalFailure = 2,
    NullPointer = 3,
    Panic = 4,
}

/// Problem families for [`lr_problem_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrFamily {
    Denoising = 0,
    Sensing = 1,
}

/// Methods for [`lr_solve`]. `Rsaa` runs the nuclear initializer first.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrMethod {
    Saa = 0,
    Nuclear = 1,
    Rsaa = 2,
}

/// Opaque problem instance.
pub struct LrProblem(ProblemInstance);
/// Opaque sample batch.
pub struct LrBatch(SampleBatch);
/// Opaque solver report.
pub struct LrReport(SolveReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: LrStatus, msg: &str) -> LrStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> LrStatus {
    let status = if e.is_invalid_input() { LrStatus::InvalidInput } else { LrStatus::NumericalFailure };
    fail(status, &e.to_string())
}

/// Run `f`, converting panics into `LR_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> Result<(), LrStatus>) -> LrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LrStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(LrStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: lowrank_rsaa::Result<T>) -> Result<T, LrStatus> {
    r.map_err(from_error)
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, LrStatus> {
    p.as_ref().ok_or_else(|| fail(LrStatus::NullPointer, &format!("{what} is NULL")))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), LrStatus> {
    if p.is_null() {
        Err(fail(LrStatus::NullPointer, &format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, LrStatus> {
    if p.is_null() {
        return Err(fail(LrStatus::NullPointer, &format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LrStatus::InvalidInput, &format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, LrStatus> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(LrStatus::NumericalFailure, "string contains NUL"))
}

fn json_error(e: serde_json::Error) -> LrStatus {
    fail(LrStatus::InvalidInput, &e.to_string())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn lr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Problems and batches

/// Draw a problem instance. `pilot_samples == 0` uses the library default.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn lr_problem_new(
    family: LrFamily,
    p: usize,
    s: usize,
    radius: f64,
    noise_scale: f64,
    seed: u64,
    pilot_samples: usize,
    out: *mut *mut LrProblem,
) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let family = match family {
            LrFamily::Denoising => Family::Denoising,
            LrFamily::Sensing => Family::Sensing,
        };
        let mut cfg = ProblemConfig::new(family, p, s, radius, noise_scale, seed);
        if pilot_samples > 0 {
            cfg.pilot_samples = pilot_samples;
        }
        let inst = lift(make_problem_with(&cfg))?;
        *out = Box::into_raw(Box::new(LrProblem(inst)));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_problem_from_json(json: *const c_char, out: *mut *mut LrProblem) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let doc: ProblemDocument = serde_json::from_str(read_str(json, "json")?).map_err(json_error)?;
        let inst = lift(doc.into_instance())?;
        *out = Box::into_raw(Box::new(LrProblem(inst)));
        Ok(())
    })
}

/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_problem_to_json(problem: *const LrProblem, out: *mut *mut c_char) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let inst = &deref(problem, "problem")?.0;
        let text = serde_json::to_string(&ProblemDocument::from(inst)).map_err(json_error)?;
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// Matrix dimension `p`, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lr_problem_dim(problem: *const LrProblem) -> usize {
    problem.as_ref().map_or(0, |h| h.0.p)
}

/// Copy the true solution (row-major, `p·p` entries) into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lr_problem_true_solution(problem: *const LrProblem, buf: *mut f64, len: usize) -> LrStatus {
    guard(|| {
        let inst = &deref(problem, "problem")?.0;
        copy_out(inst.true_solution.as_slice(), buf, len)
    })
}

/// # Safety
/// `problem` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lr_problem_free(problem: *mut LrProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Draw `n` i.i.d. scenarios.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_sample(problem: *const LrProblem, n: usize, seed: u64, out: *mut *mut LrBatch) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let inst = &deref(problem, "problem")?.0;
        let batch = lift(sample(inst, n, seed))?;
        *out = Box::into_raw(Box::new(LrBatch(batch)));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_batch_from_json(json: *const c_char, out: *mut *mut LrBatch) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let doc: BatchDocument = serde_json::from_str(read_str(json, "json")?).map_err(json_error)?;
        let batch = lift(doc.into_batch())?;
        *out = Box::into_raw(Box::new(LrBatch(batch)));
        Ok(())
    })
}

/// Number of scenarios, or 0 for NULL.
///
/// # Safety
/// `batch` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lr_batch_len(batch: *const LrBatch) -> usize {
    batch.as_ref().map_or(0, |h| h.0.len())
}

/// # Safety
/// `batch` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lr_batch_free(batch: *mut LrBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

// ---------------------------------------------------------------------------
// Solving

/// Solve with default solver settings. A NaN `lambda` selects the
/// theory-tuned value; `lambda` is ignored by `LR_METHOD_SAA`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_solve(
    problem: *const LrProblem,
    batch: *const LrBatch,
    method: LrMethod,
    lambda: f64,
    out: *mut *mut LrReport,
) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let inst = &deref(problem, "problem")?.0;
        let batch = &deref(batch, "batch")?.0;
        let cfg = SolverConfig::default();
        let prm = || -> Result<McpParams, LrStatus> {
            if lambda.is_nan() {
                lift(tuned_mcp(inst, batch.len()))
            } else {
                lift(McpParams::tuned(lambda, inst.constants.u_l))
            }
        };
        let report = match method {
            LrMethod::Saa => lift(solve_saa(inst, batch, &cfg))?,
            LrMethod::Nuclear => lift(solve_nuclear(inst, batch, prm()?.lambda(), &cfg))?,
            LrMethod::Rsaa => lift(solve_pipeline(inst, batch, &prm()?, &cfg))?.1,
        };
        *out = Box::into_raw(Box::new(LrReport(report)));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_report_from_json(json: *const c_char, out: *mut *mut LrReport) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let report: SolveReport = serde_json::from_str(read_str(json, "json")?).map_err(json_error)?;
        *out = Box::into_raw(Box::new(LrReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_report_to_json(report: *const LrReport, out: *mut *mut c_char) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let r = &deref(report, "report")?.0;
        let text = serde_json::to_string(r).map_err(json_error)?;
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// Copy the solution (row-major, `p·p` entries) into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lr_report_solution(report: *const LrReport, buf: *mut f64, len: usize) -> LrStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        copy_out(r.solution.as_slice(), buf, len)
    })
}

/// Numerical rank of the solution.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_report_rank(report: *const LrReport, out: *mut usize) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = deref(report, "report")?.0.rank;
        Ok(())
    })
}

/// `1` if the report carries a passing certificate, `0` if it fails, `-1` if it has none.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_report_certificate(report: *const LrReport, out: *mut i32) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let r = &deref(report, "report")?.0;
        *out = match &r.certificate {
            Some(c) if c.passed => 1,
            Some(_) => 0,
            None => -1,
        };
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lr_report_free(report: *mut LrReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Excess risk of the report's solution. `n_eval` is the Monte Carlo size for
/// Sensing (0 uses the default); Denoising is exact and writes a zero stderr.
///
/// # Safety
/// Handles must be live; `value` must be writable; `stderr` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn lr_excess_risk(
    problem: *const LrProblem,
    report: *const LrReport,
    n_eval: usize,
    value: *mut f64,
    stderr: *mut f64,
) -> LrStatus {
    guard(|| {
        check_out(value, "value")?;
        let inst = &deref(problem, "problem")?.0;
        let r = &deref(report, "report")?.0;
        let n_eval = if n_eval == 0 { lowrank_rsaa::problems::DEFAULT_EVAL_SAMPLES } else { n_eval };
        let risk = lift(excess_risk_with(inst, &r.solution, n_eval))?;
        *value = risk.value;
        if !stderr.is_null() {
            *stderr = risk.std_error;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Scalars

/// `P_λ(t)` for MCP parameters `(a, λ)` with curvature bound `u_l`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_mcp_value(t: f64, a: f64, lambda: f64, u_l: f64, out: *mut f64) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let prm = lift(McpParams::new(a, lambda, u_l))?;
        *out = lift(mcp_value(t, &prm))?;
        Ok(())
    })
}

/// `P'_λ(t)` for `t > 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_mcp_derivative(t: f64, a: f64, lambda: f64, u_l: f64, out: *mut f64) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let prm = lift(McpParams::new(a, lambda, u_l))?;
        *out = lift(mcp_derivative(t, &prm))?;
        Ok(())
    })
}

/// Scalar prox of `step·P_λ` on `t ≥ 0`; requires `step < a`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_mcp_prox(v: f64, step: f64, a: f64, lambda: f64, u_l: f64, out: *mut f64) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let prm = lift(McpParams::new(a, lambda, u_l))?;
        *out = lift(mcp_prox_scalar(v, step, &prm))?;
        Ok(())
    })
}

/// Evaluate every theory formula for the JSON inputs; writes a JSON report.
///
/// # Safety
/// `inputs_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_theory_json(inputs_json: *const c_char, out: *mut *mut c_char) -> LrStatus {
    guard(|| {
        check_out(out, "out")?;
        let inputs: TheoryInputs = serde_json::from_str(read_str(inputs_json, "inputs_json")?).map_err(json_error)?;
        let report = lift(evaluate_all(&inputs))?;
        *out = into_c_string(serde_json::to_string(&report).map_err(json_error)?)?;
        Ok(())
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), LrStatus> {
    check_out(buf, "buf")?;
    if len < src.len() {
        return Err(fail(LrStatus::InvalidInput, &format!("buffer holds {len} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}
