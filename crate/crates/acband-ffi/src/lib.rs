//! C ABI over the configuration engine.
//!
//! Handles are opaque pointers owned by the caller and released through
//! the matching `_free` function. Every fallible call returns an
//! [`AcbandStatus`]; on failure a human-readable message is stored per
//! thread and stays readable through [`acband_last_error`] until the
//! next failing call on the same thread. The header `include/acband.h`
//! is regenerated from this file on every build.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use acband::acband::{n_alpha_delta, run_acband};
use acband::data::generate_exponential_scenario;
use acband::domain::AcBandParams;
use acband::error::Error;
use acband::hyperband::{run_hyperband, HbRunResult, HyperbandParams};
use acband::oracle::{MatrixOracle, RuntimeMatrix};
use acband::statistics::StatisticKind;
use acband::RunResult;

/// Outcome of a call, aligned with the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcbandStatus {
    /// The call succeeded.
    Ok = 0,
    /// A parameter is out of range or inconsistent.
    InvalidParameter = 2,
    /// Data could not be read, written, or evaluated.
    DataError = 3,
    /// The budget cannot fund the elimination schedule.
    InsufficientBudget = 4,
    /// A required pointer was null.
    NullPointer = 5,
}

/// Owned runtime matrix behind an opaque handle.
pub struct AcbandMatrix {
    inner: RuntimeMatrix,
}

/// Owned run result behind an opaque handle.
pub struct AcbandResult {
    kind: ResultKind,
}

enum ResultKind {
    Band(RunResult),
    Ladder(HbRunResult),
}

/// Everything one run needs; `acband_run_config_default` fills the same
/// defaults the command line uses.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AcbandRunConfig {
    /// 0 runs the capped elimination engine, 1 the baseline ladder.
    pub method: u32,
    /// 0 scores by win frequency, 1 by negated mean runtime.
    pub statistic: u32,
    /// Group size for capped parallel evaluation.
    pub k: usize,
    /// Assumed fraction of epsilon-best configurations.
    pub alpha: f64,
    /// Failure probability of the sampling guarantee.
    pub delta: f64,
    /// Optimality tolerance of the guarantee.
    pub epsilon: f64,
    /// Pool size; 0 picks the largest admissible value.
    pub n0: u64,
    /// Total instance budget.
    pub budget: usize,
    /// Run seed.
    pub seed: u64,
    /// Thinning factor of the baseline ladder.
    pub eta: f64,
    /// Most exploratory bracket size of the baseline ladder.
    pub n_max: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn stash_error(message: &str) {
    let safe = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("invalid error text").expect("static text has no NUL"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = safe);
}

fn status_of(err: &Error) -> AcbandStatus {
    match err {
        Error::InvalidParameter(_) | Error::InvalidN0 { .. } | Error::InfeasibleAlpha(_) => {
            AcbandStatus::InvalidParameter
        }
        Error::InsufficientBudget(_) => AcbandStatus::InsufficientBudget,
        _ => AcbandStatus::DataError,
    }
}

fn fail(err: &Error) -> AcbandStatus {
    stash_error(&err.to_string());
    status_of(err)
}

fn fail_null(what: &str) -> AcbandStatus {
    stash_error(&format!("{what} must not be null"));
    AcbandStatus::NullPointer
}

/// Run `body` with panics converted into `DataError`.
fn guarded(body: impl FnOnce() -> AcbandStatus) -> AcbandStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            stash_error("internal panic");
            AcbandStatus::DataError
        }
    }
}

/// Message of the last failure on this thread; empty before the first
/// failure. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn acband_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load a runtime matrix from a CSV or binary file, detecting the
/// format from the content. The handle must be released with
/// `acband_matrix_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn acband_matrix_load(
    path: *const c_char,
    out: *mut *mut AcbandMatrix,
) -> AcbandStatus {
    if path.is_null() {
        return fail_null("path");
    }
    if out.is_null() {
        return fail_null("out");
    }
    guarded(|| {
        let path = match CStr::from_ptr(path).to_str() {
            Ok(p) => p,
            Err(_) => {
                stash_error("path is not valid UTF-8");
                return AcbandStatus::InvalidParameter;
            }
        };
        match acband::data::load_matrix(std::path::Path::new(path)) {
            Ok(matrix) => {
                out.write(Box::into_raw(Box::new(AcbandMatrix { inner: matrix })));
                AcbandStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Generate a synthetic exponential matrix with `ceil(alpha * n_configs)`
/// epsilon-best configurations. The handle must be released with
/// `acband_matrix_free`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn acband_matrix_generate(
    n_configs: usize,
    n_instances: usize,
    alpha: f64,
    epsilon: f64,
    timeout: f64,
    seed: u64,
    out: *mut *mut AcbandMatrix,
) -> AcbandStatus {
    if out.is_null() {
        return fail_null("out");
    }
    guarded(|| {
        match generate_exponential_scenario(n_configs, n_instances, alpha, epsilon, timeout, seed)
        {
            Ok((matrix, _)) => {
                out.write(Box::into_raw(Box::new(AcbandMatrix { inner: matrix })));
                AcbandStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Report a matrix's dimensions.
///
/// # Safety
/// All pointers must be valid; `matrix` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn acband_matrix_dims(
    matrix: *const AcbandMatrix,
    n_configs: *mut usize,
    n_instances: *mut usize,
) -> AcbandStatus {
    if matrix.is_null() {
        return fail_null("matrix");
    }
    if n_configs.is_null() || n_instances.is_null() {
        return fail_null("dimension outputs");
    }
    let inner = &(*matrix).inner;
    n_configs.write(inner.n_configs());
    n_instances.write(inner.n_instances());
    AcbandStatus::Ok
}

/// Release a matrix handle; a null handle is ignored.
///
/// # Safety
/// `matrix` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn acband_matrix_free(matrix: *mut AcbandMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// The defaults the command line uses: the capped engine at k = 2,
/// alpha = delta = 0.05, epsilon = 0.1, automatic pool size, seed 0,
/// and a ladder at eta = 3.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn acband_run_config_default(out: *mut AcbandRunConfig) -> AcbandStatus {
    if out.is_null() {
        return fail_null("out");
    }
    out.write(AcbandRunConfig {
        method: 0,
        statistic: 0,
        k: 2,
        alpha: 0.05,
        delta: 0.05,
        epsilon: 0.1,
        n0: 0,
        budget: 0,
        seed: 0,
        eta: 3.0,
        n_max: 0,
    });
    AcbandStatus::Ok
}

/// Configure on a matrix and hand back an owned result. The handle must
/// be released with `acband_result_free`.
///
/// # Safety
/// All pointers must be valid; `matrix` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn acband_run(
    matrix: *const AcbandMatrix,
    config: *const AcbandRunConfig,
    out: *mut *mut AcbandResult,
) -> AcbandStatus {
    if matrix.is_null() {
        return fail_null("matrix");
    }
    if config.is_null() {
        return fail_null("config");
    }
    if out.is_null() {
        return fail_null("out");
    }
    let matrix = &(*matrix).inner;
    let config = *config;
    guarded(move || {
        let statistic = match config.statistic {
            0 => StatisticKind::WinFrequency,
            1 => StatisticKind::NegMeanRuntime,
            other => {
                stash_error(&format!("unknown statistic {other}; expected 0 or 1"));
                return AcbandStatus::InvalidParameter;
            }
        };
        let kind = match config.method {
            0 => {
                let n0 = if config.n0 != 0 {
                    config.n0
                } else {
                    match n_alpha_delta(config.alpha, config.delta) {
                        Ok(n) => 2 * n,
                        Err(e) => return fail(&e),
                    }
                };
                let params = AcBandParams {
                    k: config.k,
                    alpha: config.alpha,
                    delta: config.delta,
                    epsilon: config.epsilon,
                    n0,
                    budget: config.budget,
                    seed: config.seed,
                };
                let mut oracle = MatrixOracle::new(matrix, config.seed);
                match run_acband(&params, &mut oracle, statistic) {
                    Ok(result) => ResultKind::Band(result),
                    Err(e) => return fail(&e),
                }
            }
            1 => {
                let params = HyperbandParams {
                    eta: config.eta,
                    n_max: config.n_max,
                    budget: config.budget,
                    seed: config.seed,
                };
                let mut oracle = MatrixOracle::new(matrix, config.seed);
                match run_hyperband(&params, &mut oracle) {
                    Ok(result) => ResultKind::Ladder(result),
                    Err(e) => return fail(&e),
                }
            }
            other => {
                stash_error(&format!("unknown method {other}; expected 0 or 1"));
                return AcbandStatus::InvalidParameter;
            }
        };
        out.write(Box::into_raw(Box::new(AcbandResult { kind })));
        AcbandStatus::Ok
    })
}

/// Identifier of the winning configuration.
///
/// # Safety
/// All pointers must be valid; `result` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn acband_result_winner(
    result: *const AcbandResult,
    out: *mut usize,
) -> AcbandStatus {
    if result.is_null() {
        return fail_null("result");
    }
    if out.is_null() {
        return fail_null("out");
    }
    out.write(match &(*result).kind {
        ResultKind::Band(r) => r.winner.0,
        ResultKind::Ladder(r) => r.winner.0,
    });
    AcbandStatus::Ok
}

/// Total CPU seconds the run charged.
///
/// # Safety
/// All pointers must be valid; `result` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn acband_result_cpu_seconds(
    result: *const AcbandResult,
    out: *mut f64,
) -> AcbandStatus {
    if result.is_null() {
        return fail_null("result");
    }
    if out.is_null() {
        return fail_null("out");
    }
    out.write(match &(*result).kind {
        ResultKind::Band(r) => r.cpu.total_seconds,
        ResultKind::Ladder(r) => r.cpu_seconds,
    });
    AcbandStatus::Ok
}

/// Budget units the run consumed: instance evaluations.
///
/// # Safety
/// All pointers must be valid; `result` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn acband_result_evaluations(
    result: *const AcbandResult,
    out: *mut usize,
) -> AcbandStatus {
    if result.is_null() {
        return fail_null("result");
    }
    if out.is_null() {
        return fail_null("out");
    }
    out.write(match &(*result).kind {
        ResultKind::Band(r) => r.total_instances_used,
        ResultKind::Ladder(r) => r.total_evaluations,
    });
    AcbandStatus::Ok
}

/// Serialize the full result document as JSON. The string must be
/// released with `acband_string_free`.
///
/// # Safety
/// All pointers must be valid; `result` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn acband_result_to_json(
    result: *const AcbandResult,
    out: *mut *mut c_char,
) -> AcbandStatus {
    if result.is_null() {
        return fail_null("result");
    }
    if out.is_null() {
        return fail_null("out");
    }
    guarded(|| {
        let json = match &(*result).kind {
            ResultKind::Band(r) => serde_json::to_string_pretty(r),
            ResultKind::Ladder(r) => serde_json::to_string_pretty(r),
        };
        match json {
            Ok(text) => match CString::new(text) {
                Ok(c) => {
                    out.write(c.into_raw());
                    AcbandStatus::Ok
                }
                Err(_) => {
                    stash_error("serialized result contains a NUL byte");
                    AcbandStatus::DataError
                }
            },
            Err(e) => {
                stash_error(&e.to_string());
                AcbandStatus::DataError
            }
        }
    })
}

/// Release a result handle; a null handle is ignored.
///
/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn acband_result_free(result: *mut AcbandResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Release a string obtained from this library; null is ignored.
///
/// # Safety
/// `text` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn acband_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Sample count that guarantees an epsilon-best configuration is drawn
/// with probability at least `1 - delta` when their fraction is `alpha`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn acband_n_alpha_delta(
    alpha: f64,
    delta: f64,
    out: *mut u64,
) -> AcbandStatus {
    if out.is_null() {
        return fail_null("out");
    }
    match n_alpha_delta(alpha, delta) {
        Ok(n) => {
            out.write(n);
            AcbandStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Budget that provably funds the whole epoch loop at a mean
/// per-instance evaluation cost of `gamma_bar`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn acband_sufficient_budget(
    gamma_bar: f64,
    k: usize,
    alpha: f64,
    delta: f64,
    n0: u64,
    out: *mut f64,
) -> AcbandStatus {
    if out.is_null() {
        return fail_null("out");
    }
    match acband::theory::acband_sufficient_budget(gamma_bar, k, alpha, delta, n0) {
        Ok(budget) => {
            out.write(budget);
            AcbandStatus::Ok
        }
        Err(e) => fail(&e),
    }
}
