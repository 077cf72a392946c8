//! C ABI over the `conoma` library.
//!
//! Scenarios and solutions cross the boundary as opaque handles that the
//! caller releases with the matching `_free` function. Every fallible call
//! returns a [`ConomaStatus`]; on failure [`conoma_last_error_message`] holds
//! a description until the next failing call on the same thread. Strings
//! handed out by the library are released with [`conoma_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use conoma::cell::solve_cell;
use conoma::channel::{Layout, NetworkScenario, PhysicalParams};
use conoma::experiment::{solve_scheme, Scheme};
use conoma::network::{Optimization, OptimizerConfig};
use conoma::rates::{jain_index, CellChannel};
use conoma::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConomaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    BufferTooSmall = 4,
    Internal = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConomaScheme {
    ConomaOpt = 0,
    ConomaFixed = 1,
    NomaOpt = 2,
    NomaFixed = 3,
}

impl From<ConomaScheme> for Scheme {
    fn from(s: ConomaScheme) -> Self {
        match s {
            ConomaScheme::ConomaOpt => Scheme::ConomaOpt,
            ConomaScheme::ConomaFixed => Scheme::ConomaFixed,
            ConomaScheme::NomaOpt => Scheme::NomaOpt,
            ConomaScheme::NomaFixed => Scheme::NomaFixed,
        }
    }
}

/// Power-search settings; obtain defaults from [`conoma_optimizer_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConomaOptimizerOptions {
    pub epsilon: f64,
    pub max_rounds: u32,
}

/// One cell at fixed AP power.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConomaCellInput {
    pub psi_s: f64,
    pub psi_w: f64,
    pub r_rf: f64,
    pub b_v: f64,
    pub p_k: f64,
    pub r_th: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConomaCellSolution {
    pub p_s: f64,
    pub p_w: f64,
    /// 1 when the weak user is relayed over RF.
    pub x: u8,
    pub objective: f64,
    pub feasible: bool,
}

/// Opaque network scenario.
pub struct ConomaScenario {
    inner: NetworkScenario,
}

/// Opaque optimization result.
pub struct ConomaSolution {
    inner: Optimization,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn fail(status: ConomaStatus, message: impl Into<String>) -> ConomaStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> ConomaStatus {
    let status = match e {
        Error::Json(_) | Error::Csv(_) => ConomaStatus::ParseError,
        Error::Io(_) => ConomaStatus::Internal,
        _ => ConomaStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

/// Run `body`, turning a panic into [`ConomaStatus::Panic`].
fn guarded(body: impl FnOnce() -> ConomaStatus) -> ConomaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ConomaStatus::Panic, format!("panic: {what}"))
        }
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn to_c_string(text: String, out: *mut *mut c_char) -> ConomaStatus {
    match CString::new(text) {
        Ok(s) => {
            // SAFETY: the caller checked `out` for null
            unsafe { *out = s.into_raw() };
            ConomaStatus::Ok
        }
        Err(_) => fail(ConomaStatus::Internal, "string contains an interior NUL"),
    }
}

/// Message of the last failure on this thread, or NULL. Owned by the library.
#[no_mangle]
pub extern "C" fn conoma_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn conoma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn conoma_optimizer_options_default() -> ConomaOptimizerOptions {
    let d = OptimizerConfig::default();
    ConomaOptimizerOptions {
        epsilon: d.epsilon,
        max_rounds: d.max_rounds as u32,
    }
}

/// Parse a scenario from NUL-terminated JSON.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conoma_scenario_from_json(json: *const c_char, out: *mut *mut ConomaScenario) -> ConomaStatus {
    guarded(|| {
        if json.is_null() || out.is_null() {
            return fail(ConomaStatus::NullPointer, "json and out must not be NULL");
        }
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(ConomaStatus::ParseError, "scenario JSON is not UTF-8");
        };
        match NetworkScenario::from_json(text) {
            Ok(inner) => {
                put(out, ConomaScenario { inner });
                ConomaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Random user drop on a `rows x cols` AP grid with the default parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conoma_scenario_generate(
    rows: u32,
    cols: u32,
    alpha: f64,
    seed: u64,
    out: *mut *mut ConomaScenario,
) -> ConomaStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ConomaStatus::NullPointer, "out must not be NULL");
        }
        let layout = Layout::grid(rows as usize, cols as usize);
        match NetworkScenario::generate(&layout, &PhysicalParams::default(), alpha, seed) {
            Ok(inner) => {
                put(out, ConomaScenario { inner });
                ConomaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of cells, 0 for NULL.
///
/// # Safety
/// `scenario` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conoma_scenario_n_cells(scenario: *const ConomaScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.n_cells())
}

/// Serialise a scenario; free the string with [`conoma_string_free`].
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conoma_scenario_to_json(scenario: *const ConomaScenario, out: *mut *mut c_char) -> ConomaStatus {
    guarded(|| {
        let (Some(s), false) = (scenario.as_ref(), out.is_null()) else {
            return fail(ConomaStatus::NullPointer, "scenario and out must not be NULL");
        };
        match s.inner.to_json() {
            Ok(text) => to_c_string(text, out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `scenario` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conoma_scenario_free(scenario: *mut ConomaScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Solve a scenario under `scheme` at QoS target `r_th` (bit/s).
/// `options` may be NULL for the defaults.
///
/// # Safety
/// `scenario` must be a live handle, `options` NULL or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn conoma_solve(
    scenario: *const ConomaScenario,
    r_th: f64,
    scheme: ConomaScheme,
    options: *const ConomaOptimizerOptions,
    out: *mut *mut ConomaSolution,
) -> ConomaStatus {
    guarded(|| {
        let (Some(s), false) = (scenario.as_ref(), out.is_null()) else {
            return fail(ConomaStatus::NullPointer, "scenario and out must not be NULL");
        };
        let mut config = OptimizerConfig::default();
        if let Some(o) = options.as_ref() {
            config.epsilon = o.epsilon;
            config.max_rounds = o.max_rounds as usize;
        }
        if !(r_th.is_finite() && r_th >= 0.0) {
            return fail(ConomaStatus::InvalidArgument, format!("r_th must be finite and >= 0, got {r_th}"));
        }
        match solve_scheme(&s.inner, r_th, scheme.into(), &config) {
            Ok(inner) => {
                put(out, ConomaSolution { inner });
                ConomaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_n_cells(solution: *const ConomaSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.state.n_cells())
}

/// Sum of all user rates (bit/s); NaN for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_sum_rate(solution: *const ConomaSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.inner.report.sum_rate)
}

/// Jain index over all user rates; NaN for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_jain(solution: *const ConomaSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.inner.report.jain)
}

/// Number of cells meeting both QoS targets.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_feasible_cells(solution: *const ConomaSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.report.n_feasible())
}

/// AP iterations the power search ran (0 at fixed power).
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_iterations(solution: *const ConomaSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.trace.records.len())
}

unsafe fn copy_out<T: Copy>(dst: *mut T, src: &[T]) {
    if !dst.is_null() {
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
}

/// Copy the allocation into caller buffers of `len` entries each. Any
/// buffer may be NULL to skip it.
///
/// # Safety
/// Each non-NULL buffer must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_powers(
    solution: *const ConomaSolution,
    p: *mut f64,
    p_s: *mut f64,
    p_w: *mut f64,
    x: *mut u8,
    len: usize,
) -> ConomaStatus {
    guarded(|| {
        let Some(s) = solution.as_ref() else {
            return fail(ConomaStatus::NullPointer, "solution must not be NULL");
        };
        let state = &s.inner.state;
        if len < state.n_cells() {
            return fail(
                ConomaStatus::BufferTooSmall,
                format!("buffers hold {len} entries, need {}", state.n_cells()),
            );
        }
        copy_out(p, &state.p);
        copy_out(p_s, &state.p_s);
        copy_out(p_w, &state.p_w);
        copy_out(x, &state.x);
        ConomaStatus::Ok
    })
}

/// Copy per-cell strong and weak (selected link) user rates, bit/s.
///
/// # Safety
/// Each non-NULL buffer must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_rates(
    solution: *const ConomaSolution,
    r_strong: *mut f64,
    r_weak: *mut f64,
    len: usize,
) -> ConomaStatus {
    guarded(|| {
        let Some(s) = solution.as_ref() else {
            return fail(ConomaStatus::NullPointer, "solution must not be NULL");
        };
        let report = &s.inner.report;
        if len < report.r_s.len() {
            return fail(
                ConomaStatus::BufferTooSmall,
                format!("buffers hold {len} entries, need {}", report.r_s.len()),
            );
        }
        copy_out(r_strong, &report.r_s);
        copy_out(r_weak, &report.r_w_effective);
        ConomaStatus::Ok
    })
}

/// Allocation, rates and trace as JSON; free with [`conoma_string_free`].
///
/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_to_json(solution: *const ConomaSolution, out: *mut *mut c_char) -> ConomaStatus {
    guarded(|| {
        let (Some(s), false) = (solution.as_ref(), out.is_null()) else {
            return fail(ConomaStatus::NullPointer, "solution and out must not be NULL");
        };
        match serde_json::to_string(&s.inner) {
            Ok(text) => to_c_string(text, out),
            Err(e) => from_error(e.into()),
        }
    })
}

/// # Safety
/// `solution` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conoma_solution_free(solution: *mut ConomaSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conoma_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Jain fairness index of `len` rates; 1 for an empty or all-zero input, NaN for NULL.
///
/// # Safety
/// `rates` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn conoma_jain_index(rates: *const f64, len: usize) -> f64 {
    if rates.is_null() {
        return if len == 0 { 1.0 } else { f64::NAN };
    }
    jain_index(slice::from_raw_parts(rates, len))
}

/// Closed-form power split and link choice of one cell.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conoma_solve_cell(input: ConomaCellInput, out: *mut ConomaCellSolution) -> ConomaStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ConomaStatus::NullPointer, "out must not be NULL");
        }
        let finite = [input.psi_s, input.psi_w, input.r_rf, input.b_v, input.p_k, input.r_th]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !finite || input.b_v == 0.0 {
            return fail(ConomaStatus::InvalidArgument, "cell inputs must be finite and >= 0, b_v > 0");
        }
        let ch = CellChannel {
            psi_s: input.psi_s,
            psi_w: input.psi_w,
            r_rf: input.r_rf,
            b_v: input.b_v,
        };
        let s = solve_cell(&ch, input.p_k, input.r_th);
        *out = ConomaCellSolution {
            p_s: s.p_s,
            p_w: s.p_w,
            x: s.x,
            objective: s.cell_objective,
            feasible: s.feasible,
        };
        ConomaStatus::Ok
    })
}
