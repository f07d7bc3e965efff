//! C ABI for the mvplab laboratory.
//!
//! Conventions:
//! - Handles (`MvplabMdp`, `MvplabSolved`) are opaque; create them through
//!   the constructors and release them with the matching `_free` function.
//! - Every fallible call returns an [`MvplabStatus`]; results come back
//!   through out-pointers, which are written only on `Ok`.
//! - Strings returned through out-pointers are NUL-terminated, UTF-8, owned
//!   by the caller, and must be released with [`mvplab_string_free`].
//! - On any non-`Ok` status, [`mvplab_last_error_message`] returns a copy of
//!   the thread-local error description.
//! - Structured data crosses the boundary as JSON or CSV text, matching the
//!   formats of the `mvplab` command-line tool.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use mvplab::bounds::{upper_bound_value, BoundInputs, BoundMode, VarMaxCSource};
use mvplab::envs::{make_chain, make_lower_bound_instance, make_random_mdp, LowerBoundSpec};
use mvplab::harness::{run_experiment, DiagnosticsFlags, ExperimentParams};
use mvplab::learner::BonusConstants;
use mvplab::mdp::TabularMdp;
use mvplab::solver::{
    optimal_values, policy_count, variance_profile, OptimalSolution, VarianceProfile,
};

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvplabStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// JSON could not be parsed.
    ParseError = 3,
    /// Structural validation failed (invalid MDP or generator spec).
    ValidationError = 4,
    /// A domain precondition failed (no gaps, bad parameters, ...).
    DomainError = 5,
    /// A policy enumeration exceeded its cap.
    TooLarge = 6,
}

/// Opaque MDP handle.
pub struct MvplabMdp {
    inner: TabularMdp,
}

/// Opaque solved-instance handle: the MDP together with its optimal solution
/// and variance profile.
pub struct MvplabSolved {
    mdp: TabularMdp,
    solution: OptimalSolution,
    variance: VarianceProfile,
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, MvplabStatus> {
    if ptr.is_null() {
        set_error("NULL string argument");
        return Err(MvplabStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        MvplabStatus::InvalidUtf8
    })
}

fn give_string(text: String, out: *mut *mut c_char) -> MvplabStatus {
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            MvplabStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL byte");
            MvplabStatus::DomainError
        }
    }
}

macro_rules! require {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_error(concat!("NULL argument: ", stringify!($ptr)));
            return MvplabStatus::NullArgument;
        }
    };
}

/// Returns a copy of the last error message recorded on this thread, or NULL
/// when none exists. Release it with [`mvplab_string_free`].
#[no_mangle]
pub extern "C" fn mvplab_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        if msg.is_empty() {
            std::ptr::null_mut()
        } else {
            CString::new(msg.clone())
                .map(CString::into_raw)
                .unwrap_or(std::ptr::null_mut())
        }
    })
}

/// Releases a string previously returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from an mvplab function that hands
/// ownership to the caller, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvplab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses an MDP from its JSON form and validates it.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_mdp_from_json(
    json: *const c_char,
    out: *mut *mut MvplabMdp,
) -> MvplabStatus {
    require!(out);
    let text = match unsafe { cstr_arg(json) } {
        Ok(t) => t,
        Err(status) => return status,
    };
    let mdp: TabularMdp = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => {
            set_error(format!("cannot parse MDP JSON: {e}"));
            return MvplabStatus::ParseError;
        }
    };
    let violations = mdp.validate();
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        set_error(lines.join("; "));
        return MvplabStatus::ValidationError;
    }
    unsafe { *out = Box::into_raw(Box::new(MvplabMdp { inner: mdp })) };
    MvplabStatus::Ok
}

/// Serializes an MDP to pretty JSON.
///
/// # Safety
/// `mdp` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_mdp_to_json(
    mdp: *const MvplabMdp,
    out: *mut *mut c_char,
) -> MvplabStatus {
    require!(mdp);
    require!(out);
    let mdp = unsafe { &*mdp };
    give_string(mdp.inner.to_json_pretty(), out)
}

/// Builds the single-state chain fixture.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_mdp_chain(
    horizon: usize,
    out: *mut *mut MvplabMdp,
) -> MvplabStatus {
    require!(out);
    if horizon == 0 {
        set_error("chain horizon must be positive");
        return MvplabStatus::ValidationError;
    }
    unsafe {
        *out = Box::into_raw(Box::new(MvplabMdp {
            inner: make_chain(horizon),
        }))
    };
    MvplabStatus::Ok
}

/// Builds a random sparse instance.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_mdp_random(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    sparsity: f64,
    seed: u64,
    out: *mut *mut MvplabMdp,
) -> MvplabStatus {
    require!(out);
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        set_error("S, A, H must all be positive");
        return MvplabStatus::ValidationError;
    }
    let mdp = make_random_mdp(num_states, num_actions, horizon, sparsity, seed);
    unsafe { *out = Box::into_raw(Box::new(MvplabMdp { inner: mdp })) };
    MvplabStatus::Ok
}

/// Builds a lower-bound family instance from `gaps` (length
/// `bandit_states·num_actions·horizon`) and, when `out_meta_json` is not
/// NULL, also returns the sidecar construction data (sigma, p_table,
/// d_table) as JSON.
///
/// # Safety
/// `gaps` must point to `gaps_len` readable doubles; `out_mdp` must be a
/// valid pointer; `out_meta_json` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mvplab_mdp_lower_bound(
    bandit_states: usize,
    num_actions: usize,
    horizon: usize,
    target_variance: f64,
    gaps: *const f64,
    gaps_len: usize,
    out_mdp: *mut *mut MvplabMdp,
    out_meta_json: *mut *mut c_char,
) -> MvplabStatus {
    require!(out_mdp);
    if gaps.is_null() && gaps_len > 0 {
        set_error("NULL gaps pointer with nonzero length");
        return MvplabStatus::NullArgument;
    }
    let gaps = if gaps_len == 0 {
        Vec::new()
    } else {
        unsafe { std::slice::from_raw_parts(gaps, gaps_len) }.to_vec()
    };
    let spec = LowerBoundSpec {
        bandit_states,
        num_actions,
        horizon,
        target_variance,
        gaps,
    };
    match make_lower_bound_instance(&spec) {
        Ok((mdp, meta)) => {
            if !out_meta_json.is_null() {
                let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
                let status = give_string(text, out_meta_json);
                if status != MvplabStatus::Ok {
                    return status;
                }
            }
            unsafe { *out_mdp = Box::into_raw(Box::new(MvplabMdp { inner: mdp })) };
            MvplabStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            MvplabStatus::ValidationError
        }
    }
}

/// Writes the validation report (a JSON array of violations) and the number
/// of violations found; a valid MDP yields `[]` and 0.
///
/// # Safety
/// `mdp` must be a live handle; out-pointers may be NULL to skip them.
#[no_mangle]
pub unsafe extern "C" fn mvplab_mdp_validate(
    mdp: *const MvplabMdp,
    out_report_json: *mut *mut c_char,
    out_violation_count: *mut usize,
) -> MvplabStatus {
    require!(mdp);
    let violations = unsafe { &*mdp }.inner.validate();
    if !out_violation_count.is_null() {
        unsafe { *out_violation_count = violations.len() };
    }
    if !out_report_json.is_null() {
        let text = serde_json::to_string_pretty(&violations).expect("report serializes");
        return give_string(text, out_report_json);
    }
    MvplabStatus::Ok
}

/// Releases an MDP handle.
///
/// # Safety
/// `mdp` must be NULL or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvplab_mdp_free(mdp: *mut MvplabMdp) {
    if !mdp.is_null() {
        drop(unsafe { Box::from_raw(mdp) });
    }
}

/// Solves an MDP exactly. The conditional-variance enumeration oracle runs
/// only when `attempt_exact` is set and the policy count fits under
/// `enum_cap`.
///
/// # Safety
/// `mdp` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_solve(
    mdp: *const MvplabMdp,
    enum_cap: u64,
    attempt_exact: bool,
    out: *mut *mut MvplabSolved,
) -> MvplabStatus {
    require!(mdp);
    require!(out);
    let mdp = &unsafe { &*mdp }.inner;
    let violations = mdp.validate();
    if !violations.is_empty() {
        set_error(format!("{} validation violations", violations.len()));
        return MvplabStatus::ValidationError;
    }
    let solution = optimal_values(mdp);
    let exact_cap = if attempt_exact && policy_count(mdp) <= enum_cap as f64 {
        Some(enum_cap)
    } else {
        None
    };
    let variance = variance_profile(mdp, &solution, exact_cap);
    let solved = MvplabSolved {
        mdp: mdp.clone(),
        solution,
        variance,
    };
    unsafe { *out = Box::into_raw(Box::new(solved)) };
    MvplabStatus::Ok
}

/// Optimal initial value of a solved instance.
///
/// # Safety
/// `solved` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_solved_v0_star(
    solved: *const MvplabSolved,
    out: *mut f64,
) -> MvplabStatus {
    require!(solved);
    require!(out);
    unsafe { *out = (*solved).solution.v0_star };
    MvplabStatus::Ok
}

/// Serializes the full solve report (solution + variance profile), matching
/// the `mvplab solve` output format.
///
/// # Safety
/// `solved` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_solved_report_json(
    solved: *const MvplabSolved,
    out: *mut *mut c_char,
) -> MvplabStatus {
    require!(solved);
    require!(out);
    let solved = unsafe { &*solved };
    let report = serde_json::json!({
        "horizon": solved.mdp.horizon,
        "num_states": solved.mdp.num_states,
        "num_actions": solved.mdp.num_actions,
        "solution": solved.solution,
        "variance": solved.variance,
    });
    give_string(
        serde_json::to_string_pretty(&report).expect("report serializes"),
        out,
    )
}

/// Releases a solved-instance handle.
///
/// # Safety
/// `solved` must be NULL or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvplab_solved_free(solved: *mut MvplabSolved) {
    if !solved.is_null() {
        drop(unsafe { Box::from_raw(solved) });
    }
}

/// Runs one seeded MVP experiment and returns the per-episode trace as CSV
/// (header `k,instant_regret,cum_regret,opt_violations,min_q_slack,
/// max_surplus`).
///
/// # Safety
/// `solved` must be a live handle; `out_csv` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_run_experiment(
    solved: *const MvplabSolved,
    episodes: u64,
    delta: f64,
    seed: u64,
    out_csv: *mut *mut c_char,
) -> MvplabStatus {
    require!(solved);
    require!(out_csv);
    let solved = unsafe { &*solved };
    let params = ExperimentParams {
        episodes,
        delta,
        seed,
        constants: BonusConstants::default(),
        diagnostics: DiagnosticsFlags::default(),
        env_id: "ffi".to_string(),
    };
    match run_experiment(&solved.mdp, &solved.solution, &params) {
        Ok(trace) => {
            let mut buf = Vec::new();
            trace
                .write_csv(&mut buf)
                .expect("in-memory write cannot fail");
            let text = String::from_utf8(buf).expect("CSV is ASCII");
            give_string(text, out_csv)
        }
        Err(e) => {
            set_error(e.to_string());
            MvplabStatus::DomainError
        }
    }
}

/// Evaluates the constant-free lower-bound envelope `Σ (L/Δ)·log K` over the
/// positive entries of `gaps`.
///
/// # Safety
/// `gaps` must point to `gaps_len` readable doubles; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_lower_bound_value(
    gaps: *const f64,
    gaps_len: usize,
    target_variance: f64,
    episodes: f64,
    out: *mut f64,
) -> MvplabStatus {
    require!(out);
    if gaps.is_null() {
        set_error("NULL gaps pointer");
        return MvplabStatus::NullArgument;
    }
    let gaps = unsafe { std::slice::from_raw_parts(gaps, gaps_len) };
    match mvplab::bounds::lower_bound_value(gaps, target_variance, episodes) {
        Ok(v) => {
            unsafe { *out = v };
            MvplabStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            MvplabStatus::DomainError
        }
    }
}

/// Evaluates the four-term regret upper bound for a solved instance and
/// returns the breakdown as JSON. `full_constants` selects the stated
/// prefactors instead of the constant-free leading form; `use_exact_var_max_c`
/// requires the enumeration oracle to have run during `mvplab_solve`.
///
/// # Safety
/// `solved` must be a live handle; `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvplab_upper_bound(
    solved: *const MvplabSolved,
    episodes: u64,
    delta: f64,
    full_constants: bool,
    use_exact_var_max_c: bool,
    out_json: *mut *mut c_char,
) -> MvplabStatus {
    require!(solved);
    require!(out_json);
    let solved = unsafe { &*solved };
    let (var_max_c, source) = if use_exact_var_max_c {
        match solved.variance.var_max_c_exact {
            Some(v) => (v, VarMaxCSource::Exact),
            None => {
                set_error("exact conditional variance was not computed for this instance");
                return MvplabStatus::TooLarge;
            }
        }
    } else {
        (solved.variance.var_max_c_future, VarMaxCSource::FutureDp)
    };
    let inputs = match BoundInputs::from_solution(
        &solved.solution,
        solved.mdp.horizon,
        solved.mdp.num_states,
        solved.mdp.num_actions,
        episodes,
        delta,
        var_max_c,
        source,
    ) {
        Ok(i) => i,
        Err(e) => {
            set_error(e.to_string());
            return MvplabStatus::DomainError;
        }
    };
    let mode = if full_constants {
        BoundMode::FullConstants
    } else {
        BoundMode::Leading
    };
    let value = upper_bound_value(&inputs, mode);
    let report = serde_json::json!({
        "mode": mode,
        "var_max_c_source": source,
        "var_max_c": var_max_c,
        "w_bar": inputs.w_bar(),
        "iota": inputs.iota(),
        "upper": value,
    });
    give_string(
        serde_json::to_string_pretty(&report).expect("report serializes"),
        out_json,
    )
}
