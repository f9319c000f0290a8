//! C interface to the ermdp solver library.
//!
//! The API follows the usual handle convention: constructors return an opaque
//! pointer through an out-parameter and a status code, accessors read through
//! `*const` handles, and every handle has exactly one matching `_free`
//! function. All fallible calls return [`ErmdpStatus`]; on anything other
//! than `Ok` a human-readable message is stored per thread and can be read
//! with [`ermdp_last_error_message`] until the next failing call on the same
//! thread.
//!
//! The matching header `include/ermdp.h` is generated by cbindgen from this
//! file at build time and committed. Pointers crossing the boundary are
//! trusted: a null handle is reported as an invalid argument where a status
//! can be returned, but a dangling or foreign pointer is undefined behavior,
//! exactly as in any C library. Panics never unwind across the boundary; they
//! are caught and reported as `Internal`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ermdp::{
    compute_oracle, generate_random_mdp, run_solver, Error, MdpModel, OracleSolution, SolverConfig,
    SolverTrace, Variant,
};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErmdpStatus {
    Ok = 0,
    /// A pointer was null, a dimension did not match, or a numeric setting
    /// was outside its documented range.
    InvalidArgument = 1,
    /// The iteration budget ran out before the tolerance was met.
    NonConvergence = 2,
    /// An iterate left the representable range (step size too large).
    NumericalDivergence = 3,
    /// File or serialization failure.
    Io = 4,
    /// Internal invariant violation; report these.
    Internal = 5,
}

/// Solver family selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErmdpVariant {
    /// Diagonal-metric ascent-descent (NGAD).
    Ngad = 0,
    /// Interpolating-metric variant (INGAD); uses the `c` option.
    Ingad = 1,
}

/// Plain-data mirror of the solver configuration.
///
/// Obtain defaults from [`ermdp_solver_options_default`] and override fields
/// as needed. `eps_tol` of zero disables the convergence test so the run
/// always uses the full budget.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ErmdpSolverOptions {
    pub alpha: f64,
    pub tau: f64,
    pub eta: f64,
    /// Interpolation weight in [0, 1); only read by the INGAD variant.
    pub c: f64,
    pub eps_tol: f64,
    pub max_iter: usize,
    pub record_every: usize,
}

/// Opaque finite MDP model handle.
pub struct ErmdpMdp {
    inner: MdpModel,
}

/// Opaque ground-truth solution handle (optimal value, policy, and duals).
pub struct ErmdpOracle {
    inner: OracleSolution,
}

/// Opaque solver run handle: final iterate plus the recorded trace.
pub struct ErmdpTrace {
    inner: SolverTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> ErmdpStatus {
    match err {
        Error::MaxIterExceeded { .. } => ErmdpStatus::NonConvergence,
        Error::NonFiniteState { .. } => ErmdpStatus::NumericalDivergence,
        Error::Io(_) | Error::Json(_) => ErmdpStatus::Io,
        Error::SolveFailure(_) => ErmdpStatus::Internal,
        _ => ErmdpStatus::InvalidArgument,
    }
}

fn fail(status: ErmdpStatus, msg: &str) -> ErmdpStatus {
    set_last_error(msg);
    status
}

fn fail_err(err: &Error) -> ErmdpStatus {
    fail(status_of(err), &err.to_string())
}

/// Runs `body`, converting both errors and panics into status codes.
fn guarded<F: FnOnce() -> ermdp::Result<ErmdpStatus>>(body: F) -> ErmdpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => fail_err(&err),
        Err(_) => fail(ErmdpStatus::Internal, "panic inside the library"),
    }
}

/// Converts a C path, rejecting null and non-UTF-8.
unsafe fn path_arg(path: *const c_char) -> ermdp::Result<PathBuf> {
    if path.is_null() {
        return Err(Error::InvalidConfig("path is null".into()));
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(Error::InvalidConfig("path is not valid UTF-8".into())),
    }
}

/// Copies `src` (logical order) into the caller buffer after a length check.
unsafe fn copy_out<'a, I>(src: I, expect: usize, out: *mut f64, len: usize) -> ermdp::Result<()>
where
    I: IntoIterator<Item = &'a f64>,
{
    if out.is_null() {
        return Err(Error::InvalidConfig("output buffer is null".into()));
    }
    if len != expect {
        return Err(Error::DimensionMismatch(format!(
            "buffer length {len}, need {expect}"
        )));
    }
    let dst = std::slice::from_raw_parts_mut(out, len);
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *s;
    }
    Ok(())
}

/// Message for the most recent failure on this thread.
///
/// Empty string if nothing failed yet. The pointer stays valid until the next
/// failing call on the same thread.
///
/// # Safety
/// The returned pointer must not be freed or used after a later failing call
/// on this thread.
#[no_mangle]
pub unsafe extern "C" fn ermdp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a random instance: `support_size` uniformly drawn successor states
/// per state-action pair with Dirichlet-like weights, rewards uniform in
/// [0, 1], reproducible in `seed`.
///
/// # Safety
/// `out` must be a valid pointer to a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn ermdp_mdp_random(
    num_states: usize,
    num_actions: usize,
    support_size: usize,
    discount: f64,
    seed: u64,
    out: *mut *mut ErmdpMdp,
) -> ErmdpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(Error::InvalidConfig("out pointer is null".into()));
        }
        let model = generate_random_mdp(num_states, num_actions, support_size, discount, seed)?;
        *out = Box::into_raw(Box::new(ErmdpMdp { inner: model }));
        Ok(ErmdpStatus::Ok)
    })
}

/// Loads a model from the JSON layout used by the CLI.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ermdp_mdp_load_json(
    path: *const c_char,
    out: *mut *mut ErmdpMdp,
) -> ErmdpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(Error::InvalidConfig("out pointer is null".into()));
        }
        let model = MdpModel::load_json(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(ErmdpMdp { inner: model }));
        Ok(ErmdpStatus::Ok)
    })
}

/// Writes the model to `path` in the CLI JSON layout.
///
/// # Safety
/// `mdp` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ermdp_mdp_save_json(
    mdp: *const ErmdpMdp,
    path: *const c_char,
) -> ErmdpStatus {
    guarded(|| {
        let mdp = mdp
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("mdp handle is null".into()))?;
        mdp.inner.save_json(path_arg(path)?)?;
        Ok(ErmdpStatus::Ok)
    })
}

/// Number of states; 0 on a null handle.
///
/// # Safety
/// `mdp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ermdp_mdp_num_states(mdp: *const ErmdpMdp) -> usize {
    mdp.as_ref().map_or(0, |m| m.inner.num_states())
}

/// Number of actions; 0 on a null handle.
///
/// # Safety
/// `mdp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ermdp_mdp_num_actions(mdp: *const ErmdpMdp) -> usize {
    mdp.as_ref().map_or(0, |m| m.inner.num_actions())
}

/// Discount factor; NaN on a null handle.
///
/// # Safety
/// `mdp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ermdp_mdp_discount(mdp: *const ErmdpMdp) -> f64 {
    mdp.as_ref().map_or(f64::NAN, |m| m.inner.discount())
}

/// Releases a model handle; null is a no-op.
///
/// # Safety
/// `mdp` must be null or a pointer obtained from a constructor here, freed at
/// most once.
#[no_mangle]
pub unsafe extern "C" fn ermdp_mdp_free(mdp: *mut ErmdpMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// Computes ground truth by soft value iteration at temperature `tau`, then
/// backs out the duals for curvature `alpha`. `tol <= 0` selects the library
/// default tolerance.
///
/// # Safety
/// `mdp` must be a live handle and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ermdp_oracle_compute(
    mdp: *const ErmdpMdp,
    tau: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
    out: *mut *mut ErmdpOracle,
) -> ErmdpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(Error::InvalidConfig("out pointer is null".into()));
        }
        let mdp = mdp
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("mdp handle is null".into()))?;
        let tol = if tol > 0.0 { Some(tol) } else { None };
        let sol = compute_oracle(&mdp.inner, tau, alpha, None, tol, max_iter)?;
        *out = Box::into_raw(Box::new(ErmdpOracle { inner: sol }));
        Ok(ErmdpStatus::Ok)
    })
}

/// Copies the optimal value function into `out` (`len` must equal the state
/// count).
///
/// # Safety
/// `oracle` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ermdp_oracle_value(
    oracle: *const ErmdpOracle,
    out: *mut f64,
    len: usize,
) -> ErmdpStatus {
    guarded(|| {
        let oracle = oracle
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("oracle handle is null".into()))?;
        let v = &oracle.inner.v_star;
        copy_out(v.iter(), v.len(), out, len)?;
        Ok(ErmdpStatus::Ok)
    })
}

/// Copies the optimal policy into `out`, row-major over [states][actions]
/// (`len` must equal states * actions).
///
/// # Safety
/// `oracle` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ermdp_oracle_policy(
    oracle: *const ErmdpOracle,
    out: *mut f64,
    len: usize,
) -> ErmdpStatus {
    guarded(|| {
        let oracle = oracle
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("oracle handle is null".into()))?;
        let m = oracle.inner.pi_star.matrix();
        copy_out(m.iter(), m.len(), out, len)?;
        Ok(ErmdpStatus::Ok)
    })
}

/// Releases an oracle handle; null is a no-op.
///
/// # Safety
/// `oracle` must be null or a pointer from [`ermdp_oracle_compute`], freed at
/// most once.
#[no_mangle]
pub unsafe extern "C" fn ermdp_oracle_free(oracle: *mut ErmdpOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}

/// Library-default solver options.
#[no_mangle]
pub extern "C" fn ermdp_solver_options_default() -> ErmdpSolverOptions {
    let d = SolverConfig::default();
    ErmdpSolverOptions {
        alpha: d.alpha,
        tau: d.tau,
        eta: d.eta,
        c: d.c,
        eps_tol: d.eps_tol,
        max_iter: d.max_iter,
        record_every: d.record_every,
    }
}

/// Runs the selected dynamics from the zero initialization.
///
/// Passing an oracle handle enables the per-record diagnostics (Lyapunov
/// value and errors against ground truth) in the trace; passing null skips
/// them. A positive `eps_tol` demands convergence: if the budget ends first
/// the call fails with `NonConvergence`. With `eps_tol` of zero the full
/// budget always runs and the call succeeds. On `NonConvergence` and
/// `NumericalDivergence` no trace is returned.
///
/// # Safety
/// `mdp` must be a live handle, `options` a valid pointer, `oracle` null or a
/// live handle, and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ermdp_solve(
    mdp: *const ErmdpMdp,
    variant: ErmdpVariant,
    options: *const ErmdpSolverOptions,
    oracle: *const ErmdpOracle,
    out: *mut *mut ErmdpTrace,
) -> ErmdpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(Error::InvalidConfig("out pointer is null".into()));
        }
        let mdp = mdp
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("mdp handle is null".into()))?;
        let opts = options
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("options pointer is null".into()))?;
        let config = SolverConfig {
            alpha: opts.alpha,
            tau: opts.tau,
            eta: opts.eta,
            c: opts.c,
            eps_tol: opts.eps_tol,
            max_iter: opts.max_iter,
            record_every: opts.record_every,
            ..SolverConfig::default()
        };
        let variant = match variant {
            ErmdpVariant::Ngad => Variant::Ngad,
            ErmdpVariant::Ingad => Variant::Ingad,
        };
        let trace = run_solver(
            &mdp.inner,
            variant,
            &config,
            None,
            oracle.as_ref().map(|o| &o.inner),
        )?;
        if config.eps_tol > 0.0 && !trace.converged {
            return Err(Error::MaxIterExceeded {
                max_iter: config.max_iter,
                residual: trace.final_q,
            });
        }
        *out = Box::into_raw(Box::new(ErmdpTrace { inner: trace }));
        Ok(ErmdpStatus::Ok)
    })
}

/// Iterations actually run; 0 on a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ermdp_trace_iterations(trace: *const ErmdpTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.iterations)
}

/// Whether the tolerance was met within the budget; false on a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ermdp_trace_converged(trace: *const ErmdpTrace) -> bool {
    trace.as_ref().is_some_and(|t| t.inner.converged)
}

/// Relative change of the final iteration; NaN on a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ermdp_trace_final_change(trace: *const ErmdpTrace) -> f64 {
    trace.as_ref().map_or(f64::NAN, |t| t.inner.final_q)
}

/// Copies the final value iterate into `out` (`len` must equal the state
/// count).
///
/// # Safety
/// `trace` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ermdp_trace_value(
    trace: *const ErmdpTrace,
    out: *mut f64,
    len: usize,
) -> ErmdpStatus {
    guarded(|| {
        let trace = trace
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("trace handle is null".into()))?;
        let v = &trace.inner.final_state.v;
        copy_out(v.iter(), v.len(), out, len)?;
        Ok(ErmdpStatus::Ok)
    })
}

/// Copies the final policy into `out`, row-major over [states][actions]
/// (`len` must equal states * actions).
///
/// # Safety
/// `trace` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ermdp_trace_policy(
    trace: *const ErmdpTrace,
    out: *mut f64,
    len: usize,
) -> ErmdpStatus {
    guarded(|| {
        let trace = trace
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("trace handle is null".into()))?;
        let pi = trace.inner.final_state.policy()?;
        let m = pi.matrix();
        copy_out(m.iter(), m.len(), out, len)?;
        Ok(ErmdpStatus::Ok)
    })
}

/// Writes the recorded trace as CSV to `path` (same layout as the CLI).
///
/// # Safety
/// `trace` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ermdp_trace_write_csv(
    trace: *const ErmdpTrace,
    path: *const c_char,
) -> ErmdpStatus {
    guarded(|| {
        let trace = trace
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("trace handle is null".into()))?;
        trace.inner.write_csv(path_arg(path)?)?;
        Ok(ErmdpStatus::Ok)
    })
}

/// Releases a trace handle; null is a no-op.
///
/// # Safety
/// `trace` must be null or a pointer from [`ermdp_solve`], freed at most
/// once.
#[no_mangle]
pub unsafe extern "C" fn ermdp_trace_free(trace: *mut ErmdpTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
