//! Discrete natural-gradient ascent-descent dynamics on the quadratic
//! saddle objective.
//!
//! Both variants iterate on (v, theta) with u = exp(theta), which keeps the
//! dual positive by construction. One step:
//!
//! ```text
//! v+     = (1 - eta) v + (eta/alpha) K^T exp(theta)
//! d_sa   = theta_sa - log sum_a' exp(theta_sa') - (r_sa - (K_a v+)_s)/tau
//! theta+ = theta - eta (I - c 1 pi^T) d        (per state row)
//! ```
//!
//! with pi the softmax of the current theta row. The theta update sees the
//! already-updated v+ (Gauss-Seidel order). c = 0 is the plain diagonal
//! metric (NGAD); c in (0, 1) adds the rank-one interpolating correction
//! (INGAD), which buys a step size roughly 1/(1-c) larger. NGAD runs through
//! the same code path as INGAD with c = 0, so the reduction is exact to the
//! bit.
//!
//! The loop stops when the relative Euclidean change
//! q = max(||v+ - v||/||v||, ||u+ - u||/||u||) drops to `eps_tol`, aborts
//! with [`Error::NonFiniteState`] when exp overflows (step size too large),
//! and returns a partial trace with `converged = false` at `max_iter`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::{DualVariable, MdpModel, Policy, ValueFunction};
use crate::objective;
use crate::oracle::OracleSolution;

/// Which dynamics to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ngad,
    Ingad,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Ngad => write!(f, "ngad"),
            Variant::Ingad => write!(f, "ingad"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "ngad" => Ok(Variant::Ngad),
            "ingad" => Ok(Variant::Ingad),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

/// Which oracle-relative quantities to compute at recorded iterations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiagnosticsFlags {
    pub lyapunov: bool,
    pub policy_error: bool,
    pub value_error: bool,
    pub fo_residual: bool,
}

impl Default for DiagnosticsFlags {
    fn default() -> Self {
        DiagnosticsFlags {
            lyapunov: true,
            policy_error: true,
            value_error: true,
            fo_residual: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub tau: f64,
    pub eta: f64,
    /// Interpolation weight in [0, 1); used by INGAD only.
    pub c: f64,
    pub eps_tol: f64,
    pub max_iter: usize,
    /// Diagnostics cadence: iterations 1, multiples of this, and the final
    /// iteration land in the trace.
    pub record_every: usize,
    #[serde(default)]
    pub diagnostics: DiagnosticsFlags,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.1,
            tau: 0.01,
            eta: 1e-3,
            c: 0.0,
            eps_tol: 1e-5,
            max_iter: 100_000,
            record_every: 10,
            diagnostics: DiagnosticsFlags::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} must be positive",
                self.alpha
            )));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::NonPositiveTau(self.tau));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eta = {} must be positive",
                self.eta
            )));
        }
        if !(0.0..1.0).contains(&self.c) {
            return Err(Error::COutOfRange(self.c));
        }
        // eps_tol = 0 disables early stopping (fixed-budget runs).
        if !(self.eps_tol >= 0.0) || !self.eps_tol.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eps_tol = {} must be nonnegative",
                self.eps_tol
            )));
        }
        if self.max_iter == 0 || self.record_every == 0 {
            return Err(Error::InvalidConfig(
                "max_iter and record_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Primal-dual iterate; the dual lives in log coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub v: ValueFunction,
    pub theta: Array2<f64>,
}

impl SolverState {
    /// Default initialization: v = 0, theta = 0 (u = all-ones).
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        SolverState {
            v: Array1::zeros(num_states),
            theta: Array2::zeros((num_states, num_actions)),
        }
    }

    /// u = exp(theta).
    pub fn dual(&self) -> DualVariable {
        self.theta.mapv(f64::exp)
    }

    /// Softmax of each theta row (the policy the iterate induces).
    pub fn policy(&self) -> Result<Policy> {
        let (s_n, a_n) = (self.theta.nrows(), self.theta.ncols());
        let mut pi = Array2::zeros((s_n, a_n));
        for s in 0..s_n {
            let row = self.theta.row(s);
            let m = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let mut sum = 0.0;
            for a in 0..a_n {
                let e = (row[a] - m).exp();
                pi[[s, a]] = e;
                sum += e;
            }
            for a in 0..a_n {
                pi[[s, a]] /= sum;
            }
        }
        Policy::new(pi)
    }
}

/// One recorded point of a run.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub q: f64,
    pub lyapunov: Option<f64>,
    pub policy_error: Option<f64>,
    pub value_error: Option<f64>,
    pub fo_residual: Option<f64>,
}

/// Full account of a run: recorded diagnostics plus the final iterate.
#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub variant: Variant,
    pub config: SolverConfig,
    pub records: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub final_q: f64,
    pub final_state: SolverState,
    /// Free-form reproducibility metadata (seeds, instance description);
    /// serialized into the sidecar.
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// 17 significant digits: enough to round-trip any f64 exactly.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write-then-rename so a crash mid-write never leaves a truncated file
/// under the final name.
pub fn write_atomic<P: AsRef<Path>>(path: P, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

impl SolverTrace {
    /// CSV schema: `iter,q,lyapunov,policy_error,value_error,fo_residual`,
    /// floats at 17 significant digits, disabled diagnostics left empty.
    pub fn csv_string(&self) -> String {
        let mut out = String::from("iter,q,lyapunov,policy_error,value_error,fo_residual\n");
        let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iter,
                fmt17(r.q),
                opt(r.lyapunov),
                opt(r.policy_error),
                opt(r.value_error),
                opt(r.fo_residual)
            ));
        }
        out
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_atomic(path, self.csv_string().as_bytes())
    }

    /// JSON sidecar with the config and seeds that produced the CSV.
    pub fn sidecar_json_string(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            variant: String,
            config: &'a SolverConfig,
            iterations: usize,
            converged: bool,
            final_q: f64,
            metadata: &'a BTreeMap<String, serde_json::Value>,
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            variant: self.variant.to_string(),
            config: &self.config,
            iterations: self.iterations,
            converged: self.converged,
            final_q: self.final_q,
            metadata: &self.metadata,
        })?)
    }

    pub fn write_sidecar<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_atomic(path, self.sidecar_json_string()?.as_bytes())
    }

    /// Fraction of consecutive recorded Lyapunov pairs that do not increase
    /// (relative slack 1e-8). None when fewer than two values were recorded.
    pub fn monotone_fraction(&self) -> Option<f64> {
        let vals: Vec<f64> = self.records.iter().filter_map(|r| r.lyapunov).collect();
        if vals.len() < 2 {
            return None;
        }
        let ok = vals
            .windows(2)
            .filter(|w| w[1] <= w[0] * (1.0 + 1e-8) + f64::MIN_POSITIVE)
            .count();
        Some(ok as f64 / (vals.len() - 1) as f64)
    }
}

/// Relative Euclidean change between iterate pairs:
/// max(||v+ - v||/||v||, ||u+ - u||/||u||).
pub fn convergence_metric(
    prev: (&ValueFunction, &DualVariable),
    next: (&ValueFunction, &DualVariable),
) -> Result<f64> {
    if prev.0.len() != next.0.len() || prev.1.dim() != next.1.dim() {
        return Err(Error::DimensionMismatch(
            "convergence metric iterate shapes".into(),
        ));
    }
    let nv = l2(prev.0.iter().copied());
    let nu = l2(prev.1.iter().copied());
    if nv == 0.0 || nu == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let dv = l2(prev.0.iter().zip(next.0.iter()).map(|(&a, &b)| b - a));
    let du = l2(prev.1.iter().zip(next.1.iter()).map(|(&a, &b)| b - a));
    Ok((dv / nv).max(du / nu))
}

fn l2<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    xs.into_iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative change with the run loop's zero-norm convention: a zero
/// reference gives +inf (never converged on that coordinate block) unless
/// the step is also zero.
fn rel_change(delta: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        delta / reference
    } else if delta == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// The linear operator a step needs: K^T aggregation and per-action K.
/// Implemented by exact models and by sampled estimates.
pub(crate) trait KOperator {
    fn kt_apply(&self, u: &Array2<f64>) -> Array1<f64>;
    fn k_apply(&self, v: &Array1<f64>) -> Array2<f64>;
}

impl KOperator for MdpModel {
    fn kt_apply(&self, u: &Array2<f64>) -> Array1<f64> {
        self.apply_k_transpose(u).expect("shape checked by caller")
    }
    fn k_apply(&self, v: &Array1<f64>) -> Array2<f64> {
        self.apply_k(v).expect("shape checked by caller")
    }
}

/// Shared step kernel. `u` must be exp(state.theta); returns the new state
/// and its dual. Finiteness is the caller's check (it knows the iteration).
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_core(
    k: &dyn KOperator,
    reward: &Array2<f64>,
    alpha: f64,
    tau: f64,
    eta: f64,
    c: f64,
    state: &SolverState,
    u: &DualVariable,
) -> (SolverState, DualVariable) {
    let (s_n, a_n) = (state.theta.nrows(), state.theta.ncols());
    let ktu = k.kt_apply(u);
    let mut v_new = Array1::zeros(s_n);
    for s in 0..s_n {
        v_new[s] = (1.0 - eta) * state.v[s] + (eta / alpha) * ktu[s];
    }
    let kv = k.k_apply(&v_new);

    let theta = state.theta.as_slice().expect("contiguous theta");
    let r = reward.as_slice().expect("contiguous reward");
    let kv_s = kv.as_slice().expect("contiguous kv");
    let mut theta_new = Array2::zeros((s_n, a_n));
    let tn = theta_new.as_slice_mut().expect("contiguous theta_new");
    let mut scratch = vec![0.0f64; a_n];
    for s in 0..s_n {
        let row = &theta[s * a_n..(s + 1) * a_n];
        let m = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut se = 0.0;
        for a in 0..a_n {
            let e = (row[a] - m).exp();
            scratch[a] = e;
            se += e;
        }
        let lse = m + se.ln();
        let base = s * a_n;
        if c > 0.0 {
            // Rank-one projector through the softmax row: subtract
            // c <pi, d> from every component of d.
            let mut proj = 0.0;
            for a in 0..a_n {
                let d = row[a] - lse - (r[base + a] - kv_s[base + a]) / tau;
                proj += (scratch[a] / se) * d;
            }
            let shift = c * proj;
            for a in 0..a_n {
                let d = row[a] - lse - (r[base + a] - kv_s[base + a]) / tau;
                tn[base + a] = row[a] - eta * (d - shift);
            }
        } else {
            for a in 0..a_n {
                let d = row[a] - lse - (r[base + a] - kv_s[base + a]) / tau;
                tn[base + a] = row[a] - eta * d;
            }
        }
    }
    let u_new = theta_new.mapv(f64::exp);
    (
        SolverState {
            v: v_new,
            theta: theta_new,
        },
        u_new,
    )
}

fn all_finite<'a, I: IntoIterator<Item = &'a f64>>(xs: I) -> bool {
    xs.into_iter().all(|x| x.is_finite())
}

fn single_step(
    mdp: &MdpModel,
    config: &SolverConfig,
    state: &SolverState,
    c: f64,
) -> Result<SolverState> {
    config.validate()?;
    if state.v.len() != mdp.num_states()
        || state.theta.dim() != (mdp.num_states(), mdp.num_actions())
    {
        return Err(Error::DimensionMismatch("state shape vs model".into()));
    }
    let u = state.dual();
    if !all_finite(u.iter()) {
        return Err(Error::NonFiniteState { iteration: 0 });
    }
    let (next, u_new) = step_core(
        mdp,
        mdp.reward(),
        config.alpha,
        config.tau,
        config.eta,
        c,
        state,
        &u,
    );
    if !all_finite(next.v.iter()) || !all_finite(u_new.iter()) {
        return Err(Error::NonFiniteState { iteration: 0 });
    }
    Ok(next)
}

/// One NGAD step (diagonal metric).
pub fn ngad_step(
    mdp: &MdpModel,
    config: &SolverConfig,
    state: &SolverState,
) -> Result<SolverState> {
    single_step(mdp, config, state, 0.0)
}

/// One INGAD step (interpolating metric with the config's c).
pub fn ingad_step(
    mdp: &MdpModel,
    config: &SolverConfig,
    state: &SolverState,
) -> Result<SolverState> {
    single_step(mdp, config, state, config.c)
}

/// Continuous-time NGAD vector field at (v, u):
/// dv = -(v - K^T u / alpha), du = -u (log(u/utilde) - (r - K v)/tau).
pub fn ngad_flow_rhs(
    mdp: &MdpModel,
    tau: f64,
    alpha: f64,
    v: &ValueFunction,
    u: &DualVariable,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let g = objective::grad_e(mdp, tau, alpha, v, u)?;
    // -(v - K^T u/alpha) = -grad_v/alpha; -u (log(u/ut) - (r-Kv)/tau) = u grad_u/tau.
    let rhs_v = g.grad_v.mapv(|x| -x / alpha);
    let mut rhs_u = Array2::zeros(u.dim());
    for s in 0..u.nrows() {
        for a in 0..u.ncols() {
            rhs_u[[s, a]] = u[[s, a]] * g.grad_u[[s, a]] / tau;
        }
    }
    Ok((rhs_v, rhs_u))
}

/// Continuous-time INGAD vector field: dv as NGAD, du per state is
/// -G_s (log(u/utilde) - (r - K v)/tau) with G_s the interpolating metric.
pub fn ingad_flow_rhs(
    mdp: &MdpModel,
    tau: f64,
    alpha: f64,
    c: f64,
    v: &ValueFunction,
    u: &DualVariable,
) -> Result<(Array1<f64>, Array2<f64>)> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::COutOfRange(c));
    }
    let g = objective::grad_e(mdp, tau, alpha, v, u)?;
    let rhs_v = g.grad_v.mapv(|x| -x / alpha);
    let mut rhs_u = Array2::zeros(u.dim());
    for s in 0..u.nrows() {
        let gs = objective::interpolating_preconditioner(u, c, s)?;
        for a in 0..u.ncols() {
            // du = -G (log(u/ut) - (r-Kv)/tau) = G grad_u/tau.
            let mut acc = 0.0;
            for b in 0..u.ncols() {
                acc += gs[[a, b]] * g.grad_u[[s, b]] / tau;
            }
            rhs_u[[s, a]] = acc;
        }
    }
    Ok((rhs_v, rhs_u))
}

/// Supplies the operator and reward a run sees at each iteration. Exact runs
/// return the model unchanged; stochastic runs refresh estimates or noise.
pub(crate) trait RunDriver {
    fn prepare(&mut self, iteration: usize) -> Result<()>;
    fn k(&self) -> &dyn KOperator;
    fn reward(&self) -> &Array2<f64>;
}

struct ExactDriver<'a> {
    mdp: &'a MdpModel,
}

impl RunDriver for ExactDriver<'_> {
    fn prepare(&mut self, _iteration: usize) -> Result<()> {
        Ok(())
    }
    fn k(&self) -> &dyn KOperator {
        self.mdp
    }
    fn reward(&self) -> &Array2<f64> {
        self.mdp.reward()
    }
}

/// Instrumented iteration loop shared by the exact and stochastic runners.
/// Diagnostics are always measured against the exact `mdp` and the clean
/// oracle, whatever the driver feeds the steps.
pub(crate) fn run_loop(
    driver: &mut dyn RunDriver,
    mdp: &MdpModel,
    variant: Variant,
    config: &SolverConfig,
    init: Option<SolverState>,
    oracle: Option<&OracleSolution>,
) -> Result<SolverTrace> {
    config.validate()?;
    let c = match variant {
        Variant::Ngad => 0.0,
        Variant::Ingad => config.c,
    };
    let mut state = init.unwrap_or_else(|| SolverState::zeros(mdp.num_states(), mdp.num_actions()));
    if state.v.len() != mdp.num_states()
        || state.theta.dim() != (mdp.num_states(), mdp.num_actions())
    {
        return Err(Error::DimensionMismatch("initial state shape".into()));
    }
    let mut u = state.dual();
    if !all_finite(u.iter()) {
        return Err(Error::NonFiniteState { iteration: 0 });
    }
    let mut records = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut q = f64::INFINITY;

    while iterations < config.max_iter {
        let iter = iterations + 1;
        driver.prepare(iter)?;
        let (next, u_next) = step_core(
            driver.k(),
            driver.reward(),
            config.alpha,
            config.tau,
            config.eta,
            c,
            &state,
            &u,
        );
        if !all_finite(next.v.iter()) || !all_finite(u_next.iter()) {
            return Err(Error::NonFiniteState { iteration: iter });
        }
        let dv = l2(state.v.iter().zip(next.v.iter()).map(|(&a, &b)| b - a));
        let du = l2(u.iter().zip(u_next.iter()).map(|(&a, &b)| b - a));
        q = rel_change(dv, l2(state.v.iter().copied())).max(rel_change(du, l2(u.iter().copied())));
        state = next;
        u = u_next;
        iterations = iter;
        converged = q <= config.eps_tol;
        let last = converged || iterations == config.max_iter;
        if iter == 1 || iter % config.record_every == 0 || last {
            records.push(make_record(
                mdp, variant, config, oracle, iter, q, &state, &u,
            ));
        }
        if converged {
            break;
        }
    }

    Ok(SolverTrace {
        variant,
        config: config.clone(),
        records,
        iterations,
        converged,
        final_q: q,
        final_state: state,
        metadata: BTreeMap::new(),
    })
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    mdp: &MdpModel,
    variant: Variant,
    config: &SolverConfig,
    oracle: Option<&OracleSolution>,
    iter: usize,
    q: f64,
    state: &SolverState,
    u: &DualVariable,
) -> IterationRecord {
    let flags = config.diagnostics;
    let mut rec = IterationRecord {
        iter,
        q,
        lyapunov: None,
        policy_error: None,
        value_error: None,
        fo_residual: None,
    };
    if let Some(sol) = oracle {
        if flags.lyapunov {
            rec.lyapunov = match variant {
                Variant::Ngad => {
                    objective::lyapunov_l(&state.v, u, sol, config.alpha, config.tau).ok()
                }
                Variant::Ingad => {
                    objective::lyapunov_lc(&state.v, u, sol, config.alpha, config.tau, config.c)
                        .ok()
                }
            };
        }
        if flags.policy_error {
            rec.policy_error = state
                .policy()
                .ok()
                .map(|pi| frobenius_relative(pi.matrix(), sol.pi_star.matrix()));
        }
        if flags.value_error {
            let denom = l2(sol.v_star.iter().copied());
            if denom > 0.0 {
                let d = l2(state.v.iter().zip(sol.v_star.iter()).map(|(&a, &b)| a - b));
                rec.value_error = Some(d / denom);
            }
        }
    }
    if flags.fo_residual {
        rec.fo_residual =
            objective::first_order_residual(mdp, config.tau, config.alpha, &state.v, u).ok();
    }
    rec
}

fn frobenius_relative(x: &Array2<f64>, reference: &Array2<f64>) -> f64 {
    let num = l2(x.iter().zip(reference.iter()).map(|(&a, &b)| a - b));
    let den = l2(reference.iter().copied());
    num / den
}

/// Relative Frobenius distance of a policy to the oracle policy.
pub fn policy_error(policy: &Policy, oracle: &OracleSolution) -> f64 {
    frobenius_relative(policy.matrix(), oracle.pi_star.matrix())
}

/// Relative Euclidean distance of a value function to the oracle value.
pub fn value_error(v: &ValueFunction, oracle: &OracleSolution) -> f64 {
    let den = l2(oracle.v_star.iter().copied());
    let num = l2(v.iter().zip(oracle.v_star.iter()).map(|(&a, &b)| a - b));
    num / den
}

/// Run one variant to convergence (or `max_iter`) from `init` (default
/// zeros). The trace keeps the final iterate and every recorded diagnostic.
pub fn run_solver(
    mdp: &MdpModel,
    variant: Variant,
    config: &SolverConfig,
    init: Option<SolverState>,
    oracle: Option<&OracleSolution>,
) -> Result<SolverTrace> {
    let mut driver = ExactDriver { mdp };
    run_loop(&mut driver, mdp, variant, config, init, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_mdp() -> MdpModel {
        crate::generate_random_mdp(4, 2, 2, 0.9, 5).unwrap()
    }

    fn small_config() -> SolverConfig {
        SolverConfig {
            alpha: 0.1,
            tau: 0.2,
            eta: 1e-2,
            c: 0.5,
            eps_tol: 1e-8,
            max_iter: 200_000,
            record_every: 10,
            diagnostics: DiagnosticsFlags::default(),
        }
    }

    #[test]
    fn convergence_metric_doubling() {
        let v = array![1.0, 2.0];
        let u = array![[1.0, 1.0], [1.0, 1.0]];
        let v2 = array![2.0, 4.0];
        let q = convergence_metric((&v, &u), (&v2, &u)).unwrap();
        assert!((q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn convergence_metric_rejects_zero_reference() {
        let v = array![0.0];
        let u = array![[1.0]];
        assert!(matches!(
            convergence_metric((&v, &u), (&v, &u)),
            Err(Error::ZeroNormReference)
        ));
    }

    #[test]
    fn ngad_equals_ingad_at_c_zero_bitwise() {
        let mdp = small_mdp();
        let mut cfg = small_config();
        cfg.c = 0.0;
        let mut s1 = SolverState::zeros(4, 2);
        let mut s2 = SolverState::zeros(4, 2);
        for _ in 0..50 {
            s1 = ngad_step(&mdp, &cfg, &s1).unwrap();
            s2 = ingad_step(&mdp, &cfg, &s2).unwrap();
        }
        assert_eq!(s1.v, s2.v);
        assert_eq!(s1.theta, s2.theta);
    }

    #[test]
    fn run_converges_on_small_instance() {
        let mdp = small_mdp();
        let cfg = small_config();
        let sol = crate::compute_oracle(&mdp, cfg.tau, cfg.alpha, None, None, 200_000).unwrap();
        let trace = run_solver(&mdp, Variant::Ingad, &cfg, None, Some(&sol)).unwrap();
        assert!(trace.converged, "q = {}", trace.final_q);
        let last = trace.records.last().unwrap();
        assert!(last.value_error.unwrap() < 1e-3);
        assert!(last.policy_error.unwrap() < 1e-3);
    }

    #[test]
    fn overflow_reports_non_finite_state() {
        let mdp = small_mdp();
        let mut cfg = small_config();
        cfg.eta = 50.0;
        cfg.tau = 1e-4;
        cfg.max_iter = 10_000;
        let err = run_solver(&mdp, Variant::Ngad, &cfg, None, None).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn max_iter_returns_partial_trace() {
        let mdp = small_mdp();
        let mut cfg = small_config();
        cfg.max_iter = 7;
        cfg.eps_tol = 1e-300;
        let trace = run_solver(&mdp, Variant::Ngad, &cfg, None, None).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.iterations, 7);
        assert_eq!(trace.records.last().unwrap().iter, 7);
    }

    #[test]
    fn csv_has_schema_and_17_digit_floats() {
        let mdp = small_mdp();
        let mut cfg = small_config();
        cfg.max_iter = 25;
        cfg.eps_tol = 1e-300;
        cfg.diagnostics = DiagnosticsFlags {
            lyapunov: false,
            policy_error: false,
            value_error: false,
            fo_residual: false,
        };
        let trace = run_solver(&mdp, Variant::Ngad, &cfg, None, None).unwrap();
        let csv = trace.csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,q,lyapunov,policy_error,value_error,fo_residual"
        );
        // Disabled diagnostics leave their fields empty.
        let row = lines.next().unwrap();
        assert!(row.ends_with(",,,,"), "row = {row}");
        let q_text = row.split(',').nth(1).unwrap();
        let reparsed: f64 = q_text.parse().unwrap();
        assert_eq!(reparsed, trace.records[0].q);
    }

    #[test]
    fn fixed_point_is_invariant_within_tolerance() {
        let mdp = small_mdp();
        let cfg = small_config();
        let sol =
            crate::compute_oracle(&mdp, cfg.tau, cfg.alpha, None, Some(1e-14), 400_000).unwrap();
        let init = SolverState {
            v: sol.v_star.clone(),
            theta: sol.u_star.mapv(f64::ln),
        };
        let after_ngad = ngad_step(&mdp, &cfg, &init).unwrap();
        let after_ingad = ingad_step(&mdp, &cfg, &init).unwrap();
        for s in 0..4 {
            assert!((after_ngad.v[s] - init.v[s]).abs() < 1e-10);
            assert!((after_ingad.v[s] - init.v[s]).abs() < 1e-10);
            for a in 0..2 {
                assert!((after_ngad.theta[[s, a]] - init.theta[[s, a]]).abs() < 1e-10);
                assert!((after_ingad.theta[[s, a]] - init.theta[[s, a]]).abs() < 1e-10);
            }
        }
    }
}
