//! The primal-dual saddle objectives and their calculus.
//!
//! Standard form (linear in v):
//!
//! ```text
//! E0(v, u) = sum_s e_s v_s + sum_{s,a} u_{s a} (r_{s a} - (K_a v)_s)
//!          - tau sum_{s,a} u_{s a} log(u_{s a} / utilde_s)
//! ```
//!
//! Quadratic convexification replaces the linear term with (alpha/2)||v||^2:
//!
//! ```text
//! E(v, u) = (alpha/2) sum_s v_s^2 + <u, r - K v> - tau sum u log(u / utilde)
//! ```
//!
//! For r >= 0 both share the saddle value function and policy for every
//! alpha > 0; only the dual scale changes. E is alpha-strongly convex in v
//! and concave in u: the u-Hessian decomposes into per-state blocks
//! -tau * H_s with H_s = diag(1/u_{s .}) - (1/utilde_s) 11^T positive
//! semi-definite and null space span(u_{s .}).
//!
//! The interpolating metric per state, utilde_s (diag(pi) - c pi pi^T) for
//! c in [0, 1), bridges the plain diagonal natural-gradient metric (c = 0)
//! and the Hessian pseudo-inverse limit (c -> 1). Its exact inverse is
//! diag(1/pi)/utilde + (c/(1-c)) 11^T / utilde.
//!
//! Progress toward the saddle point is measured by the Lyapunov function
//!
//! ```text
//! L(v, u)  = (alpha/2) ||v - v*||^2
//!          + tau sum_{s,a} (u*_{s a} log(u*_{s a}/u_{s a}) + u_{s a} - u*_{s a})
//! L_c(v,u) = L + tau c/(1-c) sum_s (utilde*_s log(utilde*_s/utilde_s) + utilde_s - utilde*_s)
//! ```
//!
//! both nonnegative, zero exactly at (v*, u*), and non-increasing along the
//! respective continuous-time dynamics.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::mdp::{DualVariable, MdpModel, ValueFunction, WeightVector};
use crate::oracle::OracleSolution;

/// Gradient of E at (v, u).
#[derive(Debug, Clone)]
pub struct GradientPair {
    /// d E / d v_{s'} = alpha v_{s'} - sum_{s,a} (K_a)_{s s'} u_{s a}
    pub grad_v: Array1<f64>,
    /// d E / d u_{s a} = (r_{s a} - (K_a v)_s) - tau log(u_{s a}/utilde_s)
    pub grad_u: Array2<f64>,
}

/// One per-state block of the dual Hessian. `block` is the positive
/// semi-definite factor H_s; the Hessian of E restricted to u_{s .} is
/// `-tau * block`.
#[derive(Debug, Clone)]
pub struct HessianUBlock {
    pub state: usize,
    pub tau: f64,
    pub block: Array2<f64>,
}

fn check_uv(mdp: &MdpModel, v: &ValueFunction, u: &DualVariable) -> Result<()> {
    if v.len() != mdp.num_states() {
        return Err(Error::DimensionMismatch(format!(
            "value length {} vs {} states",
            v.len(),
            mdp.num_states()
        )));
    }
    check_u(u, mdp.num_states(), mdp.num_actions())
}

fn check_u(u: &DualVariable, num_states: usize, num_actions: usize) -> Result<()> {
    if u.nrows() != num_states || u.ncols() != num_actions {
        return Err(Error::DimensionMismatch(format!(
            "dual shape [{}, {}] vs [{}, {}]",
            u.nrows(),
            u.ncols(),
            num_states,
            num_actions
        )));
    }
    for s in 0..u.nrows() {
        for a in 0..u.ncols() {
            if !(u[[s, a]] > 0.0) || !u[[s, a]].is_finite() {
                return Err(Error::NonPositiveDual {
                    state: s,
                    action: a,
                    value: u[[s, a]],
                });
            }
        }
    }
    Ok(())
}

/// tau * sum_{s,a} u log(u/utilde): the (negative) conditional-entropy term
/// shared by both objectives.
fn entropy_term(u: &DualVariable) -> f64 {
    let mut acc = 0.0;
    for s in 0..u.nrows() {
        let utilde: f64 = u.row(s).sum();
        let log_utilde = utilde.ln();
        for a in 0..u.ncols() {
            acc += u[[s, a]] * (u[[s, a]].ln() - log_utilde);
        }
    }
    acc
}

/// Standard saddle objective E0 with state weights e.
pub fn eval_e0(
    mdp: &MdpModel,
    tau: f64,
    weight: &WeightVector,
    v: &ValueFunction,
    u: &DualVariable,
) -> Result<f64> {
    if tau <= 0.0 {
        return Err(Error::NonPositiveTau(tau));
    }
    check_uv(mdp, v, u)?;
    if weight.len() != mdp.num_states() {
        return Err(Error::DimensionMismatch("weight length".into()));
    }
    let kv = mdp.apply_k(v)?;
    let linear: f64 = weight.iter().zip(v.iter()).map(|(&e, &vs)| e * vs).sum();
    let mut coupling = 0.0;
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            coupling += u[[s, a]] * (mdp.reward()[[s, a]] - kv[[s, a]]);
        }
    }
    Ok(linear + coupling - tau * entropy_term(u))
}

/// Quadratically convexified objective E.
pub fn eval_e(
    mdp: &MdpModel,
    tau: f64,
    alpha: f64,
    v: &ValueFunction,
    u: &DualVariable,
) -> Result<f64> {
    if tau <= 0.0 {
        return Err(Error::NonPositiveTau(tau));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    check_uv(mdp, v, u)?;
    let kv = mdp.apply_k(v)?;
    let quad: f64 = 0.5 * alpha * v.iter().map(|&x| x * x).sum::<f64>();
    let mut coupling = 0.0;
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            coupling += u[[s, a]] * (mdp.reward()[[s, a]] - kv[[s, a]]);
        }
    }
    Ok(quad + coupling - tau * entropy_term(u))
}

/// Exact gradient of E in both blocks.
pub fn grad_e(
    mdp: &MdpModel,
    tau: f64,
    alpha: f64,
    v: &ValueFunction,
    u: &DualVariable,
) -> Result<GradientPair> {
    if tau <= 0.0 {
        return Err(Error::NonPositiveTau(tau));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    check_uv(mdp, v, u)?;
    let ktu = mdp.apply_k_transpose(u)?;
    let grad_v = alpha * v - &ktu;
    let kv = mdp.apply_k(v)?;
    let mut grad_u = Array2::zeros((mdp.num_states(), mdp.num_actions()));
    for s in 0..mdp.num_states() {
        let log_utilde = u.row(s).sum().ln();
        for a in 0..mdp.num_actions() {
            grad_u[[s, a]] =
                (mdp.reward()[[s, a]] - kv[[s, a]]) - tau * (u[[s, a]].ln() - log_utilde);
        }
    }
    Ok(GradientPair { grad_v, grad_u })
}

/// The PSD factor of the per-state dual Hessian:
/// H_s = diag(1/u_{s .}) - (1/utilde_s) 11^T, with H_s u_{s .} = 0.
pub fn hessian_u_block(u: &DualVariable, tau: f64, state: usize) -> Result<HessianUBlock> {
    if tau <= 0.0 {
        return Err(Error::NonPositiveTau(tau));
    }
    if state >= u.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "state {state} out of range for {} states",
            u.nrows()
        )));
    }
    check_u(u, u.nrows(), u.ncols())?;
    let n = u.ncols();
    let utilde: f64 = u.row(state).sum();
    let mut block = Array2::from_elem((n, n), -1.0 / utilde);
    for a in 0..n {
        block[[a, a]] += 1.0 / u[[state, a]];
    }
    Ok(HessianUBlock { state, tau, block })
}

/// Interpolating metric block G_s = utilde_s (diag(pi_{s .}) - c pi pi^T)
/// with pi = u_{s .}/utilde_s. c = 0 gives diag(u_{s .}); c -> 1 approaches
/// the pseudo-inverse of H_s.
pub fn interpolating_preconditioner(u: &DualVariable, c: f64, state: usize) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::COutOfRange(c));
    }
    if state >= u.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "state {state} out of range for {} states",
            u.nrows()
        )));
    }
    check_u(u, u.nrows(), u.ncols())?;
    let n = u.ncols();
    let utilde: f64 = u.row(state).sum();
    let pi: Vec<f64> = u.row(state).iter().map(|&x| x / utilde).collect();
    let mut g = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            let mut val = -c * pi[a] * pi[b];
            if a == b {
                val += pi[a];
            }
            g[[a, b]] = utilde * val;
        }
    }
    Ok(g)
}

fn check_against_oracle(sol: &OracleSolution, v: &ValueFunction, u: &DualVariable) -> Result<()> {
    if v.len() != sol.v_star.len()
        || u.nrows() != sol.u_star.nrows()
        || u.ncols() != sol.u_star.ncols()
    {
        return Err(Error::DimensionMismatch(
            "iterate shape vs oracle solution".into(),
        ));
    }
    check_u(u, u.nrows(), u.ncols())
}

/// Lyapunov function for the diagonal-metric (NGAD) flow:
/// quadratic distance in v plus the Bregman divergence of u under
/// x log x - x, scaled by tau.
pub fn lyapunov_l(
    v: &ValueFunction,
    u: &DualVariable,
    sol: &OracleSolution,
    alpha: f64,
    tau: f64,
) -> Result<f64> {
    if tau <= 0.0 {
        return Err(Error::NonPositiveTau(tau));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    check_against_oracle(sol, v, u)?;
    let mut quad = 0.0;
    for s in 0..v.len() {
        let d = v[s] - sol.v_star[s];
        quad += d * d;
    }
    let mut breg = 0.0;
    for s in 0..u.nrows() {
        for a in 0..u.ncols() {
            let us = u[[s, a]];
            let ustar = sol.u_star[[s, a]];
            breg += ustar * (ustar / us).ln() + us - ustar;
        }
    }
    Ok(0.5 * alpha * quad + tau * breg)
}

/// Lyapunov function for the interpolating-metric (INGAD) flow: adds the
/// marginal Bregman term weighted by c/(1-c). Reduces to L at c = 0.
pub fn lyapunov_lc(
    v: &ValueFunction,
    u: &DualVariable,
    sol: &OracleSolution,
    alpha: f64,
    tau: f64,
    c: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::COutOfRange(c));
    }
    let base = lyapunov_l(v, u, sol, alpha, tau)?;
    if c == 0.0 {
        return Ok(base);
    }
    let mut marg = 0.0;
    for s in 0..u.nrows() {
        let utilde: f64 = u.row(s).sum();
        let utilde_star: f64 = sol.u_star.row(s).sum();
        marg += utilde_star * (utilde_star / utilde).ln() + utilde - utilde_star;
    }
    Ok(base + tau * c / (1.0 - c) * marg)
}

/// Max-norm defect of the quadratic objective's first-order conditions:
/// max over |alpha v_{s'} - sum_{s,a} K_{a s s'} u_{s a}| and
/// |r_{s a} - (K_a v)_s - tau log(u_{s a}/utilde_s)|.
pub fn first_order_residual(
    mdp: &MdpModel,
    tau: f64,
    alpha: f64,
    v: &ValueFunction,
    u: &DualVariable,
) -> Result<f64> {
    let g = grad_e(mdp, tau, alpha, v, u)?;
    let mut worst = 0.0f64;
    for &x in g.grad_v.iter() {
        worst = worst.max(x.abs());
    }
    for &x in g.grad_u.iter() {
        worst = worst.max(x.abs());
    }
    Ok(worst)
}

/// As [`first_order_residual`] for the standard objective: the v-block
/// stationarity reads e_{s'} = sum_{s,a} K_{a s s'} u_{s a}, the u-block is
/// unchanged.
pub fn first_order_residual_standard(
    mdp: &MdpModel,
    tau: f64,
    weight: &WeightVector,
    v: &ValueFunction,
    u: &DualVariable,
) -> Result<f64> {
    if tau <= 0.0 {
        return Err(Error::NonPositiveTau(tau));
    }
    check_uv(mdp, v, u)?;
    if weight.len() != mdp.num_states() {
        return Err(Error::DimensionMismatch("weight length".into()));
    }
    let ktu = mdp.apply_k_transpose(u)?;
    let mut worst = 0.0f64;
    for (&e, &k) in weight.iter().zip(ktu.iter()) {
        worst = worst.max((e - k).abs());
    }
    let kv = mdp.apply_k(v)?;
    for s in 0..mdp.num_states() {
        let log_utilde = u.row(s).sum().ln();
        for a in 0..mdp.num_actions() {
            let g = (mdp.reward()[[s, a]] - kv[[s, a]]) - tau * (u[[s, a]].ln() - log_utilde);
            worst = worst.max(g.abs());
        }
    }
    Ok(worst)
}
