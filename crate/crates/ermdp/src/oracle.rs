//! Ground truth for the saddle-point dynamics.
//!
//! The regularized optimal value is the unique fixed point of the soft
//! Bellman operator
//!
//! ```text
//! phi(v)_s = tau * log sum_a exp((r_{s a} + gamma (P_a v)_s) / tau)
//! ```
//!
//! a gamma-contraction in the sup norm, so plain fixed-point iteration from
//! zero converges linearly at rate gamma. The optimal policy is the softmax
//! of the same exponents. Two dual certificates complete the picture:
//!
//! * standard objective: u_circ with row sums solving K_pi^T utilde = e,
//! * quadratic objective: u_star = pi * w where K_pi^T w = alpha v_star.
//!
//! Both induce the same policy; only the state marginals differ.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{DualVariable, MdpModel, Policy, ValueFunction, WeightVector};

/// Everything the diagnostics need about the solved instance.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub v_star: ValueFunction,
    pub pi_star: Policy,
    /// Optimal dual of the standard objective (row sums solve K_pi^T x = e).
    pub u_circ: DualVariable,
    /// Optimal dual of the quadratic objective (row sums solve K_pi^T x = alpha v_star).
    pub u_star: DualVariable,
    pub tau: f64,
    pub alpha: f64,
    pub weight: WeightVector,
}

/// Default value-iteration stopping tolerance, scaled to the instance:
/// 1e-12 * (1 + ||r||_inf / (1 - gamma)).
pub fn default_vi_tolerance(mdp: &MdpModel) -> f64 {
    let r_inf = mdp.reward().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    1e-12 * (1.0 + r_inf / (1.0 - mdp.discount()))
}

/// One application of the soft Bellman operator. Log-sum-exp is evaluated
/// with the row maximum subtracted; small tau (large exponents) stays finite.
pub fn soft_bellman_operator(mdp: &MdpModel, tau: f64, v: &ValueFunction) -> Result<ValueFunction> {
    let q = bellman_exponents(mdp, tau, v)?;
    let mut out = Array1::zeros(mdp.num_states());
    for s in 0..mdp.num_states() {
        out[s] = tau * log_sum_exp(q.row(s).as_slice().expect("contiguous row"));
    }
    Ok(out)
}

/// Exponents (r_{s a} + gamma (P_a v)_s) / tau, computed through K:
/// r + gamma P v = r + v - K v.
fn bellman_exponents(mdp: &MdpModel, tau: f64, v: &ValueFunction) -> Result<Array2<f64>> {
    if tau <= 0.0 {
        return Err(Error::NonPositiveTau(tau));
    }
    let kv = mdp.apply_k(v)?;
    let mut q = Array2::zeros((mdp.num_states(), mdp.num_actions()));
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            q[[s, a]] = (mdp.reward()[[s, a]] + v[s] - kv[[s, a]]) / tau;
        }
    }
    Ok(q)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Fixed-point iteration for phi from v = 0. `tol` defaults to
/// [`default_vi_tolerance`]; stops when the sup-norm update drops below it.
pub fn solve_value_iteration(
    mdp: &MdpModel,
    tau: f64,
    tol: Option<f64>,
    max_iter: usize,
) -> Result<ValueFunction> {
    Ok(solve_value_iteration_traced(mdp, tau, tol, max_iter)?.0)
}

/// As [`solve_value_iteration`], also returning the sup-norm residual
/// ||phi(v_k) - v_k||_inf per iteration (the successive-residual ratio of
/// this sequence tends to gamma).
pub fn solve_value_iteration_traced(
    mdp: &MdpModel,
    tau: f64,
    tol: Option<f64>,
    max_iter: usize,
) -> Result<(ValueFunction, Vec<f64>)> {
    let tol = tol.unwrap_or_else(|| default_vi_tolerance(mdp));
    let mut v = Array1::zeros(mdp.num_states());
    let mut residuals = Vec::new();
    for _ in 0..max_iter {
        let v_next = soft_bellman_operator(mdp, tau, &v)?;
        let res = v_next
            .iter()
            .zip(v.iter())
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        residuals.push(res);
        v = v_next;
        if res <= tol {
            return Ok((v, residuals));
        }
    }
    Err(Error::MaxIterExceeded {
        max_iter,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Softmax policy induced by a value function:
/// pi_{s a} proportional to exp((r_{s a} + gamma (P_a v)_s) / tau).
pub fn policy_from_value(mdp: &MdpModel, tau: f64, v: &ValueFunction) -> Result<Policy> {
    let q = bellman_exponents(mdp, tau, v)?;
    let mut pi = Array2::zeros((mdp.num_states(), mdp.num_actions()));
    for s in 0..mdp.num_states() {
        let row = q.row(s);
        let m = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut sum = 0.0;
        for a in 0..mdp.num_actions() {
            let e = (row[a] - m).exp();
            pi[[s, a]] = e;
            sum += e;
        }
        for a in 0..mdp.num_actions() {
            pi[[s, a]] /= sum;
        }
    }
    Policy::new(pi)
}

/// Optimal dual of the standard objective for weights e: solve
/// K_pi^T utilde = e, then u_{s a} = pi_{s a} utilde_s. Componentwise
/// utilde >= e > 0 (Neumann series of nonnegative terms).
pub fn optimal_dual_standard(
    mdp: &MdpModel,
    pi_star: &Policy,
    weight: &WeightVector,
) -> Result<DualVariable> {
    if weight.len() != mdp.num_states() {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs {} states",
            weight.len(),
            mdp.num_states()
        )));
    }
    for (i, &w) in weight.iter().enumerate() {
        if !(w > 0.0) {
            return Err(Error::NonPositiveValue { index: i, value: w });
        }
    }
    scaled_dual(mdp, pi_star, weight)
}

/// Optimal dual of the quadratic objective: solve K_pi^T w = alpha v_star,
/// then u_{s a} = pi_{s a} w_s. Requires w > 0, which holds whenever
/// r >= 0 and v_star > 0.
pub fn optimal_dual_quadratic(
    mdp: &MdpModel,
    pi_star: &Policy,
    v_star: &ValueFunction,
    alpha: f64,
) -> Result<DualVariable> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    scaled_dual(mdp, pi_star, &(alpha * v_star))
}

/// Shared kernel: solve K_pi^T x = rhs and lift to state-action space.
fn scaled_dual(mdp: &MdpModel, pi: &Policy, rhs: &Array1<f64>) -> Result<DualVariable> {
    let p_pi = mdp.transition_under_policy(pi)?;
    let mut a = Array2::eye(mdp.num_states());
    a.scaled_add(-mdp.discount(), &p_pi);
    let x = linalg::solve_transpose(&a, rhs)?;
    for (i, &xi) in x.iter().enumerate() {
        if !(xi > 0.0) {
            return Err(Error::NonPositiveValue {
                index: i,
                value: xi,
            });
        }
    }
    let mut u = Array2::zeros((mdp.num_states(), mdp.num_actions()));
    for s in 0..mdp.num_states() {
        for act in 0..mdp.num_actions() {
            u[[s, act]] = pi.matrix()[[s, act]] * x[s];
        }
    }
    Ok(u)
}

/// Per-state fixed-point defect v - phi(v); zero exactly at the regularized
/// optimum and monotone under uniform upward shifts.
pub fn primal_feasibility_residual(
    mdp: &MdpModel,
    tau: f64,
    v: &ValueFunction,
) -> Result<Array1<f64>> {
    let phi = soft_bellman_operator(mdp, tau, v)?;
    Ok(v - &phi)
}

/// Bundle the full ground truth for one instance: value iteration, softmax
/// policy, and both duals. `weight` defaults to all-ones.
pub fn compute_oracle(
    mdp: &MdpModel,
    tau: f64,
    alpha: f64,
    weight: Option<&WeightVector>,
    tol: Option<f64>,
    max_iter: usize,
) -> Result<OracleSolution> {
    let ones;
    let weight = match weight {
        Some(w) => w,
        None => {
            ones = Array1::from_elem(mdp.num_states(), 1.0);
            &ones
        }
    };
    let v_star = solve_value_iteration(mdp, tau, tol, max_iter)?;
    let pi_star = policy_from_value(mdp, tau, &v_star)?;
    let u_circ = optimal_dual_standard(mdp, &pi_star, weight)?;
    let u_star = optimal_dual_quadratic(mdp, &pi_star, &v_star, alpha)?;
    Ok(OracleSolution {
        v_star,
        pi_star,
        u_circ,
        u_star,
        tau,
        alpha,
        weight: weight.clone(),
    })
}

/// On-disk schema: flat row-major arrays plus the scalars that key the
/// solution.
#[derive(Serialize, Deserialize)]
struct OracleJson {
    num_states: usize,
    num_actions: usize,
    tau: f64,
    alpha: f64,
    v_star: Vec<f64>,
    pi_star: Vec<f64>,
    u_circ: Vec<f64>,
    u_star: Vec<f64>,
    weight: Vec<f64>,
}

impl OracleSolution {
    pub fn to_json_string(&self) -> Result<String> {
        let doc = OracleJson {
            num_states: self.v_star.len(),
            num_actions: self.pi_star.num_actions(),
            tau: self.tau,
            alpha: self.alpha,
            v_star: self.v_star.to_vec(),
            pi_star: self.pi_star.matrix().iter().copied().collect(),
            u_circ: self.u_circ.iter().copied().collect(),
            u_star: self.u_star.iter().copied().collect(),
            weight: self.weight.to_vec(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json_str(text: &str) -> Result<OracleSolution> {
        let doc: OracleJson = serde_json::from_str(text)?;
        let (s_n, a_n) = (doc.num_states, doc.num_actions);
        let shape_err = |what: &str| Error::DimensionMismatch(format!("oracle field {what}"));
        if doc.v_star.len() != s_n || doc.weight.len() != s_n {
            return Err(shape_err("v_star/weight"));
        }
        if doc.pi_star.len() != s_n * a_n
            || doc.u_circ.len() != s_n * a_n
            || doc.u_star.len() != s_n * a_n
        {
            return Err(shape_err("pi_star/u_circ/u_star"));
        }
        let to2 = |v: Vec<f64>| {
            Array2::from_shape_vec((s_n, a_n), v)
                .map_err(|e| Error::DimensionMismatch(e.to_string()))
        };
        Ok(OracleSolution {
            v_star: Array1::from_vec(doc.v_star),
            pi_star: Policy::new(to2(doc.pi_star)?)?,
            u_circ: to2(doc.u_circ)?,
            u_star: to2(doc.u_star)?,
            tau: doc.tau,
            alpha: doc.alpha,
            weight: Array1::from_vec(doc.weight),
        })
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<OracleSolution> {
        OracleSolution::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Transition;
    use ndarray::{array, Array3};

    /// Single state, n actions, all self-loops.
    fn one_state(num_actions: usize, rewards: &[f64], gamma: f64) -> MdpModel {
        let p = Array3::from_elem((num_actions, 1, 1), 1.0);
        let r = Array2::from_shape_vec((1, num_actions), rewards.to_vec()).unwrap();
        MdpModel::new(Transition::Dense(p), r, gamma).unwrap()
    }

    #[test]
    fn soft_bellman_at_zero_is_temperature_scaled_log_action_count() {
        let mdp = one_state(2, &[0.0, 0.0], 0.5);
        let phi = soft_bellman_operator(&mdp, 1.0, &array![0.0]).unwrap();
        assert!((phi[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn value_iteration_two_action_closed_form() {
        // phi(v) = log 2 + v/2, fixed point 2 log 2.
        let mdp = one_state(2, &[0.0, 0.0], 0.5);
        let v = solve_value_iteration(&mdp, 1.0, None, 10_000).unwrap();
        assert!((v[0] - 2.0 * std::f64::consts::LN_2).abs() < 1e-11);
    }

    #[test]
    fn value_iteration_single_action_is_geometric_sum() {
        let mdp = one_state(1, &[2.0], 0.5);
        let v = solve_value_iteration(&mdp, 0.25, None, 10_000).unwrap();
        assert!((v[0] - 4.0).abs() < 1e-11);
    }

    #[test]
    fn max_iter_reports_residual() {
        let mdp = one_state(2, &[0.0, 1.0], 0.9);
        let err = solve_value_iteration(&mdp, 0.5, Some(1e-14), 3).unwrap_err();
        assert!(matches!(err, Error::MaxIterExceeded { max_iter: 3, .. }));
    }

    #[test]
    fn symmetric_rewards_give_uniform_policy() {
        let mdp = one_state(3, &[1.0, 1.0, 1.0], 0.5);
        let v = solve_value_iteration(&mdp, 0.5, None, 10_000).unwrap();
        let pi = policy_from_value(&mdp, 0.5, &v).unwrap();
        for a in 0..3 {
            assert!((pi.matrix()[[0, a]] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_state_duals_match_geometric_series() {
        // v* = r/(1-gamma) = 4; utilde_circ = 1/(1-gamma) = 2;
        // w = alpha v*/(1-gamma) = 0.8.
        let mdp = one_state(1, &[2.0], 0.5);
        let sol = compute_oracle(&mdp, 0.25, 0.1, None, None, 10_000).unwrap();
        assert!((sol.v_star[0] - 4.0).abs() < 1e-11);
        assert!((sol.u_circ[[0, 0]] - 2.0).abs() < 1e-10);
        assert!((sol.u_star[[0, 0]] - 0.8).abs() < 1e-10);
    }

    #[test]
    fn feasibility_residual_vanishes_at_fixed_point_and_grows_with_shift() {
        let mdp = one_state(2, &[0.3, 1.1], 0.5);
        let v = solve_value_iteration(&mdp, 0.5, None, 10_000).unwrap();
        let at_star = primal_feasibility_residual(&mdp, 0.5, &v).unwrap();
        assert!(at_star[0].abs() < 1e-10);
        let shifted = primal_feasibility_residual(&mdp, 0.5, &(&v + 1.0)).unwrap();
        // Uniform shift delta inflates the residual by exactly (1-gamma) delta.
        assert!((shifted[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn oracle_json_round_trip() {
        let mdp = crate::generate_random_mdp(5, 3, 2, 0.9, 11).unwrap();
        let sol = compute_oracle(&mdp, 0.2, 0.3, None, None, 100_000).unwrap();
        let back = OracleSolution::from_json_str(&sol.to_json_string().unwrap()).unwrap();
        assert_eq!(sol.v_star, back.v_star);
        assert_eq!(sol.u_circ, back.u_circ);
        assert_eq!(sol.u_star, back.u_star);
        assert_eq!(sol.pi_star.matrix(), back.pi_star.matrix());
        assert_eq!(sol.tau, back.tau);
        assert_eq!(sol.alpha, back.alpha);
    }

    #[test]
    fn rejects_nonpositive_tau_and_weight() {
        let mdp = one_state(2, &[0.0, 0.0], 0.5);
        assert!(matches!(
            soft_bellman_operator(&mdp, 0.0, &array![0.0]),
            Err(Error::NonPositiveTau(_))
        ));
        let pi = Policy::uniform(1, 2);
        assert!(matches!(
            optimal_dual_standard(&mdp, &pi, &array![0.0]),
            Err(Error::NonPositiveValue { .. })
        ));
    }
}
