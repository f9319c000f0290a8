//! Finite entropy-regularized MDPs and the operators built from them.
//!
//! A model is M = (S, A, P, r, gamma) with P[a][s][s'] row-stochastic in s',
//! r[s][a] >= 0 and gamma in (0, 1). The central linear object is
//!
//! ```text
//! (K_a)_{s s'} = delta_{s s'} - gamma * P[a][s][s']
//! ```
//!
//! applied forward per action, `(K_a v)_s`, and aggregated in transpose over
//! state-action duals, `sum_{s,a} (K_a)_{s s'} u_{s a}`. Policy-conditioned
//! evaluation solves `(I - gamma P_pi) v = r_pi - tau h_pi` where
//! `(h_pi)_s = sum_a pi_{s a} log pi_{s a}`.
//!
//! Transitions come in two layouts: a dense tensor, and a sparse uniform form
//! (each (s, a) row puts mass 1/k on k support states) produced by the random
//! generator. Both layouts feed the same operators and must agree numerically.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg;

/// Value function over states.
pub type ValueFunction = Array1<f64>;
/// Dual variable over state-action pairs, shape [S, A], strictly positive
/// wherever an operation takes a log or a ratio.
pub type DualVariable = Array2<f64>;
/// Strictly positive weight vector over states (the linear-term weights e).
pub type WeightVector = Array1<f64>;

/// Row sums may deviate from one by at most this much.
const ROW_SUM_TOL: f64 = 1e-12;
/// Policy entries below this would push log(pi) out of the representable
/// range; such policies are rejected rather than clamped.
const POLICY_FLOOR: f64 = 1e-300;

/// Transition kernel storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    /// Dense tensor with shape [A, S, S'].
    Dense(Array3<f64>),
    /// Every (s, a) row is uniform over `support_size` states. `support` is
    /// flat row-major over (s, a): the indices for row (s, a) live at
    /// `support[(s * num_actions + a) * support_size ..][.. support_size]`,
    /// sorted strictly increasing.
    SparseUniform {
        num_states: usize,
        num_actions: usize,
        support_size: usize,
        support: Vec<u32>,
    },
}

impl Transition {
    pub fn num_states(&self) -> usize {
        match self {
            Transition::Dense(p) => p.shape()[1],
            Transition::SparseUniform { num_states, .. } => *num_states,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Transition::Dense(p) => p.shape()[0],
            Transition::SparseUniform { num_actions, .. } => *num_actions,
        }
    }

    /// Materialize the dense tensor [A, S, S'].
    pub fn to_dense(&self) -> Array3<f64> {
        match self {
            Transition::Dense(p) => p.clone(),
            Transition::SparseUniform {
                num_states,
                num_actions,
                support_size,
                support,
            } => {
                let (s_n, a_n, k) = (*num_states, *num_actions, *support_size);
                let prob = 1.0 / k as f64;
                let mut dense = Array3::zeros((a_n, s_n, s_n));
                for s in 0..s_n {
                    for a in 0..a_n {
                        let base = (s * a_n + a) * k;
                        for &idx in &support[base..base + k] {
                            dense[[a, s, idx as usize]] = prob;
                        }
                    }
                }
                dense
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Transition::Dense(p) => {
                let (a_n, s_n, s2) = (p.shape()[0], p.shape()[1], p.shape()[2]);
                if s_n != s2 || s_n == 0 || a_n == 0 {
                    return Err(Error::DimensionMismatch(format!(
                        "transition tensor shape [{a_n}, {s_n}, {s2}]"
                    )));
                }
                for a in 0..a_n {
                    for s in 0..s_n {
                        let mut sum = 0.0;
                        for s2 in 0..s_n {
                            let p_val = p[[a, s, s2]];
                            if p_val < 0.0 || !p_val.is_finite() {
                                return Err(Error::NonStochasticRow {
                                    action: a,
                                    state: s,
                                    sum: p_val,
                                });
                            }
                            sum += p_val;
                        }
                        if (sum - 1.0).abs() > ROW_SUM_TOL {
                            return Err(Error::NonStochasticRow {
                                action: a,
                                state: s,
                                sum,
                            });
                        }
                    }
                }
                Ok(())
            }
            Transition::SparseUniform {
                num_states,
                num_actions,
                support_size,
                support,
            } => {
                let (s_n, a_n, k) = (*num_states, *num_actions, *support_size);
                if s_n == 0 || a_n == 0 {
                    return Err(Error::DimensionMismatch("empty state or action set".into()));
                }
                if k == 0 || k > s_n {
                    return Err(Error::SupportTooLarge {
                        support: k,
                        num_states: s_n,
                    });
                }
                if support.len() != s_n * a_n * k {
                    return Err(Error::DimensionMismatch(format!(
                        "support length {} != S*A*k = {}",
                        support.len(),
                        s_n * a_n * k
                    )));
                }
                for s in 0..s_n {
                    for a in 0..a_n {
                        let row = &support[(s * a_n + a) * k..(s * a_n + a) * k + k];
                        for w in row.windows(2) {
                            if w[0] >= w[1] {
                                return Err(Error::NonStochasticRow {
                                    action: a,
                                    state: s,
                                    sum: f64::NAN,
                                });
                            }
                        }
                        if row[k - 1] as usize >= s_n {
                            return Err(Error::DimensionMismatch(format!(
                                "support index {} out of range for {} states",
                                row[k - 1],
                                s_n
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Randomized policy, shape [S, A]; rows sum to one, entries strictly
/// positive (log pi must stay finite).
#[derive(Debug, Clone, PartialEq)]
pub struct Policy(Array2<f64>);

impl Policy {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let (s_n, a_n) = (matrix.nrows(), matrix.ncols());
        if s_n == 0 || a_n == 0 {
            return Err(Error::DimensionMismatch("empty policy matrix".into()));
        }
        for s in 0..s_n {
            let mut sum = 0.0;
            for a in 0..a_n {
                let p = matrix[[s, a]];
                if !(p >= POLICY_FLOOR) || !p.is_finite() {
                    return Err(Error::NonPositivePolicyEntry {
                        state: s,
                        action: a,
                        value: p,
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochasticRow {
                    action: usize::MAX,
                    state: s,
                    sum,
                });
            }
        }
        Ok(Policy(matrix))
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy(Array2::from_elem(
            (num_states, num_actions),
            1.0 / num_actions as f64,
        ))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn num_states(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.0.ncols()
    }
}

/// A validated finite MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    transition: Transition,
    reward: Array2<f64>,
    discount: f64,
}

impl MdpModel {
    /// Build and validate a model. Rejects non-stochastic rows, negative
    /// rewards, and discounts outside (0, 1).
    pub fn new(transition: Transition, reward: Array2<f64>, discount: f64) -> Result<Self> {
        transition.validate()?;
        let (s_n, a_n) = (transition.num_states(), transition.num_actions());
        if reward.nrows() != s_n || reward.ncols() != a_n {
            return Err(Error::DimensionMismatch(format!(
                "reward shape [{}, {}] vs transition [{}, {}]",
                reward.nrows(),
                reward.ncols(),
                s_n,
                a_n
            )));
        }
        for s in 0..s_n {
            for a in 0..a_n {
                let r = reward[[s, a]];
                if r < 0.0 || !r.is_finite() {
                    return Err(Error::NegativeReward {
                        state: s,
                        action: a,
                        value: r,
                    });
                }
            }
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::DiscountOutOfRange(discount));
        }
        Ok(MdpModel {
            num_states: s_n,
            num_actions: a_n,
            transition,
            reward,
            discount,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn transition(&self) -> &Transition {
        &self.transition
    }

    pub fn reward(&self) -> &Array2<f64> {
        &self.reward
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same model with every reward shifted by `delta` (still nonnegative).
    pub fn shift_rewards(&self, delta: f64) -> Result<MdpModel> {
        MdpModel::new(
            self.transition.clone(),
            self.reward.mapv(|r| r + delta),
            self.discount,
        )
    }

    /// Replace the reward table (used by noisy-reward runs' exact twin tests).
    pub fn with_reward(&self, reward: Array2<f64>) -> Result<MdpModel> {
        MdpModel::new(self.transition.clone(), reward, self.discount)
    }

    /// P_pi with (P_pi)_{s s'} = sum_a pi_{s a} P[a][s][s'].
    pub fn transition_under_policy(&self, policy: &Policy) -> Result<Array2<f64>> {
        self.check_policy_dims(policy)?;
        let mut p_pi = Array2::zeros((self.num_states, self.num_states));
        match &self.transition {
            Transition::Dense(p) => {
                for s in 0..self.num_states {
                    for a in 0..self.num_actions {
                        let w = policy.matrix()[[s, a]];
                        for s2 in 0..self.num_states {
                            p_pi[[s, s2]] += w * p[[a, s, s2]];
                        }
                    }
                }
            }
            Transition::SparseUniform {
                support_size,
                support,
                ..
            } => {
                let k = *support_size;
                let prob = 1.0 / k as f64;
                for s in 0..self.num_states {
                    for a in 0..self.num_actions {
                        let w = policy.matrix()[[s, a]] * prob;
                        let base = (s * self.num_actions + a) * k;
                        for &idx in &support[base..base + k] {
                            p_pi[[s, idx as usize]] += w;
                        }
                    }
                }
            }
        }
        Ok(p_pi)
    }

    /// (r_pi, h_pi): expected reward and negative entropy per state,
    /// (h_pi)_s = sum_a pi log pi.
    pub fn reward_and_entropy_under_policy(
        &self,
        policy: &Policy,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        self.check_policy_dims(policy)?;
        let mut r_pi = Array1::zeros(self.num_states);
        let mut h_pi = Array1::zeros(self.num_states);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let p = policy.matrix()[[s, a]];
                r_pi[s] += p * self.reward[[s, a]];
                h_pi[s] += p * p.ln();
            }
        }
        Ok((r_pi, h_pi))
    }

    /// Regularized policy evaluation: solve
    /// `(I - gamma P_pi) v = r_pi - tau h_pi`.
    pub fn evaluate_policy(&self, policy: &Policy, tau: f64) -> Result<ValueFunction> {
        if tau < 0.0 {
            return Err(Error::NonPositiveTau(tau));
        }
        let p_pi = self.transition_under_policy(policy)?;
        let (r_pi, h_pi) = self.reward_and_entropy_under_policy(policy)?;
        let mut a = Array2::eye(self.num_states);
        a.scaled_add(-self.discount, &p_pi);
        let b = &r_pi - &(tau * &h_pi);
        let v = linalg::solve(&a, &b)?;
        let r_inf = r_pi.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let res = linalg::residual_inf(&a, &v, &b);
        if res > 1e-10 * (1.0 + r_inf) {
            return Err(Error::SolveFailure(format!(
                "policy evaluation residual {res:e} exceeds tolerance"
            )));
        }
        Ok(v)
    }

    /// Forward operator per action: out[s][a] = v_s - gamma (P_a v)_s.
    pub fn apply_k(&self, v: &ValueFunction) -> Result<Array2<f64>> {
        if v.len() != self.num_states {
            return Err(Error::DimensionMismatch(format!(
                "value length {} vs {} states",
                v.len(),
                self.num_states
            )));
        }
        let mut out = Array2::zeros((self.num_states, self.num_actions));
        let gamma = self.discount;
        match &self.transition {
            Transition::Dense(p) => {
                for s in 0..self.num_states {
                    for a in 0..self.num_actions {
                        let mut acc = 0.0;
                        for s2 in 0..self.num_states {
                            acc += p[[a, s, s2]] * v[s2];
                        }
                        out[[s, a]] = v[s] - gamma * acc;
                    }
                }
            }
            Transition::SparseUniform {
                support_size,
                support,
                ..
            } => {
                let k = *support_size;
                let prob = 1.0 / k as f64;
                let vs = v.as_slice().expect("contiguous value vector");
                let o = out.as_slice_mut().expect("contiguous output");
                for s in 0..self.num_states {
                    for a in 0..self.num_actions {
                        let cell = s * self.num_actions + a;
                        let base = cell * k;
                        let mut acc = 0.0;
                        for &idx in &support[base..base + k] {
                            acc += vs[idx as usize];
                        }
                        o[cell] = vs[s] - gamma * prob * acc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Transpose aggregation: out[s'] = sum_a u_{s' a} - gamma sum_{s,a} P[a][s][s'] u_{s a}.
    pub fn apply_k_transpose(&self, u: &DualVariable) -> Result<Array1<f64>> {
        if u.nrows() != self.num_states || u.ncols() != self.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "dual shape [{}, {}] vs [{}, {}]",
                u.nrows(),
                u.ncols(),
                self.num_states,
                self.num_actions
            )));
        }
        let gamma = self.discount;
        let mut out = u.sum_axis(ndarray::Axis(1));
        match &self.transition {
            Transition::Dense(p) => {
                for s in 0..self.num_states {
                    for a in 0..self.num_actions {
                        let w = gamma * u[[s, a]];
                        if w == 0.0 {
                            continue;
                        }
                        for s2 in 0..self.num_states {
                            out[s2] -= w * p[[a, s, s2]];
                        }
                    }
                }
            }
            Transition::SparseUniform {
                support_size,
                support,
                ..
            } => {
                let k = *support_size;
                let prob = 1.0 / k as f64;
                let us = u.as_slice().expect("contiguous dual");
                let o = out.as_slice_mut().expect("contiguous output");
                for cell in 0..self.num_states * self.num_actions {
                    let w = gamma * prob * us[cell];
                    let base = cell * k;
                    for &idx in &support[base..base + k] {
                        o[idx as usize] -= w;
                    }
                }
            }
        }
        Ok(out)
    }

    fn check_policy_dims(&self, policy: &Policy) -> Result<()> {
        if policy.num_states() != self.num_states || policy.num_actions() != self.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "policy shape [{}, {}] vs [{}, {}]",
                policy.num_states(),
                policy.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        let doc = MdpJson::from_model(self);
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json_str(text: &str) -> Result<MdpModel> {
        let doc: MdpJson = serde_json::from_str(text)?;
        doc.into_model()
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<MdpModel> {
        MdpModel::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Random instance family used by the experiments: every (s, a) row of P is
/// uniform over a `support_size`-subset of states drawn without replacement;
/// rewards factor as r[s][a] = U_s * U_{s a} with independent U(0, 1) draws
/// (mean 1/4).
///
/// Determinism contract: a ChaCha8 stream seeded with `seed` draws, in order,
/// U_s for s = 0..S, then U_{s a} row-major, then the supports row-major
/// (each sorted ascending).
pub fn generate_random_mdp(
    num_states: usize,
    num_actions: usize,
    support_size: usize,
    discount: f64,
    seed: u64,
) -> Result<MdpModel> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::DimensionMismatch("empty state or action set".into()));
    }
    if support_size == 0 || support_size > num_states {
        return Err(Error::SupportTooLarge {
            support: support_size,
            num_states,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_state: Vec<f64> = (0..num_states).map(|_| rng.random::<f64>()).collect();
    let mut reward = Array2::zeros((num_states, num_actions));
    for s in 0..num_states {
        for a in 0..num_actions {
            reward[[s, a]] = u_state[s] * rng.random::<f64>();
        }
    }
    let mut support = Vec::with_capacity(num_states * num_actions * support_size);
    for _ in 0..num_states * num_actions {
        let mut idx: Vec<u32> = rand::seq::index::sample(&mut rng, num_states, support_size)
            .iter()
            .map(|i| i as u32)
            .collect();
        idx.sort_unstable();
        support.extend_from_slice(&idx);
    }
    MdpModel::new(
        Transition::SparseUniform {
            num_states,
            num_actions,
            support_size,
            support,
        },
        reward,
        discount,
    )
}

/// On-disk JSON schema.
///
/// ```json
/// {
///   "num_states": 2, "num_actions": 2, "discount": 0.9,
///   "reward": [r00, r01, r10, r11],
///   "transition": {"support_size": 1, "support_prob": 1.0, "support_indices": [...]}
/// }
/// ```
///
/// `reward` is row-major [S][A]. The sparse transition stores the flat
/// row-major support table; the dense alternative is
/// `"transition": {"dense": [...]}` row-major [A][S][S'].
#[derive(Serialize, Deserialize)]
struct MdpJson {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    reward: Vec<f64>,
    transition: TransitionJson,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TransitionJson {
    SparseUniform {
        support_size: usize,
        support_prob: f64,
        support_indices: Vec<u32>,
    },
    Dense {
        dense: Vec<f64>,
    },
}

impl MdpJson {
    fn from_model(m: &MdpModel) -> MdpJson {
        let transition = match &m.transition {
            Transition::Dense(p) => TransitionJson::Dense {
                dense: p.iter().copied().collect(),
            },
            Transition::SparseUniform {
                support_size,
                support,
                ..
            } => TransitionJson::SparseUniform {
                support_size: *support_size,
                support_prob: 1.0 / *support_size as f64,
                support_indices: support.clone(),
            },
        };
        MdpJson {
            num_states: m.num_states,
            num_actions: m.num_actions,
            discount: m.discount,
            reward: m.reward.iter().copied().collect(),
            transition,
        }
    }

    fn into_model(self) -> Result<MdpModel> {
        let (s_n, a_n) = (self.num_states, self.num_actions);
        if self.reward.len() != s_n * a_n {
            return Err(Error::DimensionMismatch(format!(
                "reward length {} != S*A = {}",
                self.reward.len(),
                s_n * a_n
            )));
        }
        let reward = Array2::from_shape_vec((s_n, a_n), self.reward)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        let transition = match self.transition {
            TransitionJson::Dense { dense } => {
                if dense.len() != a_n * s_n * s_n {
                    return Err(Error::DimensionMismatch(format!(
                        "dense transition length {} != A*S*S = {}",
                        dense.len(),
                        a_n * s_n * s_n
                    )));
                }
                Transition::Dense(
                    Array3::from_shape_vec((a_n, s_n, s_n), dense)
                        .map_err(|e| Error::DimensionMismatch(e.to_string()))?,
                )
            }
            TransitionJson::SparseUniform {
                support_size,
                support_prob,
                support_indices,
            } => {
                if support_size == 0 || (support_prob - 1.0 / support_size as f64).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "support_prob {support_prob} inconsistent with support_size {support_size}"
                    )));
                }
                Transition::SparseUniform {
                    num_states: s_n,
                    num_actions: a_n,
                    support_size,
                    support: support_indices,
                }
            }
        };
        MdpModel::new(transition, reward, self.discount)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_state_dense() -> MdpModel {
        // Two states, two actions; action 0 stays, action 1 swaps.
        let p = array![[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]],];
        let r = array![[1.0, 0.0], [0.5, 2.0]];
        MdpModel::new(Transition::Dense(p), r, 0.9).unwrap()
    }

    #[test]
    fn rejects_non_stochastic_row() {
        let p = array![[[0.5, 0.4], [0.0, 1.0]]];
        let r = array![[0.0], [0.0]];
        let err = MdpModel::new(Transition::Dense(p), r, 0.9).unwrap_err();
        assert!(matches!(
            err,
            Error::NonStochasticRow {
                action: 0,
                state: 0,
                ..
            }
        ));
    }

    #[test]
    fn rejects_negative_reward_and_bad_discount() {
        let p = array![[[1.0, 0.0], [0.0, 1.0]]];
        let r = array![[0.0], [-0.1]];
        assert!(matches!(
            MdpModel::new(Transition::Dense(p.clone()), r, 0.9),
            Err(Error::NegativeReward {
                state: 1,
                action: 0,
                ..
            })
        ));
        let r = array![[0.0], [0.0]];
        assert!(matches!(
            MdpModel::new(Transition::Dense(p.clone()), r.clone(), 1.0),
            Err(Error::DiscountOutOfRange(_))
        ));
        assert!(matches!(
            MdpModel::new(Transition::Dense(p), r, 0.0),
            Err(Error::DiscountOutOfRange(_))
        ));
    }

    #[test]
    fn rejects_oversized_support() {
        assert!(matches!(
            generate_random_mdp(3, 2, 4, 0.9, 0),
            Err(Error::SupportTooLarge { .. })
        ));
    }

    #[test]
    fn policy_floor_rejects_tiny_entries() {
        let m = array![[1e-301, 1.0 - 1e-301], [0.5, 0.5]];
        assert!(matches!(
            Policy::new(m),
            Err(Error::NonPositivePolicyEntry {
                state: 0,
                action: 0,
                ..
            })
        ));
    }

    #[test]
    fn apply_k_on_two_state_chain() {
        let mdp = two_state_dense();
        let v = array![1.0, 2.0];
        let kv = mdp.apply_k(&v).unwrap();
        // Action 0 stays: v_s - 0.9 v_s; action 1 swaps: v_s - 0.9 v_other.
        assert!((kv[[0, 0]] - (1.0 - 0.9)).abs() < 1e-15);
        assert!((kv[[0, 1]] - (1.0 - 1.8)).abs() < 1e-15);
        assert!((kv[[1, 0]] - (2.0 - 1.8)).abs() < 1e-15);
        assert!((kv[[1, 1]] - (2.0 - 0.9)).abs() < 1e-15);
    }

    #[test]
    fn apply_k_transpose_matches_hand_sum() {
        let mdp = two_state_dense();
        let u = array![[1.0, 2.0], [3.0, 4.0]];
        let ktu = mdp.apply_k_transpose(&u).unwrap();
        // out[s'] = utilde_{s'} - 0.9 * (stay mass into s' + swap mass into s')
        let expect0 = 3.0 - 0.9 * (1.0 + 4.0);
        let expect1 = 7.0 - 0.9 * (3.0 + 2.0);
        assert!((ktu[0] - expect0).abs() < 1e-15);
        assert!((ktu[1] - expect1).abs() < 1e-15);
    }

    #[test]
    fn evaluate_uniform_policy_closed_form() {
        // Symmetric 1-state-equivalent chain: uniform policy over 2 actions,
        // zero reward, gamma = 0.5, tau = 1 gives v = 2 log 2 per state.
        let p = array![[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]],];
        let r = array![[0.0, 0.0], [0.0, 0.0]];
        let mdp = MdpModel::new(Transition::Dense(p), r, 0.5).unwrap();
        let v = mdp.evaluate_policy(&Policy::uniform(2, 2), 1.0).unwrap();
        let expect = 2.0 * std::f64::consts::LN_2;
        assert!((v[0] - expect).abs() < 1e-12, "v[0] = {}", v[0]);
        assert!((v[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn shift_rewards_validates() {
        let mdp = two_state_dense();
        let shifted = mdp.shift_rewards(1.0).unwrap();
        assert!((shifted.reward()[[0, 1]] - 1.0).abs() < 1e-15);
        assert!(matches!(
            mdp.shift_rewards(-0.5),
            Err(Error::NegativeReward { .. })
        ));
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let a = generate_random_mdp(8, 3, 2, 0.9, 42).unwrap();
        let b = generate_random_mdp(8, 3, 2, 0.9, 42).unwrap();
        let c = generate_random_mdp(8, 3, 2, 0.9, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn json_round_trip_sparse_is_exact() {
        let mdp = generate_random_mdp(6, 2, 3, 0.95, 7).unwrap();
        let text = mdp.to_json_string().unwrap();
        let back = MdpModel::from_json_str(&text).unwrap();
        assert_eq!(mdp, back);
    }

    #[test]
    fn json_round_trip_dense_is_exact() {
        let mdp = two_state_dense();
        let back = MdpModel::from_json_str(&mdp.to_json_string().unwrap()).unwrap();
        assert_eq!(mdp, back);
    }
}
