//! Independent reference implementations the contract tests compare
//! against. Everything here is written the slow, obvious way on dense
//! arrays; agreement with the library is the point, sharing code would
//! defeat it.

#![allow(dead_code)]

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ermdp::mdp::Transition;
use ermdp::{MdpModel, Policy, SolverConfig, SolverState};

/// Dense transition tensor regardless of storage.
pub fn dense_p(mdp: &MdpModel) -> Array3<f64> {
    mdp.transition().to_dense()
}

/// Truncated Neumann series for the regularized policy value:
/// v = sum_{t<T} gamma^t P_pi^t (r_pi - tau h_pi).
pub fn neumann_policy_value(
    mdp: &MdpModel,
    policy: &Policy,
    tau: f64,
    terms: usize,
) -> Array1<f64> {
    let p = dense_p(mdp);
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let mut p_pi = Array2::zeros((s_n, s_n));
    let mut g = Array1::zeros(s_n);
    for s in 0..s_n {
        for a in 0..a_n {
            let w = policy.matrix()[[s, a]];
            g[s] += w * (mdp.reward()[[s, a]] - tau * w.ln());
            for s2 in 0..s_n {
                p_pi[[s, s2]] += w * p[[a, s, s2]];
            }
        }
    }
    let mut v = Array1::zeros(s_n);
    let mut term = g.clone();
    for _ in 0..terms {
        v = &v + &term;
        term = mdp.discount() * p_pi.dot(&term);
    }
    v
}

/// K as an explicit (S*A) x S matrix, row index s*A + a.
pub fn dense_k_matrix(mdp: &MdpModel) -> Array2<f64> {
    let p = dense_p(mdp);
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let mut k = Array2::zeros((s_n * a_n, s_n));
    for s in 0..s_n {
        for a in 0..a_n {
            for s2 in 0..s_n {
                k[[s * a_n + a, s2]] = -mdp.discount() * p[[a, s, s2]];
            }
            k[[s * a_n + a, s]] += 1.0;
        }
    }
    k
}

/// Central finite differences of eval_E in both blocks.
pub fn finite_difference_grad(
    mdp: &MdpModel,
    tau: f64,
    alpha: f64,
    v: &Array1<f64>,
    u: &Array2<f64>,
    h: f64,
) -> (Array1<f64>, Array2<f64>) {
    let eval = |v: &Array1<f64>, u: &Array2<f64>| {
        ermdp::objective::eval_e(mdp, tau, alpha, v, u).expect("eval at probe point")
    };
    let mut gv = Array1::zeros(v.len());
    for i in 0..v.len() {
        let mut vp = v.clone();
        let mut vm = v.clone();
        vp[i] += h;
        vm[i] -= h;
        gv[i] = (eval(&vp, u) - eval(&vm, u)) / (2.0 * h);
    }
    let mut gu = Array2::zeros(u.dim());
    for s in 0..u.nrows() {
        for a in 0..u.ncols() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[[s, a]] += h;
            um[[s, a]] -= h;
            gu[[s, a]] = (eval(v, &up) - eval(v, &um)) / (2.0 * h);
        }
    }
    (gv, gu)
}

/// One NGAD step transcribed literally:
/// v+ = (1-eta) v + (eta/alpha) K^T exp(theta), then
/// theta+ = (1-eta) theta + eta lse(theta) + (eta/tau)(r - K v+).
pub fn literal_ngad_step(mdp: &MdpModel, cfg: &SolverConfig, state: &SolverState) -> SolverState {
    let k = dense_k_matrix(mdp);
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let u_flat: Vec<f64> = state.theta.iter().map(|&t| t.exp()).collect();
    let mut v_new = Array1::zeros(s_n);
    for s2 in 0..s_n {
        let mut acc = 0.0;
        for row in 0..s_n * a_n {
            acc += k[[row, s2]] * u_flat[row];
        }
        v_new[s2] = (1.0 - cfg.eta) * state.v[s2] + (cfg.eta / cfg.alpha) * acc;
    }
    let mut theta_new = Array2::zeros((s_n, a_n));
    for s in 0..s_n {
        let m = state
            .theta
            .row(s)
            .iter()
            .fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lse = m + state
            .theta
            .row(s)
            .iter()
            .map(|&x| (x - m).exp())
            .sum::<f64>()
            .ln();
        for a in 0..a_n {
            let mut kv = 0.0;
            for s2 in 0..s_n {
                kv += k[[s * a_n + a, s2]] * v_new[s2];
            }
            theta_new[[s, a]] = (1.0 - cfg.eta) * state.theta[[s, a]]
                + cfg.eta * lse
                + (cfg.eta / cfg.tau) * (mdp.reward()[[s, a]] - kv);
        }
    }
    SolverState {
        v: v_new,
        theta: theta_new,
    }
}

/// One INGAD step transcribed literally: the v update as NGAD, then per
/// state theta+ = theta - eta (I - c 1 pi^T) d with pi the softmax of the
/// pre-update theta row and d = theta - lse(theta) - (r - K v+)/tau.
pub fn literal_ingad_step(mdp: &MdpModel, cfg: &SolverConfig, state: &SolverState) -> SolverState {
    let k = dense_k_matrix(mdp);
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let u_flat: Vec<f64> = state.theta.iter().map(|&t| t.exp()).collect();
    let mut v_new = Array1::zeros(s_n);
    for s2 in 0..s_n {
        let mut acc = 0.0;
        for row in 0..s_n * a_n {
            acc += k[[row, s2]] * u_flat[row];
        }
        v_new[s2] = (1.0 - cfg.eta) * state.v[s2] + (cfg.eta / cfg.alpha) * acc;
    }
    let mut theta_new = Array2::zeros((s_n, a_n));
    for s in 0..s_n {
        let m = state
            .theta
            .row(s)
            .iter()
            .fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let exps: Vec<f64> = state.theta.row(s).iter().map(|&x| (x - m).exp()).collect();
        let se: f64 = exps.iter().sum();
        let lse = m + se.ln();
        let pi: Vec<f64> = exps.iter().map(|&e| e / se).collect();
        let mut d = vec![0.0; a_n];
        for a in 0..a_n {
            let mut kv = 0.0;
            for s2 in 0..s_n {
                kv += k[[s * a_n + a, s2]] * v_new[s2];
            }
            d[a] = state.theta[[s, a]] - lse - (mdp.reward()[[s, a]] - kv) / cfg.tau;
        }
        // Explicit projector matrix M = I - c 1 pi^T applied to d.
        for a in 0..a_n {
            let mut md = 0.0;
            for b in 0..a_n {
                let m_ab = if a == b { 1.0 } else { 0.0 } - cfg.c * pi[b];
                md += m_ab * d[b];
            }
            theta_new[[s, a]] = state.theta[[s, a]] - cfg.eta * md;
        }
    }
    SolverState {
        v: v_new,
        theta: theta_new,
    }
}

/// Random strictly positive dual and unconstrained value for probe points.
pub fn random_point(rng: &mut ChaCha8Rng, s_n: usize, a_n: usize) -> (Array1<f64>, Array2<f64>) {
    let v = Array1::from_shape_fn(s_n, |_| rng.random_range(-1.0..1.0));
    let u = Array2::from_shape_fn((s_n, a_n), |_| rng.random_range(-1.5..0.5f64).exp());
    (v, u)
}

/// Random point on the probability simplex.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln() + 1e-12).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hand-built dense two-state chain used across contract tests.
pub fn two_state_chain() -> MdpModel {
    // Action 0 stays, action 1 swaps the two states.
    let mut p = Array3::zeros((2, 2, 2));
    p[[0, 0, 0]] = 1.0;
    p[[0, 1, 1]] = 1.0;
    p[[1, 0, 1]] = 1.0;
    p[[1, 1, 0]] = 1.0;
    let r = ndarray::array![[1.0, 0.5], [0.25, 2.0]];
    MdpModel::new(Transition::Dense(p), r, 0.5).unwrap()
}

pub fn max_abs_diff<'a, I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (&'a f64, &'a f64)>,
{
    pairs
        .into_iter()
        .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()))
}
