//! Entropy-regularized MDP solvers built on a quadratically convexified
//! primal-dual objective.
//!
//! The pieces, bottom-up:
//!
//! * [`mdp`]: finite MDP models, the per-action operator K_a = I - gamma P_a,
//!   and regularized policy evaluation.
//! * [`oracle`]: ground truth via soft value iteration (the log-sum-exp
//!   Bellman operator is a gamma-contraction) plus the optimal duals of the
//!   standard and quadratic saddle objectives.
//! * [`objective`]: the saddle objectives E0 and E, their gradients, the
//!   entropy Hessian blocks, the interpolating metric, and the Lyapunov
//!   functions that certify convergence.
//! * [`solver`]: discrete NGAD and INGAD dynamics and the instrumented run
//!   loop with convergence metric and trace export.
//! * [`sampling`]: sample buffers, batched transition estimates, reward
//!   noise, and the stochastic solver variants.
//! * [`experiment`]: reproducible experiment harness used by the CLI.

// Validation guards are written `!(x > 0.0)` so NaN fails them; the
// suggested `partial_cmp` form hides that. Kernel loops index several
// parallel arrays by one subscript; zipping would obscure the addressing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
mod linalg;
pub mod mdp;
pub mod objective;
pub mod oracle;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
pub use experiment::{
    builtin_profile, run_experiment, run_report, run_sweep, sweep_csv_string, BufferSpec,
    ExperimentConfig, ExperimentReport, InstanceSpec, NoiseSpec, OracleSpec, RunReport, SolverSpec,
    SweepCell, SweepSpec,
};
pub use mdp::{
    generate_random_mdp, DualVariable, MdpModel, Policy, Transition, ValueFunction, WeightVector,
};
pub use oracle::{compute_oracle, OracleSolution};
pub use sampling::{
    collect_buffer, estimate_k_hat, noisy_reward, run_noisy_reward_ingad, run_sample_based_ingad,
    BatchEstimate, NoiseConfig, SampleBuffer, ZeroCoverageFallback,
};
pub use solver::{
    ingad_flow_rhs, ingad_step, ngad_flow_rhs, ngad_step, policy_error, run_solver, value_error,
    IterationRecord, SolverConfig, SolverState, SolverTrace, Variant,
};
