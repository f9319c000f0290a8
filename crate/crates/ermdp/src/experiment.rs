//! Experiment harness: instance generation, oracle caching, solver runs,
//! trace emission, and comparison reports.
//!
//! Three built-in studies plus a custom mode:
//!
//! * exp1: complete information, NGAD vs INGAD iteration counts.
//! * exp2: reward noise (sigma grid), fixed iteration budget.
//! * exp3: sampled transitions from an offline buffer, fixed budget.
//!
//! The harness does no numerics of its own beyond aggregation (medians,
//! ratios); every reported number comes from the solver, objective, or
//! oracle modules. All outputs are deterministic functions of the config:
//! rerunning an experiment reproduces every file byte for byte.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::MdpModel;
use crate::oracle::{compute_oracle, OracleSolution};
use crate::sampling::{
    collect_buffer, run_noisy_reward_ingad, run_sample_based_ingad, NoiseConfig,
    ZeroCoverageFallback,
};
use crate::solver::{
    policy_error, run_solver, value_error, write_atomic, DiagnosticsFlags, SolverConfig,
    SolverState, SolverTrace, Variant,
};
use crate::{generate_random_mdp, objective};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Random-instance family parameters; one run set per seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub support_size: usize,
    pub discount: f64,
    pub seeds: Vec<u64>,
}

/// Ground-truth solve parameters (weight vector is all ones).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSpec {
    pub tau: f64,
    pub alpha: f64,
    /// Value-iteration tolerance; `None` = scale-aware default.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default = "default_oracle_max_iter")]
    pub max_iter: usize,
}

fn default_oracle_max_iter() -> usize {
    1_000_000
}

/// One solver run description; alpha and tau come from the oracle spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSpec {
    pub variant: Variant,
    pub eta: f64,
    #[serde(default)]
    pub c: f64,
    /// 0 disables early stopping (fixed-budget run).
    pub eps_tol: f64,
    pub max_iter: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    10
}

impl SolverSpec {
    pub fn to_config(&self, oracle: &OracleSpec) -> SolverConfig {
        SolverConfig {
            alpha: oracle.alpha,
            tau: oracle.tau,
            eta: self.eta,
            c: self.c,
            eps_tol: self.eps_tol,
            max_iter: self.max_iter,
            record_every: self.record_every,
            diagnostics: DiagnosticsFlags::default(),
        }
    }
}

/// Reward-noise grid for the noisy study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigmas: Vec<f64>,
    pub seed: u64,
}

/// Offline-buffer parameters for the sample-based study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BufferSpec {
    pub num_samples: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub fallback: ZeroCoverageFallback,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One of "exp1", "exp2", "exp3", "custom".
    pub exp: String,
    pub instance: InstanceSpec,
    pub oracle: OracleSpec,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub buffer: Option<BufferSpec>,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Whether a non-converged run should count as failure; defaults to
    /// true except for the fixed-budget studies exp2 and exp3.
    #[serde(default)]
    pub expect_convergence: Option<bool>,
}

impl ExperimentConfig {
    pub fn expects_convergence(&self) -> bool {
        self.expect_convergence
            .unwrap_or(!matches!(self.exp.as_str(), "exp2" | "exp3"))
    }

    pub fn validate(&self) -> Result<()> {
        match self.exp.as_str() {
            "exp1" | "exp2" | "exp3" | "custom" => {}
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown experiment id {other:?} (want exp1|exp2|exp3|custom)"
                )))
            }
        }
        if self.instance.seeds.is_empty() {
            return Err(Error::InvalidConfig("instance.seeds is empty".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidConfig("no solver specs".into()));
        }
        if self.exp == "exp2" && self.noise.is_none() {
            return Err(Error::InvalidConfig("exp2 requires a noise spec".into()));
        }
        if self.exp == "exp3" && self.buffer.is_none() {
            return Err(Error::InvalidConfig("exp3 requires a buffer spec".into()));
        }
        if self.noise.is_some() && self.buffer.is_some() {
            return Err(Error::InvalidConfig(
                "noise and buffer specs are mutually exclusive".into(),
            ));
        }
        if let Some(noise) = &self.noise {
            if noise.sigmas.is_empty() {
                return Err(Error::InvalidConfig("noise.sigmas is empty".into()));
            }
            if noise.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(Error::InvalidConfig("noise sigma must be >= 0".into()));
            }
        }
        if let Some(buf) = &self.buffer {
            let cells = self.instance.num_states * self.instance.num_actions;
            if buf.num_samples < cells {
                return Err(Error::InsufficientSamples {
                    needed: cells,
                    got: buf.num_samples,
                });
            }
            if buf.batch_size == 0 || buf.batch_size > buf.num_samples {
                return Err(Error::InvalidConfig(format!(
                    "batch_size = {} must lie in [1, num_samples]",
                    buf.batch_size
                )));
            }
        }
        let stochastic = self.noise.is_some() || self.buffer.is_some();
        for spec in &self.solvers {
            if stochastic && spec.variant != Variant::Ingad {
                return Err(Error::InvalidConfig(
                    "noisy and sample-based runs support the ingad variant only".into(),
                ));
            }
            spec.to_config(&self.oracle).validate()?;
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<ExperimentConfig> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// The built-in study profiles. "exp3" is an alias for the desk-scale
/// profile; "exp3-paper" runs the full-size buffer (slow, not part of the
/// test gate).
pub fn builtin_profile(name: &str) -> Result<ExperimentConfig> {
    let exp1_instance = InstanceSpec {
        num_states: 200,
        num_actions: 50,
        support_size: 20,
        discount: 0.99,
        seeds: vec![1, 2, 3],
    };
    match name {
        "exp1" => Ok(ExperimentConfig {
            exp: "exp1".into(),
            instance: exp1_instance,
            oracle: OracleSpec {
                tau: 0.01,
                alpha: 0.1,
                tol: None,
                max_iter: 1_000_000,
            },
            solvers: vec![
                SolverSpec {
                    variant: Variant::Ngad,
                    eta: 3e-4,
                    c: 0.0,
                    eps_tol: 1e-5,
                    max_iter: 200_000,
                    record_every: 10,
                },
                SolverSpec {
                    variant: Variant::Ingad,
                    eta: 8e-3,
                    c: 0.98,
                    eps_tol: 1e-5,
                    max_iter: 20_000,
                    record_every: 10,
                },
            ],
            noise: None,
            buffer: None,
            output_dir: None,
            expect_convergence: None,
        }),
        "exp2" => Ok(ExperimentConfig {
            exp: "exp2".into(),
            instance: exp1_instance,
            oracle: OracleSpec {
                tau: 0.1,
                alpha: 0.1,
                tol: None,
                max_iter: 1_000_000,
            },
            solvers: vec![SolverSpec {
                variant: Variant::Ingad,
                eta: 0.01,
                c: 0.9,
                eps_tol: 0.0,
                max_iter: 3000,
                record_every: 10,
            }],
            noise: Some(NoiseSpec {
                sigmas: vec![0.1, 0.2],
                seed: 1000,
            }),
            buffer: None,
            output_dir: None,
            expect_convergence: None,
        }),
        "exp3" | "exp3-desk" | "exp3-paper" => {
            let paper_scale = name == "exp3-paper";
            Ok(ExperimentConfig {
                exp: "exp3".into(),
                instance: InstanceSpec {
                    discount: 0.9,
                    seeds: vec![1],
                    ..exp1_instance
                },
                oracle: OracleSpec {
                    tau: 0.1,
                    alpha: 0.1,
                    tol: None,
                    max_iter: 1_000_000,
                },
                solvers: vec![SolverSpec {
                    variant: Variant::Ingad,
                    eta: 1e-3,
                    c: 0.9,
                    eps_tol: 0.0,
                    max_iter: 12_000,
                    record_every: 10,
                }],
                noise: None,
                buffer: Some(BufferSpec {
                    num_samples: if paper_scale { 100_000_000 } else { 10_000_000 },
                    batch_size: if paper_scale { 100_000 } else { 10_000 },
                    seed: 500,
                    fallback: ZeroCoverageFallback::FallbackBuffer,
                }),
                output_dir: None,
                expect_convergence: None,
            })
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown profile {other:?} (want exp1|exp2|exp3|exp3-desk|exp3-paper)"
        ))),
    }
}

/// Per-run comparison entry. Key set is fixed; schema changes bump
/// [`REPORT_SCHEMA_VERSION`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub exp: String,
    pub variant: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_value_error: Option<f64>,
    pub final_policy_error: Option<f64>,
    pub lyapunov_initial: Option<f64>,
    pub lyapunov_final: Option<f64>,
    pub monotone_fraction: Option<f64>,
}

/// Experiment-level report: one entry per run, keyed by label, plus
/// aggregate statistics (ratios and medians only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub exp: String,
    pub runs: BTreeMap<String, RunReport>,
    pub summary: BTreeMap<String, f64>,
}

/// SplitMix64-style mix of two seeds into one stream key.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lyapunov_at(
    state: &SolverState,
    sol: &OracleSolution,
    cfg: &SolverConfig,
    variant: Variant,
) -> Option<f64> {
    let u = state.dual();
    match variant {
        Variant::Ngad => objective::lyapunov_l(&state.v, &u, sol, cfg.alpha, cfg.tau).ok(),
        Variant::Ingad => objective::lyapunov_lc(&state.v, &u, sol, cfg.alpha, cfg.tau, cfg.c).ok(),
    }
}

/// Build the fixed-schema comparison entry for one finished run.
pub fn run_report(
    exp: &str,
    trace: &SolverTrace,
    sol: &OracleSolution,
    cfg: &SolverConfig,
) -> RunReport {
    let init = SolverState::zeros(sol.pi_star.num_states(), sol.pi_star.num_actions());
    RunReport {
        exp: exp.to_string(),
        variant: trace.variant.to_string(),
        iterations: trace.iterations,
        converged: trace.converged,
        final_value_error: Some(value_error(&trace.final_state.v, sol)),
        final_policy_error: trace
            .final_state
            .policy()
            .ok()
            .map(|pi| policy_error(&pi, sol)),
        lyapunov_initial: lyapunov_at(&init, sol, cfg, trace.variant),
        lyapunov_final: lyapunov_at(&trace.final_state, sol, cfg, trace.variant),
        monotone_fraction: trace.monotone_fraction(),
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    xs.retain(|x| x.is_finite());
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

/// Median of the last decile of recorded Lyapunov values over the median of
/// the first decile; `None` without enough records.
fn lyapunov_decile_ratio(trace: &SolverTrace) -> Option<f64> {
    let vals: Vec<f64> = trace.records.iter().filter_map(|r| r.lyapunov).collect();
    if vals.len() < 10 {
        return None;
    }
    let k = (vals.len() / 10).max(1);
    let first = median(vals[..k].to_vec())?;
    let last = median(vals[vals.len() - k..].to_vec())?;
    Some(last / first)
}

fn sigma_label(sigma: f64) -> String {
    format!("{sigma}")
}

struct RunOutput {
    label: String,
    trace: SolverTrace,
    config: SolverConfig,
    sigma: Option<f64>,
}

/// Run every (seed, solver, regime) cell of `config`, writing instances,
/// oracle caches, traces, and `report.json` under `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let traces_dir = out_dir.join("traces");
    let instances_dir = out_dir.join("instances");
    std::fs::create_dir_all(&traces_dir)?;
    std::fs::create_dir_all(&instances_dir)?;
    write_atomic(
        out_dir.join("config.json"),
        config.to_json_string()?.as_bytes(),
    )?;

    let mut outputs: Vec<RunOutput> = Vec::new();
    let mut runs: BTreeMap<String, RunReport> = BTreeMap::new();
    for &seed in &config.instance.seeds {
        let inst = &config.instance;
        let mdp = generate_random_mdp(
            inst.num_states,
            inst.num_actions,
            inst.support_size,
            inst.discount,
            seed,
        )?;
        write_atomic(
            instances_dir.join(format!("mdp_seed{seed}.json")),
            mdp.to_json_string()?.as_bytes(),
        )?;
        let sol = compute_oracle(
            &mdp,
            config.oracle.tau,
            config.oracle.alpha,
            None,
            config.oracle.tol,
            config.oracle.max_iter,
        )?;
        write_atomic(
            instances_dir.join(format!("oracle_seed{seed}.json")),
            sol.to_json_string()?.as_bytes(),
        )?;

        let buffer = match &config.buffer {
            Some(spec) => Some(collect_buffer(
                &mdp,
                spec.num_samples,
                mix_seed(spec.seed, seed),
            )?),
            None => None,
        };

        let mut seed_outputs: Vec<RunOutput> = Vec::new();
        for spec in &config.solvers {
            let cfg = spec.to_config(&config.oracle);
            if let Some(noise) = &config.noise {
                for (i, &sigma) in noise.sigmas.iter().enumerate() {
                    let noise_cfg = NoiseConfig {
                        sigma,
                        seed: mix_seed(noise.seed, mix_seed(seed, i as u64)),
                    };
                    let trace = run_noisy_reward_ingad(&mdp, &noise_cfg, &cfg, None, Some(&sol))?;
                    seed_outputs.push(RunOutput {
                        label: format!("seed{seed}_sigma{}_{}", sigma_label(sigma), spec.variant),
                        trace,
                        config: cfg.clone(),
                        sigma: Some(sigma),
                    });
                }
            } else if let Some(buf_spec) = &config.buffer {
                let buffer = buffer.as_ref().expect("buffer collected");
                let trace = run_sample_based_ingad(
                    &mdp,
                    buffer,
                    buf_spec.batch_size,
                    mix_seed(buf_spec.seed, mix_seed(seed, 0x5A)),
                    buf_spec.fallback,
                    &cfg,
                    None,
                    Some(&sol),
                )?;
                seed_outputs.push(RunOutput {
                    label: format!("seed{seed}_sampled_{}", spec.variant),
                    trace,
                    config: cfg,
                    sigma: None,
                });
            } else {
                let trace = run_solver(&mdp, spec.variant, &cfg, None, Some(&sol))?;
                seed_outputs.push(RunOutput {
                    label: format!("seed{seed}_{}", spec.variant),
                    trace,
                    config: cfg,
                    sigma: None,
                });
            }
        }

        for out in &seed_outputs {
            out.trace
                .write_csv(traces_dir.join(format!("{}.csv", out.label)))?;
            out.trace
                .write_sidecar(traces_dir.join(format!("{}.meta.json", out.label)))?;
            runs.insert(
                out.label.clone(),
                run_report(&config.exp, &out.trace, &sol, &out.config),
            );
        }
        outputs.extend(seed_outputs);
    }

    let summary = build_summary(config, &outputs, &runs);
    let report = ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        exp: config.exp.clone(),
        runs,
        summary,
    };
    write_atomic(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(report)
}

fn build_summary(
    config: &ExperimentConfig,
    outputs: &[RunOutput],
    runs: &BTreeMap<String, RunReport>,
) -> BTreeMap<String, f64> {
    let mut summary = BTreeMap::new();
    match config.exp.as_str() {
        "exp1" => {
            let mut ratios = Vec::new();
            for &seed in &config.instance.seeds {
                let ngad = runs.get(&format!("seed{seed}_ngad")).map(|r| r.iterations);
                let ingad = runs.get(&format!("seed{seed}_ingad")).map(|r| r.iterations);
                if let (Some(n), Some(i)) = (ngad, ingad) {
                    if i > 0 {
                        let ratio = n as f64 / i as f64;
                        summary.insert(format!("iteration_ratio_seed{seed}"), ratio);
                        ratios.push(ratio);
                    }
                }
            }
            if let Some(min) = ratios.iter().copied().reduce(f64::min) {
                summary.insert("min_iteration_ratio".into(), min);
            }
        }
        "exp2" => {
            if let Some(noise) = &config.noise {
                for &sigma in &noise.sigmas {
                    let of_sigma: Vec<&RunOutput> =
                        outputs.iter().filter(|o| o.sigma == Some(sigma)).collect();
                    let label = sigma_label(sigma);
                    let values: Vec<f64> = of_sigma
                        .iter()
                        .filter_map(|o| runs[&o.label].final_value_error)
                        .collect();
                    let policies: Vec<f64> = of_sigma
                        .iter()
                        .filter_map(|o| runs[&o.label].final_policy_error)
                        .collect();
                    let deciles: Vec<f64> = of_sigma
                        .iter()
                        .filter_map(|o| lyapunov_decile_ratio(&o.trace))
                        .collect();
                    if let Some(m) = median(values) {
                        summary.insert(format!("median_final_value_error_sigma{label}"), m);
                    }
                    if let Some(m) = median(policies) {
                        summary.insert(format!("median_final_policy_error_sigma{label}"), m);
                    }
                    if let Some(m) = median(deciles) {
                        summary.insert(format!("median_lyapunov_decile_ratio_sigma{label}"), m);
                    }
                }
            }
        }
        _ => {
            let values: Vec<f64> = runs.values().filter_map(|r| r.final_value_error).collect();
            let policies: Vec<f64> = runs.values().filter_map(|r| r.final_policy_error).collect();
            if let Some(m) = median(values) {
                summary.insert("median_final_value_error".into(), m);
            }
            if let Some(m) = median(policies) {
                summary.insert("median_final_policy_error".into(), m);
            }
        }
    }
    summary
}

/// One grid cell of a learning-rate sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub c: f64,
    pub eta: f64,
    pub converged: bool,
    /// True when the run aborted with a non-finite state.
    pub diverged: bool,
    pub iterations: usize,
    pub final_q: Option<f64>,
    /// Largest converged eta for this c.
    pub largest_stable: bool,
}

/// Grid parameters for [`run_sweep`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub etas: Vec<f64>,
    pub cs: Vec<f64>,
    pub variant: Variant,
    pub eps_tol: f64,
    pub max_iter: usize,
}

/// Run every (c, eta) cell with diagnostics off, marking per c the largest
/// eta that converged. Divergence (non-finite state) is recorded, not
/// propagated.
pub fn run_sweep(mdp: &MdpModel, alpha: f64, tau: f64, spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    if spec.etas.is_empty() || spec.cs.is_empty() {
        return Err(Error::InvalidConfig("empty sweep grid".into()));
    }
    let flags = DiagnosticsFlags {
        lyapunov: false,
        policy_error: false,
        value_error: false,
        fo_residual: false,
    };
    let mut cells = Vec::new();
    for &c in &spec.cs {
        let start = cells.len();
        for &eta in &spec.etas {
            let cfg = SolverConfig {
                alpha,
                tau,
                eta,
                c,
                eps_tol: spec.eps_tol,
                max_iter: spec.max_iter,
                record_every: spec.max_iter,
                diagnostics: flags,
            };
            let cell = match run_solver(mdp, spec.variant, &cfg, None, None) {
                Ok(trace) => SweepCell {
                    c,
                    eta,
                    converged: trace.converged,
                    diverged: false,
                    iterations: trace.iterations,
                    final_q: Some(trace.final_q),
                    largest_stable: false,
                },
                Err(Error::NonFiniteState { iteration }) => SweepCell {
                    c,
                    eta,
                    converged: false,
                    diverged: true,
                    iterations: iteration,
                    final_q: None,
                    largest_stable: false,
                },
                Err(e) => return Err(e),
            };
            cells.push(cell);
        }
        let best = cells[start..]
            .iter()
            .enumerate()
            .filter(|(_, cell)| cell.converged)
            .max_by(|(_, a), (_, b)| a.eta.partial_cmp(&b.eta).expect("finite eta"))
            .map(|(i, _)| start + i);
        if let Some(i) = best {
            cells[i].largest_stable = true;
        }
    }
    Ok(cells)
}

/// Plot-ready sweep table; schema `c,eta,converged,diverged,iterations,final_q,largest_stable`.
pub fn sweep_csv_string(cells: &[SweepCell]) -> String {
    let mut out = String::from("c,eta,converged,diverged,iterations,final_q,largest_stable\n");
    for cell in cells {
        let q = cell
            .final_q
            .map(|x| format!("{x:.16e}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cell.c,
            cell.eta,
            cell.converged,
            cell.diverged,
            cell.iterations,
            q,
            cell.largest_stable
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            exp: "exp1".into(),
            instance: InstanceSpec {
                num_states: 6,
                num_actions: 3,
                support_size: 2,
                discount: 0.9,
                seeds: vec![1, 2],
            },
            oracle: OracleSpec {
                tau: 0.1,
                alpha: 0.1,
                tol: None,
                max_iter: 100_000,
            },
            solvers: vec![
                SolverSpec {
                    variant: Variant::Ngad,
                    eta: 5e-3,
                    c: 0.0,
                    eps_tol: 1e-6,
                    max_iter: 100_000,
                    record_every: 10,
                },
                SolverSpec {
                    variant: Variant::Ingad,
                    eta: 2e-2,
                    c: 0.9,
                    eps_tol: 1e-6,
                    max_iter: 100_000,
                    record_every: 10,
                },
            ],
            noise: None,
            buffer: None,
            output_dir: None,
            expect_convergence: None,
        }
    }

    #[test]
    fn profiles_validate() {
        for name in ["exp1", "exp2", "exp3-desk", "exp3-paper"] {
            builtin_profile(name).unwrap().validate().unwrap();
        }
        assert!(builtin_profile("exp9").is_err());
    }

    #[test]
    fn config_json_round_trip_rejects_unknown_fields() {
        let cfg = builtin_profile("exp2").unwrap();
        let text = cfg.to_json_string().unwrap();
        let back = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(back.exp, "exp2");
        assert!(!back.expects_convergence());
        let bad = text.replace("\"exp\"", "\"experiment_name\"");
        assert!(ExperimentConfig::from_json_str(&bad).is_err());
    }

    #[test]
    fn validation_catches_inconsistent_specs() {
        let mut cfg = tiny_config();
        cfg.exp = "exp2".into();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let mut cfg = tiny_config();
        cfg.exp = "exp3".into();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let mut cfg = tiny_config();
        cfg.noise = Some(NoiseSpec {
            sigmas: vec![0.1],
            seed: 1,
        });
        assert!(cfg.validate().is_err(), "ngad cannot run under noise");
    }

    #[test]
    fn mix_seed_separates_streams() {
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_ne!(mix_seed(1, 2), mix_seed(1, 3));
        assert_eq!(mix_seed(7, 9), mix_seed(7, 9));
    }

    #[test]
    fn tiny_experiment_writes_reports_and_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        let out1 = dir.path().join("a");
        let out2 = dir.path().join("b");
        let cfg = tiny_config();
        let report1 = run_experiment(&cfg, &out1).unwrap();
        let report2 = run_experiment(&cfg, &out2).unwrap();
        assert_eq!(
            serde_json::to_string(&report1).unwrap(),
            serde_json::to_string(&report2).unwrap()
        );
        assert_eq!(report1.runs.len(), 4);
        assert!(report1.summary.contains_key("min_iteration_ratio"));
        for run in report1.runs.values() {
            assert!(run.converged);
            assert!(run.final_value_error.unwrap() < 1e-3);
        }
        for name in [
            "traces/seed1_ngad.csv",
            "traces/seed1_ingad.csv",
            "report.json",
            "config.json",
            "instances/mdp_seed1.json",
            "instances/oracle_seed2.json",
        ] {
            let a = std::fs::read(out1.join(name)).unwrap();
            let b = std::fs::read(out2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn sweep_flags_largest_stable_eta_and_survives_divergence() {
        let mdp = crate::generate_random_mdp(6, 3, 2, 0.9, 3).unwrap();
        let spec = SweepSpec {
            etas: vec![0.01, 0.05, 50.0],
            cs: vec![0.0, 0.9],
            variant: Variant::Ingad,
            eps_tol: 1e-6,
            max_iter: 30_000,
        };
        let cells = run_sweep(&mdp, 0.1, 0.1, &spec).unwrap();
        assert_eq!(cells.len(), 6);
        let diverged: Vec<&SweepCell> = cells.iter().filter(|c| c.diverged).collect();
        assert!(!diverged.is_empty(), "eta=50 should blow up");
        for c in [0.0, 0.9] {
            let stable: Vec<&SweepCell> = cells
                .iter()
                .filter(|cell| cell.c == c && cell.largest_stable)
                .collect();
            assert_eq!(stable.len(), 1, "exactly one largest stable eta per c");
            assert!(stable[0].converged);
        }
        let csv = sweep_csv_string(&cells);
        assert!(csv.starts_with("c,eta,converged,diverged,iterations,final_q,largest_stable\n"));
        assert_eq!(csv.lines().count(), 7);
    }
}
