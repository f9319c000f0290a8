//! Command-line front end: instance generation, oracle solves, single
//! solver runs, the built-in experiment profiles, and learning-rate sweeps.
//!
//! Exit codes: 0 success, 2 non-convergence (when convergence was
//! expected), 3 numerical divergence, 4 I/O or configuration error.
//!
//! Relative output paths are resolved under `ERMDP_OUT_ROOT` when that
//! variable is set; input paths are taken as given.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ermdp::objective;
use ermdp::solver::write_atomic;
use ermdp::{
    builtin_profile, compute_oracle, generate_random_mdp, run_experiment, run_report, run_solver,
    run_sweep, sweep_csv_string, Error, ExperimentConfig, MdpModel, OracleSolution, SolverConfig,
    SweepSpec, Variant, WeightVector,
};

#[derive(Parser)]
#[command(
    name = "ermdp",
    version,
    about = "Entropy-regularized MDP solver and experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random sparse-transition instance and write it as JSON.
    Generate(GenerateArgs),
    /// Solve an instance to ground truth and cache the oracle solution.
    Oracle(OracleArgs),
    /// Run one solver variant on an instance; emit trace CSV and summary.
    Solve(SolveArgs),
    /// Run a built-in experiment profile or a custom config file.
    Experiment(ExperimentArgs),
    /// Grid-sweep learning rates; emit a CSV marking the largest stable
    /// eta per c.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    #[arg(long)]
    support: usize,
    #[arg(long)]
    discount: f64,
    #[arg(long)]
    seed: u64,
    /// Output MDP JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Input MDP JSON path.
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Value-iteration tolerance; default scales with the reward bound.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    /// Output oracle JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Input MDP JSON path.
    #[arg(long)]
    mdp: PathBuf,
    /// Oracle JSON path; enables error and Lyapunov diagnostics and
    /// supplies default alpha and tau.
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[arg(long)]
    variant: Variant,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    /// Defaults to the oracle file's alpha, else 0.1.
    #[arg(long)]
    alpha: Option<f64>,
    /// Defaults to the oracle file's tau, else 0.01.
    #[arg(long)]
    tau: Option<f64>,
    /// 0 disables early stopping.
    #[arg(long, default_value_t = 1e-5)]
    eps_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    /// Output directory for the trace files.
    #[arg(long)]
    out_dir: PathBuf,
    /// Stem for the emitted files (default: the variant name).
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Built-in profile: exp1, exp2, exp3 (desk scale), exp3-paper.
    #[arg(long, conflicts_with = "config")]
    profile: Option<String>,
    /// Experiment config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's output_dir, else runs/<exp>).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    support: Option<usize>,
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Applies to every solver spec in the config.
    #[arg(long)]
    eta: Option<f64>,
    /// Applies to every solver spec in the config.
    #[arg(long)]
    c: Option<f64>,
    /// Applies to every solver spec in the config.
    #[arg(long)]
    eps_tol: Option<f64>,
    /// Applies to every solver spec in the config.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Applies to every solver spec in the config.
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    num_samples: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    buffer_seed: Option<u64>,
    #[arg(long)]
    expect_convergence: Option<bool>,
}

#[derive(Args)]
struct SweepArgs {
    /// Input MDP JSON path.
    #[arg(long)]
    mdp: PathBuf,
    /// Oracle JSON path; supplies default alpha and tau.
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[arg(long)]
    variant: Variant,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    etas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    cs: Vec<f64>,
    #[arg(long, default_value_t = 1e-5)]
    eps_tol: f64,
    /// Reduced budget per cell; cells that need more count as not converged.
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_IO_OR_CONFIG: u8 = 4;

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NonFiniteState { .. } => EXIT_DIVERGENCE,
        Error::MaxIterExceeded { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_IO_OR_CONFIG,
    }
}

/// Relative output paths land under ERMDP_OUT_ROOT when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("ERMDP_OUT_ROOT") {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}

fn ensure_parent(path: &Path) -> ermdp::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> ermdp::Result<u8> {
    let mdp = generate_random_mdp(
        args.states,
        args.actions,
        args.support,
        args.discount,
        args.seed,
    )?;
    let out = resolve_out(&args.out);
    ensure_parent(&out)?;
    write_atomic(&out, mdp.to_json_string()?.as_bytes())?;
    let mean = mdp.reward().mean().unwrap_or(0.0);
    println!(
        "mdp {}x{} support {} discount {} seed {}",
        args.states, args.actions, args.support, args.discount, args.seed
    );
    println!("reward mean {mean:.6}");
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_oracle(args: &OracleArgs) -> ermdp::Result<u8> {
    let mdp = MdpModel::load_json(&args.mdp)?;
    let sol = compute_oracle(&mdp, args.tau, args.alpha, None, args.tol, args.max_iter)?;
    let out = resolve_out(&args.out);
    ensure_parent(&out)?;
    write_atomic(&out, sol.to_json_string()?.as_bytes())?;
    let weight = WeightVector::ones(mdp.num_states());
    let std_res = objective::first_order_residual_standard(
        &mdp,
        args.tau,
        &weight,
        &sol.v_star,
        &sol.u_circ,
    )?;
    let quad_res =
        objective::first_order_residual(&mdp, args.tau, args.alpha, &sol.v_star, &sol.u_star)?;
    println!("standard first-order residual {std_res:.3e}");
    println!("quadratic first-order residual {quad_res:.3e}");
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_solve(args: &SolveArgs) -> ermdp::Result<u8> {
    let mdp = MdpModel::load_json(&args.mdp)?;
    let sol = match &args.oracle {
        Some(path) => Some(OracleSolution::load_json(path)?),
        None => None,
    };
    let config = SolverConfig {
        alpha: args.alpha.or(sol.as_ref().map(|s| s.alpha)).unwrap_or(0.1),
        tau: args.tau.or(sol.as_ref().map(|s| s.tau)).unwrap_or(0.01),
        eta: args.eta,
        c: args.c,
        eps_tol: args.eps_tol,
        max_iter: args.max_iter,
        record_every: args.record_every,
        ..SolverConfig::default()
    };
    let trace = run_solver(&mdp, args.variant, &config, None, sol.as_ref())?;

    let out_dir = resolve_out(&args.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let label = args
        .label
        .clone()
        .unwrap_or_else(|| args.variant.to_string());
    trace.write_csv(out_dir.join(format!("{label}.csv")))?;
    trace.write_sidecar(out_dir.join(format!("{label}.meta.json")))?;
    let summary = match &sol {
        Some(sol) => serde_json::to_string_pretty(&run_report("custom", &trace, sol, &config))?,
        None => trace.sidecar_json_string()?,
    };
    write_atomic(
        out_dir.join(format!("{label}.summary.json")),
        summary.as_bytes(),
    )?;

    println!(
        "{} iterations {} converged {} final_q {:.3e}",
        args.variant, trace.iterations, trace.converged, trace.final_q
    );
    println!("wrote {}", out_dir.join(format!("{label}.csv")).display());
    Ok(if trace.converged {
        0
    } else {
        EXIT_NONCONVERGENCE
    })
}

fn apply_overrides(mut cfg: ExperimentConfig, args: &ExperimentArgs) -> ExperimentConfig {
    if let Some(seeds) = &args.seeds {
        cfg.instance.seeds = seeds.clone();
    }
    if let Some(x) = args.states {
        cfg.instance.num_states = x;
    }
    if let Some(x) = args.actions {
        cfg.instance.num_actions = x;
    }
    if let Some(x) = args.support {
        cfg.instance.support_size = x;
    }
    if let Some(x) = args.discount {
        cfg.instance.discount = x;
    }
    if let Some(x) = args.tau {
        cfg.oracle.tau = x;
    }
    if let Some(x) = args.alpha {
        cfg.oracle.alpha = x;
    }
    for spec in &mut cfg.solvers {
        if let Some(x) = args.eta {
            spec.eta = x;
        }
        if let Some(x) = args.c {
            spec.c = x;
        }
        if let Some(x) = args.eps_tol {
            spec.eps_tol = x;
        }
        if let Some(x) = args.max_iter {
            spec.max_iter = x;
        }
        if let Some(x) = args.record_every {
            spec.record_every = x;
        }
    }
    if let Some(sigmas) = &args.sigmas {
        if let Some(noise) = &mut cfg.noise {
            noise.sigmas = sigmas.clone();
        }
    }
    if let Some(x) = args.noise_seed {
        if let Some(noise) = &mut cfg.noise {
            noise.seed = x;
        }
    }
    if let Some(x) = args.num_samples {
        if let Some(buf) = &mut cfg.buffer {
            buf.num_samples = x;
        }
    }
    if let Some(x) = args.batch_size {
        if let Some(buf) = &mut cfg.buffer {
            buf.batch_size = x;
        }
    }
    if let Some(x) = args.buffer_seed {
        if let Some(buf) = &mut cfg.buffer {
            buf.seed = x;
        }
    }
    if args.expect_convergence.is_some() {
        cfg.expect_convergence = args.expect_convergence;
    }
    cfg
}

fn cmd_experiment(args: &ExperimentArgs) -> ermdp::Result<u8> {
    let base = match (&args.profile, &args.config) {
        (Some(name), None) => builtin_profile(name)?,
        (None, Some(path)) => ExperimentConfig::load_json(path)?,
        (None, None) => return Err(Error::InvalidConfig("pass --profile or --config".into())),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let config = apply_overrides(base, args);
    config.validate()?;

    let out_dir = match (&args.out_dir, &config.output_dir) {
        (Some(dir), _) => resolve_out(dir),
        (None, Some(dir)) => resolve_out(Path::new(dir)),
        (None, None) => resolve_out(&PathBuf::from("runs").join(&config.exp)),
    };
    let report = run_experiment(&config, &out_dir)?;

    for (label, run) in &report.runs {
        println!(
            "{label}: iterations {} converged {} value_error {} policy_error {}",
            run.iterations,
            run.converged,
            run.final_value_error
                .map(|x| format!("{x:.3e}"))
                .unwrap_or_else(|| "-".into()),
            run.final_policy_error
                .map(|x| format!("{x:.3e}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    for (key, value) in &report.summary {
        println!("{key} {value:.6}");
    }
    println!("wrote {}", out_dir.join("report.json").display());

    let all_converged = report.runs.values().all(|r| r.converged);
    Ok(if config.expects_convergence() && !all_converged {
        EXIT_NONCONVERGENCE
    } else {
        0
    })
}

fn cmd_sweep(args: &SweepArgs) -> ermdp::Result<u8> {
    let mdp = MdpModel::load_json(&args.mdp)?;
    let sol = match &args.oracle {
        Some(path) => Some(OracleSolution::load_json(path)?),
        None => None,
    };
    let alpha = args.alpha.or(sol.as_ref().map(|s| s.alpha)).unwrap_or(0.1);
    let tau = args.tau.or(sol.as_ref().map(|s| s.tau)).unwrap_or(0.01);
    let spec = SweepSpec {
        etas: args.etas.clone(),
        cs: args.cs.clone(),
        variant: args.variant,
        eps_tol: args.eps_tol,
        max_iter: args.max_iter,
    };
    let cells = run_sweep(&mdp, alpha, tau, &spec)?;
    let out = resolve_out(&args.out);
    ensure_parent(&out)?;
    write_atomic(&out, sweep_csv_string(&cells).as_bytes())?;
    for cell in cells.iter().filter(|c| c.largest_stable) {
        println!(
            "c {} largest stable eta {} ({} iterations)",
            cell.c, cell.eta, cell.iterations
        );
    }
    println!("wrote {}", out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
