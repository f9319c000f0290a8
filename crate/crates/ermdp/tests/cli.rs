//! End-to-end checks of the binary: file round trips, exit codes, report
//! schema, determinism of reruns, and the output-root environment override.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ermdp"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn ermdp")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn generate(dir: &Path, name: &str, seed: u64) -> std::path::PathBuf {
    let path = dir.join(name);
    let out = run(bin().args([
        "generate",
        "--states",
        "8",
        "--actions",
        "3",
        "--support",
        "2",
        "--discount",
        "0.9",
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    path
}

#[test]
fn generate_oracle_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = generate(dir.path(), "m.json", 42);

    // Same seed, same bytes.
    let again = generate(dir.path(), "m2.json", 42);
    assert_eq!(std::fs::read(&mdp).unwrap(), std::fs::read(&again).unwrap());

    let oracle = dir.path().join("oracle.json");
    let out = run(bin().args([
        "oracle",
        "--mdp",
        mdp.to_str().unwrap(),
        "--tau",
        "0.2",
        "--alpha",
        "0.1",
        "--out",
        oracle.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for line in [
        "standard first-order residual",
        "quadratic first-order residual",
    ] {
        let row = text
            .lines()
            .find(|l| l.starts_with(line))
            .unwrap_or_else(|| panic!("missing `{line}` in:\n{text}"));
        let value: f64 = row.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(value < 1e-6, "{row}");
    }

    let solve_dir = dir.path().join("solve");
    let out = run(bin().args([
        "solve",
        "--mdp",
        mdp.to_str().unwrap(),
        "--oracle",
        oracle.to_str().unwrap(),
        "--variant",
        "ingad",
        "--eta",
        "0.01",
        "--c",
        "0.9",
        "--eps-tol",
        "1e-7",
        "--out-dir",
        solve_dir.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    assert!(solve_dir.join("ingad.csv").is_file());
    assert!(solve_dir.join("ingad.meta.json").is_file());
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(solve_dir.join("ingad.summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["converged"], true);
    assert!(summary["final_value_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn handcrafted_single_state_instance_solves_in_closed_form() {
    // One state, one action, self loop, r = 2, gamma = 0.5:
    // the regularized value is 2 / (1 - 0.5) = 4 for every temperature.
    let dir = tempfile::tempdir().unwrap();
    let mdp = dir.path().join("one.json");
    std::fs::write(
        &mdp,
        r#"{"num_states":1,"num_actions":1,"discount":0.5,"reward":[2.0],"transition":{"dense":[1.0]}}"#,
    )
    .unwrap();
    let oracle = dir.path().join("oracle.json");
    let out = run(bin().args([
        "oracle",
        "--mdp",
        mdp.to_str().unwrap(),
        "--tau",
        "0.3",
        "--out",
        oracle.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&oracle).unwrap()).unwrap();
    let v0 = sol["v_star"][0].as_f64().unwrap();
    assert!((v0 - 4.0).abs() < 1e-9, "v_star = {v0}");
}

#[test]
fn minimal_dimensions_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = dir.path().join("tiny.json");
    let out = run(bin().args([
        "generate",
        "--states",
        "1",
        "--actions",
        "1",
        "--support",
        "1",
        "--discount",
        "0.9",
        "--seed",
        "3",
        "--out",
        mdp.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    let out = run(bin().args([
        "solve",
        "--mdp",
        mdp.to_str().unwrap(),
        "--variant",
        "ngad",
        "--eta",
        "0.05",
        "--tau",
        "0.1",
        "--eps-tol",
        "1e-8",
        "--out-dir",
        dir.path().join("s").to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
}

#[test]
fn solve_exit_codes_reflect_failure_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = generate(dir.path(), "m.json", 7);

    // Budget too small: clean nonconvergence.
    let out = run(bin().args([
        "solve",
        "--mdp",
        mdp.to_str().unwrap(),
        "--variant",
        "ngad",
        "--eta",
        "1e-3",
        "--tau",
        "0.2",
        "--eps-tol",
        "1e-12",
        "--max-iter",
        "5",
        "--out-dir",
        dir.path().join("a").to_str().unwrap(),
    ]));
    assert_exit(&out, 2);

    // Absurd learning rate: numerical divergence.
    let out = run(bin().args([
        "solve",
        "--mdp",
        mdp.to_str().unwrap(),
        "--variant",
        "ngad",
        "--eta",
        "80",
        "--tau",
        "0.001",
        "--out-dir",
        dir.path().join("b").to_str().unwrap(),
    ]));
    assert_exit(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    // Missing input file.
    let out = run(bin().args([
        "solve",
        "--mdp",
        dir.path().join("absent.json").to_str().unwrap(),
        "--variant",
        "ngad",
        "--eta",
        "0.01",
        "--out-dir",
        dir.path().join("c").to_str().unwrap(),
    ]));
    assert_exit(&out, 4);

    // Corrupt input file.
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = run(bin().args([
        "oracle",
        "--mdp",
        bad.to_str().unwrap(),
        "--tau",
        "0.1",
        "--out",
        dir.path().join("o.json").to_str().unwrap(),
    ]));
    assert_exit(&out, 4);

    // Invalid config (c out of range).
    let out = run(bin().args([
        "solve",
        "--mdp",
        mdp.to_str().unwrap(),
        "--variant",
        "ingad",
        "--eta",
        "0.01",
        "--c",
        "1.5",
        "--out-dir",
        dir.path().join("d").to_str().unwrap(),
    ]));
    assert_exit(&out, 4);
}

#[test]
fn experiment_report_schema_and_byte_identical_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "experiment".into(),
            "--profile".into(),
            "exp2".into(),
            "--out-dir".into(),
            out.to_str().unwrap().to_string(),
            "--seeds".into(),
            "5".into(),
            "--states".into(),
            "6".into(),
            "--actions".into(),
            "3".into(),
            "--support".into(),
            "2".into(),
            "--discount".into(),
            "0.9".into(),
            "--sigmas".into(),
            "0.05".into(),
            "--eta".into(),
            "0.02".into(),
            "--max-iter".into(),
            "3000".into(),
            "--record-every".into(),
            "300".into(),
        ]
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = run(bin().args(args(&a)));
    assert_exit(&out, 0);
    let out = run(bin().args(args(&b)));
    assert_exit(&out, 0);

    // Layout: config, per-seed instance and oracle, traces, report.
    assert!(a.join("config.json").is_file());
    assert!(a.join("instances/mdp_seed5.json").is_file());
    assert!(a.join("instances/oracle_seed5.json").is_file());
    assert!(a.join("traces/seed5_sigma0.05_ingad.csv").is_file());
    assert!(a.join("traces/seed5_sigma0.05_ingad.meta.json").is_file());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["exp"], "exp2");
    let runs = report["runs"].as_object().unwrap();
    assert_eq!(runs.len(), 1);
    let entry = runs
        .get("seed5_sigma0.05_ingad")
        .unwrap()
        .as_object()
        .unwrap();
    let mut keys: Vec<&str> = entry.keys().map(|k| k.as_str()).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        [
            "converged",
            "exp",
            "final_policy_error",
            "final_value_error",
            "iterations",
            "lyapunov_final",
            "lyapunov_initial",
            "monotone_fraction",
            "variant",
        ]
    );
    assert!(report["summary"]["median_final_value_error_sigma0.05"].is_number());

    for rel in [
        "report.json",
        "config.json",
        "instances/mdp_seed5.json",
        "instances/oracle_seed5.json",
        "traces/seed5_sigma0.05_ingad.csv",
        "traces/seed5_sigma0.05_ingad.meta.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(rel)).unwrap(),
            std::fs::read(b.join(rel)).unwrap(),
            "rerun changed {rel}"
        );
    }
}

#[test]
fn experiment_that_expects_convergence_reports_budget_exhaustion() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().args([
        "experiment",
        "--profile",
        "exp1",
        "--out-dir",
        dir.path().join("x").to_str().unwrap(),
        "--seeds",
        "1",
        "--states",
        "6",
        "--actions",
        "3",
        "--support",
        "2",
        "--discount",
        "0.9",
        "--tau",
        "0.1",
        "--eta",
        "0.001",
        "--eps-tol",
        "1e-10",
        "--max-iter",
        "40",
    ]));
    assert_exit(&out, 2);
}

#[test]
fn sweep_marks_divergent_cells_and_largest_stable_rates() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = generate(dir.path(), "m.json", 11);
    let csv_path = dir.path().join("sweep.csv");
    let out = run(bin().args([
        "sweep",
        "--mdp",
        mdp.to_str().unwrap(),
        "--variant",
        "ingad",
        "--alpha",
        "0.1",
        "--tau",
        "0.2",
        "--etas",
        "0.005,0.02,50",
        "--cs",
        "0,0.9",
        "--eps-tol",
        "1e-6",
        "--max-iter",
        "30000",
        "--out",
        csv_path.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);

    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "c,eta,converged,diverged,iterations,final_q,largest_stable"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for c in ["0", "0.9"] {
        let group: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == c).collect();
        assert!(
            group.iter().any(|r| r[3] == "true"),
            "eta = 50 must diverge"
        );
        let stable: Vec<&&Vec<String>> = group.iter().filter(|r| r[6] == "true").collect();
        assert_eq!(stable.len(), 1, "exactly one largest stable eta per c");
        assert_eq!(stable[0][2], "true");
        let best: f64 = stable[0][1].parse().unwrap();
        for r in &group {
            if r[2] == "true" {
                let eta: f64 = r[1].parse().unwrap();
                assert!(eta <= best, "flagged eta is not the largest converged");
            }
        }
    }
}

#[test]
fn out_root_env_redirects_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args([
            "generate",
            "--states",
            "4",
            "--actions",
            "2",
            "--support",
            "2",
            "--discount",
            "0.9",
            "--seed",
            "5",
            "--out",
            "nested/m.json",
        ])
        .env("ERMDP_OUT_ROOT", dir.path()));
    assert_exit(&out, 0);
    assert!(dir.path().join("nested/m.json").is_file());

    // Absolute paths ignore the root.
    let abs = dir.path().join("direct.json");
    let out = run(bin()
        .args([
            "generate",
            "--states",
            "4",
            "--actions",
            "2",
            "--support",
            "2",
            "--discount",
            "0.9",
            "--seed",
            "5",
            "--out",
            abs.to_str().unwrap(),
        ])
        .env("ERMDP_OUT_ROOT", dir.path().join("elsewhere")));
    assert_exit(&out, 0);
    assert!(abs.is_file());
    assert!(!dir.path().join("elsewhere").exists());
}
