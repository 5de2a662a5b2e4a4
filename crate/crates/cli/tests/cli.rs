//! End-to-end tests of the `sddde` binary: exit codes, file outputs, and
//! reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn model_json() -> serde_json::Value {
    serde_json::json!({
        "a_w": 1.0, "p_w": 1.0, "mu_w": 0.1,
        "k_a": 1.0, "k_p": 0.5, "k_d": 0.5,
        "mu": 1.0,
        "x1": 0.8, "x2": 1.0, "b": 0.5, "K": 1.0, "eps": 0.5,
        "g_family": "exponential",
        "g_params": {"floor": 0.55, "gamma_g": {"kind": "affine", "intercept": 0.3, "slope": 0.1}},
        "alpha_spec": {"kind": "constant", "value": 0.4},
        "mu_u_spec": {"kind": "constant", "value": 0.1}
    })
}

fn scenario_json() -> serde_json::Value {
    serde_json::json!({
        "model": model_json(),
        "initial": {"kind": "random", "seed": 42, "amplitude": 1.0, "lip_cap": 2.0},
        "run": {"T": 1.0, "output_dt": 0.05},
        "outputs": {"csv": "traj.csv", "json": "meta.json", "svg": "plot.svg"}
    })
}

fn write_config(dir: &Path, value: &serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn sddde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sddde"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn simulate_writes_expected_rows_and_embeds_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &scenario_json());
    let out = dir.path().join("run");
    let result = sddde(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");

    let csv = fs::read_to_string(out.join("traj.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config_sha256="));
    assert_eq!(lines[1], "t,w,v");
    // (T / output_dt) + 1 data rows.
    assert_eq!(lines.len(), 2 + 21);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["rows"], 21);
    assert!(meta["config_sha256"].as_str().unwrap().len() == 64);
    assert!(meta.get("runtime_seconds").is_none());

    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert!(svg.contains("tau(v_t)"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &scenario_json());
    for out in ["a", "b"] {
        let result = sddde(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join(out).to_str().unwrap(),
        ]);
        assert!(result.status.success());
    }
    for file in ["traj.csv", "meta.json", "plot.svg"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn simulate_rejects_missing_key_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut broken = scenario_json();
    broken["model"].as_object_mut().unwrap().remove("mu");
    let config = write_config(dir.path(), &broken);
    let result = sddde(&["simulate", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2), "{result:?}");
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("mu"), "stderr: {stderr}");
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &scenario_json());
    let result = sddde(&["verify", "nonsense", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn verify_retraction_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &scenario_json());
    let out = dir.path().join("reports");
    let result = sddde(&[
        "verify",
        "retraction",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--ensemble",
        "100",
    ]);
    assert!(result.status.success(), "{result:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report_retraction.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["suite"], "retraction");
}

#[test]
fn budget_reports_and_gates_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &scenario_json());
    let ok = sddde(&[
        "budget",
        "--config",
        config.to_str().unwrap(),
        "--A",
        "1",
        "--T",
        "1",
        "--B",
        "10",
        "--R",
        "12",
    ]);
    assert!(ok.status.success(), "{ok:?}");
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(stdout.contains("linear") && stdout.contains("threshold"));

    // A kj >= mu B: precondition failure, exit 1 with explanation.
    let gated = sddde(&[
        "budget",
        "--config",
        config.to_str().unwrap(),
        "--A",
        "1",
        "--B",
        "1",
        "--R",
        "12",
    ]);
    assert_eq!(gated.status.code(), Some(1), "{gated:?}");
    let stderr = String::from_utf8_lossy(&gated.stderr);
    assert!(stderr.contains("precondition"), "stderr: {stderr}");

    // Neither --T nor (--B, --R): usage error.
    let usage = sddde(&["budget", "--config", config.to_str().unwrap(), "--A", "1"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn seed_override_changes_random_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &scenario_json());
    let run = |seed: Option<&str>, out: &str| {
        let out_dir = dir.path().join(out);
        let mut args = vec![
            "simulate".to_string(),
            "--config".into(),
            config.to_str().unwrap().into(),
            "--out".into(),
            out_dir.to_str().unwrap().into(),
        ];
        if let Some(s) = seed {
            args.push("--seed".into());
            args.push(s.into());
        }
        let owned: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        assert!(sddde(&owned).status.success());
        fs::read_to_string(out_dir.join("traj.csv")).unwrap()
    };
    let base = run(None, "base");
    let same = run(Some("42"), "same");
    let other = run(Some("7"), "other");
    assert_eq!(base, same);
    assert_ne!(base, other);
}
