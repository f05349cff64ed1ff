//! End-to-end checks of the `beamlab` binary: artifact layout, golden CSV
//! headers, byte-level determinism, output-directory resolution, and the
//! exit-code contract (0 ok, 1 bad config, 2 numerical failure).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn beamlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamlab"))
}

fn small_run_config() -> &'static str {
    r#"{
  "params": { "rho": 1.0, "mu": 1.0, "length": 1.0 },
  "grid": { "n_points": 11 },
  "potential": { "kind": "smoothed", "eps": 0.1 },
  "initial": { "type": "uniform", "u0": 0.5 },
  "horizon": 0.05,
  "dt": "auto",
  "record_stride": 4,
  "seed": 7
}"#
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = beamlab().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str], envs: &[(&str, &str)]) -> (i32, String) {
    let mut cmd = beamlab();
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (
        out.status.code().expect("process terminated by signal"),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn run_writes_expected_artifacts_with_golden_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", small_run_config());
    let out_dir = dir.path().join("artifacts");
    run_ok(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);

    let trajectory = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let header = trajectory.lines().next().unwrap();
    assert!(header.starts_with("t,x_0,"));
    assert!(header.contains(",x_10,u_0,"));
    assert!(header.ends_with(",u_10"));

    let energies = fs::read_to_string(out_dir.join("energies.csv")).unwrap();
    assert_eq!(
        energies.lines().next().unwrap(),
        "t,kinetic,bending,adhesion,total,contact_fraction"
    );

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["grid"]["n_points"], 11);
    assert_eq!(summary["no_detachment"], true);
    assert!(summary["dissipation"]["max_abs_drift"].is_number());
}

#[test]
fn rerunning_the_same_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", small_run_config());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    for name in ["trajectory.csv", "energies.csv", "summary.json"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn out_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", small_run_config());
    let env_out = dir.path().join("from-env");
    let out = beamlab()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("BEAMLAB_OUT", env_out.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env_out.join("summary.json").exists());
}

#[test]
fn invalid_configs_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();

    let zero_horizon = small_run_config().replace("\"horizon\": 0.05", "\"horizon\": 0.0");
    let cfg = write_config(dir.path(), "zero.json", &zero_horizon);
    let (code, stderr) = exit_code(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code, 1, "zero horizon should be a validation error");
    assert!(!stderr.is_empty());

    let bad_dt = small_run_config().replace("\"auto\"", "\"fast\"");
    let cfg = write_config(dir.path(), "dt.json", &bad_dt);
    let (code, stderr) = exit_code(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code, 1, "unknown dt keyword should be a config error");
    assert!(
        stderr.contains("auto"),
        "error should mention the accepted keyword"
    );

    let oversized = small_run_config().replace("\"auto\"", "1.0");
    let cfg = write_config(dir.path(), "big.json", &oversized);
    let (code, stderr) = exit_code(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code, 1, "dt above the stability limit should be refused");
    assert!(
        stderr.contains("limit"),
        "error should cite the stability limit"
    );

    // Nodal data file with the wrong row count for the grid.
    let mut rows = String::from("u,v\n");
    for _ in 0..5 {
        rows.push_str("0.1,0.0\n");
    }
    fs::write(dir.path().join("nodes.csv"), rows).unwrap();
    let from_file = small_run_config().replace(
        r#"{ "type": "uniform", "u0": 0.5 }"#,
        r#"{ "type": "from_file", "path": "nodes.csv" }"#,
    );
    let cfg = write_config(dir.path(), "file.json", &from_file);
    let (code, stderr) = exit_code(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code, 1, "row-count mismatch should be a config error");
    assert!(!stderr.is_empty());
}

#[test]
fn numerical_blowup_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    // A finite but astronomically large profile passes validation, then the
    // quadratic energy densities overflow on the first record.
    let blowup = small_run_config().replace(
        r#"{ "type": "uniform", "u0": 0.5 }"#,
        r#"{ "type": "cosine", "amplitude": 1e160 }"#,
    );
    let cfg = write_config(dir.path(), "blowup.json", &blowup);
    let (code, stderr) = exit_code(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(
        code, 2,
        "non-finite state should map to the numerical exit code"
    );
    assert!(!stderr.is_empty());
}

#[test]
fn experiment_smoke_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = format!(
        r#"{{
  "sim": {},
  "examples": {{ "eps": 0.1, "horizon": 0.5 }}
}}"#,
        small_run_config().replace("\"n_points\": 11", "\"n_points\": 51")
    );
    let cfg = write_config(dir.path(), "exp.json", &cfg_text);
    let out_dir = dir.path().join("exp-out");
    let out = run_ok(&[
        "experiment",
        "examples",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("examples"), "stdout: {stdout}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("examples.json")).unwrap()).unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 5);
    assert!(out_dir.join("examples.csv").exists());
}
