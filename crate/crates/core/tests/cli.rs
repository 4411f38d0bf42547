use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sptraj::runner::verify_manifest;

const TLA_MODEL: &str = r#""model": {
    "dimension": 2,
    "hamiltonian": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]],
    "coupling": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]],
    "initial_state": {"pure": [[1, 0], [0, 0]]}
},
"profile": {"name": "matched_exponential", "gamma": 1.0},"#;

fn sptraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sptraj"))
        .args(args)
        .env_remove("SPTRAJ_OUT_DIR")
        .env_remove("SPTRAJ_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("{{{body}}}")).unwrap();
    path
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn master_run_reports_the_excitation_peak() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "m.json",
        &format!(r#""experiment": "master", {TLA_MODEL} "continuum": {{"dt": 0.001, "t_end": 10.0, "stride": 10}}"#),
    );
    let out = dir.path().join("out");
    let o = sptraj(&["run", s(&cfg), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(out.join("master_summary.json"));
    let peak = summary["peaks"][1]["max_population"].as_f64().unwrap();
    assert!((peak - 0.54134).abs() < 1e-5);
    verify_manifest(&out).unwrap();
    let manifest = read_json(out.join("manifest.json"));
    assert_eq!(manifest["library_version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["config"]["experiment"], "master");
    let csv = std::fs::read_to_string(out.join("master.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1001);
    assert!(csv.lines().next().unwrap().starts_with("t,rho00_re,rho00_im"));
}

#[test]
fn missing_field_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &format!(r#""experiment": "jump", {TLA_MODEL} "trajectories": 3"#));
    let o = sptraj(&["run", s(&cfg), "--out-dir", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("continuum"));

    let cfg = write_config(dir.path(), "typo.json", &format!(r#""experiment": "master", {TLA_MODEL} "continum": {{}}"#));
    let o = sptraj(&["run", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("continum") && err.contains("line"), "{err}");
}

#[test]
fn subcommand_must_match_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "m.json",
        &format!(r#""experiment": "master", {TLA_MODEL} "continuum": {{"dt": 0.01, "t_end": 1.0}}"#),
    );
    let o = sptraj(&["convergence", s(&cfg), "--out-dir", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "coarse.json",
        r#""experiment": "jump",
        "model": {
            "dimension": 2,
            "hamiltonian": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]],
            "coupling": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]],
            "initial_state": {"pure": [[0, 0], [1, 0]]}
        },
        "profile": {"name": "vacuum"},
        "continuum": {"dt": 0.5, "t_end": 5.0}"#,
    );
    let o = sptraj(&["run", s(&cfg), "--out-dir", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn counting_stats_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cs.json",
        &format!(
            r#""experiment": "counting_stats", {TLA_MODEL}
            "counting_stats": {{"times": [0.0, 0.5, 1.0, 2.0, 4.0], "intervals": 512, "intervals_2d": 64, "scan_intervals": 20}}"#
        ),
    );
    let out = dir.path().join("out");
    let o = sptraj(&["counting-stats", s(&cfg), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_json(out.join("counting_stats.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows[0]["P0"], 1.0);
    let p0: Vec<f64> = rows.iter().map(|r| r["P0"].as_f64().unwrap()).collect();
    assert!(p0.windows(2).all(|w| w[1] <= w[0]));
    for r in rows {
        assert!(r["normalization_residual"].as_f64().unwrap() < 1e-4);
        assert!(r["quadrature_error"].as_f64().unwrap() >= 0.0);
    }
    let scan = std::fs::read_to_string(out.join("density_scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 22);
    verify_manifest(&out).unwrap();
}

#[test]
fn convergence_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cv.json",
        &format!(r#""experiment": "convergence", {TLA_MODEL} "convergence": {{"tau0": 0.01, "times": [1.0, 2.0]}}"#),
    );
    let out = dir.path().join("out");
    let o = sptraj(&["convergence", s(&cfg), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(out.join("convergence.json"));
    assert_eq!(r["taus"].as_array().unwrap().len(), 4);
    assert_eq!(r["fit_residuals"].as_array().unwrap().len(), 4);
    assert!(r["fitted_order"].as_f64().unwrap() >= 0.9);
}

#[test]
fn oracle_subcommand_prints_json() {
    let o = sptraj(&["oracle", "tla", "--gamma", "1", "--profile", "matched-exponential", "--times", "0,2"]);
    assert!(o.status.success());
    let rows: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = rows[1]["excitation"].as_f64().unwrap();
    assert!((p - 4.0 * (-2.0f64).exp()).abs() < 1e-15);
    assert!((rows[1]["no_count"].as_f64().unwrap() - 5.0 * (-2.0f64).exp()).abs() < 1e-15);

    let o = sptraj(&["oracle", "tla", "--gamma", "-1", "--times", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seeds_threads_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "j.json",
        &format!(
            r#""experiment": "jump", {TLA_MODEL} "continuum": {{"dt": 0.002, "t_end": 3.0, "stride": 100}}, "trajectories": 150, "seed": 1"#
        ),
    );
    let run = |extra: &[&str], out: &Path| {
        let mut args = vec!["run", s(&cfg), "--out-dir", s(out)];
        args.extend_from_slice(extra);
        let o = sptraj(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("jump_mean.csv")).unwrap()
    };
    let one = run(&["--threads", "1"], &dir.path().join("a"));
    let many = run(&["--threads", "3"], &dir.path().join("b"));
    assert_eq!(one, many);
    let other = run(&["--seed", "2"], &dir.path().join("c"));
    assert_ne!(one, other);
    let manifest = read_json(dir.path().join("c").join("manifest.json"));
    assert_eq!(manifest["seed"], 2);

    let env_out = dir.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_sptraj"))
        .args(["run", s(&cfg)])
        .env("SPTRAJ_OUT_DIR", &env_out)
        .env("SPTRAJ_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(env_out.join("jump_mean.csv")).unwrap(), one);
}

#[test]
fn discrete_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["discrete_counting", "discrete_homodyne"] {
        let cfg = write_config(
            dir.path(),
            "d.json",
            &format!(r#""experiment": "{kind}", {TLA_MODEL} "discretization": {{"tau": 0.05, "horizon": 6.0}}, "trajectories": 40"#),
        );
        let out = dir.path().join(kind);
        let o = sptraj(&["run", s(&cfg), "--out-dir", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let outcomes = std::fs::read_to_string(out.join("discrete_outcomes.csv")).unwrap();
        assert_eq!(outcomes.lines().count(), 41);
        let path = std::fs::read_to_string(out.join("discrete_path_0.csv")).unwrap();
        assert_eq!(path.lines().count(), 1 + 121);
        verify_manifest(&out).unwrap();
    }
}
