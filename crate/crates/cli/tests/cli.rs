use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[family]
p = 6
speeds = [1.0, 2.0]
shifts = [-14.0, 0.0]

[grid]
num_points = 2048
domain_length = 80.0
origin = -40.0

[evolve]
dt = 1e-3
t_end = 0.05
record_stride = 10

[horizons]
S = 2.0
t0 = 1.0
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkdv-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn unordered_speeds_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("[1.0, 2.0]", "[2.0, 1.0]"));
    let out = run(&["evolve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("family.speeds"), "{err}");
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("t0 = 1.0", "t0 = 1.0\nbogus = 3"));
    let out = run(&["evolve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("line"));
}

#[test]
fn missing_config_is_an_io_error() {
    let out = run(&["evolve", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn spectrum_matches_shooting_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("spec");
    let out = run(&[
        "spectrum", "--c", "1", "--n", "1024", "--box", "80", "--oracle", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = v["e_c"].as_f64().unwrap();
    let oracle = v["oracle_e0"].as_f64().unwrap();
    assert!((e - oracle).abs() < 1e-6 * oracle, "{e} vs {oracle}");
    assert_eq!(v["checks"]["sign_convention"], true);
    assert_eq!(read_json(&out_dir.join("spectrum.json"))["e_c"], v["e_c"]);
    assert!(out_dir.join("y_plus.bin").exists());
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn small_pipeline_round() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = write_config(root, SMALL);
    let path = |s: &str| root.join(s).to_str().unwrap().to_string();

    let out = run(&["evolve", "--config", &cfg, "--output-dir", &path("ev")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let series = std::fs::read_to_string(root.join("ev/series.csv")).unwrap();
    assert!(series.starts_with("t,mass,energy,h1_dist_to_R"));
    assert_eq!(series.lines().count(), 7);

    let out = run(&["construct", "--config", &cfg, "--output-dir", &path("co"), "--A", "0.01,0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let shooting = read_json(&root.join("co/shooting.json"));
    for s in shooting["stages"].as_array().unwrap() {
        assert_eq!(s["exit"], "converged", "{s}");
        assert_eq!(s["tube_ok"], true);
    }
    let stage1 = read_json(&root.join("co/stage_1/stage.json"));
    assert_eq!(stage1["prefix"], serde_json::json!([0.01]));

    let out = run(&[
        "monotonicity", "--config", &cfg, "--output-dir", &path("mo"), "--traj", &path("co/stage_2"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&root.join("mo/monotonicity.json"))["weights_ok"], true);

    // One time unit is too short for a plateau, which must be reported, not guessed.
    let out = run(&[
        "classify", "--config", &cfg, "--output-dir", &path("cl"), "--traj", &path("co/stage_2"),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "classification_uncertain");
    assert!(err["partial"].is_array());

    let out = run(&["report", "--dir", root.to_str().unwrap()]);
    assert!(out.status.success());
    let report = read_json(&root.join("report.json"));
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let hashes: Vec<_> = runs.iter().map(|r| r["config_hash"].clone()).collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]), "output dir leaks into the hash");
}
