use std::path::Path;
use std::process::{Command, Output};

fn carefulbot(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carefulbot"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(output: &Output) {
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn run_then_analyze_reproduces_the_study_report() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&carefulbot(&["run", "--participants", "3", "--seed", "2"], &a));
    ok(&carefulbot(&["analyze", "--sessions", a.join("sessions").to_str().unwrap()], &b));
    for file in ["study_report.json", "study_report.md", "trials.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert_eq!(std::fs::read_dir(a.join("sessions/p01/trials")).unwrap().count(), 20);
    let csv = std::fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 20);
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"study": {"participants": 2, "seed": 5}, "deploy_per_class": 10}"#).unwrap();
    let out = dir.path().join("out");
    ok(&carefulbot(&["run", "--config", config.to_str().unwrap()], &out));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("study_report.json")).unwrap()).unwrap();
    assert_eq!(report["n_participants"], 2);
    assert_eq!(report["version"], "v1");
}

#[test]
fn gradcheck_reports_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let output = carefulbot(&["gradcheck", "--configs", "2"], dir.path());
    ok(&output);
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.contains("max_relative_error")).count(), 2);
    assert!(stdout.lines().last().unwrap().starts_with("max relative error"));
}

#[test]
fn tiny_training_then_sampling_writes_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    let tiny = serde_json::json!({ "gan": {
        "seq_len": 32, "hidden_dim": 12, "latent_dim": 4, "batch_size": 16, "learning_rate": 0.005,
        "phase_steps": { "embed": 100, "supervise": 100, "joint": 100 }
    } });
    std::fs::write(&config, tiny.to_string()).unwrap();
    let models = dir.path().join("models");
    let data = dir.path().join("data");
    ok(&carefulbot(&["gen-data", "--n-per-class", "40", "--seed", "1"], &data));
    ok(&carefulbot(&["train", "--config", config.to_str().unwrap(), "--data", data.to_str().unwrap(), "--class", "nc"], &models));
    assert!(models.join("NC.bin").is_file());
    assert!(models.join("NC_loss.csv").is_file());
    let samples = dir.path().join("samples");
    ok(&carefulbot(&["sample", "--models", models.to_str().unwrap(), "--class", "nc", "-n", "10"], &samples));
    let csvs = std::fs::read_dir(&samples)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 10);
}

#[test]
fn simulate_writes_one_trace() {
    let dir = tempfile::tempdir().unwrap();
    let output = carefulbot(&["simulate", "--class", "nc", "--seed", "3"], dir.path());
    ok(&output);
    let summary: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!(summary["release_time"].is_f64());
    let lines = std::fs::read_to_string(dir.path().join("trial.jsonl")).unwrap();
    assert!(lines.lines().count() > 10);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = carefulbot(&["run", "--no-such-flag"], dir.path());
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn runtime_errors_are_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let output = carefulbot(&["run", "--participants", "1"], dir.path());
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    let err: serde_json::Value = serde_json::from_str(&stderr).unwrap();
    assert_eq!(err["error"]["kind"], "invalid_argument");

    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"stuidy": {}}"#).unwrap();
    let output = carefulbot(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(output.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
}
