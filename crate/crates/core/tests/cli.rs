use std::fs;
use std::path::Path;
use std::process::Command;

use ddsddp::cli::{dispatch, Cli, RunConfig};
use clap::Parser;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddsddp"))
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        r#"
[data]
train = "data/train.csv"
test = "data/test.csv"

[solver]
epsilon = 1e-7
gap_mode = "absolute"
max_iterations = 200
kernel = {{ bandwidth_h = 1.0, rule = {{ kind = "manual" }} }}

[crossval]
grid = [0.0, 0.5]
folds = 2

[synth]
n_train = 4
n_test = 4
seed = 3
model = {{ kind = "inventory", products = 1, horizon = 3, persistence = 0.6, noise = 1.0 }}

[bound]
horizon = 3
sigma = [1.0, 1.0]
lipschitz = [1.0, 1.0]
diameter = [1.0, 1.0]
dims = [1, 1]
delta = [0.1, 0.1]
g_min = 1.0
eta = 0.01
n = 100
h = 0.4
p = 1
{extra}
"#
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn synth(dir: &Path, cfg: &Path) {
    let st = bin()
        .args(["synth", "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(dir.join("data"))
        .status()
        .unwrap();
    assert!(st.success());
}

#[test]
fn solve_converges_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    synth(dir.path(), &cfg);
    let out = dir.path().join("out");
    let st = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    for f in ["iterations.csv", "summary.json", "cuts.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let mut rdr = csv::Reader::from_path(out.join("iterations.csv")).unwrap();
    let lbs: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert!(lbs.windows(2).all(|w| w[1] >= w[0]));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["data"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn iteration_limit_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    synth(dir.path(), &cfg);
    let o = bin()
        .args(["solve", "--max-iters", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gap"));
}

#[test]
fn missing_data_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = bin()
        .args(["solve", "--data", "/nonexistent/train.csv", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/train.csv"));
}

#[test]
fn replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    synth(dir.path(), &cfg);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let st = bin().args(["evaluate", "--algorithm", "rdd", "--rho", "0.2", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert_eq!(st.code(), Some(0));
        outputs.push((fs::read(out.join("summary.json")).unwrap(), fs::read(out.join("evaluation.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bound_prints_the_library_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = bin().args(["bound", "--config"]).arg(&cfg).output().unwrap();
    assert!(o.status.success());
    let printed: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    let inputs = RunConfig::load(&cfg).unwrap().bound.unwrap();
    assert_eq!(printed, ddsddp::sddp::generalization_bound(&inputs).unwrap());
    assert!((printed - 1.0903498452347289).abs() < 1e-12);
}

#[test]
fn crossval_selects_the_lower_score() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    synth(dir.path(), &cfg);
    let out = dir.path().join("cv");
    let cli = Cli::parse_from(["ddsddp", "crossval", "--algorithm", "rdd", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(dispatch(&cli.command).unwrap(), 0);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("crossval.json")).unwrap()).unwrap();
    let scores: Vec<f64> = rep["scores"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let best = rep["best_rho"].as_f64().unwrap();
    let expect = if scores[1] < scores[0] { 0.5 } else { 0.0 };
    assert_eq!(best, expect);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[bogus]\nx = 1\n");
    let o = bin().args(["bound", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
