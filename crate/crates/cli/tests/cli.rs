use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn perfhom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfhom"))
        .args(args)
        .env_remove("PERFHOM_THREADS")
        .output()
        .expect("spawn perfhom")
}

fn status(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("status.json")).unwrap()).unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn cell_writes_effective_tensors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[geometry]\nn_per_cell = 8\n");
    let out = tmp.path().join("out");
    let o = perfhom(&["cell", "-c", &cfg, "-o", out.to_str().unwrap(), "--svg", "chi.svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(status(&out)["status"], "ok");
    let eff: Value = serde_json::from_str(&std::fs::read_to_string(out.join("effective.json")).unwrap()).unwrap();
    let k = eff["effective"]["K"][0][0].as_f64().unwrap();
    assert!(k > 0.0 && k.is_finite());
    assert!(out.join("cell_theta.csv").exists());
    assert!(std::fs::read_to_string(out.join("chi.svg")).unwrap().starts_with("<svg"));
    let echo = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echo.contains("n_per_cell = 8"));
    assert!(echo.contains("mode = \"cell\""));
}

#[test]
fn validation_error_exits_one_and_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[geometry]\nepsilon = 0.3\n");
    let out = tmp.path().join("out");
    let o = perfhom(&["micro", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let s = status(&out);
    assert_eq!(s["status"], "validation_error");
    assert_eq!(s["field"], "epsilon");
    assert!(out.join("config.toml").exists());
}

#[test]
fn parse_error_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[geometry]\nn_per_cell = 8\nbogus = 1\n");
    let out = tmp.path().join("out");
    let o = perfhom(&["cell", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let s = status(&out);
    assert_eq!(s["status"], "parse_error");
    assert_eq!(s["line"], 3);
}

#[test]
fn unknown_subcommand_exits_one() {
    let o = perfhom(&["frobnicate", "-c", "x.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_threads_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let out = tmp.path().join("out");
    let o = perfhom(&["cell", "-c", &cfg, "-o", out.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(status(&out)["field"], "threads");
}

#[test]
fn threads_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[geometry]\nn_per_cell = 8\n");
    let out = tmp.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_perfhom"))
        .args(["cell", "-c", &cfg, "-o", out.to_str().unwrap()])
        .env("PERFHOM_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(out.join("config.toml")).unwrap().contains("threads = 2"));
}

#[test]
fn micro_and_macro_write_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[geometry]\nepsilon = 0.5\n\n[time]\nt_end = 0.01\nsnapshots = 3\n");
    for (mode, prefix) in [("micro", "micro_"), ("macro", "macro_")] {
        let out = tmp.path().join(mode);
        let o = perfhom(&[mode, "-c", &cfg, "-o", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        for k in 0..3 {
            assert!(out.join(format!("{prefix}{k:04}.csv")).exists(), "{mode} snapshot {k}");
        }
        let d: Value = serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
        assert_eq!(d["diagnostics"]["positivity_ok"], true);
    }
    assert!(tmp.path().join("micro/surface_0000.csv").exists());
}

#[test]
fn correct_needs_three_epsilons() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[geometry]\nepsilon_list = [0.5, 0.25]\n");
    let out = tmp.path().join("out");
    let o = perfhom(&["correct", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(status(&out)["field"], "epsilon_list");
}

#[test]
fn check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let out = tmp.path().join("out");
    let o = perfhom(&["check", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let c: Value = serde_json::from_str(&std::fs::read_to_string(out.join("check.json")).unwrap()).unwrap();
    assert!(c.as_array().unwrap().iter().all(|o| o["passed"] == true));
}
