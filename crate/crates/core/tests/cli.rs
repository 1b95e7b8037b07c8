use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use curveortho::cli::{run, ExperimentConfig, RunOptions};
use tempfile::TempDir;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn curveortho(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_curveortho")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn golden_circle_run_checks_clean() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = config_path("circle_unit.json");
    let (code, stdout, stderr) = curveortho(&["run", cfg.to_str().unwrap(), "--check", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}\n{stderr}");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["max_compare_error"].as_f64().unwrap() <= 1e-10);
    assert_eq!(summary["passed"], true);
    for f in ["expand.json", "oracle.json", "compare.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn radius_inside_rho_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "bad.json",
        r#"{
            "curve": {"c1": 1.0},
            "weight": {"kind": "generic", "V": [[-0.5, 0.0], [1.0, 0.0]], "rho": 0.5},
            "expansion": {"r": 0.4},
            "degrees": [5],
            "targets": ["L_1"],
            "tasks": ["expand"]
        }"#,
    );
    let out = dir.path().join("o");
    let (code, _, stderr) = curveortho(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("rho < r < 1"), "{stderr}");
}

#[test]
fn malformed_and_incomplete_configs_exit_1() {
    let dir = TempDir::new().unwrap();
    let broken = write_config(&dir, "broken.json", "{ not json");
    assert_eq!(curveortho(&["run", &broken]).0, 1);
    let no_targets = write_config(
        &dir,
        "nt.json",
        r#"{"curve": {"c1": 1.0}, "weight": {"kind": "generic", "V": [[1.0, 0.0]]}, "degrees": [3], "tasks": ["expand"]}"#,
    );
    let (code, _, stderr) = curveortho(&["run", &no_targets]);
    assert_eq!(code, 1);
    assert!(stderr.contains("targets"), "{stderr}");
    let thm3_generic = write_config(
        &dir,
        "tg.json",
        r#"{"curve": {"c1": 1.0}, "weight": {"kind": "generic", "V": [[1.0, 0.0]]}, "degrees": [3], "targets": [[0.1, 0.0]], "tasks": ["thm3"]}"#,
    );
    assert_eq!(curveortho(&["run", &thm3_generic]).0, 1);
    assert_eq!(curveortho(&["run", "/nonexistent/config.json"]).0, 1);
}

#[test]
fn unknown_flag_exits_1_with_usage() {
    let cfg = config_path("circle_unit.json");
    let (code, _, stderr) = curveortho(&["run", cfg.to_str().unwrap(), "--frobnicate"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("Usage"), "{stderr}");
}

#[test]
fn contraction_failure_is_numerical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "small_n.json",
        r#"{
            "curve": {"c1": 1.0},
            "weight": {"kind": "generic", "V": [[-0.5, 0.0], [1.0, 0.0]], "rho": 0.5},
            "expansion": {"r": 0.75},
            "degrees": [1],
            "targets": ["L_1"],
            "tasks": ["expand"]
        }"#,
    );
    let out = dir.path().join("o");
    let (code, _, stderr) = curveortho(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("contraction"), "{stderr}");
}

#[test]
fn jobs_do_not_change_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = config_path("ellipse_unit.json");
    let mut csv = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("j{jobs}"));
        let (code, _, stderr) = curveortho(&["run", cfg.to_str().unwrap(), "--jobs", jobs, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{stderr}");
        csv.push((fs::read(out.join("compare.csv")).unwrap(), fs::read(out.join("asymptotics.csv")).unwrap()));
    }
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn threads_env_var_is_accepted() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let status = Command::new(env!("CARGO_BIN_EXE_curveortho"))
        .args(["run", config_path("proposition.json").to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("CURVEORTHO_THREADS", "2")
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn svg_per_zero_set() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let cfg = config_path("circle_singular_thm3.json");
    let (code, stdout, stderr) = curveortho(&["run", cfg.to_str().unwrap(), "--svg", "--check", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}\n{stderr}");
    let svgs: Vec<_> = fs::read_dir(&out).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "svg")).collect();
    assert_eq!(svgs.len(), 7);
    for e in svgs {
        let text = fs::read_to_string(e.path()).unwrap();
        assert!(text.contains("<svg") && text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<svg").count(), 1);
    }
}

#[test]
fn thm3_sweep_errors_decrease() {
    let dir = TempDir::new().unwrap();
    let cfg = ExperimentConfig::load(&config_path("circle_singular_thm3.json")).unwrap();
    let opts = RunOptions { out: Some(dir.path().to_path_buf()), ..Default::default() };
    run(cfg, opts).unwrap();
    let csv = fs::read_to_string(dir.path().join("thm3.csv")).unwrap();
    let errs: Vec<(usize, f64)> = csv
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("interior,") && l.contains(",-1e-1,0e0,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[9].parse().unwrap())
        })
        .collect();
    assert_eq!(errs.len(), 7);
    assert!(errs.windows(2).all(|w| w[1].1 < w[0].1), "{errs:?}");
    assert!(errs[6].1 <= 0.5 * errs[0].1, "{errs:?}");
}

#[test]
fn summary_config_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("a");
    let cfg = ExperimentConfig::load(&config_path("circle_singular_thm3.json")).unwrap();
    run(cfg, RunOptions { out: Some(first.clone()), ..Default::default() }).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(first.join("summary.json")).unwrap()).unwrap();
    let mut resolved = summary["config"].clone();
    let second = dir.path().join("b");
    resolved["output_dir"] = serde_json::Value::String(second.to_string_lossy().into_owned());
    let again = ExperimentConfig::from_json(&resolved.to_string()).unwrap();
    run(again, RunOptions::default()).unwrap();
    for f in ["thm3.csv", "zeros.csv", "asymptotics.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
}
