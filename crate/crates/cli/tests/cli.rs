use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hpkm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpkm")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

const SMALL: &str = r#"{
  "model": {"mlp_widths": [2, 6, 1], "kan_widths": [2, 3, 1]},
  "train": {"iterations": 4, "seeds": [0, 1], "n_residual": 30, "n_initial": 8, "n_boundary": 8},
  "evaluation": {"points_per_axis": 7},
  "record_timing": false
}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.in.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn print_config_fills_defaults() {
    let out = hpkm(&["print-config", "--problem", "poisson"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["problem"], "poisson");
    assert_eq!(v["model"]["mlp_widths"], serde_json::json!([1, 20, 20, 1]));
    assert_eq!(v["model"]["xi"], 0.3);
    assert_eq!(v["train"]["iterations"], 15000);
}

#[test]
fn resolved_config_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let first = hpkm(&["print-config", "--problem", "advection", "--xi", "0.4"]);
    assert_eq!(code(&first), 0);
    let path = write_config(dir.path(), std::str::from_utf8(&first.stdout).unwrap());
    let second = hpkm(&["print-config", "--config", &path]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hpkm(&["solve", "--problem", "burgers"])), 2);
    assert_eq!(code(&hpkm(&["solve"])), 2);
    let unknown = write_config(dir.path(), r#"{"problem": "poisson", "modle": {}}"#);
    assert_eq!(code(&hpkm(&["solve", "--config", &unknown])), 2);
    let bad_xi = write_config(dir.path(), r#"{"problem": "poisson", "model": {"xi": 1.5}}"#);
    assert_eq!(code(&hpkm(&["print-config", "--config", &bad_xi])), 2);
    let not_json = write_config(dir.path(), "{");
    assert_eq!(code(&hpkm(&["solve", "--config", &not_json])), 2);
    assert_eq!(code(&hpkm(&["fit-function", "--problem", "poisson", "--iterations", "1"])), 2);
}

#[test]
fn io_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hpkm(&["solve", "--config", dir.path().join("missing.json").to_str().unwrap()])), 4);
    let file = dir.path().join("blocker");
    fs::write(&file, "").unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = hpkm(&["solve", "--problem", "helmholtz", "--config", &cfg, "--out", file.join("sub").to_str().unwrap()]);
    assert_eq!(code(&out), 4);
}

#[test]
fn divergence_exits_3_and_keeps_partial_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"mlp_widths": [1, 8, 1]}, "train": {"learning_rate": 1e300, "iterations": 50, "seeds": [0], "n_residual": 30, "n_boundary": 2}}"#,
    );
    let out_dir = dir.path().join("out");
    let out =
        hpkm(&["solve", "--problem", "poisson", "--xi", "0", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("history_xi0_seed0.csv").exists());
    let results = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(results.lines().nth(1).unwrap().contains("NaN"));
}

#[test]
fn zero_iterations_writes_initial_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("fit");
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"mlp_widths": [1, 8, 1], "kan_widths": [1, 3, 1]}, "train": {"seeds": [2]}}"#,
    );
    let out = hpkm(&["fit-function", "--config", &cfg, "--iterations", "0", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let history = fs::read_to_string(out_dir.join("history_xi0.9_seed2.csv")).unwrap();
    assert_eq!(history.lines().count(), 1);
    let prediction = fs::read_to_string(out_dir.join("prediction_xi0.9_seed2.csv")).unwrap();
    assert_eq!(prediction.lines().next().unwrap(), "x,u_ref,u_pred,abs_err");
    assert_eq!(prediction.lines().count(), 1 + 1000);
    assert!(out_dir.join("spectrum_xi0.9_seed2.csv").exists());
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_reproduce_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for cmd in ["solve", "sweep-xi", "noise"] {
        let out_dir = dir.path().join(cmd);
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let out = hpkm(&[cmd, "--problem", "advection", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
                assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
                let files = snapshot(&out_dir);
                fs::remove_dir_all(&out_dir).unwrap();
                files
            })
            .collect();
        assert!(runs[0].len() > 2);
        assert!(runs[0] == runs[1], "{cmd} outputs differ between runs");
    }
}
