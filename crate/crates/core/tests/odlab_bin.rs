//! The installed binary: exit codes and the output-directory override.

use std::process::Command;

fn odlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_odlab"))
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let status = odlab()
        .env("ODLAB_OUT_DIR", dir.path())
        .args(["counterexample", "--case", "finite", "--m", "1", "--q", "2", "--expect", "diverges"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("counterexample_report.json").exists());
    assert!(dir.path().join("counterexample_study.svg").exists());
}

#[test]
fn solve_disk_centre_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = odlab().env("ODLAB_OUT_DIR", dir.path()).args(["solve", "--n", "129"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve_report.json")).unwrap()).unwrap();
    let centre = v["checks"].as_array().unwrap().iter().find(|c| c["name"].as_str().unwrap().starts_with("centre value")).unwrap();
    assert_eq!(centre["verdict"], "pass");
    assert!(centre["lhs"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"domain\": \"disk(1)\",\n  \"typo\": 3\n}\n").unwrap();
    let out = odlab().env("ODLAB_OUT_DIR", dir.path()).args(["--config", cfg.to_str().unwrap(), "solve"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("typo"), "{err}");
    std::fs::write(&cfg, "").unwrap();
    assert_eq!(odlab().args(["--config", cfg.to_str().unwrap(), "solve"]).status().unwrap().code(), Some(2));
    assert_eq!(odlab().arg("--bogus").status().unwrap().code(), Some(2));
}
