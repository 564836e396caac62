//! End-to-end CLI checks: exit codes, determinism, artifact layout.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qkrl"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qkrl_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn bandit_smoke_run_succeeds() {
    let out = temp_dir("smoke");
    let status = bin()
        .args(["run", "--config"])
        .arg(repo_config("bandit_cqrac_smoke.json"))
        .args(["--out"])
        .arg(&out)
        .arg("--quiet")
        .status()
        .expect("spawn qkrl");
    assert!(status.success());
    assert!(out.join("iterations.csv").exists());
    assert!(out.join("checkpoint_0.json").exists());
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    let out_a = temp_dir("det_a");
    let out_b = temp_dir("det_b");
    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["run", "--config"])
            .arg(repo_config("bandit_cqrac_smoke.json"))
            .args(["--seed", "42", "--out"])
            .arg(out)
            .arg("--quiet")
            .status()
            .expect("spawn qkrl");
        assert!(status.success());
    }
    let a = std::fs::read(out_a.join("iterations.csv")).unwrap();
    let b = std::fs::read(out_b.join("iterations.csv")).unwrap();
    assert_eq!(a, b);
    let a = std::fs::read(out_a.join("checkpoint_42.json")).unwrap();
    let b = std::fs::read(out_b.join("checkpoint_42.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_config_exits_2_and_names_path() {
    let output = bin()
        .args(["run", "--config", "no/such/config.json", "--quiet"])
        .output()
        .expect("spawn qkrl");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("no/such/config.json"), "{stderr}");
}

#[test]
fn budget_cap_violation_exits_3() {
    let out = temp_dir("cap");
    let config = out.join("config.json");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(
        &config,
        r#"{
            "mdp": { "preset": "two-armed-bandit" },
            "policy": { "preset": "bandit-gauss" },
            "estimator": "cqrac",
            "epsilon": 1e-7,
            "delta": 0.1,
            "seeds": [0],
            "iterations": 3,
            "cqrac": { "epsilon": 1e-7, "delta": 0.1, "n1_cap": 100, "iterations": 3 }
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(out.join("artifacts"))
        .arg("--quiet")
        .output()
        .expect("spawn qkrl");
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn validate_mdp_accepts_shipped_spec() {
    let output = bin()
        .args(["validate-mdp", "--config"])
        .arg(repo_config("mdp_two_state.json"))
        .output()
        .expect("spawn qkrl");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("valid MDP"), "{stdout}");
}

#[test]
fn validate_mdp_rejects_bad_rows() {
    let out = temp_dir("badmdp");
    std::fs::create_dir_all(&out).unwrap();
    let path = out.join("bad.json");
    // Break one transition row of the shipped spec.
    let text = std::fs::read_to_string(repo_config("mdp_two_state.json")).unwrap();
    let mut mdp: serde_json::Value = serde_json::from_str(&text).unwrap();
    mdp["transition"][0] = serde_json::json!(0.9999);
    std::fs::write(&path, serde_json::to_string(&mdp).unwrap()).unwrap();
    let output = bin()
        .args(["validate-mdp", "--config"])
        .arg(&path)
        .output()
        .expect("spawn qkrl");
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn budget_table_emits_all_rows() {
    let out = temp_dir("budget");
    let status = bin()
        .args(["budget", "--config"])
        .arg(repo_config("budget_table.json"))
        .args(["--out"])
        .arg(&out)
        .arg("--quiet")
        .status()
        .expect("spawn qkrl");
    assert!(status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("budgets.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert!(rows.len() >= 6);
    for name in [
        "softmax-pg-classical",
        "numerical-qpg",
        "analytical-qpg",
        "numerical-qpg-rkhs",
        "analytical-qpg-rkhs",
        "cqrac-a",
        "cqrac-b",
        "dcqrac",
    ] {
        assert!(
            rows.iter().any(|r| r["variant"] == name && r["queries"].is_u64()),
            "missing row {name}"
        );
    }
}

#[test]
fn dump_policy_prints_distributions() {
    let output = bin()
        .args(["dump-policy", "--config"])
        .arg(repo_config("policy_bandit.json"))
        .output()
        .expect("spawn qkrl");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("state 0"), "{stdout}");
}
