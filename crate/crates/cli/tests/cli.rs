use std::process::{Command, Output};

use serde_json::Value;

fn bai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bai")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_equal_variances_samples_half() {
    let out = bai(&["solve", "--sigma1", "1", "--sigma0", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("\"gamma_star\": 0.5"), "{text}");
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!((v["v_star"].as_f64().unwrap() - 0.33994).abs() < 1e-5);
    for key in ["command", "parameters", "master_seed", "artifact_version", "timestamp"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = bai(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_flags_are_usage_errors() {
    for args in [
        &["solve", "--sigma1", "x", "--sigma0", "1"][..],
        &[
            "sweep",
            "--sigma1",
            "1",
            "--sigma0",
            "1",
            "--gamma-grid",
            "0:1",
            "--c-grid",
            "0:0:1",
            "--delta-grid",
            "0:1:1",
        ],
        &["simulate", "--family", "poisson", "--policy", "neyman", "--n-grid", "10", "--gap-grid", "1", "--reps", "10"],
        &[
            "simulate",
            "--family",
            "gaussian",
            "--policy",
            "fixed:1.5",
            "--n-grid",
            "10",
            "--gap-grid",
            "1",
            "--reps",
            "10",
        ],
        &[
            "simulate",
            "--family",
            "gaussian",
            "--policy",
            "two-stage",
            "--n-grid",
            "9",
            "--gap-grid",
            "1",
            "--reps",
            "10",
        ],
    ] {
        assert_eq!(bai(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn domain_errors_exit_one() {
    let out = bai(&["solve", "--sigma1", "-1", "--sigma0", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = bai(&[
        "regret",
        "--gamma",
        "0.5",
        "--c",
        "0",
        "--mu1",
        "0",
        "--mu0",
        "0",
        "--sigma1",
        "1",
        "--sigma0",
        "1",
        "--mc-reps",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn regret_reports_both_routes() {
    let out = bai(&[
        "regret",
        "--gamma",
        "0.5",
        "--c",
        "0",
        "--mu1",
        "1",
        "--mu0",
        "0",
        "--sigma1",
        "1",
        "--sigma0",
        "1",
        "--mc-reps",
        "4000",
        "--seed",
        "2",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let closed = v["closed_form"].as_f64().unwrap();
    let mc = &v["monte_carlo"];
    assert!((mc["mean"].as_f64().unwrap() - closed).abs() < 4.0 * mc["std_error"].as_f64().unwrap());
    assert_eq!(v["master_seed"], 2);
    let out =
        bai(&["regret", "--gamma", "0.5", "--c", "0", "--mu1", "1", "--mu0", "0", "--sigma1", "1", "--sigma0", "1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.get("monte_carlo").is_none());
}

#[test]
fn sweep_csv_layout() {
    let out = bai(&[
        "sweep",
        "--sigma1",
        "1",
        "--sigma0",
        "1",
        "--gamma-grid",
        "0.5:0.5:1",
        "--c-grid",
        "0:0:1",
        "--delta-grid",
        "0:3:0.001",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gamma,c,delta,side,regret"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 3001);
    let peak = rows
        .iter()
        .filter(|r| r[3] == "theta1")
        .max_by(|a, b| a[4].parse::<f64>().unwrap().total_cmp(&b[4].parse().unwrap()))
        .unwrap();
    assert_eq!(peak[2], "1.504");
    let manifest: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(manifest["command"], "sweep");
}

#[test]
fn simulate_writes_csv_and_manifest_sidecar() {
    let dir = std::env::temp_dir().join(format!("bai-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("sim.csv");
    let status = bai(&[
        "simulate",
        "--family",
        "gaussian",
        "--policy",
        "equal",
        "--n-grid",
        "100,200",
        "--gap-grid",
        "0,1",
        "--reps",
        "500",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("family,policy,n,gap,h1,h0,scaled_regret,std_error,replications,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(
        rows[0].starts_with("gaussian,equal,100,0,0,-0,0,0,500,9")
            || rows[0].starts_with("gaussian,equal,100,0,0,0,0,0,500,9"),
        "{}",
        rows[0]
    );
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sim.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 9);
    assert_eq!(manifest["parameters"]["policy"], "equal");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn verify_fast_passes() {
    let out = bai(&["verify", "--fast"]);
    let text = stdout(&out);
    println!("{text}");
    assert!(out.status.success(), "{text}");
    assert!(text.contains("10/10 criteria passed"));
}
