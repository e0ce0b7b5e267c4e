use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpcm-design"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_ok(args: &[&str]) -> (Value, String) {
    let out = bin(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], args[0]);
    (v, text)
}

const CHEAP: &[&[&str]] = &[
    &["probs", "--theta", "-1,0,1", "--tau", "-1,0,1"],
    &["info", "--theta", "0.3", "--tau", "-1,0.5", "--alpha", "1,2", "--derivatives", "--hessian"],
    &["criterion", "--weight", "uniform:0:2", "--criterion", "psi-1", "--tau", "0", "--alpha", "1.5"],
    &["sensitivity-grid", "--weight", "normal:0:0.5", "--criterion", "psi0", "--resolution", "15"],
    &["check-conditions", "--weight", "logistic:0:1", "--a-total", "2"],
    &["critical-scale", "--family", "normal"],
    &["optimal-alpha", "--weight", "logistic:0:1", "--criterion", "psi0"],
    &["alpha-plus", "--family", "uniform", "--scale", "2", "--criterion", "psi0"],
    &["evidence-table", "--family", "uniform", "--criterion", "psi-1", "--scales", "1.5,2.1773,3"],
    &["s-tilde", "--family", "uniform", "--criterion", "psi0", "--resolution", "21"],
    &["optimize-design", "--weight", "normal:0:0.4", "--criterion", "psi0", "--resolution", "41"],
    &["simulate", "--theta-true", "-0.5", "--tau", "-1,0,1", "--n-items", "30", "--n-replications", "100"],
    &["reproduce-paper", "--only", "1,2", "--json"],
];

#[test]
fn every_subcommand_emits_versioned_json_deterministically() {
    for args in CHEAP {
        let (_, first) = json_ok(args);
        let (_, again) = json_ok(args);
        assert_eq!(first, again, "{args:?} is not idempotent");
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    for args in [CHEAP[3], CHEAP[10], CHEAP[11]] {
        let one: Vec<&str> = ["--threads", "1"].iter().chain(args).copied().collect();
        let four: Vec<&str> = args.iter().copied().chain(["--threads", "4"]).collect();
        let a = bin(&one);
        let b = bin(&four);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn documented_examples() {
    let (v, _) = json_ok(&["critical-scale", "--family", "uniform", "--criterion", "psi0", "--a-total", "1"]);
    assert!((v["scales"][0]["value"].as_f64().unwrap() - 2.5757).abs() < 1e-3);
    let (v, _) = json_ok(&["probs", "--theta", "0", "--tau", "0", "--alpha", "1"]);
    assert_eq!(v["rows"][0]["probabilities"], serde_json::json!([0.5, 0.5]));
    let (v, _) = json_ok(&["optimal-alpha", "--family", "normal", "--scale", "1.177", "--criterion", "psi-1"]);
    assert!((v["value"].as_f64().unwrap() - 1.3586).abs() < 1e-3);
}

#[test]
fn grid_files_and_design_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("grid");
    let out = bin(&[
        "sensitivity-grid", "--weight", "uniform:0:1.2878", "--criterion", "psi0",
        "--resolution", "11", "--tau-range=-6,6", "--out", prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tau1,tau2,phi"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 121);
    assert_eq!(&rows[1][..2], &[-6.0, -4.8]);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("grid.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], 1);
    let sup = meta["metadata"]["sup"].as_f64().unwrap();
    assert_eq!(sup, rows.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max));

    // Feed an optimised design back in through --design.
    let (v, _) = json_ok(&["optimize-design", "--weight", "uniform:0:3.9", "--criterion", "psi0", "--resolution", "41"]);
    let design = dir.path().join("design.json");
    std::fs::write(&design, v["result"]["design"].to_string()).unwrap();
    let (c, _) = json_ok(&["criterion", "--weight", "uniform:0:3.9", "--criterion", "psi0", "--design", design.to_str().unwrap()]);
    let (a, b) = (c["value"].as_f64().unwrap(), v["result"]["criterion"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn config_files_merge_under_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"family": "logistic", "scale": 1, "criterion": "psi0"}"#).unwrap();
    let p = cfg.to_str().unwrap();
    let (v, _) = json_ok(&["optimal-alpha", "--config", p]);
    assert!((v["value"].as_f64().unwrap() - 1.6828).abs() < 1e-3);
    let (v, _) = json_ok(&["optimal-alpha", "--config", p, "--scale", "0.5"]);
    assert_eq!(v["weight"]["scale"], 0.5);
}

fn error_of(args: &[&str]) -> (i32, Value) {
    let out = bin(args);
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    (out.status.code().unwrap(), serde_json::from_str(err.trim()).unwrap())
}

#[test]
fn errors_are_single_line_json_with_exit_codes() {
    let (code, e) = error_of(&["probs", "--theta", "0", "--tau", "0,1", "--alpha", "1"]);
    assert_eq!((code, e["error"]["kind"].as_str()), (2, Some("validation")));
    let (code, _) = error_of(&["criterion", "--weight", "normal:0:-1", "--criterion", "psi0", "--tau", "0"]);
    assert_eq!(code, 2);
    let (code, _) = error_of(&["criterion", "--weight", "normal:0:1", "--criterion", "psi0", "--design", "/nonexistent.json"]);
    assert_eq!(code, 2);
    let (code, _) = error_of(&["frobnicate"]);
    assert_eq!(code, 2);
    let (code, e) = error_of(&["alpha-plus", "--family", "normal", "--scale", "1e-7", "--criterion", "psi0"]);
    assert_eq!((code, e["error"]["kind"].as_str()), (3, Some("solver")));
}
