use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn szego(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szego")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write(dir: &TempDir, name: &str, v: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

fn diagnostic(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

#[test]
fn forward_then_inverse_through_files() {
    let dir = TempDir::new().unwrap();
    let sd = dir.path().join("sd.json");
    let pt = dir.path().join("pt.json");
    let o = szego(&["--seed", "3", "--m", "4", "forward", "--out", sd.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let d = read(&sd);
    for key in ["curve", "q", "q_lift", "R", "coords", "diagnostics", "meta"] {
        assert!(d.get(key).is_some(), "missing {key}");
    }
    assert!(d["diagnostics"]["conjugation_residual"].as_f64().unwrap() < 1e-8);

    let o = szego(&["--input", sd.to_str().unwrap(), "inverse", "--out", pt.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let p = read(&pt);
    assert_eq!(p["point"]["poles"].as_array().unwrap().len(), 4);

    let o = szego(&["--input", pt.to_str().unwrap(), "verify", "roundtrip"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn output_is_deterministic_without_timestamp() {
    let a = szego(&["--seed", "4", "--no-timestamp", "forward"]);
    let b = szego(&["--seed", "4", "--no-timestamp", "forward"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v["meta"].get("timestamp").is_none());
}

#[test]
fn reducible_curve_exits_2() {
    let dir = TempDir::new().unwrap();
    let id = json!([[1, 0], [0, 0], [0, 0], [1, 0]]);
    let p = json!({
        "n": 2,
        "poles": [[0, 0], [1, 0]],
        "G": [id, id],
        "L": [[[1, 0], [-1, 0]], [[-1, 0], [1, 0]]],
    });
    let f = write(&dir, "red.json", &p);
    let o = szego(&["--input", &f, "forward"]);
    assert_eq!(code(&o), 2);
    assert_eq!(diagnostic(&o)["error"], "ReducibleCurve");
    assert_eq!(code(&szego(&["--input", &f, "periods"])), 2);
}

#[test]
fn q_on_theta_divisor_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = szego(&["--seed", "1", "--no-timestamp", "forward"]);
    let mut d: Value = serde_json::from_slice(&o.stdout).unwrap();
    let f = write(&dir, "sd.json", &d);
    let per: Value = serde_json::from_slice(&szego(&["--input", &f, "periods"]).stdout).unwrap();
    let tau = &per["tau"][0][0];
    // the genus-one theta function vanishes at (1 + tau) / 2
    let q = json!([[0.5 + tau[0].as_f64().unwrap() / 2.0, tau[1].as_f64().unwrap() / 2.0]]);
    d["q"] = q.clone();
    d["coords"]["q"] = q;
    let f = write(&dir, "theta.json", &d);
    let o = szego(&["--input", &f, "inverse"]);
    assert_eq!(code(&o), 3);
    assert_eq!(diagnostic(&o)["error"], "OnThetaDivisor");
}

#[test]
fn usage_errors_exit_64() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let o = szego(&["--input", bad.to_str().unwrap(), "forward"]);
    assert_eq!(code(&o), 64);
    assert_eq!(diagnostic(&o)["exit_code"], 64);
    assert_eq!(code(&szego(&["verify", "nonsense"])), 64);
    assert_eq!(code(&szego(&["--m", "2", "forward"])), 64);
    assert_eq!(code(&szego(&["--help"])), 0);
}

#[test]
fn elliptic_periods_match_agm() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "ell.json", &json!({"hyperelliptic": [[0, 0], [-6, 0], [11, 0], [-6, 0], [1, 0]]}));
    let o = szego(&["--input", &f, "periods"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["genus"], 1);
    assert!(v["agm_distance"].as_f64().unwrap() < 1e-8);
    assert!((v["tau"][0][0][1].as_f64().unwrap() - 1.279_261_571_171_006_5).abs() < 1e-8);
}

#[test]
fn verify_writes_report_on_pass_and_fail() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fay.json");
    let o = szego(&["--no-timestamp", "verify", "fay", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = read(&out);
    assert_eq!(r["test"], "fay");
    assert_eq!(r["pass"], true);

    // the measured constant differs from the stated one, so this suite fails
    let out = dir.path().join("var.json");
    let o = szego(&["--no-timestamp", "verify", "szego-var", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let r = read(&out);
    assert_eq!(r["pass"], false);
    assert_eq!(r["residuals"]["convention_mismatch"], true);
    assert_eq!(r["fd_steps"].as_array().unwrap().len(), 2);
}

#[test]
fn several_inputs_keep_order_under_jobs() {
    let dir = TempDir::new().unwrap();
    let mut files = Vec::new();
    for seed in ["5", "6", "7"] {
        let p = dir.path().join(format!("sd{seed}.json"));
        assert_eq!(code(&szego(&["--seed", seed, "forward", "--out", p.to_str().unwrap()])), 0);
        files.push(p.to_str().unwrap().to_string());
    }
    let mut args = vec!["--jobs", "3", "--no-timestamp"];
    for f in &files {
        args.extend(["--input", f.as_str()]);
    }
    args.extend(["verify", "sheetsum"]);
    let o = szego(&args);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    let pos: Vec<usize> = files.iter().map(|f| text.find(f.as_str()).expect("input named in report")).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}
