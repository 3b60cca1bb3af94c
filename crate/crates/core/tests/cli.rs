use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn wts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wts")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wts-cli-it-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn classify_log_symbol() {
    let v = json(&wts(&["classify", "--symbol", "log(x+2)", "--order", "8"]));
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "classify");
    assert_eq!(v["semigroup_classes"]["completely_hyperexpansive"]["status"], "holds");
    assert_eq!(v["checked_order"], 8);
}

#[test]
fn dual_of_counterexample() {
    let v = json(&wts(&["dual", "--symbol", "2*x - log(cosh(x-10)) + 100"]));
    let tc = &v["theorem_checks"];
    assert_eq!(tc["concave_implies_dual_log_convex"]["status"], "pass");
    assert_eq!(tc["dual_cm"]["status"], "fail");
    assert_eq!(tc["dual_cm"]["witnesses"][0]["order"], 3);
    assert_eq!(v["dual_symbol"], "1/(2*x - log(cosh(x - 10)) + 100)");
}

#[test]
fn assert_exit_codes() {
    let ok = wts(&["dual", "--symbol", "log(x+2)", "--order", "8", "--assert", "ca_implies_dual_cm"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = wts(&["classify", "--symbol", "exp(x)", "--order", "8", "--assert", "subnormal_contraction"]);
    assert_eq!(bad.status.code(), Some(1));
    let input = wts(&["classify", "--symbol", "log(x) +"]);
    assert_eq!(input.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&input.stderr).contains("offset 8"));
    let domain = wts(&["classify", "--symbol", "log(x)"]);
    assert_eq!(domain.status.code(), Some(2));
}

#[test]
fn apply_matches_weight() {
    let dir = scratch("apply");
    let input = dir.join("f.csv");
    let rows: String = (0..=400).map(|i| format!("{},{}\n", i as f64 * 0.01, 1.0)).collect();
    fs::write(&input, format!("x,value\n{rows}")).unwrap();
    let out = wts(&["apply", "--symbol", "sqrt(x+1)", "--t", "1", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,value");
    assert_eq!(lines.len(), 402);
    let at = |i: usize| lines[i + 1].split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert_eq!(at(50), 0.0);
    assert!((at(200) - 1.5f64.powf(0.25)).abs() < 1e-12);

    let misaligned = wts(&["apply", "--symbol", "x+1", "--t", "0.005", "--input", input.to_str().unwrap()]);
    assert_eq!(misaligned.status.code(), Some(2));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn fit_writes_measure_files() {
    let dir = scratch("fit");
    let base = dir.join("fit.json");
    let out = wts(&["fit", "--symbol", "2 - exp(-x)", "--atoms", "0.5,1,2", "--output", base.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&base).unwrap()).unwrap();
    assert_eq!(v["ca"]["triple"]["phi0"], 1.0);
    for suffix in [".cm.csv", ".ca.csv", ".moment.csv"] {
        let text = fs::read_to_string(dir.join(format!("fit.json{suffix}"))).unwrap();
        assert!(text.starts_with("a,weight\n"), "{suffix}");
    }
    let ca = fs::read_to_string(dir.join("fit.json.ca.csv")).unwrap();
    assert!(ca.lines().nth(1).unwrap().starts_with("1,"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bridge_csv_and_config_file() {
    let dir = scratch("bridge");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "command = bridge\nsymbol = x+1\npoints = 4\n").unwrap();
    let out = wts(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n,beta,alpha,dual_alpha"));
    assert_eq!(text.lines().count(), 5);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn report_merges_sections() {
    let v = json(&wts(&["report", "--symbol", "x+1", "--order", "8"]));
    for key in ["classification", "cross_check", "dual", "bridge", "fits", "weight_limits"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["cross_check"]["conflicts"], 0);
    assert_eq!(v["fits"]["ca"]["representable"], true);
}
