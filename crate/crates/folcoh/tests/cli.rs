use std::process::{Command, Output};

fn folcoh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_folcoh")).args(args).output().unwrap()
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("folcoh-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn list_shows_every_case() {
    let out = folcoh(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for c in ["hopf", "carriere", "torus-bundle", "flat-torus-flow", "t3-bump-flow", "linear-flow-t3", "carriere-perturbed"] {
        assert!(text.contains(c), "{c} missing");
    }
}

#[test]
fn usage_errors() {
    assert_eq!(folcoh(&["run", "--case", "sphere"]).status.code(), Some(64));
    assert_eq!(folcoh(&["run", "--case", "hopf", "--n", "4", "--jmax", "2"]).status.code(), Some(64));
    assert_eq!(folcoh(&["run", "--case", "hopf", "--suite", "most"]).status.code(), Some(64));
    assert_eq!(folcoh(&["run", "--case", "hopf", "--tol", "0.5"]).status.code(), Some(64));
}

#[test]
fn hopf_run_writes_report_and_spectra() {
    let path = scratch("hopf.json");
    let out = folcoh(&["run", "--case", "hopf", "--jmax", "2", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    for key in ["case", "flags", "resolution", "thresholds", "betti", "identities", "properties", "discrepancies"] {
        assert!(v.get(key).is_some(), "{key} missing");
    }
    assert_eq!(v["betti"]["h_a_rank"], serde_json::json!([0, 1, 0, 1]));
    assert_eq!(v["exit_code"], 0);

    let csv = std::fs::read_to_string(path.with_extension("spectra.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("degree,index,eigenvalue"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 3);
    assert!(row[2].parse::<f64>().is_ok());

    let again = folcoh(&["run", "--case", "hopf", "--jmax", "2", "--seed", "3"]);
    let mut a: serde_json::Value = serde_json::from_str(&first).unwrap();
    let mut b: serde_json::Value = serde_json::from_slice(&again.stdout).unwrap();
    a["timestamp"] = 0.into();
    b["timestamp"] = 0.into();
    assert_eq!(a, b);
}

#[test]
fn betti_suite_on_small_linear_flow() {
    let out = folcoh(&["run", "--case", "linear-flow-t3", "--n", "4", "--suite", "betti"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["betti"]["h_b"], serde_json::json!([1, 2, 1]));
    assert_eq!(out.status.code(), Some(0));
}
