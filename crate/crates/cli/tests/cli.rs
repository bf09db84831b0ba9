use std::path::Path;
use std::process::Command;

fn phi4(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_phi4")).args(args).output().expect("phi4 runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn gep_scan_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = phi4(&["gep", "scan", "--L", "64,512", "--output", out]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = String::from_utf8(read(dir.path(), "gep_scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(2).unwrap().starts_with("512,"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let res = phi4(&["gep", "scan", "--L", "11"]);
    assert_eq!(res.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"mode\": \"cv\",\n  \"lambda_tilde\": [30, 20]\n}\n").unwrap();
    let res = phi4(&["cv", "sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("lambda_tilde") && err.contains("line 3"), "{err}");
}

#[test]
fn manifest_reruns_byte_identical() {
    let first = tempfile::tempdir().unwrap();
    let args = ["dv", "sweep", "--L", "10", "--shots", "500", "--seed", "3", "--cnot-p", "0.02", "--ro-flip", "0.01"];
    let res = phi4(&[&args[..], &["--output", first.path().to_str().unwrap()]].concat());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let second = tempfile::tempdir().unwrap();
    let manifest = first.path().join("manifest.json");
    let mut cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    cfg["config"]["output"] = second.path().to_str().unwrap().into();
    let rerun = second.path().join("rerun.json");
    std::fs::write(&rerun, serde_json::to_string(&cfg).unwrap()).unwrap();
    let res = phi4(&["dv", "sweep", "--config", rerun.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(read(first.path(), "dv_sweep.csv"), read(second.path(), "dv_sweep.csv"));
}
