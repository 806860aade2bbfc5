use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_relgrowth"));
    c.env_remove("CPT_OUT");
    c
}

fn field<'a>(json: &'a serde_json::Value, key: &str) -> &'a serde_json::Value {
    json.get(key).unwrap_or_else(|| panic!("missing {key}"))
}

#[test]
fn single_scenario_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--scenario", "c=0.3,g=0,weighting=identity", "--quiet", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cell = dir.path().join("identity_c0.3_g0");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cell.join("solution.json")).unwrap()).unwrap();
    assert_eq!(field(&json, "regime"), "ThreeRegion");
    assert_eq!(field(&json, "status"), "solved");
    let lambda = field(&json, "lambda_star").as_f64().unwrap();
    assert!((lambda - 2.0524587116).abs() < 1e-9);
    let wealth = std::fs::read_to_string(cell.join("wealth_map.csv")).unwrap();
    assert!(wealth.starts_with("rho,ours,zhang,class\n"));
    assert!(wealth.lines().count() > 2001);
    let exposure = std::fs::read_to_string(cell.join("exposure.csv")).unwrap();
    assert_eq!(exposure.lines().count(), 402);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn default_run_writes_the_whole_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().arg("--quiet").env("CPT_OUT", dir.path()).status().unwrap();
    assert!(status.success());
    let cells = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(cells, 27);
    let weighting = std::fs::read_to_string(dir.path().join("weighting.csv")).unwrap();
    let lines: Vec<&str> = weighting.lines().collect();
    assert_eq!(lines.len(), 1002);
    assert_eq!(lines[0], "p,identity,power,jinzhou");
    assert_eq!(lines[1], "0,0,0,0");
    assert_eq!(lines[1001], "1,1,1,1");
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 28);
    // the comparison model does not exist for the power weighting
    let power = summary.lines().filter(|l| l.starts_with("power_")).collect::<Vec<_>>();
    assert_eq!(power.len(), 9);
    assert!(power.iter().all(|l| l.contains(",ill_posed,")));
}

#[test]
fn infeasible_scenario_is_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    // the floor e^{-c} exceeds what the budget can buy when g is large
    let status = bin()
        .args(["--quiet", "--scenario", "c=0.01,g=0.5,weighting=identity", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    assert!(row.contains(",infeasible,"), "{row}");
    assert!(dir.path().join("identity_c0.01_g0.5/solution.json").exists());
}

#[test]
fn bad_configuration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"market": {"interest": 0.02}}"#).unwrap();
    let status = bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")).status().unwrap();
    assert!(!status.success());
    let status = bin().args(["--scenario", "colour=blue"]).arg("--out").arg(dir.path().join("o")).status().unwrap();
    assert!(!status.success());
    assert!(!Path::new(&dir.path().join("o")).exists());
}

#[test]
fn golden_check() {
    let out = bin().arg("--check-golden").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("golden.csv");
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/golden.csv")).unwrap();
    std::fs::write(&path, text.replacen("2.20329686175", "2.20329696175", 1)).unwrap();
    let out = bin().arg("--check-golden").arg("--golden").arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda_star"));
}
