use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hotspots(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hotspots"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HOTSPOTS_SEED")
        .output()
        .expect("run hotspots")
}

fn json_of(text: &str) -> serde_json::Value {
    serde_json::from_str(text).expect("json output")
}

#[test]
fn solve_right_isosceles() {
    let dir = tempfile::tempdir().unwrap();
    let out = hotspots(
        &["solve", "--triangle", r#"{"v": [[0,0],[1,0],[0,1]]}"#],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json_of(&String::from_utf8(out.stdout).unwrap());
    let mu = report["mu"].as_f64().unwrap();
    assert!(
        (mu - std::f64::consts::PI.powi(2)).abs() < 1e-6,
        "mu = {mu}"
    );
    assert_eq!(report["certified"], true);

    let saved = fs::read_to_string(dir.path().join("eigenpair.json")).unwrap();
    assert!(saved.starts_with("{\n  \"header\": \"config="));

    let out = hotspots(
        &[
            "analyze",
            dir.path().join("eigenpair.json").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = json_of(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(summary["classification"], "NOCRIT");
    for f in ["verdict.json", "nodal.csv", "grid.csv", "contour.svg"] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.contains("config="), "{f} has no header");
    }
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = hotspots(&["solve", "--triangle", "{\"v\": [[0,0],[1,0]"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = hotspots(&["solve", "--angles", "2.0,2.0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = hotspots(
        &["solve", "--angles", "1.0,1.0", "--set", "solver.nope=3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let out = hotspots(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tampered_eigenpair_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = hotspots(&["solve", "--angles", "1.1,0.75"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let path = dir.path().join("eigenpair.json");
    let mut ep = json_of(&fs::read_to_string(&path).unwrap());
    let v = ep["triangle"]["v"][2][1].as_f64().unwrap();
    ep["triangle"]["v"][2][1] = serde_json::json!(v * 1.01);
    fs::write(&path, serde_json::to_string(&ep).unwrap()).unwrap();
    let out = hotspots(&["analyze", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = hotspots(&["solve", "--angles", "0.9,1.3"], a.path());
    let rb = hotspots(&["solve", "--angles", "0.9,1.3"], b.path());
    assert!(ra.status.success() && rb.status.success());
    let ea = fs::read(a.path().join("eigenpair.json")).unwrap();
    let eb = fs::read(b.path().join("eigenpair.json")).unwrap();
    assert_eq!(ea, eb);
}
