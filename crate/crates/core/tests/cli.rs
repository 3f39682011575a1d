use std::process::Command;

use cocoon_core::io::dataset::{from_csv, EventRow, TrackPoint};
use cocoon_core::sweep::SweepPoint;

fn cocoonlab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cocoonlab"))
        .args(args)
        .env_remove("COCOONLAB_WORKERS")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn spectrum_of_small_ring() {
    let (code, out, _) = cocoonlab(&["spectrum", "--L", "3", "--q", "0", "--p", "0", "--g", "0"]);
    assert_eq!(code, 0);
    let rows: Vec<SweepPoint> = from_csv(&out).unwrap();
    let re: Vec<f64> = rows.iter().map(|r| r.re).collect();
    assert_eq!(re.len(), 3);
    for (a, b) in re.iter().zip([-4.0, -1.0, -1.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn verify_small_grid() {
    let (code, out, _) = cocoonlab(&["verify", "--L", "4", "--grid", "small"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().all(|l| !l.starts_with("FAIL")));
}

#[test]
fn butterfly_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let svg = dir.path().join("b.svg");
    let (code, _, err) = cocoonlab(&[
        "butterfly",
        "--L",
        "10",
        "--g",
        "0",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<SweepPoint> = from_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r.re.abs() <= 4.0 + 1e-9 && r.im == 0.0));
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches("<circle").count(), 1000);
    assert!(svg.contains("flux q/L"));
}

#[test]
fn cocoon_json_echoes_config() {
    let (code, out, _) = cocoonlab(&["cocoon", "--L", "6", "--g", "0.4", "--format", "json", "--workers", "3"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["L"], 6);
    assert_eq!(v["config"]["g"], 0.4);
    assert!(v["config"].get("workers").is_none());
    assert_eq!(v["rows"].as_array().unwrap().len(), 216);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "L = 5\nq = 0\ng = 0.7\n").unwrap();
    let (code, out, _) = cocoonlab(&["spectrum", "--config", cfg.to_str().unwrap(), "--g", "0"]);
    assert_eq!(code, 0);
    let rows: Vec<SweepPoint> = from_csv(&out).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.im == 0.0));
    std::fs::write(&cfg, "L = 5\ncolour = red\n").unwrap();
    assert_eq!(cocoonlab(&["spectrum", "--config", cfg.to_str().unwrap()]).0, 2);
}

#[test]
fn critical_g_and_pitchfork() {
    let (code, out, err) = cocoonlab(&["critical-g", "--L", "10", "--q", "1", "--g-max", "1"]);
    assert_eq!(code, 0, "{err}");
    let events: Vec<EventRow> = from_csv(&out).unwrap();
    assert!(!events.is_empty());
    assert!(events[0].g_critical > 0.0);

    let (code, out, err) = cocoonlab(&["pitchfork", "--L", "10", "--q", "1", "--g-max", "1", "--g-step", "0.05"]);
    assert_eq!(code, 0, "{err}");
    let track: Vec<TrackPoint> = from_csv(&out).unwrap();
    // midpoints may be added where matching is ambiguous
    assert_eq!(track.len() % 4, 0);
    for i in 0..=20 {
        let g = i as f64 * 0.05;
        assert_eq!(track.iter().filter(|t| (t.g - g).abs() < 1e-12).count(), 4, "g = {g}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(cocoonlab(&["--version"]).0, 0);
    assert_eq!(cocoonlab(&["fan", "--L", "2"]).0, 2);
    assert_eq!(cocoonlab(&["pitchfork", "--L", "9"]).0, 2);
    assert_eq!(cocoonlab(&["spectrum", "--boundary", "twisted"]).0, 2);
    // no transition on a tiny window at nonzero flux
    let (code, _, err) = cocoonlab(&["pitchfork", "--L", "10", "--q", "1", "--g-max", "0.001", "--g-step", "0.0005"]);
    assert_eq!(code, 3, "{err}");
}
