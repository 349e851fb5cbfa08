use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn stirep(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stirep"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).expect("column present");
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn solve_reports_area() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["solve", "--phidot-i", "0.4", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = json(&tmp.path().join("o/solution.json"));
    assert!((sol["area_over_pi"].as_f64().unwrap() - 4.1904).abs() < 1e-4);
    assert!(tmp.path().join("o/trajectory.csv").exists());
    assert!(tmp.path().join("o/solve.meta.json").exists());
}

#[test]
fn malformed_seed_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.json"), "{\"phidot_i\": 0.4, \"lambda0\": ").unwrap();
    let out = stirep(tmp.path(), &["solve", "--phidot-i", "0.4", "--seed-file", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn seed_file_drives_the_solve() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("seed.json"),
        r#"{"phidot_i": 16, "lambda0": -0.524, "lambda1": 0.868, "lambda2": 1.058}"#,
    )
    .unwrap();
    let out = stirep(tmp.path(), &["solve", "--phidot-i", "16", "--seed-file", "seed.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let sol = json(&tmp.path().join("o/solution.json"));
    assert!((sol["area_over_pi"].as_f64().unwrap() - 3.4615).abs() < 1e-4);
}

#[test]
fn wrong_crossing_index_does_not_converge() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["solve", "--phidot-i", "7", "--crossing", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_values_are_rejected_before_dispatch() {
    let tmp = TempDir::new().unwrap();
    for args in [
        &["solve", "--phidot-i", "-1"][..],
        &["simulate", "--phidot-i", "0", "--T", "0"],
        &["profile", "--pulse", "reference", "--eps-range", "-0.9:0.9:3"],
        &["sweep", "--grid", "3:1:5"],
        &["sweep", "--grid", "0:300:4"],
    ] {
        let out = stirep(tmp.path(), args);
        assert_ne!(out.status.code(), Some(0), "{args:?}");
        assert!(!tmp.path().join("out").exists(), "{args:?} wrote output");
    }
}

#[test]
fn sweep_spans_the_family_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    for dir in ["a", "b"] {
        let out = stirep(tmp.path(), &["sweep", "--grid", "0:16:33", "--out", dir]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let area = csv_column(&tmp.path().join("a/family.csv"), "area_over_pi");
    assert_eq!(area.len(), 33);
    let max = area.iter().cloned().fold(f64::MIN, f64::max);
    let min = area.iter().cloned().fold(f64::MAX, f64::min);
    assert!((max - 5.7498).abs() < 1e-4, "{max}");
    assert!((min - 3.4615).abs() < 1e-4, "{min}");
    let a2 = csv_column(&tmp.path().join("a/loss_curve.csv"), "a2_over_t");
    assert_eq!(a2.len(), 33);
    for name in ["family.csv", "family.json", "loss_curve.csv"] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn sweep_default_grid() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["sweep", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let slopes = csv_column(&tmp.path().join("o/family.csv"), "phidot_i");
    assert_eq!(slopes.len(), 65);
    assert_eq!(slopes[0], 0.0);
    assert_eq!(*slopes.last().unwrap(), 16.0);
}

#[test]
fn simulate_transfers_population() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["simulate", "--phidot-i", "250", "--eps", "0", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let fin = json(&tmp.path().join("o/final.json"));
    assert!((fin["p3"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let p3 = csv_column(&tmp.path().join("o/populations.csv"), "p3");
    assert!((p3.last().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn simulate_with_decay_reports_estimate() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["simulate", "--phidot-i", "0", "--gamma", "0.001", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let fin = json(&tmp.path().join("o/final.json"));
    let lost = 1.0 - fin["norm"].as_f64().unwrap().powi(2);
    let est = fin["loss_estimate"]["p_loss"].as_f64().unwrap();
    assert!((lost / est - 1.0).abs() < 0.1, "{lost} vs {est}");
}

#[test]
fn reference_profile_width() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["profile", "--pulse", "reference", "--T", "1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let s = json(&tmp.path().join("o/profile_summary.json"));
    assert!((s["width_uhf"].as_f64().unwrap() - 0.004).abs() < 1e-3);
    let eps = csv_column(&tmp.path().join("o/profile.csv"), "epsilon");
    assert_eq!(eps.len(), 401);
}

#[test]
fn synthesize_writes_column_formats() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["synthesize", "--phidot-i", "16", "--points", "513", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let pulses = fs::read_to_string(tmp.path().join("o/pulses.csv")).unwrap();
    assert_eq!(
        pulses.lines().next().unwrap(),
        "t_over_T,omega_p_T,omega_s_T,abs_omega_p_T,abs_omega_s_T"
    );
    assert_eq!(pulses.lines().count(), 514);
    let angles = fs::read_to_string(tmp.path().join("o/angles.csv")).unwrap();
    assert!(angles.starts_with("t_over_T,phi,eta,theta,"));
}

#[test]
fn config_file_sits_below_flags() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.cfg"), "# defaults\nphidot-i = 16\nout = fromfile\n").unwrap();
    let out = stirep(tmp.path(), &["solve", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    let sol = json(&tmp.path().join("fromfile/solution.json"));
    assert_eq!(sol["phidot_i"].as_f64(), Some(16.0));

    let out = stirep(tmp.path(), &["solve", "--config", "run.cfg", "--phidot-i", "250"]);
    assert_eq!(out.status.code(), Some(0));
    let sol = json(&tmp.path().join("fromfile/solution.json"));
    assert_eq!(sol["phidot_i"].as_f64(), Some(250.0));

    fs::write(tmp.path().join("bad.cfg"), "phidot = 1\n").unwrap();
    let out = stirep(tmp.path(), &["solve", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn table_single_column() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["table", "--only", "phidot250", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let t = json(&tmp.path().join("o/table.json"));
    let cols = t.as_array().unwrap();
    assert_eq!(cols.len(), 1);
    let a2 = cols[0]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["quantity"] == "a2_over_T")
        .unwrap();
    assert!((a2["computed"].as_f64().unwrap() - 0.1291).abs() < 1e-4);
}

#[test]
fn table_tolerance_plumbing() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["table", "--only", "phidot0", "--tolerance", "1e-12"]);
    assert_eq!(out.status.code(), Some(stirep_cli::EXIT_CHECK_FAILED));
    let out = stirep(tmp.path(), &["table", "--only", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn full_table_passes() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["table", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let t = json(&tmp.path().join("o/table.json"));
    assert_eq!(t.as_array().unwrap().len(), 5);
}

#[test]
fn verify_emits_json_lines() {
    let tmp = TempDir::new().unwrap();
    let out = stirep(tmp.path(), &["verify", "--jobs", "2", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = fs::read_to_string(tmp.path().join("o/checks.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() > 40);
    assert!(lines.iter().all(|l| l["passed"] == true));
}
