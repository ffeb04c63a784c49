use std::path::Path;
use std::process::{Command, Output};

use raysr_core::ModelSpec;

fn raysr(args: &[&str], dir: &Path, model_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_raysr"));
    cmd.args(args).current_dir(dir).env_remove("RAYSR_MODEL");
    if let Some(m) = model_env {
        cmd.env("RAYSR_MODEL", m);
    }
    cmd.output().expect("run raysr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const SCENE: &str = r#"{"raysr_scene": 1,
  "camera": {"position": [0, 0, 0], "forward": [0, 0, 1], "up": [0, 1, 0]},
  "targets": [
    {"id": "button", "shape": {"kind": "sphere", "center": [0, 0, 2], "diameter_m": 0.033161}},
    {"id": "ghost", "shape": {"kind": "sphere", "center": [0, 0, -2], "diameter_m": 0.1}}
  ],
  "options": {"variant": "baseline", "offset_enabled": true, "distance_enabled": false, "frame": "movement"}}"#;

#[test]
fn estimate_table_row_for_a_small_disc() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scene.json"), SCENE).unwrap();
    let out = raysr(&["estimate", "scene.json", "--format", "table"], dir.path(), None);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("button")).unwrap();
    let cells: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(cells, ["button", "disc", "0.95°", "63.85%"]);
    assert!(text.lines().any(|l| l.starts_with("ghost") && l.contains("error")));
}

#[test]
fn estimate_json_parses_and_reports_each_target() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scene.json"), SCENE).unwrap();
    let out = raysr(&["estimate", "scene.json"], dir.path(), None);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["raysr_report"], 1);
    assert_eq!(v["targets"][0]["status"], "ok");
    assert_eq!(v["targets"][1]["status"], "error");
}

#[test]
fn fit_then_validate_with_the_generating_model() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("truth.json"), ModelSpec::baseline().to_json()).unwrap();
    let synth = raysr(
        &["synth", "--trials-per-cell", "200", "--outlier-rate", "0", "--seed", "3", "-o", "trials.csv"],
        p,
        None,
    );
    assert!(synth.status.success(), "{}", stderr(&synth));

    let fit = raysr(&["fit", "trials.csv", "-o", "fitted.json"], p, None);
    assert!(fit.status.success(), "{}", stderr(&fit));
    let fitted = ModelSpec::from_json(&std::fs::read_to_string(p.join("fitted.json")).unwrap()).unwrap();
    let truth = ModelSpec::baseline();
    assert!((fitted.constants().a - truth.constants().a).abs() < 0.01);
    assert!((fitted.constants().d - truth.constants().d).abs() < 0.02);

    let val = raysr(&["validate", "truth.json", "trials.csv"], p, None);
    assert!(val.status.success(), "{}", stderr(&val));
    let m: serde_json::Value = serde_json::from_slice(&val.stdout).unwrap();
    assert!(m["mae"].as_f64().unwrap() <= 1.0, "mae {}", m["mae"]);
    assert_eq!(m["conditions"], 24);
}

#[test]
fn inverted_sweep_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = raysr(&["sweep", "--shape", "disc", "--from", "4.5", "--to", "1.0", "--step", "0.5"], dir.path(), None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("4.5"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn sweep_csv_has_one_row_per_width() {
    let dir = tempfile::tempdir().unwrap();
    let out = raysr(&["sweep", "--shape", "square", "--from", "1", "--to", "4.5", "--step", "0.5"], dir.path(), None);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(&rows[0][0], "1");
    assert_eq!(&rows[7][0], "4.5");
}

#[test]
fn missing_input_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = raysr(&["estimate", "nope.json"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_scene_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), SCENE.replace("\"diameter_m\": 0.033161", "\"diameter_m\": \"big\""))
        .unwrap();
    let out = raysr(&["estimate", "bad.json"], dir.path(), None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("targets[0].shape"), "{}", stderr(&out));
}

#[test]
fn environment_model_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut doc: serde_json::Value = serde_json::from_str(&ModelSpec::baseline().to_json()).unwrap();
    doc["constants"]["a"] = serde_json::json!(0.5);
    std::fs::write(p.join("custom.json"), doc.to_string()).unwrap();
    let args = ["sweep", "--from", "1", "--to", "1", "--step", "1"];
    let preset = stdout(&raysr(&args, p, None));
    let custom = stdout(&raysr(&args, p, Some("custom.json")));
    assert_ne!(preset, custom);

    std::fs::write(p.join("truth.json"), ModelSpec::baseline().to_json()).unwrap();
    let mut flagged = args.to_vec();
    flagged.extend(["--model", "truth.json"]);
    assert_eq!(stdout(&raysr(&flagged, p, Some("custom.json"))), preset);
}

#[test]
fn unknown_subcommand_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(raysr(&["frobnicate"], dir.path(), None).status.code(), Some(1));
    assert_eq!(raysr(&["--help"], dir.path(), None).status.code(), Some(0));
}
