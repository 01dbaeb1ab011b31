use std::path::Path;
use std::process::{Command, Output};

use rvs_core::geo::GeoPoint;
use rvs_core::taskio::{write_dataset, write_predictions, City, Example, PredictionRecord, Split};

fn rvs(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvs"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RVS_ARTIFACTS_DIR")
        .output()
        .unwrap()
}

fn examples() -> Vec<Example> {
    let o = GeoPoint::new(40.75, -73.98).unwrap();
    (0..6)
        .map(|i| Example {
            id: format!("m{i}"),
            instruction: format!("Walk past the Carson cafe {i} blocks."),
            start: o.destination(45.0 * i as f64, 300.0),
            goal: o.destination(10.0 * i as f64, 700.0),
            city: City::Manhattan,
            split: if i < 4 { Split::DevSeen } else { Split::Train },
        })
        .collect()
}

fn setup(dir: &Path) {
    write_dataset(&examples(), std::fs::File::create(dir.join("d.jsonl")).unwrap()).unwrap();
}

#[test]
fn perfect_predictions_score_full_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let preds: Vec<PredictionRecord> = examples()
        .iter()
        .filter(|e| e.split == Split::DevSeen)
        .map(|e| PredictionRecord::point(&e.id, e.goal, "oracle"))
        .collect();
    write_predictions(&preds, std::fs::File::create(dir.path().join("p.jsonl")).unwrap()).unwrap();
    let out = rvs(
        &["score", "--dataset", "d.jsonl", "--pred", "p.jsonl", "--split", "dev_seen", "--json", "r.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("oracle"));
    assert!(table.contains("100.00"));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["n"], 4);
    assert_eq!(r["acc_100m"], 1.0);
    assert_eq!(r["mean_err"], 0.0);
}

#[test]
fn missing_predictions_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let preds = vec![PredictionRecord::point("m0", examples()[0].goal, "oracle")];
    write_predictions(&preds, std::fs::File::create(dir.path().join("p.jsonl")).unwrap()).unwrap();
    let out = rvs(&["score", "--dataset", "d.jsonl", "--pred", "p.jsonl", "--split", "dev_seen"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m1"));
}

#[test]
fn unreadable_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = rvs(&["score", "--dataset", "d.jsonl", "--pred", "nope.jsonl", "--split", "dev_seen"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = rvs(&["world-graph", "--city", "manhattan"], dir.path());
    assert_eq!(out.status.code(), Some(1), "no extract configured is a usage error");
    std::fs::write(dir.path().join("x.osm"), "<osm></osm>").unwrap();
    std::fs::write(dir.path().join("c.toml"), "osm = \"x.osm\"\n").unwrap();
    let out = rvs(&["world-graph", "--config", "c.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "sead = 3\n").unwrap();
    let out = rvs(&["--config", "c.toml", "stats"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stop_baseline_round_trips_through_score() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = rvs(
        &["baseline", "--system", "stop", "--split", "dev_seen", "--dataset", "d.jsonl", "--artifacts-dir", "arts"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = String::from_utf8_lossy(&out.stdout).split(':').next().unwrap().to_string();
    assert!(dir.path().join(&path).exists());
    let sidecar = dir.path().join(&path).parent().unwrap().join("stage.json");
    assert!(sidecar.exists());
    let out = rvs(&["score", "--dataset", "d.jsonl", "--pred", &path, "--split", "dev_seen", "--csv", "e.csv"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let out = rvs(&["baseline", "--system", "center", "--split", "dev_seen", "--dataset", "d.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn adapt_and_oov() {
    let dir = tempfile::tempdir().unwrap();
    let release = r#"[
        {"id": "a", "content": "Go to the Liberty hall.", "start_point": "POINT (-73.98 40.75)", "end_point": "POINT (-73.97 40.755)", "city": "manhattan", "split": "train"},
        {"id": "b", "content": "Cross Carson street to the bakery.", "start_point": "POINT (-79.99 40.44)", "end_point": "POINT (-79.98 40.442)", "city": "pittsburgh", "split": "dev_unseen"}
    ]"#;
    std::fs::write(dir.path().join("release.json"), release).unwrap();
    std::fs::write(dir.path().join("map.toml"), "city = \"city\"\nsplit = \"split\"\n").unwrap();
    let out = rvs(&["adapt", "--input", "release.json", "--mapping", "map.toml", "--out", "d.jsonl"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = rvs(&["oov", "--dataset", "d.jsonl", "--top", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("carson"), "{text}");
}

#[test]
fn anova_reports_adjusted_p_values() {
    let dir = tempfile::tempdir().unwrap();
    let input = r#"{"len": {"a": [1, 2, 3], "b": [4, 5, 6]}, "turns": {"a": [1, 1, 2], "b": [1, 2, 1]}}"#;
    std::fs::write(dir.path().join("f.json"), input).unwrap();
    let out = rvs(&["anova", "--input", "f.json", "--json", "o.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!((rows[0]["f"].as_f64().unwrap() - 13.5).abs() < 1e-9);
}

#[test]
fn text_predictions_resolve_through_the_axis_grid() {
    use rvs_core::taskio::AxisGrid;
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let grid = AxisGrid::new(City::Manhattan.default_region()).unwrap();
    let mut lines = String::new();
    for e in examples().iter().filter(|e| e.split == Split::DevSeen) {
        let text = if e.id == "m3" { "somewhere".to_string() } else { format!("X1 Y1; {}", grid.axis_position(e.goal).unwrap()) };
        lines.push_str(&serde_json::json!({ "id": e.id, "output_text": text }).to_string());
        lines.push('\n');
    }
    std::fs::write(dir.path().join("p.jsonl"), lines).unwrap();
    let out = rvs(&["score", "--dataset", "d.jsonl", "--pred", "p.jsonl", "--split", "dev_seen", "--json", "r.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["parse_failures"], 1);
    assert_eq!(r["acc_100m"], 0.75, "cell centers of level 16 lie within 100 m of the goal");
}
