//! Acceptance gates. Each test prints one `PASS` or `FAIL` line.
//!
//! Gates that need the released dataset or OSM extracts read them from
//! `RVS_DATA_DIR` (default `data/` at the workspace root):
//!
//! * `dataset.jsonl`: every split of every city in the dataset contract
//!   (convert a release file with `rvs adapt`);
//! * `osm/manhattan.osm.pbf`, `osm/pittsburgh.osm.pbf` (or `.osm`).
//!
//! Without them those gates fail and say which file is missing.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use rvs_core::embedding::EmbeddingTable;
use rvs_core::geo::{BoundingBox, GeoPoint, LocalFrame};
use rvs_core::invariants::*;
use rvs_core::mapgraph::{build_map_graph, BuildOptions, EdgeKind};
use rvs_core::metrics::EvalReport;
use rvs_core::osm::{Geometry, Landmark, OsmId, Street};
use rvs_core::par::Workers;
use rvs_core::quantize::{normalize, quantize, QuantizeConfig};
use rvs_core::worldgraph::{random_walks, WalkConfig, WorldGraph, WorldGraphConfig};

type Outcome = Result<String, String>;

fn report(name: &str, outcome: Outcome) {
    match outcome {
        Ok(detail) => println!("PASS {name}: {detail}"),
        Err(detail) => {
            println!("FAIL {name}: {detail}");
            panic!("{name} failed: {detail}");
        }
    }
}

fn rvs() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rvs"));
    c.env_remove("RVS_ARTIFACTS_DIR");
    c
}

fn run(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.output().map_err(|e| format!("cannot start rvs: {e}"))?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    if !out.status.success() {
        return Err(format!(
            "`{cmd:?}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(stdout)
}

fn data_dir() -> PathBuf {
    std::env::var_os("RVS_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn dataset() -> Result<PathBuf, String> {
    let p = data_dir().join("dataset.jsonl");
    if p.exists() {
        Ok(p)
    } else {
        Err(format!("data unavailable: {} not found", p.display()))
    }
}

fn osm(city: &str) -> Result<PathBuf, String> {
    let dir = data_dir().join("osm");
    for ext in ["osm.pbf", "osm"] {
        let p = dir.join(format!("{city}.{ext}"));
        if p.exists() {
            return Ok(p);
        }
    }
    Err(format!("data unavailable: no {city}.osm.pbf or {city}.osm under {}", dir.display()))
}

/// `got` within `tol` (a fraction) of `want`; an expected zero must be met exactly.
fn within_rel(label: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    if (got - want).abs() <= tol * want.abs() {
        Ok(format!("{label} {got:.4} (want {want} +/- {:.0}%)", tol * 100.0))
    } else {
        Err(format!("{label} {got:.4} outside {want} +/- {:.0}%", tol * 100.0))
    }
}

fn within_abs(label: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    if (got - want).abs() <= tol {
        Ok(format!("{label} {got:.4} (want {want} +/- {tol})"))
    } else {
        Err(format!("{label} {got:.4} outside {want} +/- {tol}"))
    }
}

fn gather(checks: Vec<Result<String, String>>) -> Outcome {
    let (ok, bad): (Vec<_>, Vec<_>) = checks.into_iter().partition(|c| c.is_ok());
    let ok: Vec<String> = ok.into_iter().map(Result::unwrap).collect();
    if bad.is_empty() {
        Ok(ok.join("; "))
    } else {
        let bad: Vec<String> = bad.into_iter().map(|c| c.unwrap_err()).collect();
        Err(bad.join("; "))
    }
}

/// Runs a baseline on the released data and scores it.
fn baseline_report(
    work: &Path,
    system: &str,
    city: &str,
    split: &str,
    osm_path: Option<&Path>,
) -> Result<EvalReport, String> {
    let data = dataset()?;
    let pred = work.join(format!("{system}_{city}_{split}.jsonl"));
    let json = work.join(format!("{system}_{city}_{split}.report.json"));
    let mut common: Vec<String> = vec![
        "--city".into(),
        city.into(),
        "--dataset".into(),
        data.display().to_string(),
        "--artifacts-dir".into(),
        work.join("artifacts").display().to_string(),
    ];
    if let Some(o) = osm_path {
        run(rvs().arg("build-graph").arg("--osm").arg(o).args(&common))?;
        common.extend(["--workers".into(), "1".into()]);
        let mut cfg = String::new();
        cfg.push_str(&format!("osm = {:?}\n", o.display().to_string()));
        let cfg_path = work.join(format!("{city}.toml"));
        std::fs::write(&cfg_path, cfg).map_err(|e| e.to_string())?;
        common.extend(["--config".into(), cfg_path.display().to_string()]);
    }
    run(rvs()
        .args(["baseline", "--system", system, "--split", split])
        .arg("--out")
        .arg(&pred)
        .args(&common))?;
    run(rvs()
        .args(["score", "--split", split])
        .arg("--pred")
        .arg(&pred)
        .arg("--json")
        .arg(&json)
        .args(&common))?;
    let text = std::fs::read_to_string(&json).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

#[test]
fn stop_baseline_manhattan_dev_seen() {
    let outcome = (|| {
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let t = Instant::now();
        let r = baseline_report(work.path(), "stop", "manhattan", "dev_seen", None)?;
        let elapsed = t.elapsed();
        let mut checks = vec![
            within_rel("100m acc", r.acc_100m, 0.0, 0.02),
            within_rel("250m acc", r.acc_250m, 0.0154, 0.02),
            within_rel("mean", r.mean_err, 1084.0, 0.02),
            within_rel("median", r.median_err, 1124.0, 0.02),
            within_rel("max", r.max_err, 1929.0, 0.02),
        ];
        checks.push(if elapsed < Duration::from_secs(10) {
            Ok(format!("n {} in {:.2} s", r.n, elapsed.as_secs_f64()))
        } else {
            Err(format!("took {:.2} s, limit 10 s", elapsed.as_secs_f64()))
        });
        gather(checks)
    })();
    report("stop baseline, Manhattan dev_seen", outcome);
}

#[test]
fn stop_baseline_pittsburgh_dev_unseen() {
    let outcome = (|| {
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let r = baseline_report(work.path(), "stop", "pittsburgh", "dev_unseen", None)?;
        gather(vec![
            within_rel("mean", r.mean_err, 960.0, 0.02),
            within_rel("median", r.median_err, 954.0, 0.02),
        ])
    })();
    report("stop baseline, Pittsburgh dev_unseen", outcome);
}

#[test]
fn auc_calibration() {
    let outcome = (|| {
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let stop_m = baseline_report(work.path(), "stop", "manhattan", "dev_seen", None)?;
        let stop_p = baseline_report(work.path(), "stop", "philadelphia", "test", None)?;
        let manhattan = osm("manhattan")?;
        let center_m = baseline_report(work.path(), "center", "manhattan", "dev_seen", Some(&manhattan))?;
        gather(vec![
            within_abs("Stop/Manhattan AUC", stop_m.auc_err, 0.41, 0.02),
            within_abs("Center/Manhattan AUC", center_m.auc_err, 0.40, 0.02),
            within_abs("Stop/Philadelphia AUC", stop_p.auc_err, 0.41, 0.02),
        ])
    })();
    report("AUC formula calibration", outcome);
}

#[test]
fn center_and_landmark_baselines() {
    let outcome = (|| {
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        dataset()?;
        let manhattan = osm("manhattan")?;
        let pittsburgh = osm("pittsburgh")?;
        let center = baseline_report(work.path(), "center", "manhattan", "dev_seen", Some(&manhattan))?;
        let landmark = baseline_report(work.path(), "landmark", "manhattan", "dev_seen", Some(&manhattan))?;
        let landmark_p = baseline_report(work.path(), "landmark", "pittsburgh", "dev_unseen", Some(&pittsburgh))?;
        gather(vec![
            within_rel("Center mean", center.mean_err, 930.0, 0.15),
            within_rel("Landmark mean", landmark.mean_err, 776.0, 0.15),
            within_rel("Center 250m acc", center.acc_250m, 0.0145, 0.15),
            within_rel("Landmark 250m acc", landmark.acc_250m, 0.0526, 0.15),
            within_abs("Landmark Pittsburgh 250m acc", landmark_p.acc_250m, 0.0948, 0.025),
        ])
    })();
    report("Center and Landmark baselines", outcome);
}

#[test]
fn oov_pittsburgh_vs_manhattan() {
    let outcome = (|| {
        let data = dataset()?;
        let out = run(rvs()
            .args(["oov", "--reference", "manhattan", "--target", "pittsburgh", "--top", "5"])
            .arg("--dataset")
            .arg(&data))?;
        let first = out.lines().next().unwrap_or_default();
        let pct: f64 = first
            .rsplit('(')
            .next()
            .and_then(|s| s.trim_end_matches(')').trim_end_matches('%').parse().ok())
            .ok_or_else(|| format!("unexpected output {first:?}"))?;
        let top: Vec<&str> = out.lines().skip(1).filter_map(|l| l.split_whitespace().next()).collect();
        gather(vec![
            within_abs("OOV %", pct, 36.85, 5.0),
            if top.contains(&"carson") {
                Ok(format!("top 5 {top:?}"))
            } else {
                Err(format!("\"carson\" not in top 5 {top:?}"))
            },
        ])
    })();
    report("OOV, Pittsburgh vs Manhattan", outcome);
}

fn cases(n: u32) -> TestRunner {
    TestRunner::new(Config {
        cases: n,
        failure_persistence: None,
        ..Config::default()
    })
}

fn fail(e: String) -> TestCaseError {
    TestCaseError::fail(e)
}

fn property_suites() -> Outcome {
    let mut done = Vec::new();

    let point = (-89.9f64..89.9, -180.0f64..180.0).prop_map(|(lat, lng)| GeoPoint::new(lat, lng).unwrap());
    cases(10_000)
        .run(&(point, 15u8..=17), |(p, level)| check_cell_of_point(p, level).map_err(fail))
        .map_err(|e| format!("cells: {e}"))?;
    done.push("cells 10000");

    cases(48)
        .run(&prop::collection::vec((-600.0f64..600.0, -600.0f64..600.0), 1..25), |spots| {
            let frame = LocalFrame::new(GeoPoint::new(40.44, -79.99).unwrap());
            let mut streets = Vec::new();
            for k in 0..5i64 {
                let c = -400.0 + 200.0 * k as f64;
                let ew = (0..5).map(|m| frame.to_geo([-400.0 + 200.0 * m as f64, c])).collect();
                let ns = (0..5).map(|m| frame.to_geo([c, -400.0 + 200.0 * m as f64])).collect();
                streets.push(Street { way_id: k, name: None, highway: "residential".into(), node_ids: (0..5).map(|m| 100 + 5 * k + m).collect(), points: ew });
                streets.push(Street { way_id: 10 + k, name: None, highway: "residential".into(), node_ids: (0..5).map(|m| 100 + k + 5 * m).collect(), points: ns });
            }
            let landmarks: Vec<Landmark> = spots
                .iter()
                .enumerate()
                .map(|(i, (x, y))| {
                    let p = frame.to_geo([*x, *y]);
                    Landmark { id: OsmId::node(i as i64 + 1), name: None, tags: [("shop".to_string(), "x".to_string())].into(), geometry: Geometry::Point(p), centroid: p }
                })
                .collect();
            let (g, _) = build_map_graph(&landmarks, &streets, None, &BuildOptions::default()).map_err(|e| fail(e.to_string()))?;
            let problems = g.validate();
            if !problems.is_empty() {
                return Err(fail(problems.join(", ")));
            }
            if g.edges.iter().any(|e| e.kind == EdgeKind::Projection && e.weight > 500.0) {
                return Err(fail("projection edge over 500 m".into()));
            }
            if g.largest_component().len() != g.nodes.len() {
                return Err(fail("graph is disconnected".into()));
            }
            Ok(())
        })
        .map_err(|e| format!("projections: {e}"))?;
    done.push("projections 48");

    cases(12)
        .run(&(35.0f64..45.0, -100.0f64..-75.0, 0usize..6, any::<u64>()), |(lat, lng, locs, seed)| {
            let region = BoundingBox::new(lat, lng, lat + 0.004, lng + 0.005).unwrap();
            let points: Vec<(OsmId, GeoPoint)> = (0..locs)
                .map(|k| (OsmId::node(k as i64), GeoPoint::new(lat + 0.0005 * k as f64, lng + 0.001).unwrap()))
                .collect();
            let wg = WorldGraph::from_region(&region, &points, WorldGraphConfig::default()).map_err(|e| fail(e.to_string()))?;
            check_world_edge_counts(&wg).map_err(fail)?;
            let walks = random_walks(&wg, &WalkConfig { walks_per_node: 2, walk_length: 10, seed }, Workers::SINGLE);
            check_walks(&wg, &walks).map_err(fail)
        })
        .map_err(|e| format!("world graph and walks: {e}"))?;
    done.push("world graph and walks 12");

    let rows = prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 6), 12..60);
    cases(12)
        .run(&(rows, 2usize..8, any::<u64>()), |(rows, k, seed)| {
            let table = EmbeddingTable { nodes: (0..rows.len()).map(|i| format!("n{i}")).collect(), dim: 6, data: rows.concat() };
            let cfg = QuantizeConfig { k, seed, ..Default::default() };
            let (a, models) = quantize(&table, &cfg, Workers::SINGLE).map_err(|e| fail(e.to_string()))?;
            let (b, _) = quantize(&table, &cfg, Workers::SINGLE).map_err(|e| fail(e.to_string()))?;
            if a != b {
                return Err(fail("quantization is not deterministic".into()));
            }
            let mut unit = table.data.clone();
            unit.chunks_exact_mut(6).for_each(normalize);
            check_kmeans_local_optimality(&unit, &models[0]).map_err(fail)
        })
        .map_err(|e| format!("quantization: {e}"))?;
    done.push("quantization 12");

    cases(256)
        .run(&(prop::collection::vec(0.0f64..3e4, 1..60), any::<usize>()), |(errors, bump)| {
            let order: Vec<usize> = (0..errors.len()).rev().collect();
            check_metric_properties(&errors, bump, &order).map_err(fail)
        })
        .map_err(|e| format!("metrics: {e}"))?;
    done.push("metrics 256");

    Ok(done.join(", "))
}

#[test]
fn property_suites_within_five_minutes() {
    let t = Instant::now();
    let outcome = property_suites().and_then(|d| {
        let s = t.elapsed().as_secs_f64();
        if s < 300.0 {
            Ok(format!("{d} cases in {s:.1} s"))
        } else {
            Err(format!("took {s:.1} s, limit 300 s"))
        }
    });
    report("property suites", outcome);
}

fn pipeline(dir: &Path, artifacts: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = dir.join("rvs.toml");
    let base = |c: &mut Command| {
        c.arg("--config").arg(&cfg).args(["--workers", "1", "--artifacts-dir"]).arg(dir.join(artifacts));
    };
    for stage in ["build-graph", "world-graph", "embed", "quantize", "export-records"] {
        let mut c = rvs();
        c.arg(stage);
        base(&mut c);
        run(&mut c)?;
    }
    let records = dir.join(artifacts).join("records");
    let mut files = Vec::new();
    for entry in walk(&records).map_err(|e| e.to_string())? {
        let name = entry.strip_prefix(dir.join(artifacts)).unwrap().display().to_string();
        if name.ends_with(".jsonl") {
            files.push((name, std::fs::read(&entry).map_err(|e| e.to_string())?));
        }
    }
    files.sort();
    Ok(files)
}

fn walk(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            out.extend(walk(&p)?);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}

#[test]
fn pipeline_is_byte_deterministic() {
    let outcome = (|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        run(rvs()
            .args(["synth", "--rows", "8", "--cols", "8", "--examples", "90", "--out"])
            .arg(dir.path()))?;
        let a = pipeline(dir.path(), "run_a")?;
        let b = pipeline(dir.path(), "run_b")?;
        if a.is_empty() {
            return Err("no record files were written".into());
        }
        let bytes: usize = a.iter().map(|(_, b)| b.len()).sum();
        if a == b {
            Ok(format!("{} record files, {bytes} bytes, identical", a.len()))
        } else {
            Err("record files differ between runs".into())
        }
    })();
    report("pipeline determinism", outcome);
}

#[test]
fn sampled_manhattan_path_lengths() {
    let outcome = (|| {
        let manhattan = osm("manhattan")?;
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let common = |c: &mut Command| {
            c.arg("--osm").arg(&manhattan);
        };
        let arts = work.path().join("artifacts");
        let mut build = rvs();
        build.args(["build-graph", "--city", "manhattan", "--artifacts-dir"]).arg(&arts);
        common(&mut build);
        run(&mut build)?;
        let cfg = work.path().join("rvs.toml");
        std::fs::write(&cfg, format!("osm = {:?}\n", manhattan.display().to_string())).map_err(|e| e.to_string())?;
        let out = run(rvs()
            .args(["sample-pairs", "--n", "1000", "--city", "manhattan", "--artifacts-dir"])
            .arg(&arts)
            .arg("--config")
            .arg(&cfg))?;
        let mean: f64 = out
            .split("mean path ")
            .nth(1)
            .and_then(|s| s.split_whitespace().next())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("unexpected output {out:?}"))?;
        if (900.0..=1250.0).contains(&mean) {
            Ok(format!("mean path {mean:.1} m over 1000 pairs"))
        } else {
            Err(format!("mean path {mean:.1} m outside [900, 1250]"))
        }
    })();
    report("sampled pair path lengths", outcome);
}
