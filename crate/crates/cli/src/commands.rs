use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;

use rvs_core::baselines::{dataset_centroid, run_baseline, System};
use rvs_core::embedding::{train_embeddings, EmbeddingError, EmbeddingMeta, EmbeddingTable};
use rvs_core::geo::{haversine_distance, BoundingBox, GeoPoint};
use rvs_core::mapgraph::{build_map_graph, MapError, MapGraph};
use rvs_core::metrics::{anova_fdr, oov_analysis, score, text_table, write_errors_csv, MetricsError};
use rvs_core::osm::{ingest_osm, ingest_osm_xml, OsmError};
use rvs_core::quantize::{quantize, QuantizeError, TokenAssignment};
use rvs_core::synthetic::{self, GridCity};
use rvs_core::taskio::{
    adapt_release, export_records, graph_vocabulary, load_dataset, read_predictions, sample_pairs,
    write_dataset, write_predictions, write_records, AdapterConfig, AxisGrid, City, Example, PredictionRecord,
    RecordFormat, Split, TaskError,
};
use rvs_core::worldgraph::{random_walks, WorldError, WorldGraph};

use crate::artifacts::{self, create, file_sha256, finish, open_input, Stage};
use crate::config::{invalid, parse_region, Invalid, RunConfig};
use crate::{Cli, Command, ScoreArgs};

const MAP_GRAPH: &str = "map_graph.jsonl";
const WORLD_GRAPH: &str = "world_graph.jsonl";
const EMBEDDINGS: &str = "embeddings.bin";
const TOKENS: &str = "tokens.jsonl";
const RECORD_FORMAT: &str = "record_format.json";
const GRAPH_VOCAB: &str = "graph_vocab.txt";
const PREDICTIONS: &str = "predictions.jsonl";

/// 2 for unreadable or unwritable files, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<Invalid>().is_some() {
            return 1;
        }
        let io = cause.is::<std::io::Error>()
            || matches!(cause.downcast_ref::<MapError>(), Some(MapError::Io(_)))
            || matches!(cause.downcast_ref::<WorldError>(), Some(WorldError::Io(_)))
            || matches!(cause.downcast_ref::<EmbeddingError>(), Some(EmbeddingError::Io(_)))
            || matches!(cause.downcast_ref::<QuantizeError>(), Some(QuantizeError::Io(_)))
            || matches!(cause.downcast_ref::<TaskError>(), Some(TaskError::Io(_)))
            || matches!(cause.downcast_ref::<OsmError>(), Some(OsmError::UnreadableExtract { .. }));
        if io {
            return 2;
        }
    }
    1
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = cli.artifacts_dir {
        cfg.artifacts_dir = d;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(c) = cli.city {
        cfg.city = c;
    }
    if let Some(d) = cli.dataset {
        cfg.dataset = Some(d);
    }
    match cli.command {
        Command::BuildGraph { osm, region } => {
            if let Some(o) = osm {
                cfg.osm = Some(o);
            }
            if let Some(r) = region {
                let r = parse_region(&r).map_err(invalid)?;
                cfg.regions.insert(cfg.city, r);
            }
            cfg.validate()?;
            build_graph(&cfg)
        }
        Command::WorldGraph => {
            cfg.validate()?;
            world_graph(&cfg)
        }
        Command::Embed {
            dim,
            epochs,
            walks_per_node,
            walk_length,
        } => {
            if let Some(v) = dim {
                cfg.embedding.dim = v;
            }
            if let Some(v) = epochs {
                cfg.embedding.epochs = v;
            }
            if let Some(v) = walks_per_node {
                cfg.walks.walks_per_node = v;
            }
            if let Some(v) = walk_length {
                cfg.walks.walk_length = v;
            }
            cfg.validate()?;
            embed(&cfg)
        }
        Command::Quantize { k, layers } => {
            if let Some(v) = k {
                cfg.quantize.k = v;
            }
            if let Some(v) = layers {
                cfg.quantize.layers = v;
            }
            cfg.validate()?;
            quantize_stage(&cfg)
        }
        Command::ExportRecords { split } => {
            cfg.validate()?;
            export(&cfg, split)
        }
        Command::Baseline { system, split, out } => baseline(&cfg, system, split, out),
        Command::Score(args) => score_cmd(&cfg, &args),
        Command::Stats => stats(&cfg),
        Command::Oov {
            reference,
            target,
            split,
            top,
        } => oov(&cfg, reference, target, split, top),
        Command::SamplePairs { n, max_path, out } => {
            if let Some(n) = n {
                cfg.sampling.count = n;
            }
            if let Some(m) = max_path {
                cfg.sampling.max_path_m = m;
            }
            sample(&cfg, out)
        }
        Command::Anova { input, json } => anova(&input, json.as_deref()),
        Command::Adapt { input, mapping, out } => adapt(&input, mapping.as_deref(), &out),
        Command::Synth {
            out,
            rows,
            cols,
            examples,
        } => synth(&out, rows, cols, examples, cfg.seed),
    }
}

fn root(cfg: &RunConfig) -> &Path {
    &cfg.artifacts_dir
}

fn stage_graph(cfg: &RunConfig) -> Result<Stage> {
    let osm = cfg
        .osm
        .as_ref()
        .ok_or_else(|| invalid(anyhow::anyhow!("no OSM extract; pass --osm or set `osm` in the config")))?;
    let sha = file_sha256(osm)?;
    let config = json!({
        "city": cfg.city,
        "region": cfg.region(cfg.city),
        "ingest": cfg.ingest,
        "graph": cfg.graph,
    });
    Ok(Stage::new("graph", &config, 0, &[&sha]))
}

fn stage_world(cfg: &RunConfig, graph: &Stage) -> Stage {
    Stage::new("world", &cfg.world, 0, &[&graph.hash])
}

fn stage_embed(cfg: &RunConfig, world: &Stage) -> Stage {
    let config = json!({ "walks": cfg.walks, "train": cfg.train_config() });
    Stage::new("embed", &config, cfg.seed, &[&world.hash])
}

fn stage_quantize(cfg: &RunConfig, embed: &Stage) -> Stage {
    Stage::new("quantize", &cfg.quantize_config(), cfg.seed, &[&embed.hash])
}

fn dataset_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.dataset
        .as_deref()
        .ok_or_else(|| invalid(anyhow::anyhow!("no dataset; pass --dataset or set `dataset` in the config")))
}

fn load_graph(cfg: &RunConfig) -> Result<(Stage, MapGraph)> {
    let stage = stage_graph(cfg)?;
    let g = MapGraph::read_jsonl(open_input(&stage.file(root(cfg), MAP_GRAPH), "build-graph")?)?;
    Ok((stage, g))
}

fn build_graph(cfg: &RunConfig) -> Result<()> {
    let stage = stage_graph(cfg)?;
    let region = cfg.region(cfg.city);
    let osm = cfg.osm.as_ref().expect("checked by stage_graph");
    let extract = ingest_osm(osm, &region, &cfg.ingest)?;
    let (g, report) = build_map_graph(&extract.landmarks, &extract.streets, Some(region), &cfg.build_options())?;
    let problems = g.validate();
    for p in &problems {
        log::warn!("{p}");
    }
    let path = stage.file(root(cfg), MAP_GRAPH);
    let mut w = create(&path)?;
    g.write_jsonl(&mut w)?;
    finish(w)?;
    let stats = g.stats();
    artifacts::write_sidecar(
        &stage.dir(root(cfg)),
        &stage.sidecar(json!({ "stats": stats, "report": report, "problems": problems })),
    )?;
    println!(
        "{}: {} landmarks, {} streets, {} nodes, {} edges, {:.2} km2",
        path.display(),
        stats.num_landmarks,
        stats.num_streets,
        stats.num_nodes,
        stats.num_edges,
        stats.area_km2
    );
    Ok(())
}

fn load_world(cfg: &RunConfig) -> Result<(Stage, Stage, WorldGraph)> {
    let graph = stage_graph(cfg)?;
    let stage = stage_world(cfg, &graph);
    let wg = WorldGraph::read_jsonl(open_input(&stage.file(root(cfg), WORLD_GRAPH), "world-graph")?)?;
    Ok((graph, stage, wg))
}

fn world_graph(cfg: &RunConfig) -> Result<()> {
    let (graph, g) = load_graph(cfg)?;
    let stage = stage_world(cfg, &graph);
    let wg = WorldGraph::build(&g, cfg.world)?;
    let path = stage.file(root(cfg), WORLD_GRAPH);
    let mut w = create(&path)?;
    wg.write_jsonl(&mut w)?;
    finish(w)?;
    let levels: BTreeMap<String, usize> = cfg
        .world
        .levels
        .iter()
        .map(|&l| (l.to_string(), wg.cells_at(l).count()))
        .collect();
    artifacts::write_sidecar(
        &stage.dir(root(cfg)),
        &stage.sidecar(json!({
            "nodes": wg.nodes().len(),
            "edges": wg.edges().len(),
            "locations": wg.num_locations(),
            "cells_per_level": levels,
        })),
    )?;
    println!("{}: {} nodes, {} edges", path.display(), wg.nodes().len(), wg.edges().len());
    Ok(())
}

fn embed(cfg: &RunConfig) -> Result<()> {
    let (_, world, wg) = load_world(cfg)?;
    let stage = stage_embed(cfg, &world);
    let walk_cfg = cfg.walk_config();
    let walks = random_walks(&wg, &walk_cfg, cfg.workers());
    let train = cfg.train_config();
    let data = train_embeddings(&walks, wg.nodes().len(), &train, cfg.workers())?;
    let table = EmbeddingTable {
        nodes: wg.node_names(),
        dim: train.dim,
        data,
    };
    let path = stage.file(root(cfg), EMBEDDINGS);
    std::fs::create_dir_all(stage.dir(root(cfg)))?;
    let meta = EmbeddingMeta {
        train,
        walks_per_node: walk_cfg.walks_per_node,
        walk_length: walk_cfg.walk_length,
        walk_seed: walk_cfg.seed,
    };
    table.save(&path, &meta)?;
    artifacts::write_sidecar(
        &stage.dir(root(cfg)),
        &stage.sidecar(json!({ "nodes": table.len(), "dim": table.dim, "walks": walks.len() })),
    )?;
    println!("{}: {} x {}", path.display(), table.len(), table.dim);
    Ok(())
}

fn quantize_stage(cfg: &RunConfig) -> Result<()> {
    let graph = stage_graph(cfg)?;
    let world = stage_world(cfg, &graph);
    let embed = stage_embed(cfg, &world);
    let stage = stage_quantize(cfg, &embed);
    let emb_path = embed.file(root(cfg), EMBEDDINGS);
    if !emb_path.exists() {
        open_input(&emb_path, "embed")?;
    }
    let (table, _) = EmbeddingTable::load(&emb_path)?;
    let (assignment, models) = quantize(&table, &cfg.quantize_config(), cfg.workers())?;
    let path = stage.file(root(cfg), TOKENS);
    let mut w = create(&path)?;
    assignment.write_jsonl(&mut w)?;
    finish(w)?;
    let inertia: Vec<f64> = models.iter().map(|m| m.inertia).collect();
    let iterations: Vec<usize> = models.iter().map(|m| m.iterations).collect();
    artifacts::write_sidecar(
        &stage.dir(root(cfg)),
        &stage.sidecar(json!({
            "nodes": assignment.nodes.len(),
            "vocab_size": assignment.vocab_size(),
            "inertia": inertia,
            "iterations": iterations,
        })),
    )?;
    println!(
        "{}: {} nodes, {} tokens each, vocabulary {}",
        path.display(),
        assignment.nodes.len(),
        assignment.layers,
        assignment.vocab_size()
    );
    Ok(())
}

fn city_examples(cfg: &RunConfig, split: Option<Split>) -> Result<Vec<Example>> {
    let all = load_dataset(dataset_path(cfg)?, split)?;
    Ok(all.into_iter().filter(|e| e.city == cfg.city).collect())
}

fn export(cfg: &RunConfig, split: Option<Split>) -> Result<()> {
    let (graph, g) = load_graph(cfg)?;
    let world = stage_world(cfg, &graph);
    let embed = stage_embed(cfg, &world);
    let quant = stage_quantize(cfg, &embed);
    let qcfg = cfg.quantize_config();
    let assignment = TokenAssignment::read_jsonl(open_input(&quant.file(root(cfg), TOKENS), "quantize")?, qcfg.k)?;
    let data = dataset_path(cfg)?;
    let data_sha = file_sha256(data)?;
    let region = cfg.region(cfg.city);
    let config = json!({ "city": cfg.city, "region": region, "world": cfg.world, "paths": cfg.paths });
    let stage = Stage::new("records", &config, cfg.seed, &[&quant.hash, &graph.hash, &data_sha]);
    let grid = AxisGrid::new(region)?;

    let examples = city_examples(cfg, split)?;
    let (inside, outside): (Vec<Example>, Vec<Example>) = examples
        .into_iter()
        .partition(|e| region.contains(e.start) && region.contains(e.goal));
    if !outside.is_empty() {
        log::warn!("{} examples fall outside the {} region and are skipped", outside.len(), cfg.city);
    }
    let splits: Vec<Split> = match split {
        Some(s) => vec![s],
        None => Split::ALL.to_vec(),
    };
    let mut counts = BTreeMap::new();
    for s in splits {
        let subset: Vec<Example> = inside.iter().filter(|e| e.split == s).cloned().collect();
        let records = export_records(&subset, &g, &assignment, &cfg.world, &grid, &cfg.paths, cfg.workers())?;
        let path = stage.file(root(cfg), &format!("records_{}.jsonl", s.name()));
        let mut w = create(&path)?;
        write_records(&records, &mut w)?;
        finish(w)?;
        println!("{}: {} records", path.display(), records.len());
        counts.insert(s.name(), records.len());
    }
    let format = RecordFormat::new(&cfg.world, cfg.paths);
    let mut w = create(&stage.file(root(cfg), RECORD_FORMAT))?;
    serde_json::to_writer_pretty(&mut w, &format)?;
    writeln!(w)?;
    finish(w)?;
    let mut w = create(&stage.file(root(cfg), GRAPH_VOCAB))?;
    for t in graph_vocabulary(assignment.vocab_size()) {
        writeln!(w, "{t}")?;
    }
    finish(w)?;
    artifacts::write_sidecar(
        &stage.dir(root(cfg)),
        &stage.sidecar(json!({
            "records": counts,
            "skipped_outside_region": outside.len(),
            "grid": { "width": grid.width(), "height": grid.height() },
        })),
    )?;
    Ok(())
}

fn baseline(cfg: &RunConfig, system: System, split: Split, out: Option<PathBuf>) -> Result<()> {
    let data = dataset_path(cfg)?;
    let all = city_examples(cfg, None)?;
    let examples: Vec<Example> = all.iter().filter(|e| e.split == split).cloned().collect();
    if examples.is_empty() {
        return Err(invalid(anyhow::anyhow!("no {} examples in split {}", cfg.city, split.name())));
    }
    let mut inputs = vec![file_sha256(data)?];
    let graph = match system {
        System::Stop => None,
        System::Center | System::Landmark => {
            let (stage, g) = load_graph(cfg)?;
            inputs.push(stage.hash);
            Some(g)
        }
    };
    // the center is taken over the whole city, not the evaluated split
    let centroid = dataset_centroid(&all);
    let preds = run_baseline(
        system,
        &examples,
        graph.as_ref(),
        centroid,
        cfg.baselines.radius_m,
        cfg.workers(),
    )
    .map_err(|e| invalid(anyhow::anyhow!(e)))?;
    let records: Vec<PredictionRecord> = preds.iter().map(PredictionRecord::from).collect();
    let config = json!({
        "system": system.name(),
        "city": cfg.city,
        "split": split.name(),
        "radius_m": cfg.baselines.radius_m,
    });
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let stage = Stage::new("baseline", &config, cfg.seed, &refs);
    let path = out.unwrap_or_else(|| stage.file(root(cfg), PREDICTIONS));
    let mut w = create(&path)?;
    write_predictions(&records, &mut w)?;
    finish(w)?;
    if let Some(dir) = path.parent() {
        artifacts::write_sidecar(
            dir,
            &stage.sidecar(json!({ "predictions": records.len(), "centroid": centroid })),
        )?;
    }
    println!("{}: {} predictions", path.display(), records.len());
    Ok(())
}

fn score_cmd(cfg: &RunConfig, args: &ScoreArgs) -> Result<()> {
    let golds = city_examples(cfg, Some(args.split))?;
    if golds.is_empty() {
        return Err(invalid(anyhow::anyhow!(
            "no {} examples in split {}",
            cfg.city,
            args.split.name()
        )));
    }
    let preds = read_predictions(artifacts::open(&args.pred)?)?;
    let grid = AxisGrid::new(cfg.region(cfg.city)).ok();
    let mut failures = 0;
    let pairs: Vec<(String, Option<GeoPoint>)> = preds
        .iter()
        .map(|p| {
            let point = p.resolve(grid.as_ref()).ok();
            if point.is_none() {
                failures += 1;
                log::debug!("unparsed prediction for {}", p.id);
            }
            (p.id.clone(), point)
        })
        .collect();
    if failures > 0 {
        log::warn!("{failures} predictions could not be parsed and are charged the maximum error");
    }
    let (report, errors) = score(&pairs, &golds)?;
    let label = preds
        .iter()
        .find_map(|p| p.system.clone())
        .unwrap_or_else(|| args.pred.display().to_string());
    print!("{}", text_table(&[(&label, &report)]));
    if let Some(p) = &args.json {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        finish(w)?;
    }
    if let Some(p) = &args.csv {
        let mut w = create(p)?;
        write_errors_csv(&errors, &mut w)?;
        finish(w)?;
    }
    Ok(())
}

fn stats(cfg: &RunConfig) -> Result<()> {
    let mut out = serde_json::Map::new();
    if let Some(data) = &cfg.dataset {
        let examples = load_dataset(data, None)?;
        let mut per: BTreeMap<String, BTreeMap<String, (usize, f64)>> = BTreeMap::new();
        for e in &examples {
            let slot = per
                .entry(e.city.name().to_string())
                .or_default()
                .entry(e.split.name().to_string())
                .or_default();
            slot.0 += 1;
            slot.1 += haversine_distance(e.start, e.goal);
        }
        let summary: BTreeMap<String, BTreeMap<String, serde_json::Value>> = per
            .into_iter()
            .map(|(c, splits)| {
                let splits = splits
                    .into_iter()
                    .map(|(s, (n, d))| (s, json!({ "examples": n, "mean_start_goal_m": d / n as f64 })))
                    .collect();
                (c, splits)
            })
            .collect();
        out.insert("dataset".into(), json!(summary));
    }
    if cfg.osm.is_some() {
        let stage = stage_graph(cfg)?;
        let dir = stage.dir(root(cfg));
        if dir.join(artifacts::SIDECAR).exists() {
            let sc = artifacts::read_sidecar(&dir)?;
            out.insert("graph".into(), sc.details["stats"].clone());
        } else {
            log::info!("no map graph under {}", dir.display());
        }
    }
    if out.is_empty() {
        bail!(Invalid("nothing to summarize; configure a dataset or an OSM extract".into()));
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn oov(cfg: &RunConfig, reference: City, target: City, split: Option<Split>, top: usize) -> Result<()> {
    let examples = load_dataset(dataset_path(cfg)?, split)?;
    let texts = |c: City| -> Vec<&str> {
        examples
            .iter()
            .filter(|e| e.city == c)
            .map(|e| e.instruction.as_str())
            .collect()
    };
    let report = oov_analysis(&texts(reference), &texts(target), top)?;
    println!(
        "{} vs {}: {} of {} target types unseen ({:.2}%)",
        target,
        reference,
        report.oov_types,
        report.vocab_target,
        100.0 * report.oov_fraction
    );
    for (tok, n) in &report.top {
        println!("  {tok}\t{n}");
    }
    Ok(())
}

fn sample(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let (_, g) = load_graph(cfg)?;
    let pairs = sample_pairs(&g, cfg.sampling.count, cfg.sampling.max_path_m, cfg.seed, cfg.workers())?;
    let n = pairs.len().max(1) as f64;
    let mean_path = pairs.iter().map(|p| p.path_m).sum::<f64>() / n;
    let mean_rej = pairs.iter().map(|p| p.rejections as f64).sum::<f64>() / n;
    println!(
        "{} pairs, mean path {:.1} m, mean rejections {:.2}",
        pairs.len(),
        mean_path,
        mean_rej
    );
    if let Some(p) = out {
        let mut w = create(&p)?;
        for pair in &pairs {
            writeln!(w, "{}", serde_json::to_string(pair)?)?;
        }
        finish(w)?;
    }
    Ok(())
}

fn anova(input: &Path, json_out: Option<&Path>) -> Result<()> {
    let features: BTreeMap<String, BTreeMap<String, Vec<f64>>> = serde_json::from_reader(artifacts::open(input)?)
        .with_context(|| format!("parsing {}", input.display()))
        .map_err(invalid)?;
    let rows = anova_fdr(&features).map_err(|e: MetricsError| invalid(e.into()))?;
    println!("{:<24} {:>10} {:>5} {:>6} {:>10} {:>10}", "feature", "F", "df1", "df2", "p", "p_fdr");
    for r in &rows {
        println!(
            "{:<24} {:>10.4} {:>5} {:>6} {:>10.3e} {:>10.3e}",
            r.feature, r.f, r.df_between, r.df_within, r.p, r.p_fdr
        );
    }
    if let Some(p) = json_out {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &rows)?;
        writeln!(w)?;
        finish(w)?;
    }
    Ok(())
}

fn adapt(input: &Path, mapping: Option<&Path>, out: &Path) -> Result<()> {
    let cfg: AdapterConfig = match mapping {
        None => AdapterConfig::default(),
        Some(m) => {
            let text = std::fs::read_to_string(m).with_context(|| format!("reading {}", m.display()))?;
            let parsed = if m.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).map_err(anyhow::Error::from)
            } else {
                toml::from_str(&text).map_err(anyhow::Error::from)
            };
            parsed.with_context(|| format!("parsing {}", m.display())).map_err(invalid)?
        }
    };
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let examples = adapt_release(&text, &cfg)?;
    let mut w = create(out)?;
    write_dataset(&examples, &mut w)?;
    finish(w)?;
    println!("{}: {} examples", out.display(), examples.len());
    Ok(())
}

fn synth(out: &Path, rows: usize, cols: usize, n: usize, seed: u64) -> Result<()> {
    if rows < 2 || cols < 2 {
        return Err(invalid(anyhow::anyhow!("a synthetic city needs at least 2 rows and 2 columns")));
    }
    let city = GridCity {
        rows,
        cols,
        ..GridCity::default()
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let xml = city.osm_xml();
    std::fs::write(out.join("city.osm"), &xml)?;
    let region = city.region();
    let cfg = RunConfig::default();
    let extract = ingest_osm_xml(xml.as_bytes(), &region, &cfg.ingest)?;
    let (g, _) = build_map_graph(&extract.landmarks, &extract.streets, Some(region), &cfg.build_options())?;
    let examples = synthetic::dataset(&g, City::Manhattan, n, cfg.sampling.max_path_m, seed)?;
    let mut w = create(&out.join("dataset.jsonl"))?;
    write_dataset(&examples, &mut w)?;
    finish(w)?;
    std::fs::write(out.join("rvs.toml"), synth_config(&region, seed))?;
    println!(
        "{}: {} landmarks, {} examples",
        out.display(),
        g.landmarks.len(),
        examples.len()
    );
    Ok(())
}

fn synth_config(region: &BoundingBox, seed: u64) -> String {
    format!(
        "seed = {seed}\n\
         workers = 0\n\
         city = \"manhattan\"\n\
         osm = \"city.osm\"\n\
         dataset = \"dataset.jsonl\"\n\
         artifacts_dir = \"artifacts\"\n\
         \n\
         [regions.manhattan]\n\
         south = {}\n\
         west = {}\n\
         north = {}\n\
         east = {}\n\
         \n\
         [walks]\n\
         walks_per_node = 10\n\
         walk_length = 10\n\
         \n\
         [embedding]\n\
         dim = 32\n\
         epochs = 1\n\
         window = 5\n\
         \n\
         [quantize]\n\
         k = 16\n\
         layers = 2\n",
        region.south, region.west, region.north, region.east
    )
}
