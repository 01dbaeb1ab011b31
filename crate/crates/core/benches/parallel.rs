use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rvs_core::embedding::EmbeddingTable;
use rvs_core::mapgraph::{build_map_graph, BuildOptions};
use rvs_core::osm::ingest_osm_xml;
use rvs_core::par::Workers;
use rvs_core::quantize::{spherical_kmeans, QuantizeConfig};
use rvs_core::synthetic::GridCity;
use rvs_core::taskio::sample_pairs;
use rvs_core::worldgraph::{random_walks, WalkConfig, WorldGraph, WorldGraphConfig};

const MODES: [(&str, Workers); 2] = [("sequential", Workers::SINGLE), ("parallel", Workers::ALL)];

fn city() -> (GridCity, String) {
    let c = GridCity {
        rows: 24,
        cols: 24,
        ..GridCity::default()
    };
    let xml = c.osm_xml();
    (c, xml)
}

fn benches(c: &mut Criterion) {
    let (city, xml) = city();
    let region = city.region();
    let extract = ingest_osm_xml(xml.as_bytes(), &region, &Default::default()).unwrap();
    let (graph, _) = build_map_graph(&extract.landmarks, &extract.streets, Some(region), &BuildOptions::default()).unwrap();
    let world = WorldGraph::build(&graph, WorldGraphConfig::default()).unwrap();
    let walk_cfg = WalkConfig {
        walks_per_node: 10,
        walk_length: 20,
        seed: 1,
    };
    let table = {
        let dim = 32;
        let data: Vec<f32> = (0..world.nodes().len() * dim)
            .map(|i| ((i as f32 * 0.618).fract() - 0.5) * ((i % 7) as f32 + 1.0))
            .collect();
        EmbeddingTable {
            nodes: world.node_names(),
            dim,
            data,
        }
    };
    let km_cfg = QuantizeConfig {
        k: 32,
        max_iter: 10,
        ..Default::default()
    };

    let mut g = c.benchmark_group("workers");
    g.sample_size(10);
    for (name, workers) in MODES {
        g.bench_with_input(BenchmarkId::new("map_graph", name), &workers, |b, &w| {
            let opts = BuildOptions {
                workers: w,
                ..Default::default()
            };
            b.iter(|| build_map_graph(&extract.landmarks, &extract.streets, Some(region), &opts).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("random_walks", name), &workers, |b, &w| {
            b.iter(|| random_walks(&world, &walk_cfg, w))
        });
        g.bench_with_input(BenchmarkId::new("kmeans", name), &workers, |b, &w| {
            b.iter(|| spherical_kmeans(&table.data, table.dim, km_cfg.k, &km_cfg, 3, w).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sample_pairs", name), &workers, |b, &w| {
            b.iter(|| sample_pairs(&graph, 200, 2000.0, 5, w).unwrap())
        });
    }
    g.finish();
}

criterion_group!(parallel, benches);
criterion_main!(parallel);
