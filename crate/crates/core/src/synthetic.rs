//! Deterministic synthetic cities for tests, benchmarks and demos: a street
//! grid written as OSM XML, and instruction datasets sampled on its graph.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geo::{BoundingBox, GeoPoint, LocalFrame};
use crate::mapgraph::MapGraph;
use crate::par::Workers;
use crate::taskio::{sample_pairs, City, Example, Split, TaskError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridCity {
    pub center: GeoPoint,
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    /// Probability that a block holds a landmark.
    pub landmark_density: f64,
    pub seed: u64,
}

impl Default for GridCity {
    fn default() -> Self {
        Self {
            center: GeoPoint { lat: 40.754, lng: -73.984 },
            rows: 12,
            cols: 12,
            spacing_m: 120.0,
            landmark_density: 0.6,
            seed: 7,
        }
    }
}

const NAMES: [&str; 16] = [
    "Carson", "Liberty", "Maple", "Harbor", "Union", "Summit", "Juniper", "Beacon", "Granite", "Willow",
    "Orchard", "Meridian", "Cedar", "Lantern", "Hudson", "Prospect",
];

const KINDS: [(&str, &str, &str); 9] = [
    ("wikipedia", "en:Museum", "Museum"),
    ("wikidata", "Q42", "Hall"),
    ("brand", "Kwik", "Market"),
    ("tourism", "hotel", "Hotel"),
    ("amenity", "cafe", "Cafe"),
    ("shop", "bakery", "Bakery"),
    ("leisure", "park", "Park"),
    ("historic", "monument", "Monument"),
    ("building", "yes", "Tower"),
];

impl GridCity {
    fn frame(&self) -> LocalFrame {
        LocalFrame::new(self.center)
    }

    fn xy(&self, r: f64, c: f64) -> [f64; 2] {
        let w = (self.cols - 1) as f64 * self.spacing_m;
        let h = (self.rows - 1) as f64 * self.spacing_m;
        [c * self.spacing_m - w / 2.0, r * self.spacing_m - h / 2.0]
    }

    pub fn point(&self, r: f64, c: f64) -> GeoPoint {
        self.frame().to_geo(self.xy(r, c))
    }

    /// A box reaching one block past the outermost streets.
    pub fn region(&self) -> BoundingBox {
        let sw = self.point(-1.0, -1.0);
        let ne = self.point(self.rows as f64, self.cols as f64);
        BoundingBox {
            south: sw.lat,
            west: sw.lng,
            north: ne.lat,
            east: ne.lng,
        }
    }

    /// The city as an OSM XML document.
    pub fn osm_xml(&self) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n");
        let node_id = |r: usize, c: usize| 1 + (r * self.cols + c) as i64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let p = self.point(r as f64, c as f64);
                let _ = writeln!(out, "  <node id=\"{}\" lat=\"{:.7}\" lon=\"{:.7}\"/>", node_id(r, c), p.lat, p.lng);
            }
        }
        let mut next_id = 1_000_000i64;
        let mut landmarks = String::new();
        let mut building_ways = String::new();
        for r in 0..self.rows - 1 {
            for c in 0..self.cols - 1 {
                if !rng.gen_bool(self.landmark_density) {
                    continue;
                }
                let (key, value, noun) = KINDS[rng.gen_range(0..KINDS.len())];
                let name = format!("{} {noun}", NAMES.choose(&mut rng).expect("non-empty"));
                let (fr, fc) = (rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
                let tags = format!(
                    "    <tag k=\"{key}\" v=\"{value}\"/>\n    <tag k=\"name\" v=\"{name}\"/>\n"
                );
                if key == "building" {
                    // a small square footprint
                    let d = 0.08;
                    let corners = [(-d, -d), (-d, d), (d, d), (d, -d)];
                    let mut refs = Vec::new();
                    for (dr, dc) in corners {
                        let p = self.point(r as f64 + fr + dr, c as f64 + fc + dc);
                        next_id += 1;
                        let _ = writeln!(out, "  <node id=\"{next_id}\" lat=\"{:.7}\" lon=\"{:.7}\"/>", p.lat, p.lng);
                        refs.push(next_id);
                    }
                    refs.push(refs[0]);
                    next_id += 1;
                    let _ = writeln!(building_ways, "  <way id=\"{next_id}\">");
                    for id in refs {
                        let _ = writeln!(building_ways, "    <nd ref=\"{id}\"/>");
                    }
                    let _ = writeln!(building_ways, "{tags}  </way>");
                } else {
                    let p = self.point(r as f64 + fr, c as f64 + fc);
                    next_id += 1;
                    let _ = write!(
                        landmarks,
                        "  <node id=\"{next_id}\" lat=\"{:.7}\" lon=\"{:.7}\">\n{tags}  </node>\n",
                        p.lat,
                        p.lng
                    );
                }
            }
        }
        out.push_str(&landmarks);
        let highway = |k: usize| if k.is_multiple_of(4) { "primary" } else { "residential" };
        for r in 0..self.rows {
            let _ = writeln!(out, "  <way id=\"{}\">", 10_000 + r);
            for c in 0..self.cols {
                let _ = writeln!(out, "    <nd ref=\"{}\"/>", node_id(r, c));
            }
            let _ = write!(
                out,
                "    <tag k=\"highway\" v=\"{}\"/>\n    <tag k=\"name\" v=\"{} Street\"/>\n  </way>\n",
                highway(r),
                NAMES[r % NAMES.len()]
            );
        }
        for c in 0..self.cols {
            let _ = writeln!(out, "  <way id=\"{}\">", 20_000 + c);
            for r in 0..self.rows {
                let _ = writeln!(out, "    <nd ref=\"{}\"/>", node_id(r, c));
            }
            let _ = write!(
                out,
                "    <tag k=\"highway\" v=\"{}\"/>\n    <tag k=\"name\" v=\"{} Avenue\"/>\n  </way>\n",
                highway(c),
                NAMES[(c + 5) % NAMES.len()]
            );
        }
        out.push_str(&building_ways);
        out.push_str("</osm>\n");
        out
    }
}

const VERBS: [&str; 4] = ["Walk", "Head", "Go", "Continue"];
const DIRECTIONS: [&str; 4] = ["north", "south", "east", "west"];

/// Instruction-like examples whose goals are landmarks reachable within
/// `max_path_m` of their starts. Splits rotate train, dev_seen, test.
pub fn dataset(
    graph: &MapGraph,
    city: City,
    n: usize,
    max_path_m: f64,
    seed: u64,
) -> Result<Vec<Example>, TaskError> {
    let pairs = sample_pairs(graph, n, max_path_m, seed, Workers::SINGLE)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let goal = &graph.landmarks[p.goal_landmark as usize];
            let name = goal.name.clone().unwrap_or_else(|| "the corner".into());
            let instruction = format!(
                "{} {} for {} blocks and stop at {name}.",
                VERBS.choose(&mut rng).expect("non-empty"),
                DIRECTIONS.choose(&mut rng).expect("non-empty"),
                rng.gen_range(1..6)
            );
            let split = [Split::Train, Split::DevSeen, Split::Test][i % 3];
            Example {
                id: format!("{}-{i:05}", city.name()),
                instruction,
                start: p.start,
                goal: p.goal,
                city,
                split,
            }
        })
        .collect())
}
