//! Heterogeneous graph of location nodes and grid-cell nodes, and uniform
//! random walks over it.
//!
//! Edge rules:
//! - each location connects to the finest-level cell containing it;
//! - each cell connects to its edge neighbors at the same level;
//! - each cell below the coarsest level connects to its parent;
//! - at the sibling level, the four children of a cell are fully connected.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::BoundingBox;
use crate::mapgraph::MapGraph;
use crate::osm::OsmId;
use crate::par::{self, Workers};
use crate::s2::CellId;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("map graph has no nodes")]
    EmptyMapGraph,
    #[error("levels must be consecutive and ascending, got {0:?}")]
    BadLevels(Vec<u8>),
    #[error("map graph carries no region")]
    MissingRegion,
    #[error("io error: {0}")]
    Io(String),
    #[error("malformed world graph at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub const FORMAT_NAME: &str = "rvs-world-graph";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: WorldGraphConfig,
    nodes: usize,
    edges: usize,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Line {
    Node { node: String },
    Edge { a: u32, b: u32, kind: WorldEdgeKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WorldNode {
    Cell(CellId),
    Location(OsmId),
}

impl fmt::Display for WorldNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldNode::Cell(c) => write!(f, "cell:{c}"),
            WorldNode::Location(id) => write!(f, "loc:{id}"),
        }
    }
}

impl FromStr for WorldNode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("cell:") {
            rest.parse().map(WorldNode::Cell).map_err(|e| e.to_string())
        } else if let Some(rest) = s.strip_prefix("loc:") {
            rest.parse().map(WorldNode::Location)
        } else {
            Err(format!("bad world node {s:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldEdgeKind {
    Containment,
    Neighbor,
    Parent,
    Sibling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldGraphConfig {
    /// Consecutive ascending cell levels; the last one holds locations.
    pub levels: [u8; 3],
    /// Level whose sibling quads are fully connected, if any.
    pub sibling_level: Option<u8>,
}

impl Default for WorldGraphConfig {
    fn default() -> Self {
        Self {
            levels: [15, 16, 17],
            sibling_level: Some(16),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorldGraph {
    pub config: WorldGraphConfig,
    nodes: Vec<WorldNode>,
    index: HashMap<WorldNode, u32>,
    /// Sorted neighbor lists.
    adjacency: Vec<Vec<u32>>,
    /// Unordered edges `(a, b)` with `a < b`, sorted.
    edges: Vec<(u32, u32, WorldEdgeKind)>,
}

/// Coarse cells intersecting `region`, found by flood fill from the cell at
/// the region's center. Intersection uses the cell's corner bounding box.
pub fn cells_covering(region: &BoundingBox, level: u8) -> BTreeSet<CellId> {
    let start = CellId::from_point(region.center(), level).expect("valid level");
    let intersects = |c: &CellId| {
        BoundingBox::enclosing(c.vertices())
            .expect("four vertices")
            .intersects(region)
    };
    let mut out = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    out.insert(start);
    while let Some(c) = queue.pop_front() {
        for n in c.edge_neighbors().expect("level >= 1") {
            if !out.contains(&n) && intersects(&n) {
                out.insert(n);
                queue.push_back(n);
            }
        }
    }
    out
}

impl WorldGraph {
    /// Builds the graph for the map's region: the coarse cells covering the
    /// region, all their descendants down to the finest level, and one
    /// location node per landmark.
    pub fn build(map: &MapGraph, config: WorldGraphConfig) -> Result<WorldGraph, WorldError> {
        if map.nodes.is_empty() {
            return Err(WorldError::EmptyMapGraph);
        }
        let region = map
            .region
            .or_else(|| BoundingBox::enclosing(map.nodes.iter().map(|n| n.point)))
            .ok_or(WorldError::MissingRegion)?;
        let locations: Vec<(OsmId, crate::geo::GeoPoint)> =
            map.landmarks.iter().map(|l| (l.id, l.centroid)).collect();
        Self::from_region(&region, &locations, config)
    }

    pub fn from_region(
        region: &BoundingBox,
        locations: &[(OsmId, crate::geo::GeoPoint)],
        config: WorldGraphConfig,
    ) -> Result<WorldGraph, WorldError> {
        let levels = config.levels;
        if levels[0] == 0 || levels.windows(2).any(|w| w[1] != w[0] + 1) || levels[2] > 30 {
            return Err(WorldError::BadLevels(levels.to_vec()));
        }
        let mut by_level: Vec<Vec<CellId>> = Vec::new();
        let coarse: Vec<CellId> = cells_covering(region, levels[0]).into_iter().collect();
        by_level.push(coarse);
        for _ in 1..levels.len() {
            let next: Vec<CellId> = by_level
                .last()
                .unwrap()
                .iter()
                .flat_map(|c| c.children().expect("level < 30"))
                .collect();
            by_level.push(next);
        }

        let mut nodes: Vec<WorldNode> = Vec::new();
        for cells in &by_level {
            nodes.extend(cells.iter().map(|c| WorldNode::Cell(*c)));
        }
        let finest = levels[levels.len() - 1];
        let mut located = Vec::new();
        let cell_set: std::collections::HashSet<CellId> = by_level[by_level.len() - 1].iter().copied().collect();
        for &(id, p) in locations {
            let cell = CellId::from_point(p, finest).expect("valid level");
            if cell_set.contains(&cell) {
                nodes.push(WorldNode::Location(id));
                located.push((id, cell));
            } else {
                log::warn!("location {id} lies outside the covered cells; skipped");
            }
        }
        let index: HashMap<WorldNode, u32> = nodes.iter().enumerate().map(|(i, n)| (*n, i as u32)).collect();

        let mut edge_map: HashMap<(u32, u32), WorldEdgeKind> = HashMap::new();
        let mut add = |a: u32, b: u32, kind: WorldEdgeKind| {
            let key = (a.min(b), a.max(b));
            edge_map.entry(key).or_insert(kind);
        };
        for (id, cell) in &located {
            add(index[&WorldNode::Location(*id)], index[&WorldNode::Cell(*cell)], WorldEdgeKind::Containment);
        }
        for (li, cells) in by_level.iter().enumerate() {
            for c in cells {
                let ci = index[&WorldNode::Cell(*c)];
                for n in c.edge_neighbors().expect("level >= 1") {
                    if let Some(&ni) = index.get(&WorldNode::Cell(n)) {
                        add(ci, ni, WorldEdgeKind::Neighbor);
                    }
                }
                if li > 0 {
                    let p = c.parent().expect("level >= 1");
                    add(ci, index[&WorldNode::Cell(p)], WorldEdgeKind::Parent);
                }
            }
        }
        if let Some(sl) = config.sibling_level {
            if let Some(li) = levels.iter().position(|&l| l == sl) {
                if li > 0 {
                    for parent in &by_level[li - 1] {
                        let kids = parent.children().expect("level < 30");
                        for a in 0..4 {
                            for b in (a + 1)..4 {
                                add(
                                    index[&WorldNode::Cell(kids[a])],
                                    index[&WorldNode::Cell(kids[b])],
                                    WorldEdgeKind::Sibling,
                                );
                            }
                        }
                    }
                }
            }
        }

        let edges: Vec<(u32, u32, WorldEdgeKind)> = edge_map.into_iter().map(|((a, b), k)| (a, b, k)).collect();
        Ok(Self::assemble(config, nodes, edges))
    }

    fn assemble(config: WorldGraphConfig, nodes: Vec<WorldNode>, mut edges: Vec<(u32, u32, WorldEdgeKind)>) -> WorldGraph {
        let index: HashMap<WorldNode, u32> = nodes.iter().enumerate().map(|(i, n)| (*n, i as u32)).collect();
        edges.sort_by_key(|e| (e.0, e.1));
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b, _) in &edges {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        WorldGraph {
            config,
            nodes,
            index,
            adjacency,
            edges,
        }
    }

    /// Writes a header line, one line per node in index order, then one per
    /// edge.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<(), WorldError> {
        let io = |e: std::io::Error| WorldError::Io(e.to_string());
        let header = Header {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            config: self.config,
            nodes: self.nodes.len(),
            edges: self.edges.len(),
        };
        writeln!(w, "{}", to_json(&header)).map_err(io)?;
        for n in &self.nodes {
            writeln!(w, "{}", to_json(&Line::Node { node: n.to_string() })).map_err(io)?;
        }
        for &(a, b, kind) in &self.edges {
            writeln!(w, "{}", to_json(&Line::Edge { a, b, kind })).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: std::io::BufRead>(r: R) -> Result<WorldGraph, WorldError> {
        let mut lines = r.lines().enumerate();
        let malformed = |line: usize, reason: String| WorldError::Malformed { line, reason };
        let (_, first) = lines.next().ok_or_else(|| malformed(1, "empty file".into()))?;
        let first = first.map_err(|e| WorldError::Io(e.to_string()))?;
        let header: Header = serde_json::from_str(&first).map_err(|e| malformed(1, e.to_string()))?;
        if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
            return Err(malformed(1, format!("unsupported format {} v{}", header.format, header.version)));
        }
        let mut nodes = Vec::with_capacity(header.nodes);
        let mut edges = Vec::with_capacity(header.edges);
        for (i, line) in lines {
            let line = line.map_err(|e| WorldError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line).map_err(|e| malformed(i + 1, e.to_string()))? {
                Line::Node { node } => nodes.push(node.parse().map_err(|e| malformed(i + 1, e))?),
                Line::Edge { a, b, kind } => {
                    if a as usize >= header.nodes || b as usize >= header.nodes {
                        return Err(malformed(i + 1, format!("edge {a}-{b} out of range")));
                    }
                    edges.push((a, b, kind))
                }
            }
        }
        if nodes.len() != header.nodes || edges.len() != header.edges {
            return Err(malformed(1, "counts disagree with header".into()));
        }
        Ok(Self::assemble(header.config, nodes, edges))
    }

    pub fn nodes(&self) -> &[WorldNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(u32, u32, WorldEdgeKind)] {
        &self.edges
    }

    pub fn node_index(&self, node: &WorldNode) -> Option<u32> {
        self.index.get(node).copied()
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.adjacency[a as usize].binary_search(&b).is_ok()
    }

    pub fn cells_at(&self, level: u8) -> impl Iterator<Item = CellId> + '_ {
        self.nodes.iter().filter_map(move |n| match n {
            WorldNode::Cell(c) if c.level() == level => Some(*c),
            _ => None,
        })
    }

    pub fn num_locations(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, WorldNode::Location(_))).count()
    }

    pub fn count_edges(&self, kind: WorldEdgeKind) -> usize {
        self.edges.iter().filter(|e| e.2 == kind).count()
    }

    /// Node names in index order, as used by the embedding sidecar.
    pub fn node_names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.to_string()).collect()
    }
}

/// Walk corpus settings. Transitions are uniform over neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 200,
            walk_length: 20,
            seed: 0,
        }
    }
}

/// Anything a walk can be run on.
pub trait WalkGraph: Sync {
    fn num_nodes(&self) -> usize;
    fn neighbors(&self, n: u32) -> &[u32];
}

impl WalkGraph for WorldGraph {
    fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn neighbors(&self, n: u32) -> &[u32] {
        &self.adjacency[n as usize]
    }
}

impl WalkGraph for Vec<Vec<u32>> {
    fn num_nodes(&self) -> usize {
        self.len()
    }

    fn neighbors(&self, n: u32) -> &[u32] {
        &self[n as usize]
    }
}

/// Uniform random walks from every node. Node `n`'s walks occupy
/// `corpus[n * walks_per_node..(n + 1) * walks_per_node]`. Each start node
/// draws from its own RNG stream, so the corpus does not depend on the
/// worker count.
pub fn random_walks<G: WalkGraph>(graph: &G, config: &WalkConfig, workers: Workers) -> Vec<Vec<u32>> {
    let per_node = par::map_range(graph.num_nodes(), workers, |n| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(n as u64);
        (0..config.walks_per_node)
            .map(|_| walk_from(graph, n as u32, config.walk_length, &mut rng))
            .collect::<Vec<_>>()
    });
    per_node.into_iter().flatten().collect()
}

fn walk_from<G: WalkGraph>(graph: &G, start: u32, length: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut walk = Vec::with_capacity(length);
    walk.push(start);
    let mut cur = start;
    while walk.len() < length {
        match graph.neighbors(cur).choose(rng) {
            Some(&next) => {
                walk.push(next);
                cur = next;
            }
            None => break,
        }
    }
    walk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    fn small_region() -> BoundingBox {
        BoundingBox::new(40.750, -73.990, 40.756, -73.982).unwrap()
    }

    #[test]
    fn node_names_round_trip() {
        let c: CellId = "4/0123".parse().unwrap();
        for n in [WorldNode::Cell(c), WorldNode::Location(OsmId::way(3))] {
            assert_eq!(n.to_string().parse::<WorldNode>().unwrap(), n);
        }
    }

    #[test]
    fn one_location_one_containment_edge() {
        let p = GeoPoint::new(40.753, -73.986).unwrap();
        let g = WorldGraph::from_region(&small_region(), &[(OsmId::node(1), p)], WorldGraphConfig::default()).unwrap();
        assert_eq!(g.count_edges(WorldEdgeKind::Containment), 1);
        let li = g.node_index(&WorldNode::Location(OsmId::node(1))).unwrap();
        assert_eq!(WalkGraph::neighbors(&g, li).len(), 1);
        let cell = g.nodes()[WalkGraph::neighbors(&g, li)[0] as usize];
        assert_eq!(cell, WorldNode::Cell(CellId::from_point(p, 17).unwrap()));
    }

    #[test]
    fn quadtree_cell_counts() {
        let g = WorldGraph::from_region(&small_region(), &[], WorldGraphConfig::default()).unwrap();
        let n15 = g.cells_at(15).count();
        assert!(n15 >= 1);
        assert_eq!(g.cells_at(16).count(), 4 * n15);
        assert_eq!(g.cells_at(17).count(), 16 * n15);
        assert_eq!(g.num_nodes(), 21 * n15);
    }

    #[test]
    fn rejects_non_consecutive_levels() {
        let cfg = WorldGraphConfig {
            levels: [15, 17, 18],
            sibling_level: None,
        };
        assert!(matches!(
            WorldGraph::from_region(&small_region(), &[], cfg),
            Err(WorldError::BadLevels(_))
        ));
    }

    fn walk_cfg(walks_per_node: usize, seed: u64) -> WalkConfig {
        WalkConfig {
            walks_per_node,
            walk_length: 20,
            seed,
        }
    }

    #[test]
    fn isolated_node_walk_halts() {
        let adj: Vec<Vec<u32>> = vec![vec![]];
        let corpus = random_walks(&adj, &walk_cfg(4, 1), Workers::SINGLE);
        assert_eq!(corpus, vec![vec![0]; 4]);
    }

    #[test]
    fn two_node_path_alternates() {
        let adj: Vec<Vec<u32>> = vec![vec![1], vec![0]];
        for w in random_walks(&adj, &walk_cfg(5, 2), Workers::SINGLE) {
            assert_eq!(w.len(), 20);
            for (k, n) in w.iter().enumerate() {
                assert_eq!(*n as usize, (w[0] as usize + k) % 2);
            }
        }
    }

    #[test]
    fn walks_independent_of_worker_count() {
        let g = WorldGraph::from_region(&small_region(), &[], WorldGraphConfig::default()).unwrap();
        let a = random_walks(&g, &walk_cfg(2, 9), Workers::SINGLE);
        let b = random_walks(&g, &walk_cfg(2, 9), Workers::ALL);
        assert_eq!(a, b);
        assert_ne!(a, random_walks(&g, &walk_cfg(2, 10), Workers::SINGLE));
    }

    #[test]
    fn walks_follow_edges() {
        let g = WorldGraph::from_region(&small_region(), &[], WorldGraphConfig::default()).unwrap();
        let corpus = random_walks(&g, &walk_cfg(3, 5), Workers::SINGLE);
        assert_eq!(corpus.len(), 3 * g.num_nodes());
        for w in &corpus {
            for pair in w.windows(2) {
                assert!(g.has_edge(pair[0], pair[1]));
            }
        }
    }

    #[test]
    fn star_hub_transitions_are_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let leaves = 8u32;
        let mut adj: Vec<Vec<u32>> = vec![(1..=leaves).collect()];
        adj.extend((0..leaves).map(|_| vec![0]));
        let cfg = WalkConfig {
            walks_per_node: 2_000,
            walk_length: 13,
            seed: 11,
        };
        let corpus = random_walks(&adj, &cfg, Workers::SINGLE);
        let mut counts = vec![0f64; leaves as usize];
        let mut total = 0f64;
        for w in &corpus {
            for pair in w.windows(2) {
                if pair[0] == 0 {
                    counts[(pair[1] - 1) as usize] += 1.0;
                    total += 1.0;
                }
            }
        }
        assert!(total >= 1e5, "{total}");
        let expected = total / leaves as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((leaves - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2} p {p}");
    }

    /// Edge adjacency by shared corners, independent of neighbor arithmetic.
    fn shares_edge(a: &CellId, b: &CellId) -> bool {
        let va = a.vertices();
        let vb = b.vertices();
        let shared = va
            .iter()
            .filter(|p| vb.iter().any(|q| crate::geo::haversine_distance(**p, *q) < 0.01))
            .count();
        shared == 2
    }

    #[test]
    fn edge_count_closed_form() {
        let region = small_region();
        let locs: Vec<(OsmId, GeoPoint)> = (0..5)
            .map(|k| (OsmId::node(k), GeoPoint::new(40.751 + 0.001 * k as f64, -73.985).unwrap()))
            .collect();
        let g = WorldGraph::from_region(&region, &locs, WorldGraphConfig::default()).unwrap();
        let n15 = g.cells_at(15).count();
        let adjacent_pairs = |level: u8| {
            let cells: Vec<CellId> = g.cells_at(level).collect();
            let mut k = 0;
            for i in 0..cells.len() {
                for j in (i + 1)..cells.len() {
                    if shares_edge(&cells[i], &cells[j]) {
                        k += 1;
                    }
                }
            }
            k
        };
        let (a15, a16, a17) = (adjacent_pairs(15), adjacent_pairs(16), adjacent_pairs(17));
        assert_eq!(g.count_edges(WorldEdgeKind::Containment), 5);
        assert_eq!(g.count_edges(WorldEdgeKind::Parent), 20 * n15);
        assert_eq!(g.count_edges(WorldEdgeKind::Neighbor), a15 + a16 + a17);
        // each sibling quad adds its two diagonals
        assert_eq!(g.count_edges(WorldEdgeKind::Sibling), 2 * n15);
        assert_eq!(g.edges().len(), 5 + 20 * n15 + a15 + a16 + a17 + 2 * n15);
    }

    #[test]
    fn jsonl_round_trip() {
        let locs = [(OsmId::node(3), GeoPoint::new(40.751, -73.985).unwrap())];
        let g = WorldGraph::from_region(&small_region(), &locs, WorldGraphConfig::default()).unwrap();
        let mut buf = Vec::new();
        g.write_jsonl(&mut buf).unwrap();
        let back = WorldGraph::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.nodes(), g.nodes());
        assert_eq!(back.edges(), g.edges());
        let mut again = Vec::new();
        back.write_jsonl(&mut again).unwrap();
        assert_eq!(buf, again);
        assert!(WorldGraph::read_jsonl(&buf[..buf.len() / 2]).is_err());
    }

    #[test]
    fn interior_level16_degree() {
        let g = WorldGraph::from_region(&small_region(), &[], WorldGraphConfig::default()).unwrap();
        let center = CellId::from_point(small_region().center(), 16).unwrap();
        let idx = g.node_index(&WorldNode::Cell(center)).unwrap();
        let nbrs = WalkGraph::neighbors(&g, idx);
        // 4 neighbors + 1 parent + 3 siblings (2 of which are also neighbors)
        // + 4 children
        assert!(nbrs.len() >= 4 + 1 + 1 + 4, "{}", nbrs.len());
        let kids = center.children().unwrap();
        for k in kids {
            assert!(g.has_edge(idx, g.node_index(&WorldNode::Cell(k)).unwrap()));
        }
        let parent = center.parent().unwrap();
        for sib in parent.children().unwrap().iter().filter(|c| **c != center) {
            assert!(g.has_edge(idx, g.node_index(&WorldNode::Cell(*sib)).unwrap()));
        }
    }
}
