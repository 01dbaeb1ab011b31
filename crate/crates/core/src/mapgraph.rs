//! The street/landmark environment graph.
//!
//! Street polylines become chains of junction nodes. Every landmark gets its
//! own node, linked to projection nodes on its nearest distinct streets (up
//! to four); each projection node is spliced into the street edge it lies
//! on. Edges are undirected and weighted by haversine meters.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_distance, nearest_on_segment, BoundingBox, GeoPoint, LocalFrame};
use crate::osm::{Landmark, Street};
use crate::par::{self, Workers};
use crate::spatial::GridIndex;

pub const FORMAT_NAME: &str = "rvs-map-graph";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("no streets to build a graph from")]
    NoStreets,
    #[error("node {0} is not in the graph")]
    NodeNotInGraph(u32),
    #[error("no path between nodes {0} and {1}")]
    NoPath(u32, u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed graph dump at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Six-rung salience ladder, most prominent first.
pub const PROMINENCE_LADDER: [&str; 6] = ["wikipedia", "wikidata", "brand", "tourism", "amenity", "shop"];

/// Rung of the first matching ladder tag (`0` is most prominent), or `None`
/// when the landmark carries none of them.
pub fn prominence_rank(landmark: &Landmark) -> Option<u8> {
    PROMINENCE_LADDER
        .iter()
        .position(|k| landmark.tags.contains_key(*k))
        .map(|r| r as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Junction,
    Landmark,
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Street,
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapNode {
    pub kind: NodeKind,
    pub point: GeoPoint,
    /// Index into [`MapGraph::landmarks`] for landmark nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapEdge {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapGraph {
    pub nodes: Vec<MapNode>,
    pub edges: Vec<MapEdge>,
    /// Landmarks present in the graph, ordered by id.
    pub landmarks: Vec<Landmark>,
    /// Graph node of each landmark, parallel to `landmarks`.
    pub landmark_nodes: Vec<u32>,
    pub num_streets: usize,
    pub region: Option<BoundingBox>,
    adjacency: Vec<Vec<(u32, f64)>>,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub max_projections: usize,
    pub max_projection_m: f64,
    pub merge_tolerance_m: f64,
    pub workers: Workers,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_projections: 4,
            max_projection_m: 500.0,
            merge_tolerance_m: 0.5,
            workers: Workers::ALL,
        }
    }
}

/// What happened during a build that callers may want to report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub merged_vertices: usize,
    /// Landmarks dropped because no street lies within the projection limit.
    pub skipped_landmarks: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    street: u32,
    a: u32,
    b: u32,
}

/// One landmark's link to one street: which segment and where on it.
#[derive(Debug, Clone, Copy)]
struct Projection {
    segment: u32,
    t: f64,
    point: GeoPoint,
    distance: f64,
}

struct VertexMerger {
    frame: LocalFrame,
    tolerance: f64,
    by_osm: HashMap<i64, u32>,
    grid: HashMap<(i64, i64), Vec<u32>>,
    merged: usize,
}

impl VertexMerger {
    fn key(&self, p: GeoPoint) -> (i64, i64) {
        let xy = self.frame.to_xy(p);
        (
            (xy[0] / self.tolerance).floor() as i64,
            (xy[1] / self.tolerance).floor() as i64,
        )
    }

    fn node_for(&mut self, osm_id: i64, p: GeoPoint, nodes: &mut Vec<MapNode>) -> u32 {
        if let Some(&n) = self.by_osm.get(&osm_id) {
            return n;
        }
        let k = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.grid.get(&(k.0 + dx, k.1 + dy)) {
                    for &n in ids {
                        if haversine_distance(nodes[n as usize].point, p) <= self.tolerance {
                            self.merged += 1;
                            self.by_osm.insert(osm_id, n);
                            return n;
                        }
                    }
                }
            }
        }
        let n = nodes.len() as u32;
        nodes.push(MapNode {
            kind: NodeKind::Junction,
            point: p,
            landmark: None,
        });
        self.by_osm.insert(osm_id, n);
        self.grid.entry(k).or_default().push(n);
        n
    }
}

/// Builds the environment graph from ingested streets and landmarks.
pub fn build_map_graph(
    landmarks: &[Landmark],
    streets: &[Street],
    region: Option<BoundingBox>,
    options: &BuildOptions,
) -> Result<(MapGraph, BuildReport), MapError> {
    if streets.is_empty() {
        return Err(MapError::NoStreets);
    }
    let origin = region.map(|r| r.center()).unwrap_or(streets[0].points[0]);
    let mut merger = VertexMerger {
        frame: LocalFrame::new(origin),
        tolerance: options.merge_tolerance_m,
        by_osm: HashMap::new(),
        grid: HashMap::new(),
        merged: 0,
    };
    let mut nodes = Vec::new();
    let mut segments = Vec::new();
    for (si, street) in streets.iter().enumerate() {
        let ids: Vec<u32> = street
            .node_ids
            .iter()
            .zip(&street.points)
            .map(|(id, p)| merger.node_for(*id, *p, &mut nodes))
            .collect();
        for w in ids.windows(2) {
            if w[0] != w[1] {
                segments.push(Segment {
                    street: si as u32,
                    a: w[0],
                    b: w[1],
                });
            }
        }
    }

    let mut index = GridIndex::new(origin, 100.0);
    for (k, s) in segments.iter().enumerate() {
        index.insert_segment(k as u32, nodes[s.a as usize].point, nodes[s.b as usize].point);
    }

    let projections: Vec<Vec<Projection>> = par::map(landmarks, options.workers, |l| {
        nearest_streets(l.centroid, &segments, &nodes, streets, &index, options)
    });

    let mut report = BuildReport {
        merged_vertices: merger.merged,
        ..Default::default()
    };
    let mut edges = Vec::new();
    let mut kept_landmarks = Vec::new();
    let mut landmark_nodes = Vec::new();
    let mut splits: Vec<Vec<(f64, u32)>> = vec![Vec::new(); segments.len()];
    for (landmark, projs) in landmarks.iter().zip(projections) {
        if projs.is_empty() {
            log::warn!(
                "landmark {} has no street within {} m; skipped",
                landmark.id,
                options.max_projection_m
            );
            report.skipped_landmarks.push(landmark.id.to_string());
            continue;
        }
        let ln = nodes.len() as u32;
        nodes.push(MapNode {
            kind: NodeKind::Landmark,
            point: landmark.centroid,
            landmark: Some(kept_landmarks.len() as u32),
        });
        kept_landmarks.push(landmark.clone());
        landmark_nodes.push(ln);
        for p in projs {
            let pn = nodes.len() as u32;
            nodes.push(MapNode {
                kind: NodeKind::Projection,
                point: p.point,
                landmark: None,
            });
            edges.push(MapEdge {
                a: ln,
                b: pn,
                weight: haversine_distance(landmark.centroid, p.point),
                kind: EdgeKind::Projection,
            });
            splits[p.segment as usize].push((p.t, pn));
        }
    }

    let mut seen = HashMap::new();
    for (k, seg) in segments.iter().enumerate() {
        let mut chain = vec![seg.a];
        let mut inner = std::mem::take(&mut splits[k]);
        inner.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        chain.extend(inner.into_iter().map(|(_, n)| n));
        chain.push(seg.b);
        for w in chain.windows(2) {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            if w[0] == w[1] || seen.insert(key, ()).is_some() {
                continue;
            }
            edges.push(MapEdge {
                a: w[0],
                b: w[1],
                weight: haversine_distance(nodes[w[0] as usize].point, nodes[w[1] as usize].point),
                kind: EdgeKind::Street,
            });
        }
    }

    let graph = MapGraph::from_parts(nodes, edges, kept_landmarks, landmark_nodes, streets.len(), region);
    Ok((graph, report))
}

fn nearest_streets(
    p: GeoPoint,
    segments: &[Segment],
    nodes: &[MapNode],
    streets: &[Street],
    index: &GridIndex,
    options: &BuildOptions,
) -> Vec<Projection> {
    let mut best: HashMap<u32, Projection> = HashMap::new();
    let mut candidates = index.candidates(p, options.max_projection_m);
    candidates.sort_unstable();
    candidates.dedup();
    for k in candidates {
        let seg = segments[k as usize];
        let (q, t) = nearest_on_segment(p, nodes[seg.a as usize].point, nodes[seg.b as usize].point);
        let d = haversine_distance(p, q);
        if d > options.max_projection_m {
            continue;
        }
        let cand = Projection {
            segment: k,
            t,
            point: q,
            distance: d,
        };
        best.entry(seg.street)
            .and_modify(|cur| {
                if d < cur.distance {
                    *cur = cand;
                }
            })
            .or_insert(cand);
    }
    let mut out: Vec<(i64, Projection)> = best
        .into_iter()
        .map(|(s, pr)| (streets[s as usize].way_id, pr))
        .collect();
    out.sort_by(|x, y| x.1.distance.total_cmp(&y.1.distance).then(x.0.cmp(&y.0)));
    out.truncate(options.max_projections);
    out.into_iter().map(|(_, pr)| pr).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_landmarks: usize,
    pub num_streets: usize,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub area_km2: f64,
}

impl MapGraph {
    pub fn from_parts(
        nodes: Vec<MapNode>,
        edges: Vec<MapEdge>,
        landmarks: Vec<Landmark>,
        landmark_nodes: Vec<u32>,
        num_streets: usize,
        region: Option<BoundingBox>,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            adjacency[e.a as usize].push((e.b, e.weight));
            adjacency[e.b as usize].push((e.a, e.weight));
        }
        Self {
            nodes,
            edges,
            landmarks,
            landmark_nodes,
            num_streets,
            region,
            adjacency,
        }
    }

    pub fn neighbors(&self, n: u32) -> &[(u32, f64)] {
        &self.adjacency[n as usize]
    }

    pub fn point(&self, n: u32) -> GeoPoint {
        self.nodes[n as usize].point
    }

    fn check(&self, n: u32) -> Result<(), MapError> {
        if (n as usize) < self.nodes.len() {
            Ok(())
        } else {
            Err(MapError::NodeNotInGraph(n))
        }
    }

    /// Dijkstra from `a` to `b`: node sequence and length in meters.
    pub fn shortest_path(&self, a: u32, b: u32) -> Result<(Vec<u32>, f64), MapError> {
        self.check(a)?;
        self.check(b)?;
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![u32::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[a as usize] = 0.0;
        heap.push(HeapItem { dist: 0.0, node: a });
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if node == b {
                break;
            }
            if d > dist[node as usize] {
                continue;
            }
            for &(m, w) in self.neighbors(node) {
                let nd = d + w;
                if nd < dist[m as usize] {
                    dist[m as usize] = nd;
                    prev[m as usize] = node;
                    heap.push(HeapItem { dist: nd, node: m });
                }
            }
        }
        if !dist[b as usize].is_finite() {
            return Err(MapError::NoPath(a, b));
        }
        let mut path = vec![b];
        let mut cur = b;
        while cur != a {
            cur = prev[cur as usize];
            path.push(cur);
        }
        path.reverse();
        Ok((path, dist[b as usize]))
    }

    /// Graph distances from `source` to every node reachable within
    /// `max_m`, as a map node -> meters.
    pub fn distances_within(&self, source: u32, max_m: f64) -> Result<HashMap<u32, f64>, MapError> {
        self.check(source)?;
        let mut dist: HashMap<u32, f64> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(source, 0.0);
        heap.push(HeapItem {
            dist: 0.0,
            node: source,
        });
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if d > dist[&node] {
                continue;
            }
            for &(m, w) in self.neighbors(node) {
                let nd = d + w;
                if nd <= max_m && dist.get(&m).is_none_or(|&cur| nd < cur) {
                    dist.insert(m, nd);
                    heap.push(HeapItem { dist: nd, node: m });
                }
            }
        }
        Ok(dist)
    }

    /// Component label per node; labels are dense and ordered by first node.
    pub fn components(&self) -> Vec<u32> {
        let mut label = vec![u32::MAX; self.nodes.len()];
        let mut next = 0;
        for s in 0..self.nodes.len() {
            if label[s] != u32::MAX {
                continue;
            }
            let mut stack = vec![s as u32];
            label[s] = next;
            while let Some(n) = stack.pop() {
                for &(m, _) in self.neighbors(n) {
                    if label[m as usize] == u32::MAX {
                        label[m as usize] = next;
                        stack.push(m);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Nodes of the largest connected component.
    pub fn largest_component(&self) -> Vec<u32> {
        let labels = self.components();
        let mut sizes: HashMap<u32, usize> = HashMap::new();
        for &l in &labels {
            *sizes.entry(l).or_default() += 1;
        }
        let Some((&big, _)) = sizes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else {
            return Vec::new();
        };
        (0..labels.len() as u32).filter(|&n| labels[n as usize] == big).collect()
    }

    pub fn stats(&self) -> GraphStats {
        let area_km2 = self
            .region
            .or_else(|| BoundingBox::enclosing(self.nodes.iter().map(|n| n.point)))
            .map_or(0.0, |b| b.area_km2());
        GraphStats {
            num_landmarks: self.landmarks.len(),
            num_streets: self.num_streets,
            num_nodes: self.nodes.len(),
            num_edges: self.edges.len(),
            area_km2,
        }
    }

    /// Checks structural invariants; returns a description of each breach.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for e in &self.edges {
            let d = haversine_distance(self.point(e.a), self.point(e.b));
            if (d - e.weight).abs() > 0.5 {
                problems.push(format!("edge {}-{} weight {} vs {}", e.a, e.b, e.weight, d));
            }
            if e.kind == EdgeKind::Projection && e.weight > 500.0 {
                problems.push(format!("projection edge {}-{} is {} m", e.a, e.b, e.weight));
            }
        }
        for (l, &n) in self.landmark_nodes.iter().enumerate() {
            let k = self
                .neighbors(n)
                .iter()
                .filter(|(m, _)| self.nodes[*m as usize].kind == NodeKind::Projection)
                .count();
            if !(1..=4).contains(&k) {
                problems.push(format!("landmark {} has {k} projections", self.landmarks[l].id));
            }
        }
        let largest: std::collections::HashSet<u32> = self.largest_component().into_iter().collect();
        if !self.landmark_nodes.is_empty() {
            let inside = self.landmark_nodes.iter().filter(|n| largest.contains(n)).count();
            let frac = inside as f64 / self.landmark_nodes.len() as f64;
            if frac < 0.95 {
                problems.push(format!(
                    "only {:.1}% of landmarks in the largest component",
                    100.0 * frac
                ));
            }
        }
        problems
    }

    /// Writes a JSON-lines dump: a header, then nodes, then edges.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), MapError> {
        let header = DumpHeader {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            num_nodes: self.nodes.len(),
            num_edges: self.edges.len(),
            num_streets: self.num_streets,
            region: self.region,
        };
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        for (i, n) in self.nodes.iter().enumerate() {
            let line = NodeLine {
                node: i as u32,
                kind: n.kind,
                lat: n.point.lat,
                lng: n.point.lng,
                landmark: n.landmark.map(|l| &self.landmarks[l as usize]),
            };
            writeln!(w, "{}", serde_json::to_string(&line).expect("node serializes"))?;
        }
        for e in &self.edges {
            writeln!(w, "{}", serde_json::to_string(e).expect("edge serializes"))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<MapGraph, MapError> {
        let mut lines = r.lines().enumerate();
        let malformed = |line: usize, reason: String| MapError::Malformed { line: line + 1, reason };
        let (_, first) = lines.next().ok_or_else(|| malformed(0, "empty dump".into()))?;
        let header: DumpHeader = serde_json::from_str(&first?).map_err(|e| malformed(0, e.to_string()))?;
        if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
            return Err(malformed(0, format!("unsupported {} v{}", header.format, header.version)));
        }
        let mut nodes = Vec::with_capacity(header.num_nodes);
        let mut landmarks = Vec::new();
        let mut landmark_nodes = Vec::new();
        let mut edges = Vec::with_capacity(header.num_edges);
        for (ln, line) in lines {
            let line = line?;
            if nodes.len() < header.num_nodes {
                let n: OwnedNodeLine = serde_json::from_str(&line).map_err(|e| malformed(ln, e.to_string()))?;
                if n.node as usize != nodes.len() {
                    return Err(malformed(ln, format!("expected node {}", nodes.len())));
                }
                let landmark = n.landmark.map(|l| {
                    landmarks.push(l);
                    landmark_nodes.push(n.node);
                    (landmarks.len() - 1) as u32
                });
                nodes.push(MapNode {
                    kind: n.kind,
                    point: GeoPoint { lat: n.lat, lng: n.lng },
                    landmark,
                });
            } else {
                let e: MapEdge = serde_json::from_str(&line).map_err(|e| malformed(ln, e.to_string()))?;
                if e.a as usize >= nodes.len() || e.b as usize >= nodes.len() {
                    return Err(malformed(ln, "edge endpoint out of range".into()));
                }
                edges.push(e);
            }
        }
        if nodes.len() != header.num_nodes || edges.len() != header.num_edges {
            return Err(malformed(0, "truncated dump".into()));
        }
        Ok(MapGraph::from_parts(
            nodes,
            edges,
            landmarks,
            landmark_nodes,
            header.num_streets,
            header.region,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    format: String,
    version: u32,
    num_nodes: usize,
    num_edges: usize,
    num_streets: usize,
    region: Option<BoundingBox>,
}

#[derive(Serialize)]
struct NodeLine<'a> {
    node: u32,
    kind: NodeKind,
    lat: f64,
    lng: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    landmark: Option<&'a Landmark>,
}

#[derive(Deserialize)]
struct OwnedNodeLine {
    node: u32,
    kind: NodeKind,
    lat: f64,
    lng: f64,
    landmark: Option<Landmark>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osm::{Geometry, OsmId};
    use std::collections::BTreeMap;

    fn landmark(id: i64, p: GeoPoint, tags: &[(&str, &str)]) -> Landmark {
        Landmark {
            id: OsmId::node(id),
            name: None,
            tags: tags.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            geometry: Geometry::Point(p),
            centroid: p,
        }
    }

    fn street(way_id: i64, ids: &[i64], pts: &[GeoPoint]) -> Street {
        Street {
            way_id,
            name: None,
            highway: "residential".into(),
            node_ids: ids.to_vec(),
            points: pts.to_vec(),
        }
    }

    fn origin() -> GeoPoint {
        GeoPoint::new(40.75, -73.99).unwrap()
    }

    /// Square block with corners 200 m apart and one street per side.
    fn square() -> (Vec<Street>, [GeoPoint; 4]) {
        let sw = origin();
        let se = sw.destination(90.0, 200.0);
        let ne = se.destination(0.0, 200.0);
        let nw = sw.destination(0.0, 200.0);
        let streets = vec![
            street(1, &[1, 2], &[sw, se]),
            street(2, &[2, 3], &[se, ne]),
            street(3, &[3, 4], &[ne, nw]),
            street(4, &[4, 1], &[nw, sw]),
        ];
        (streets, [sw, se, ne, nw])
    }

    #[test]
    fn prominence_ladder() {
        let p = origin();
        assert_eq!(prominence_rank(&landmark(1, p, &[("wikipedia", "en:X"), ("shop", "bakery")])), Some(0));
        assert_eq!(prominence_rank(&landmark(1, p, &[("shop", "bakery")])), Some(5));
        assert_eq!(prominence_rank(&landmark(1, p, &[("name", "X")])), None);
        assert_eq!(prominence_rank(&landmark(1, p, &[("brand:wikidata", "Q1")])), None);
    }

    #[test]
    fn single_street_single_projection() {
        let a = origin();
        let b = a.destination(90.0, 300.0);
        let l = landmark(7, a.destination(90.0, 150.0).destination(0.0, 10.0), &[("amenity", "cafe")]);
        let (g, report) =
            build_map_graph(&[l], &[street(1, &[1, 2], &[a, b])], None, &BuildOptions::default()).unwrap();
        assert!(report.skipped_landmarks.is_empty());
        let ln = g.landmark_nodes[0];
        assert_eq!(g.neighbors(ln).len(), 1);
        let (pn, w) = g.neighbors(ln)[0];
        assert_eq!(g.nodes[pn as usize].kind, NodeKind::Projection);
        // closed form: perpendicular offset of 10 m
        assert!((w - 10.0).abs() <= 0.5, "{w}");
        // projection is spliced into the street: 2 junctions + projection
        assert_eq!(g.edges.iter().filter(|e| e.kind == EdgeKind::Street).count(), 2);
        assert!(g.validate().is_empty(), "{:?}", g.validate());
    }

    #[test]
    fn centered_landmark_projects_to_all_four_sides() {
        let (streets, [sw, ..]) = square();
        let center = sw.destination(90.0, 100.0).destination(0.0, 100.0);
        let (g, _) =
            build_map_graph(&[landmark(1, center, &[])], &streets, None, &BuildOptions::default()).unwrap();
        let ln = g.landmark_nodes[0];
        assert_eq!(g.neighbors(ln).len(), 4);
        for &(_, w) in g.neighbors(ln) {
            assert!((w - 100.0).abs() < 0.5, "{w}");
        }
        assert_eq!(g.stats().num_edges, 4 + 8);
        assert!(g.validate().is_empty());
    }

    #[test]
    fn far_landmark_is_skipped() {
        let (streets, [sw, ..]) = square();
        let far = sw.destination(225.0, 800.0);
        let (g, report) =
            build_map_graph(&[landmark(9, far, &[])], &streets, None, &BuildOptions::default()).unwrap();
        assert_eq!(report.skipped_landmarks, vec!["n9"]);
        assert_eq!(g.stats().num_landmarks, 0);
    }

    #[test]
    fn shared_endpoints_are_merged_by_distance() {
        let a = origin();
        let b = a.destination(90.0, 100.0);
        let b_dup = b.destination(0.0, 0.2);
        let c = b.destination(0.0, 100.0);
        let (g, report) = build_map_graph(
            &[],
            &[street(1, &[1, 2], &[a, b]), street(2, &[20, 3], &[b_dup, c])],
            None,
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(report.merged_vertices, 1);
        assert_eq!(g.nodes.len(), 3);
        assert!(g.shortest_path(0, 2).is_ok());
    }

    #[test]
    fn no_streets() {
        assert!(matches!(
            build_map_graph(&[], &[], None, &BuildOptions::default()),
            Err(MapError::NoStreets)
        ));
    }

    #[test]
    fn shortest_path_basics() {
        let a = origin();
        let b = a.destination(90.0, 100.0);
        let (g, _) = build_map_graph(&[], &[street(1, &[1, 2], &[a, b])], None, &BuildOptions::default()).unwrap();
        assert_eq!(g.shortest_path(0, 0).unwrap(), (vec![0], 0.0));
        let (path, len) = g.shortest_path(0, 1).unwrap();
        assert_eq!(path, vec![0, 1]);
        assert!((len - 100.0).abs() < 1e-6);
        assert!(matches!(g.shortest_path(0, 5), Err(MapError::NodeNotInGraph(5))));
    }

    #[test]
    fn square_opposite_corners_go_around() {
        let (streets, [sw, _, ne, _]) = square();
        let (g, _) = build_map_graph(&[], &streets, None, &BuildOptions::default()).unwrap();
        let (_, len) = g.shortest_path(0, 2).unwrap();
        // both routes are two sides; the diagonal is not an edge
        let side = haversine_distance(g.point(0), g.point(1));
        assert!((len - 2.0 * side).abs() < 1.0);
        assert!(len > haversine_distance(sw, ne) + 50.0);
    }

    #[test]
    fn disconnected_nodes_have_no_path() {
        let a = origin();
        let b = a.destination(90.0, 100.0);
        let c = a.destination(0.0, 5000.0);
        let d = c.destination(90.0, 100.0);
        let (g, _) = build_map_graph(
            &[],
            &[street(1, &[1, 2], &[a, b]), street(2, &[3, 4], &[c, d])],
            None,
            &BuildOptions::default(),
        )
        .unwrap();
        assert!(matches!(g.shortest_path(0, 3), Err(MapError::NoPath(0, 3))));
        assert_eq!(g.largest_component().len(), 2);
    }

    #[test]
    fn jsonl_round_trip_is_stable() {
        let (streets, [sw, ..]) = square();
        let mut tags = BTreeMap::new();
        tags.insert("amenity".to_string(), "bank".to_string());
        let l = Landmark {
            id: OsmId::way(5),
            name: Some("Bank \"A\"".into()),
            tags,
            geometry: Geometry::Point(sw.destination(45.0, 50.0)),
            centroid: sw.destination(45.0, 50.0),
        };
        let region = BoundingBox::new(40.74, -74.0, 40.76, -73.98).unwrap();
        let (g, _) = build_map_graph(&[l], &streets, Some(region), &BuildOptions::default()).unwrap();
        let mut buf = Vec::new();
        g.write_jsonl(&mut buf).unwrap();
        let back = MapGraph::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        let mut again = Vec::new();
        back.write_jsonl(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn stats_of_street_only_graph() {
        let a = origin();
        let (g, _) = build_map_graph(
            &[],
            &[street(1, &[1, 2], &[a, a.destination(0.0, 50.0)])],
            Some(BoundingBox::new(40.0, -74.0, 41.0, -73.0).unwrap()),
            &BuildOptions::default(),
        )
        .unwrap();
        let s = g.stats();
        assert_eq!(s.num_landmarks, 0);
        assert_eq!(s.num_streets, 1);
        assert_eq!(s.num_nodes, 2);
        assert!(s.area_km2 > 9000.0);
    }
}
