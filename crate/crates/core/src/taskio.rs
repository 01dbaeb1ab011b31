//! Dataset ingestion, start/goal sampling, model text formats and prediction
//! parsing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geo::{cardinal_bearing, haversine_distance, BoundingBox, GeoPoint};
use crate::mapgraph::{prominence_rank, MapGraph};
use crate::par::{self, Workers};
use crate::quantize::TokenAssignment;
use crate::s2::CellId;
use crate::worldgraph::{cells_covering, WorldGraphConfig, WorldNode};

/// Level of the axis grid shared by encoder and decoder text.
pub const AXIS_LEVEL: u8 = 16;
pub const MAX_REJECTIONS: usize = 10_000;
pub const RECORD_FORMAT_VERSION: u32 = 1;
pub const START_MARKER: &str = "[START]";
pub const GRAPH_MARKER: &str = "[GRAPH]";
pub const PATH_SEPARATOR: &str = "; ";

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unknown city {0:?}")]
    UnknownCity(String),
    #[error("unknown split {0:?}")]
    UnknownSplit(String),
    #[error("point ({lat}, {lng}) lies outside the region")]
    OutOfRegion { lat: f64, lng: f64 },
    #[error("axis position X{x} Y{y} lies outside the grid")]
    OutOfGrid { x: i64, y: i64 },
    #[error("region cannot carry an axis grid: {0}")]
    UnsupportedRegion(String),
    #[error("no acceptable pair after {0} rejections")]
    ExhaustedSampling(usize),
    #[error("graph has no nodes or no landmarks")]
    EmptyGraph,
    #[error("no X/Y position in prediction {0:?}")]
    ParseFailure(String),
    #[error("no tokens for graph node {0}")]
    MissingTokens(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum City {
    Manhattan,
    Pittsburgh,
    Philadelphia,
}

impl City {
    pub const ALL: [City; 3] = [City::Manhattan, City::Pittsburgh, City::Philadelphia];

    pub fn name(&self) -> &'static str {
        match self {
            City::Manhattan => "manhattan",
            City::Pittsburgh => "pittsburgh",
            City::Philadelphia => "philadelphia",
        }
    }

    /// Approximate study area, used when no region is configured.
    pub fn default_region(&self) -> BoundingBox {
        let (s, w, n, e) = match self {
            City::Manhattan => (40.700, -74.020, 40.880, -73.905),
            City::Pittsburgh => (40.425, -80.020, 40.460, -79.930),
            City::Philadelphia => (39.930, -75.190, 39.970, -75.130),
        };
        BoundingBox { south: s, west: w, north: n, east: e }
    }
}

impl fmt::Display for City {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for City {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "manhattan" | "new york" | "nyc" => Ok(City::Manhattan),
            "pittsburgh" => Ok(City::Pittsburgh),
            "philadelphia" | "philly" => Ok(City::Philadelphia),
            _ => Err(TaskError::UnknownCity(s.to_string())),
        }
    }
}

impl TryFrom<String> for City {
    type Error = TaskError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<City> for String {
    fn from(c: City) -> String {
        c.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Split {
    Train,
    DevSeen,
    DevUnseen,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::DevSeen, Split::DevUnseen, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::DevSeen => "dev_seen",
            Split::DevUnseen => "dev_unseen",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "train" => Ok(Split::Train),
            "dev_seen" | "dev" => Ok(Split::DevSeen),
            "dev_unseen" => Ok(Split::DevUnseen),
            "test" => Ok(Split::Test),
            _ => Err(TaskError::UnknownSplit(s.to_string())),
        }
    }
}

impl TryFrom<String> for Split {
    type Error = TaskError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Split> for String {
    fn from(s: Split) -> String {
        s.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub instruction: String,
    pub start: GeoPoint,
    pub goal: GeoPoint,
    pub city: City,
    pub split: Split,
}

/// One line of the dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub instruction: String,
    pub start_lat: f64,
    pub start_lng: f64,
    pub goal_lat: f64,
    pub goal_lng: f64,
    pub city: String,
    pub split: String,
}

impl From<&Example> for ExampleRecord {
    fn from(ex: &Example) -> Self {
        ExampleRecord {
            id: ex.id.clone(),
            instruction: ex.instruction.clone(),
            start_lat: ex.start.lat,
            start_lng: ex.start.lng,
            goal_lat: ex.goal.lat,
            goal_lng: ex.goal.lng,
            city: ex.city.name().into(),
            split: ex.split.name().into(),
        }
    }
}

impl ExampleRecord {
    fn validate(self, line: usize) -> Result<Example, TaskError> {
        let malformed = |reason: String| TaskError::MalformedRecord { line, reason };
        let city: City = self.city.parse()?;
        let split: Split = self.split.parse().map_err(|e: TaskError| malformed(e.to_string()))?;
        let start = GeoPoint::new(self.start_lat, self.start_lng).map_err(|e| malformed(format!("start: {e}")))?;
        let goal = GeoPoint::new(self.goal_lat, self.goal_lng).map_err(|e| malformed(format!("goal: {e}")))?;
        if start.approx_eq(&goal) {
            return Err(malformed("start equals goal".into()));
        }
        Ok(Example {
            id: self.id,
            instruction: self.instruction,
            start,
            goal,
            city,
            split,
        })
    }
}

/// Reads dataset lines, keeping only `split` when given.
pub fn read_dataset<R: BufRead>(r: R, split: Option<Split>) -> Result<Vec<Example>, TaskError> {
    let mut out = Vec::new();
    let mut counts: BTreeMap<Split, usize> = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExampleRecord = serde_json::from_str(&line).map_err(|e| TaskError::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let ex = rec.validate(i + 1)?;
        *counts.entry(ex.split).or_default() += 1;
        if split.is_none_or(|s| s == ex.split) {
            out.push(ex);
        }
    }
    for (s, n) in &counts {
        log::info!("{s}: {n} records");
    }
    Ok(out)
}

pub fn load_dataset(path: &std::path::Path, split: Option<Split>) -> Result<Vec<Example>, TaskError> {
    let f = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(f), split)
}

pub fn write_dataset<W: Write>(examples: &[Example], mut w: W) -> std::io::Result<()> {
    for ex in examples {
        writeln!(w, "{}", serde_json::to_string(&ExampleRecord::from(ex)).expect("record serializes"))?;
    }
    Ok(())
}

/// Examples whose start-goal distance exceeds `limit_m`; callers log these.
pub fn distance_violations(examples: &[Example], limit_m: f64) -> Vec<(&str, f64)> {
    examples
        .iter()
        .map(|e| (e.id.as_str(), haversine_distance(e.start, e.goal)))
        .filter(|(_, d)| *d > limit_m)
        .collect()
}

/// Bounding box of every start and goal, one per city.
pub fn dataset_regions(examples: &[Example]) -> BTreeMap<City, BoundingBox> {
    let mut by_city: BTreeMap<City, Vec<GeoPoint>> = BTreeMap::new();
    for e in examples {
        by_city.entry(e.city).or_default().extend([e.start, e.goal]);
    }
    by_city
        .into_iter()
        .filter_map(|(c, pts)| BoundingBox::enclosing(pts).map(|b| (c, b)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AxisPosition {
    pub x: u32,
    pub y: u32,
}

impl fmt::Display for AxisPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{} Y{}", self.x, self.y)
    }
}

/// Which face coordinate an axis follows and in which direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Axis {
    use_i: bool,
    ascending: bool,
    min: i64,
    max: i64,
}

impl Axis {
    fn rank(&self, i: i64, j: i64) -> i64 {
        let v = if self.use_i { i } else { j };
        if self.ascending {
            v - self.min
        } else {
            self.max - v
        }
    }

    fn value(&self, rank: i64) -> i64 {
        if self.ascending {
            self.min + rank
        } else {
            self.max - rank
        }
    }

    fn len(&self) -> i64 {
        self.max - self.min + 1
    }
}

/// Integer column/row coordinates over the level-16 cells of a region.
///
/// Columns follow whichever face axis points more nearly east, rows the
/// other one, both counted from the region's southwest corner.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisGrid {
    pub region: BoundingBox,
    pub level: u8,
    face: u8,
    east: Axis,
    north: Axis,
}

impl AxisGrid {
    pub fn new(region: BoundingBox) -> Result<AxisGrid, TaskError> {
        Self::with_level(region, AXIS_LEVEL)
    }

    pub fn with_level(region: BoundingBox, level: u8) -> Result<AxisGrid, TaskError> {
        region
            .validate()
            .map_err(|e| TaskError::UnsupportedRegion(e.to_string()))?;
        let cells = cells_covering(&region, level);
        let face = cells
            .iter()
            .next()
            .ok_or_else(|| TaskError::UnsupportedRegion("no cells".into()))?
            .face();
        if cells.iter().any(|c| c.face() != face) {
            return Err(TaskError::UnsupportedRegion("region spans several cube faces".into()));
        }
        let (mut imin, mut imax, mut jmin, mut jmax) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for c in &cells {
            let (_, i, j) = c.face_ij_at_level();
            imin = imin.min(i);
            imax = imax.max(i);
            jmin = jmin.min(j);
            jmax = jmax.max(j);
        }

        // direction of increasing i and j at the region center
        let center = CellId::from_point(region.center(), level).expect("valid level");
        let (_, ci, cj) = center.face_ij_at_level();
        let step = |di: i64, dj: i64| {
            let far = CellId::from_face_ij_at_level(face, ci + di, cj + dj, level).unwrap_or(center);
            let near = CellId::from_face_ij_at_level(face, ci - di, cj - dj, level).unwrap_or(center);
            cardinal_bearing(near.center(), far.center())
                .map(|(b, _)| b.to_radians())
                .unwrap_or(0.0)
        };
        let bi = step(1, 0);
        let bj = step(0, 1);
        let (ei, ej) = (bi.sin(), bj.sin());
        let i_is_east = ei.abs() >= ej.abs();
        let (east_b, north_b) = if i_is_east { (bi, bj) } else { (bj, bi) };
        let east = Axis {
            use_i: i_is_east,
            ascending: east_b.sin() > 0.0,
            min: if i_is_east { imin } else { jmin },
            max: if i_is_east { imax } else { jmax },
        };
        let north = Axis {
            use_i: !i_is_east,
            ascending: north_b.cos() > 0.0,
            min: if i_is_east { jmin } else { imin },
            max: if i_is_east { jmax } else { imax },
        };
        Ok(AxisGrid {
            region,
            level,
            face,
            east,
            north,
        })
    }

    pub fn width(&self) -> u32 {
        self.east.len() as u32
    }

    pub fn height(&self) -> u32 {
        self.north.len() as u32
    }

    pub fn position_of_cell(&self, cell: CellId) -> Result<AxisPosition, TaskError> {
        let (face, i, j) = cell.parent_at(self.level).unwrap_or(cell).face_ij_at_level();
        let (x, y) = (self.east.rank(i, j), self.north.rank(i, j));
        if face != self.face || x < 0 || y < 0 || x >= self.east.len() || y >= self.north.len() {
            return Err(TaskError::OutOfGrid { x, y });
        }
        Ok(AxisPosition { x: x as u32, y: y as u32 })
    }

    pub fn axis_position(&self, p: GeoPoint) -> Result<AxisPosition, TaskError> {
        let out = TaskError::OutOfRegion { lat: p.lat, lng: p.lng };
        if !self.region.contains(p) {
            return Err(out);
        }
        let cell = CellId::from_point(p, self.level).expect("valid level");
        self.position_of_cell(cell).map_err(|_| out)
    }

    pub fn cell_at(&self, pos: AxisPosition) -> Result<CellId, TaskError> {
        let (x, y) = (pos.x as i64, pos.y as i64);
        if x >= self.east.len() || y >= self.north.len() {
            return Err(TaskError::OutOfGrid { x, y });
        }
        let (a, b) = (self.east.value(x), self.north.value(y));
        let (i, j) = if self.east.use_i { (a, b) } else { (b, a) };
        CellId::from_face_ij_at_level(self.face, i, j, self.level).map_err(|_| TaskError::OutOfGrid { x, y })
    }
}

/// A sampled start node and goal landmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledPair {
    pub start_node: u32,
    pub goal_landmark: u32,
    pub start: GeoPoint,
    pub goal: GeoPoint,
    pub path_m: f64,
    pub rejections: usize,
}

fn sample_with(g: &MapGraph, max_path_m: f64, rng: &mut ChaCha8Rng) -> Result<SampledPair, TaskError> {
    if g.nodes.is_empty() || g.landmark_nodes.is_empty() {
        return Err(TaskError::EmptyGraph);
    }
    for rejections in 0..=MAX_REJECTIONS {
        let start_node = rng.gen_range(0..g.nodes.len()) as u32;
        let goal_landmark = rng.gen_range(0..g.landmark_nodes.len()) as u32;
        let goal_node = g.landmark_nodes[goal_landmark as usize];
        if goal_node == start_node {
            continue;
        }
        let (start, goal) = (g.point(start_node), g.point(goal_node));
        // the geodesic never exceeds the path length
        if haversine_distance(start, goal) > max_path_m {
            continue;
        }
        if let Ok((_, path_m)) = g.shortest_path(start_node, goal_node) {
            if path_m <= max_path_m {
                return Ok(SampledPair {
                    start_node,
                    goal_landmark,
                    start,
                    goal,
                    path_m,
                    rejections,
                });
            }
        }
    }
    Err(TaskError::ExhaustedSampling(MAX_REJECTIONS))
}

/// One start/goal pair whose graph distance is at most `max_path_m`.
pub fn sample_pair(g: &MapGraph, max_path_m: f64, seed: u64) -> Result<SampledPair, TaskError> {
    sample_with(g, max_path_m, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `n` independent pairs; sample `i` draws from stream `i` of `seed`, so the
/// result does not depend on the worker count.
pub fn sample_pairs(
    g: &MapGraph,
    n: usize,
    max_path_m: f64,
    seed: u64,
    workers: Workers,
) -> Result<Vec<SampledPair>, TaskError> {
    par::map_range(n, workers, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        sample_with(g, max_path_m, &mut rng)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkOrder {
    /// Farthest from the goal first, closing in on it.
    #[default]
    FarthestFirst,
    /// Clockwise from north by bearing as seen from the goal.
    Bearing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathConfig {
    pub n_landmarks: usize,
    pub radius_m: f64,
    pub order: LandmarkOrder,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            n_landmarks: 3,
            radius_m: 500.0,
            order: LandmarkOrder::FarthestFirst,
        }
    }
}

/// Start, up to `n` prominent landmarks near the goal, then the goal.
pub fn build_target_path(
    ex: &Example,
    g: &MapGraph,
    grid: &AxisGrid,
    cfg: &PathConfig,
) -> Result<Vec<AxisPosition>, TaskError> {
    let start = grid.axis_position(ex.start)?;
    let goal = grid.axis_position(ex.goal)?;
    let mut near: Vec<(u8, usize, f64)> = g
        .landmarks
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            let rank = prominence_rank(l)?;
            let d = haversine_distance(l.centroid, ex.goal);
            (d <= cfg.radius_m && grid.region.contains(l.centroid)).then_some((rank, i, d))
        })
        .collect();
    // landmarks are stored in id order, so the index breaks rank ties by id
    near.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    near.truncate(cfg.n_landmarks);
    match cfg.order {
        LandmarkOrder::FarthestFirst => near.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1))),
        LandmarkOrder::Bearing => {
            let bearing = |i: usize| {
                cardinal_bearing(ex.goal, g.landmarks[i].centroid).map_or(0.0, |(b, _)| b)
            };
            near.sort_by(|a, b| bearing(a.1).total_cmp(&bearing(b.1)).then(a.1.cmp(&b.1)));
        }
    }
    let mut path = vec![start];
    for (_, i, _) in near {
        path.push(grid.axis_position(g.landmarks[i].centroid)?);
    }
    path.push(goal);
    Ok(path)
}

pub fn path_text(path: &[AxisPosition]) -> String {
    path.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(PATH_SEPARATOR)
}

pub fn graph_token_text(token: u32) -> String {
    format!("<g{token}>")
}

/// Every graph token string of a vocabulary, for tokenizer registration.
pub fn graph_vocabulary(vocab_size: usize) -> Vec<String> {
    (0..vocab_size as u32).map(graph_token_text).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedRecord {
    pub id: String,
    pub input_text: String,
    pub target_text: String,
}

/// Describes the text conventions of a record file; stored beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFormat {
    pub version: u32,
    pub start_marker: String,
    pub graph_marker: String,
    pub path_separator: String,
    pub axis_level: u8,
    pub graph_token_pattern: String,
    pub graph_levels: Vec<u8>,
    pub path: PathConfig,
}

impl RecordFormat {
    pub fn new(world: &WorldGraphConfig, path: PathConfig) -> Self {
        RecordFormat {
            version: RECORD_FORMAT_VERSION,
            start_marker: START_MARKER.into(),
            graph_marker: GRAPH_MARKER.into(),
            path_separator: PATH_SEPARATOR.into(),
            axis_level: AXIS_LEVEL,
            graph_token_pattern: "<g{id}>".into(),
            graph_levels: world.levels.iter().rev().copied().collect(),
            path,
        }
    }
}

/// Graph tokens for the cells holding `p`, finest level first.
pub fn start_graph_tokens(
    p: GeoPoint,
    tokens: &std::collections::HashMap<&str, &[u32]>,
    world: &WorldGraphConfig,
) -> Result<Vec<u32>, TaskError> {
    let mut out = Vec::new();
    for &level in world.levels.iter().rev() {
        let cell = CellId::from_point(p, level).expect("valid level");
        let name = WorldNode::Cell(cell).to_string();
        let t = tokens.get(name.as_str()).ok_or(TaskError::MissingTokens(name))?;
        out.extend_from_slice(t);
    }
    Ok(out)
}

pub fn make_record(
    ex: &Example,
    target: &[AxisPosition],
    tokens: &std::collections::HashMap<&str, &[u32]>,
    world: &WorldGraphConfig,
    grid: &AxisGrid,
) -> Result<TokenizedRecord, TaskError> {
    let start = grid.axis_position(ex.start)?;
    let graph: Vec<String> = start_graph_tokens(ex.start, tokens, world)?
        .into_iter()
        .map(graph_token_text)
        .collect();
    Ok(TokenizedRecord {
        id: ex.id.clone(),
        input_text: format!(
            "{} {START_MARKER} {start} {GRAPH_MARKER} {}",
            ex.instruction.trim(),
            graph.join(" ")
        ),
        target_text: path_text(target),
    })
}

/// Records for every example, in input order.
pub fn export_records(
    examples: &[Example],
    g: &MapGraph,
    assignment: &TokenAssignment,
    world: &WorldGraphConfig,
    grid: &AxisGrid,
    cfg: &PathConfig,
    workers: Workers,
) -> Result<Vec<TokenizedRecord>, TaskError> {
    let index = assignment.index();
    par::map(examples, workers, |ex| {
        let path = build_target_path(ex, g, grid, cfg)?;
        make_record(ex, &path, &index, world, grid)
    })
    .into_iter()
    .collect()
}

pub fn write_records<W: Write>(records: &[TokenizedRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<TokenizedRecord>, TaskError> {
    read_jsonl(r)
}

fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>, TaskError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| TaskError::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

fn xy_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"X\s*(\d+)\s*,?\s*Y\s*(\d+)").expect("valid pattern"))
}

/// The last `X<int> Y<int>` pair in `text`.
pub fn parse_axis_position(text: &str) -> Result<AxisPosition, TaskError> {
    let caps = xy_pattern()
        .captures_iter(text)
        .last()
        .ok_or_else(|| TaskError::ParseFailure(text.chars().take(80).collect()))?;
    let num = |k: usize| {
        caps[k]
            .parse::<u32>()
            .map_err(|_| TaskError::ParseFailure(text.chars().take(80).collect()))
    };
    Ok(AxisPosition { x: num(1)?, y: num(2)? })
}

/// Center of the grid cell named by the last position in `text`.
pub fn parse_prediction(text: &str, grid: &AxisGrid) -> Result<GeoPoint, TaskError> {
    Ok(grid.cell_at(parse_axis_position(text)?)?.center())
}

/// One line of a prediction file: either decoded text or a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lng: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
}

impl PredictionRecord {
    pub fn point(id: &str, p: GeoPoint, system: &str) -> Self {
        PredictionRecord {
            id: id.into(),
            output_text: None,
            lat: Some(p.lat),
            lng: Some(p.lng),
            system: Some(system.into()),
        }
    }

    /// The predicted location. Text predictions need a grid.
    pub fn resolve(&self, grid: Option<&AxisGrid>) -> Result<GeoPoint, TaskError> {
        if let (Some(lat), Some(lng)) = (self.lat, self.lng) {
            return GeoPoint::new(lat, lng).map_err(|e| TaskError::ParseFailure(e.to_string()));
        }
        match (&self.output_text, grid) {
            (Some(t), Some(g)) => parse_prediction(t, g),
            (Some(t), None) => Err(TaskError::ParseFailure(format!("no grid to resolve {t:?}"))),
            (None, _) => Err(TaskError::ParseFailure("empty prediction".into())),
        }
    }
}

pub fn write_predictions<W: Write>(preds: &[PredictionRecord], mut w: W) -> std::io::Result<()> {
    for p in preds {
        writeln!(w, "{}", serde_json::to_string(p).expect("prediction serializes"))?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<PredictionRecord>, TaskError> {
    read_jsonl(r)
}

/// How points are written in a foreign dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFormat {
    /// `"POINT (lng lat)"`, `[lng, lat]`, `{"lat":..,"lng":..}` or `"lat,lng"`.
    #[default]
    Auto,
    /// Two-element arrays in latitude-longitude order.
    LatLngArray,
}

/// Field names of a foreign dataset file; dotted names reach into objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    pub id: String,
    pub instruction: String,
    pub start: String,
    pub goal: String,
    pub city: Option<String>,
    pub split: Option<String>,
    pub default_city: Option<City>,
    pub default_split: Option<Split>,
    pub point_format: PointFormat,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            id: "id".into(),
            instruction: "content".into(),
            start: "start_point".into(),
            goal: "end_point".into(),
            city: None,
            split: None,
            default_city: None,
            default_split: None,
            point_format: PointFormat::Auto,
        }
    }
}

fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |v, k| v.get(k))
}

fn parse_point(v: &Value, fmt: PointFormat) -> Option<GeoPoint> {
    let num = |v: &Value| v.as_f64().or_else(|| v.as_str()?.trim().parse().ok());
    let (lat, lng) = match v {
        Value::Array(a) if a.len() == 2 => {
            let (x, y) = (num(&a[0])?, num(&a[1])?);
            match fmt {
                PointFormat::LatLngArray => (x, y),
                PointFormat::Auto => (y, x),
            }
        }
        Value::Object(_) => {
            let lat = v.get("lat").or_else(|| v.get("latitude"))?;
            let lng = v.get("lng").or_else(|| v.get("lon")).or_else(|| v.get("longitude"))?;
            (num(lat)?, num(lng)?)
        }
        Value::String(s) => {
            let s = s.trim();
            if let Some(rest) = s.strip_prefix("POINT") {
                let inner = rest.trim().trim_start_matches('(').trim_end_matches(')');
                let mut it = inner.split_whitespace().map(|t| t.parse::<f64>());
                let (x, y) = (it.next()?.ok()?, it.next()?.ok()?);
                (y, x)
            } else {
                let mut it = s.split(',').map(|t| t.trim().parse::<f64>());
                (it.next()?.ok()?, it.next()?.ok()?)
            }
        }
        _ => return None,
    };
    GeoPoint::new(lat, lng).ok()
}

/// Maps a foreign dataset file (JSON lines or one JSON array) onto examples.
pub fn adapt_release(text: &str, cfg: &AdapterConfig) -> Result<Vec<Example>, TaskError> {
    let values: Vec<(usize, Value)> = match serde_json::from_str::<Value>(text.trim()) {
        Ok(Value::Array(items)) => items.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect(),
        _ => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map(|v| (i + 1, v))
                    .map_err(|e| TaskError::MalformedRecord {
                        line: i + 1,
                        reason: e.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?,
    };
    values
        .into_iter()
        .map(|(line, v)| {
            let malformed = |what: &str| TaskError::MalformedRecord {
                line,
                reason: format!("missing or invalid {what}"),
            };
            let text_of = |field: &str| {
                lookup(&v, field).and_then(|x| match x {
                    Value::String(s) => Some(s.clone()),
                    Value::Number(n) => Some(n.to_string()),
                    _ => None,
                })
            };
            let id = text_of(&cfg.id).ok_or_else(|| malformed(&cfg.id))?;
            let instruction = text_of(&cfg.instruction).ok_or_else(|| malformed(&cfg.instruction))?;
            let start = lookup(&v, &cfg.start)
                .and_then(|p| parse_point(p, cfg.point_format))
                .ok_or_else(|| malformed(&cfg.start))?;
            let goal = lookup(&v, &cfg.goal)
                .and_then(|p| parse_point(p, cfg.point_format))
                .ok_or_else(|| malformed(&cfg.goal))?;
            let city = match cfg.city.as_deref().and_then(text_of) {
                Some(c) => c.parse()?,
                None => cfg.default_city.ok_or_else(|| malformed("city"))?,
            };
            let split = match cfg.split.as_deref().and_then(text_of) {
                Some(s) => s.parse().map_err(|_| malformed("split"))?,
                None => cfg.default_split.ok_or_else(|| malformed("split"))?,
            };
            ExampleRecord {
                id,
                instruction,
                start_lat: start.lat,
                start_lng: start.lng,
                goal_lat: goal.lat,
                goal_lng: goal.lng,
                city: city.name().into(),
                split: split.name().into(),
            }
            .validate(line)
        })
        .collect()
}
