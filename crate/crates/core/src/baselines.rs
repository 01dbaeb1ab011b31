//! Non-learning prediction systems: Stop, Center and Landmark.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_distance, BoundingBox, GeoPoint};
use crate::mapgraph::{prominence_rank, MapGraph};
use crate::par::{self, Workers};
use crate::spatial::PointIndex;
use crate::taskio::{Example, PredictionRecord};

pub const DEFAULT_RADIUS_M: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Stop,
    Center,
    Landmark,
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::Stop => "stop",
            System::Center => "center",
            System::Landmark => "landmark",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stop" => Ok(System::Stop),
            "center" => Ok(System::Center),
            "landmark" => Ok(System::Landmark),
            _ => Err(format!("unknown system {s:?}; expected stop, center or landmark")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub point: GeoPoint,
    pub system: System,
}

impl From<&Prediction> for PredictionRecord {
    fn from(p: &Prediction) -> Self {
        PredictionRecord::point(&p.id, p.point, p.system.name())
    }
}

pub fn stop(ex: &Example) -> Prediction {
    Prediction {
        id: ex.id.clone(),
        point: ex.start,
        system: System::Stop,
    }
}

/// Spatial lookups shared by the graph-based systems.
pub struct BaselineContext<'a> {
    graph: &'a MapGraph,
    nodes: PointIndex,
    /// Prominent landmarks as (rank, landmark index), parallel to `landmark_index`.
    prominent: Vec<(u8, usize)>,
    landmark_index: PointIndex,
    pub radius_m: f64,
}

impl<'a> BaselineContext<'a> {
    pub fn new(graph: &'a MapGraph, radius_m: f64) -> Self {
        let nodes = PointIndex::new(graph.nodes.iter().map(|n| n.point).collect(), radius_m);
        let prominent: Vec<(u8, usize)> = graph
            .landmarks
            .iter()
            .enumerate()
            .filter_map(|(i, l)| prominence_rank(l).map(|r| (r, i)))
            .collect();
        let landmark_index = PointIndex::new(
            prominent.iter().map(|&(_, i)| graph.landmarks[i].centroid).collect(),
            radius_m,
        );
        BaselineContext {
            graph,
            nodes,
            prominent,
            landmark_index,
            radius_m,
        }
    }

    /// The graph node within the radius of the start that lies closest to
    /// `centroid`; the start itself when no node is in range.
    pub fn center(&self, ex: &Example, centroid: GeoPoint) -> Prediction {
        let point = self
            .nodes
            .within(ex.start, self.radius_m)
            .into_iter()
            .map(|n| self.graph.nodes[n as usize].point)
            .map(|p| (haversine_distance(p, centroid), p))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or(ex.start, |(_, p)| p);
        Prediction {
            id: ex.id.clone(),
            point,
            system: System::Center,
        }
    }

    /// The most prominent landmark within the radius of the start, ties to
    /// the smallest id; the start itself when none is in range.
    pub fn landmark(&self, ex: &Example) -> Prediction {
        let point = self
            .landmark_index
            .within(ex.start, self.radius_m)
            .into_iter()
            .map(|k| self.prominent[k as usize])
            .min_by(|a, b| a.0.cmp(&b.0).then(self.graph.landmarks[a.1].id.cmp(&self.graph.landmarks[b.1].id)))
            .map_or(ex.start, |(_, i)| self.graph.landmarks[i].centroid);
        Prediction {
            id: ex.id.clone(),
            point,
            system: System::Landmark,
        }
    }
}

/// Center of the bounding box of every start and goal in `examples`.
pub fn dataset_centroid(examples: &[Example]) -> Option<GeoPoint> {
    BoundingBox::enclosing(examples.iter().flat_map(|e| [e.start, e.goal])).map(|b| b.center())
}

/// Runs one system over a batch. `centroid` is required by Center only; it
/// defaults to the centroid of the batch's own points.
pub fn run_baseline(
    system: System,
    examples: &[Example],
    graph: Option<&MapGraph>,
    centroid: Option<GeoPoint>,
    radius_m: f64,
    workers: Workers,
) -> Result<Vec<Prediction>, String> {
    match system {
        System::Stop => Ok(par::map(examples, workers, stop)),
        System::Center | System::Landmark => {
            let graph = graph.ok_or_else(|| format!("the {system} baseline needs a map graph"))?;
            let ctx = BaselineContext::new(graph, radius_m);
            if system == System::Landmark {
                return Ok(par::map(examples, workers, |e| ctx.landmark(e)));
            }
            let Some(c) = centroid.or_else(|| dataset_centroid(examples)) else {
                return Ok(Vec::new());
            };
            Ok(par::map(examples, workers, |e| ctx.center(e, c)))
        }
    }
}
