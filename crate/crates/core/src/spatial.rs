//! Uniform-grid bucketing of points and segments for radius queries.

use std::collections::HashMap;

use crate::geo::{haversine_distance, GeoPoint, LocalFrame};

// Candidate rings are widened by this fraction to absorb the planar frame's
// distortion away from its origin.
const FRAME_SLACK: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct GridIndex {
    frame: LocalFrame,
    cell_m: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl GridIndex {
    pub fn new(origin: GeoPoint, cell_m: f64) -> Self {
        assert!(cell_m > 0.0);
        Self {
            frame: LocalFrame::new(origin),
            cell_m,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, xy: [f64; 2]) -> (i64, i64) {
        (
            (xy[0] / self.cell_m).floor() as i64,
            (xy[1] / self.cell_m).floor() as i64,
        )
    }

    pub fn insert_point(&mut self, id: u32, p: GeoPoint) {
        let k = self.key(self.frame.to_xy(p));
        self.buckets.entry(k).or_default().push(id);
    }

    /// Registers `id` in every bucket overlapped by the segment's bounding
    /// rectangle.
    pub fn insert_segment(&mut self, id: u32, a: GeoPoint, b: GeoPoint) {
        let (ka, kb) = (self.key(self.frame.to_xy(a)), self.key(self.frame.to_xy(b)));
        for x in ka.0.min(kb.0)..=ka.0.max(kb.0) {
            for y in ka.1.min(kb.1)..=ka.1.max(kb.1) {
                self.buckets.entry((x, y)).or_default().push(id);
            }
        }
    }

    /// Ids in buckets that may hold items within `radius_m` of `p`.
    /// Segment ids can repeat; callers dedupe when that matters.
    pub fn candidates(&self, p: GeoPoint, radius_m: f64) -> Vec<u32> {
        let xy = self.frame.to_xy(p);
        let r = radius_m * (1.0 + FRAME_SLACK) + 1.0;
        let lo = self.key([xy[0] - r, xy[1] - r]);
        let hi = self.key([xy[0] + r, xy[1] + r]);
        let mut out = Vec::new();
        for x in lo.0..=hi.0 {
            for y in lo.1..=hi.1 {
                if let Some(ids) = self.buckets.get(&(x, y)) {
                    out.extend_from_slice(ids);
                }
            }
        }
        out
    }
}

/// Point set with exact haversine radius queries.
#[derive(Debug, Clone)]
pub struct PointIndex {
    grid: GridIndex,
    points: Vec<GeoPoint>,
}

impl PointIndex {
    pub fn new(points: Vec<GeoPoint>, cell_m: f64) -> Self {
        let origin = crate::geo::BoundingBox::enclosing(points.iter().copied())
            .map(|b| b.center())
            .unwrap_or(GeoPoint { lat: 0.0, lng: 0.0 });
        let mut grid = GridIndex::new(origin, cell_m);
        for (i, p) in points.iter().enumerate() {
            grid.insert_point(i as u32, *p);
        }
        Self { grid, points }
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    /// Indices of points within `radius_m` of `p`, ascending.
    pub fn within(&self, p: GeoPoint, radius_m: f64) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .grid
            .candidates(p, radius_m)
            .into_iter()
            .filter(|&i| haversine_distance(p, self.points[i as usize]) <= radius_m)
            .collect();
        ids.sort_unstable();
        ids
    }
}
