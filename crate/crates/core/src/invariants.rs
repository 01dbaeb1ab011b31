//! Structural checks shared by the property tests and the acceptance run.
//! Each returns `Err` with a description of the first violation found.

use std::collections::HashMap;

use crate::geo::GeoPoint;
use crate::metrics::{accuracy_at, auc_error, report_from_errors};
use crate::quantize::KMeans;
use crate::s2::CellId;
use crate::worldgraph::{WalkGraph, WorldEdgeKind, WorldGraph};

/// Cell lookup for `p` at `level`: containment, uniqueness among the cell's
/// edge neighbors, face-coordinate round trip, and agreement with parents
/// and children.
pub fn check_cell_of_point(p: GeoPoint, level: u8) -> Result<(), String> {
    let cell = CellId::from_point(p, level).map_err(|e| e.to_string())?;
    if cell.level() != level {
        return Err(format!("{cell} has level {} not {level}", cell.level()));
    }
    if !cell.contains(p) {
        return Err(format!("{cell} does not contain {p:?}"));
    }
    let neighbors = cell.edge_neighbors().map_err(|e| e.to_string())?;
    if let Some(n) = neighbors.iter().find(|n| n.contains(p)) {
        return Err(format!("{p:?} is in both {cell} and its neighbor {n}"));
    }
    let (face, i, j) = cell.face_ij_at_level();
    let back = CellId::from_face_ij_at_level(face, i, j, level).map_err(|e| e.to_string())?;
    if back != cell {
        return Err(format!("{cell} round-trips to {back}"));
    }
    let text = cell.to_string();
    if text.parse::<CellId>().ok() != Some(cell) {
        return Err(format!("{cell} does not parse back from {text:?}"));
    }
    let parent = cell.parent().map_err(|e| e.to_string())?;
    if !parent.is_ancestor_of(&cell) || !parent.contains(p) {
        return Err(format!("parent {parent} of {cell} does not contain {p:?}"));
    }
    if CellId::from_point(p, level - 1).ok() != Some(parent) {
        return Err(format!("coarser lookup of {p:?} disagrees with parent {parent}"));
    }
    let children = cell.children().map_err(|e| e.to_string())?;
    let holding = children.iter().filter(|c| c.contains(p)).count();
    if holding != 1 {
        return Err(format!("{holding} children of {cell} contain {p:?}"));
    }
    Ok(())
}

fn vertex_key(p: GeoPoint) -> [i64; 3] {
    // about 6 mm on the unit sphere scaled by Earth's radius
    p.to_xyz().map(|c| (c * 1e9).round() as i64)
}

/// Adjacent cell pairs at `level`, found from shared corner pairs rather
/// than neighbor arithmetic.
fn shared_edges(cells: &[CellId]) -> usize {
    let mut edges: HashMap<([i64; 3], [i64; 3]), usize> = HashMap::new();
    for c in cells {
        let v = c.vertices().map(vertex_key);
        for k in 0..4 {
            let (a, b) = (v[k], v[(k + 1) % 4]);
            let key = if a <= b { (a, b) } else { (b, a) };
            *edges.entry(key).or_default() += 1;
        }
    }
    edges.values().filter(|&&n| n == 2).count()
}

/// Edge counts per kind match the closed form for the configured levels:
/// one containment edge per location, four parent edges per cell below the
/// coarsest level, one neighbor edge per adjacent pair at each level, and
/// two diagonals per sibling quad.
pub fn check_world_edge_counts(wg: &WorldGraph) -> Result<(), String> {
    let [l0, l1, l2] = wg.config.levels;
    let n0 = wg.cells_at(l0).count();
    let adjacent: usize = [l0, l1, l2]
        .iter()
        .map(|&l| shared_edges(&wg.cells_at(l).collect::<Vec<_>>()))
        .sum();
    let expect = [
        (WorldEdgeKind::Containment, wg.num_locations()),
        (WorldEdgeKind::Parent, 20 * n0),
        (WorldEdgeKind::Neighbor, adjacent),
        (
            WorldEdgeKind::Sibling,
            match wg.config.sibling_level {
                Some(l) if l == l1 => 2 * n0,
                Some(l) if l == l2 => 8 * n0,
                None => 0,
                Some(l) => return Err(format!("no closed form for sibling quads at level {l}")),
            },
        ),
    ];
    for (kind, n) in expect {
        let got = wg.count_edges(kind);
        if got != n {
            return Err(format!("{kind:?} edges: {got}, closed form {n}"));
        }
    }
    let total: usize = expect.iter().map(|(_, n)| n).sum();
    if wg.edges().len() != total {
        return Err(format!("{} edges in total, closed form {total}", wg.edges().len()));
    }
    if wg.cells_at(l1).count() != 4 * n0 || wg.cells_at(l2).count() != 16 * n0 {
        return Err("finer levels are not complete quadtrees of the coarse cover".into());
    }
    Ok(())
}

/// Every consecutive pair of every walk is an edge of `g`.
pub fn check_walks<G: WalkGraph>(g: &G, walks: &[Vec<u32>]) -> Result<(), String> {
    for (w, walk) in walks.iter().enumerate() {
        for pair in walk.windows(2) {
            if !g.neighbors(pair[0]).contains(&pair[1]) {
                return Err(format!("walk {w} steps {} -> {} without an edge", pair[0], pair[1]));
            }
        }
    }
    Ok(())
}

/// Each point is assigned to a centroid at least as similar as every other.
pub fn check_kmeans_local_optimality(points: &[f32], km: &KMeans) -> Result<(), String> {
    let dim = km.dim;
    for (i, row) in points.chunks_exact(dim).enumerate() {
        let sim = |c: usize| -> f32 { row.iter().zip(km.centroid(c)).map(|(a, b)| a * b).sum() };
        let own = sim(km.assignment[i] as usize);
        if let Some(c) = (0..km.k).find(|&c| sim(c) > own + 1e-6) {
            return Err(format!(
                "point {i} sits with centroid {} but centroid {c} is closer",
                km.assignment[i]
            ));
        }
    }
    Ok(())
}

/// Accuracy is monotone in the threshold; AUC is bounded and does not drop
/// when one error grows; the report does not depend on example order.
pub fn check_metric_properties(errors: &[f64], bump: usize, order: &[usize]) -> Result<(), String> {
    let thresholds = [0.0, 50.0, 100.0, 250.0, 1000.0, 5000.0, f64::INFINITY];
    for t in thresholds.windows(2) {
        if accuracy_at(errors, t[0]) > accuracy_at(errors, t[1]) {
            return Err(format!("accuracy at {} exceeds accuracy at {}", t[0], t[1]));
        }
    }
    let auc = auc_error(errors);
    if !(0.0..=1.0).contains(&auc) {
        return Err(format!("AUC {auc} outside [0, 1]"));
    }
    if !errors.is_empty() {
        let mut grown = errors.to_vec();
        let k = bump % errors.len();
        grown[k] += 100.0;
        if auc_error(&grown) < auc {
            return Err(format!("AUC fell from {auc} when error {k} grew"));
        }
        let permuted: Vec<f64> = order.iter().map(|&i| errors[i % errors.len()]).collect();
        if order.len() == errors.len() {
            let a = report_from_errors(errors, 0).map_err(|e| e.to_string())?;
            let b = report_from_errors(&permuted, 0).map_err(|e| e.to_string())?;
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
            if a.acc_100m != b.acc_100m
                || a.acc_250m != b.acc_250m
                || a.median_err != b.median_err
                || a.max_err != b.max_err
                || !close(a.mean_err, b.mean_err)
                || !close(a.auc_err, b.auc_err)
            {
                return Err(format!("report changed under permutation: {a:?} vs {b:?}"));
            }
        }
    }
    Ok(())
}
