//! Hierarchical cube-face discretization of the sphere.
//!
//! The six faces of a cube are projected onto the unit sphere (gnomonic
//! projection followed by a quadratic area-equalizing transform), and each
//! face is subdivided recursively into four children down to level 30.
//! Children are numbered along a Hilbert curve per face.
//!
//! Ids are internal: the 64-bit layout mirrors the usual face/path/sentinel
//! scheme but is never exchanged with other libraries.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geo::GeoPoint;

pub const MAX_LEVEL: u8 = 30;
const MAX_SIZE: i64 = 1 << MAX_LEVEL;
const POS_BITS: u32 = 2 * MAX_LEVEL as u32 + 1;
const FACE_SHIFT: u32 = POS_BITS;

const SWAP_MASK: u8 = 1;
const INVERT_MASK: u8 = 2;

// Hilbert curve tables, indexed by orientation.
const IJ_TO_POS: [[u8; 4]; 4] = [[0, 1, 3, 2], [0, 3, 1, 2], [2, 3, 1, 0], [2, 1, 3, 0]];
const POS_TO_IJ: [[u8; 4]; 4] = [[0, 1, 3, 2], [0, 2, 3, 1], [3, 2, 0, 1], [3, 1, 0, 2]];
const POS_TO_ORIENTATION: [u8; 4] = [SWAP_MASK, 0, 0, INVERT_MASK | SWAP_MASK];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CellError {
    #[error("invalid cell level {0} (expected 0..=30)")]
    InvalidLevel(u8),
    #[error("level-0 cell has no parent or neighbors")]
    LevelUnderflow,
    #[error("level-30 cell has no children")]
    LevelOverflow,
    #[error("cannot parse cell id {0:?}")]
    Parse(String),
}

/// One cell of the hierarchical grid: a face, a level and a child path.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(u64);

impl CellId {
    /// Face cell (level 0).
    pub fn from_face(face: u8) -> Self {
        assert!(face < 6, "face {face} out of range");
        CellId(((face as u64) << FACE_SHIFT) | (1u64 << (2 * MAX_LEVEL as u32)))
    }

    /// Builds a cell from its face and child path, one digit per level.
    pub fn from_path(face: u8, path: &[u8]) -> Result<Self, CellError> {
        if face >= 6 {
            return Err(CellError::Parse(format!("face {face}")));
        }
        if path.len() > MAX_LEVEL as usize {
            return Err(CellError::InvalidLevel(path.len() as u8));
        }
        let mut id = Self::from_face(face);
        for &d in path {
            if d > 3 {
                return Err(CellError::Parse(format!("child digit {d}")));
            }
            id = id.child_unchecked(d);
        }
        Ok(id)
    }

    pub fn raw(&self) -> u64 {
        self.0
    }

    pub fn face(&self) -> u8 {
        (self.0 >> FACE_SHIFT) as u8
    }

    fn lsb(&self) -> u64 {
        self.0 & self.0.wrapping_neg()
    }

    pub fn level(&self) -> u8 {
        MAX_LEVEL - (self.0.trailing_zeros() / 2) as u8
    }

    /// Child digit chosen at `level` (1-based).
    pub fn digit(&self, level: u8) -> u8 {
        debug_assert!(level >= 1 && level <= self.level());
        ((self.0 >> (2 * (MAX_LEVEL - level) as u32 + 1)) & 3) as u8
    }

    pub fn path(&self) -> Vec<u8> {
        (1..=self.level()).map(|l| self.digit(l)).collect()
    }

    pub fn parent(&self) -> Result<CellId, CellError> {
        if self.level() == 0 {
            return Err(CellError::LevelUnderflow);
        }
        Ok(self.parent_at_unchecked(self.level() - 1))
    }

    /// Ancestor at `level`, which must not exceed this cell's level.
    pub fn parent_at(&self, level: u8) -> Result<CellId, CellError> {
        if level > self.level() {
            return Err(CellError::InvalidLevel(level));
        }
        Ok(self.parent_at_unchecked(level))
    }

    fn parent_at_unchecked(&self, level: u8) -> CellId {
        let new_lsb = 1u64 << (2 * (MAX_LEVEL - level) as u32);
        CellId((self.0 & new_lsb.wrapping_neg()) | new_lsb)
    }

    fn child_unchecked(&self, digit: u8) -> CellId {
        let new_lsb = self.lsb() >> 2;
        let base = self.0 - self.lsb();
        CellId(base + (2 * digit as u64 + 1) * new_lsb)
    }

    pub fn children(&self) -> Result<[CellId; 4], CellError> {
        if self.level() == MAX_LEVEL {
            return Err(CellError::LevelOverflow);
        }
        Ok([0, 1, 2, 3].map(|d| self.child_unchecked(d)))
    }

    pub fn is_ancestor_of(&self, other: &CellId) -> bool {
        other.level() >= self.level() && other.parent_at_unchecked(self.level()) == *self
    }

    /// Cell at `level` containing `p`. Cells own their minimum edges in face
    /// coordinates, so every point has exactly one owner per level.
    pub fn from_point(p: GeoPoint, level: u8) -> Result<CellId, CellError> {
        if level > MAX_LEVEL {
            return Err(CellError::InvalidLevel(level));
        }
        let (face, u, v) = xyz_to_face_uv(p.to_xyz());
        let i = st_to_ij(uv_to_st(u));
        let j = st_to_ij(uv_to_st(v));
        Ok(Self::from_face_ij(face, i, j).parent_at_unchecked(level))
    }

    /// Leaf cell at integer face coordinates `i, j` in `[0, 2^30)`.
    pub fn from_face_ij(face: u8, i: i64, j: i64) -> CellId {
        debug_assert!((0..MAX_SIZE).contains(&i) && (0..MAX_SIZE).contains(&j));
        let mut orientation = face & SWAP_MASK;
        let mut id = Self::from_face(face);
        for level in 1..=MAX_LEVEL {
            let bit = (MAX_LEVEL - level) as u32;
            let ij = ((((i >> bit) & 1) << 1) | ((j >> bit) & 1)) as usize;
            let pos = IJ_TO_POS[orientation as usize][ij];
            orientation ^= POS_TO_ORIENTATION[pos as usize];
            id = id.child_unchecked(pos);
        }
        id
    }

    /// Cell at `level` whose column and row in the face's `2^level` grid are
    /// `i` and `j`.
    pub fn from_face_ij_at_level(face: u8, i: i64, j: i64, level: u8) -> Result<CellId, CellError> {
        if level > MAX_LEVEL {
            return Err(CellError::InvalidLevel(level));
        }
        let n = 1i64 << level;
        if face >= 6 || !(0..n).contains(&i) || !(0..n).contains(&j) {
            return Err(CellError::Parse(format!("face {face} ij ({i}, {j}) at level {level}")));
        }
        let shift = (MAX_LEVEL - level) as u32;
        Ok(Self::from_face_ij(face, i << shift, j << shift).parent_at_unchecked(level))
    }

    /// Face and the minimum-corner leaf coordinates of this cell, plus its
    /// side length in leaf units.
    pub fn face_ij(&self) -> (u8, i64, i64, i64) {
        let face = self.face();
        let mut orientation = face & SWAP_MASK;
        let (mut i, mut j) = (0i64, 0i64);
        let level = self.level();
        for l in 1..=level {
            let pos = self.digit(l);
            let ij = POS_TO_IJ[orientation as usize][pos as usize] as i64;
            orientation ^= POS_TO_ORIENTATION[pos as usize];
            let bit = (MAX_LEVEL - l) as u32;
            i |= (ij >> 1) << bit;
            j |= (ij & 1) << bit;
        }
        (face, i, j, 1i64 << (MAX_LEVEL - level))
    }

    /// Column and row of this cell within its face grid at its own level.
    pub fn face_ij_at_level(&self) -> (u8, i64, i64) {
        let (face, i, j, size) = self.face_ij();
        (face, i / size, j / size)
    }

    /// Projection of the cell's face-coordinate midpoint onto the sphere.
    pub fn center(&self) -> GeoPoint {
        let (face, i, j, size) = self.face_ij();
        let s = (i as f64 + size as f64 / 2.0) / MAX_SIZE as f64;
        let t = (j as f64 + size as f64 / 2.0) / MAX_SIZE as f64;
        GeoPoint::from_xyz(face_uv_to_xyz(face, st_to_uv(s), st_to_uv(t)))
    }

    /// Corners in counter-clockwise face order starting at the minimum corner.
    pub fn vertices(&self) -> [GeoPoint; 4] {
        let (face, i, j, size) = self.face_ij();
        let st = |a: i64| a as f64 / MAX_SIZE as f64;
        let corner = |a: i64, b: i64| {
            GeoPoint::from_xyz(face_uv_to_xyz(face, st_to_uv(st(a)), st_to_uv(st(b))))
        };
        [
            corner(i, j),
            corner(i + size, j),
            corner(i + size, j + size),
            corner(i, j + size),
        ]
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        CellId::from_point(p, self.level()) == Ok(*self)
    }

    /// The four cells sharing an edge with this one, in the order
    /// down, right, up, left (in face coordinates). Neighbors across a cube
    /// edge are found by reprojecting onto the adjacent face.
    pub fn edge_neighbors(&self) -> Result<[CellId; 4], CellError> {
        let level = self.level();
        if level == 0 {
            return Err(CellError::LevelUnderflow);
        }
        let (face, i0, j0, size) = self.face_ij();
        let (ic, jc) = (i0 + size / 2, j0 + size / 2);
        let probe = |i: i64, j: i64| from_face_ij_wrap(face, i, j).parent_at_unchecked(level);
        Ok([
            probe(ic, jc - size),
            probe(ic + size, jc),
            probe(ic, jc + size),
            probe(ic - size, jc),
        ])
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/", self.face())?;
        for d in self.path() {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellId({self})")
    }
}

impl FromStr for CellId {
    type Err = CellError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (face, path) = s.split_once('/').ok_or_else(|| CellError::Parse(s.to_string()))?;
        let face: u8 = face.parse().map_err(|_| CellError::Parse(s.to_string()))?;
        let digits = path
            .chars()
            .map(|c| match c {
                '0'..='3' => Ok(c as u8 - b'0'),
                _ => Err(CellError::Parse(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        CellId::from_path(face, &digits)
    }
}

/// Leaf cell for face coordinates that may lie up to one cell outside the
/// face, reprojected onto whichever face actually contains the point.
fn from_face_ij_wrap(face: u8, i: i64, j: i64) -> CellId {
    if (0..MAX_SIZE).contains(&i) && (0..MAX_SIZE).contains(&j) {
        return CellId::from_face_ij(face, i, j);
    }
    let i = i.clamp(-1, MAX_SIZE);
    let j = j.clamp(-1, MAX_SIZE);
    // Near the face boundary the quadratic and linear st<->uv transforms
    // agree, so the linear one is used to step just past the edge.
    let scale = 1.0 / MAX_SIZE as f64;
    let limit = 1.0 + f64::EPSILON;
    let u = (scale * ((i << 1) + 1 - MAX_SIZE) as f64).clamp(-limit, limit);
    let v = (scale * ((j << 1) + 1 - MAX_SIZE) as f64).clamp(-limit, limit);
    let (face, u, v) = xyz_to_face_uv(face_uv_to_xyz(face, u, v));
    CellId::from_face_ij(face, st_to_ij(0.5 * (u + 1.0)), st_to_ij(0.5 * (v + 1.0)))
}

fn uv_to_st(u: f64) -> f64 {
    if u >= 0.0 {
        0.5 * (1.0 + 3.0 * u).sqrt()
    } else {
        1.0 - 0.5 * (1.0 - 3.0 * u).sqrt()
    }
}

fn st_to_uv(s: f64) -> f64 {
    if s >= 0.5 {
        (4.0 * s * s - 1.0) / 3.0
    } else {
        (1.0 - 4.0 * (1.0 - s) * (1.0 - s)) / 3.0
    }
}

fn st_to_ij(s: f64) -> i64 {
    ((s * MAX_SIZE as f64).floor() as i64).clamp(0, MAX_SIZE - 1)
}

fn face_uv_to_xyz(face: u8, u: f64, v: f64) -> [f64; 3] {
    match face {
        0 => [1.0, u, v],
        1 => [-u, 1.0, v],
        2 => [-u, -v, 1.0],
        3 => [-1.0, -v, -u],
        4 => [v, -1.0, -u],
        _ => [v, u, -1.0],
    }
}

fn xyz_to_face_uv(p: [f64; 3]) -> (u8, f64, f64) {
    let abs = p.map(f64::abs);
    let axis = if abs[0] >= abs[1] && abs[0] >= abs[2] {
        0
    } else if abs[1] >= abs[2] {
        1
    } else {
        2
    };
    let face = if p[axis] < 0.0 { axis as u8 + 3 } else { axis as u8 };
    let [x, y, z] = p;
    let (u, v) = match face {
        0 => (y / x, z / x),
        1 => (-x / y, z / y),
        2 => (-x / z, -y / z),
        3 => (z / x, y / x),
        4 => (z / y, -x / y),
        _ => (-y / z, -x / z),
    };
    (face, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn random_point(rng: &mut ChaCha8Rng) -> GeoPoint {
        // uniform on the sphere
        let z: f64 = rng.gen_range(-1.0..1.0);
        let lng: f64 = rng.gen_range(-180.0..180.0);
        GeoPoint::new(z.asin().to_degrees(), lng).unwrap()
    }

    #[test]
    fn uv_projection_round_trips() {
        for face in 0..6u8 {
            for &(u, v) in &[(0.0, 0.0), (0.3, -0.7), (-0.99, 0.99), (0.5, 0.25)] {
                let xyz = face_uv_to_xyz(face, u, v);
                let (f, u2, v2) = xyz_to_face_uv(xyz);
                assert_eq!(f, face);
                assert!((u - u2).abs() < 1e-12 && (v - v2).abs() < 1e-12);
            }
        }
        for s in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!((uv_to_st(st_to_uv(s)) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn level_zero_has_six_faces() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let faces: HashSet<_> = (0..5000)
            .map(|_| CellId::from_point(random_point(&mut rng), 0).unwrap())
            .collect();
        assert_eq!(faces.len(), 6);
        assert!(faces.iter().all(|c| c.level() == 0));
    }

    #[test]
    fn level_one_has_twenty_four_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cells: HashSet<_> = (0..20_000)
            .map(|_| CellId::from_point(random_point(&mut rng), 1).unwrap())
            .collect();
        assert_eq!(cells.len(), 24);
    }

    #[test]
    fn invalid_levels() {
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        assert_eq!(CellId::from_point(p, 31), Err(CellError::InvalidLevel(31)));
        let face = CellId::from_face(2);
        assert_eq!(face.parent(), Err(CellError::LevelUnderflow));
        assert_eq!(face.edge_neighbors(), Err(CellError::LevelUnderflow));
        let leaf = CellId::from_point(p, 30).unwrap();
        assert_eq!(leaf.children(), Err(CellError::LevelOverflow));
    }

    #[test]
    fn path_text_form() {
        let c = CellId::from_path(4, &[0, 3, 2, 1]).unwrap();
        assert_eq!(c.to_string(), "4/0321");
        assert_eq!("4/0321".parse::<CellId>().unwrap(), c);
        assert_eq!(c.level(), 4);
        assert_eq!(c.path(), vec![0, 3, 2, 1]);
        assert_eq!(CellId::from_face(5).to_string(), "5/");
        assert!("7/01".parse::<CellId>().is_err());
        assert!("3/014".parse::<CellId>().is_err());
    }

    #[test]
    fn parent_child_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let level = rng.gen_range(1..30u8);
            let c = CellId::from_point(random_point(&mut rng), level).unwrap();
            for child in c.children().unwrap() {
                assert_eq!(child.parent().unwrap(), c);
                assert_eq!(child.level(), c.level() + 1);
            }
            assert_eq!(c.parent().unwrap().level(), level - 1);
        }
    }

    #[test]
    fn face_ij_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let level = rng.gen_range(0..=30u8);
            let c = CellId::from_point(random_point(&mut rng), level).unwrap();
            let (face, i, j) = c.face_ij_at_level();
            assert_eq!(CellId::from_face_ij_at_level(face, i, j, level).unwrap(), c);
        }
    }

    #[test]
    fn center_inside_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let level = rng.gen_range(0..=30u8);
            let c = CellId::from_point(random_point(&mut rng), level).unwrap();
            assert!(c.contains(c.center()), "{c}");
        }
    }

    #[test]
    fn neighbors_of_interior_cell_match_point_probe() {
        let p = GeoPoint::new(40.758, -73.985).unwrap();
        for level in [10u8, 15, 16, 17] {
            let c = CellId::from_point(p, level).unwrap();
            let neighbors = c.edge_neighbors().unwrap();
            // probe just past each edge midpoint
            let v = c.vertices();
            let center = c.center();
            let mids = [(v[0], v[1]), (v[1], v[2]), (v[2], v[3]), (v[3], v[0])];
            for (k, (a, b)) in mids.iter().enumerate() {
                let mid = GeoPoint::new((a.lat + b.lat) / 2.0, (a.lng + b.lng) / 2.0).unwrap();
                let past = GeoPoint::new(
                    mid.lat + (mid.lat - center.lat) * 0.05,
                    mid.lng + (mid.lng - center.lng) * 0.05,
                )
                .unwrap();
                assert_eq!(CellId::from_point(past, level).unwrap(), neighbors[k], "level {level} edge {k}");
            }
        }
    }

    #[test]
    fn neighbors_symmetric_across_faces() {
        // cells touching cube edges and corners
        for face in 0..6u8 {
            for level in [1u8, 2, 5, 16] {
                let n = 1i64 << level;
                for (i, j) in [(0, 0), (n - 1, 0), (0, n - 1), (n - 1, n - 1), (n / 2, 0), (0, n / 2)] {
                    let c = CellId::from_face_ij_at_level(face, i, j, level).unwrap();
                    let ns = c.edge_neighbors().unwrap();
                    let distinct: HashSet<_> = ns.iter().collect();
                    assert_eq!(distinct.len(), 4, "{c}");
                    for nb in ns {
                        assert_eq!(nb.level(), level);
                        assert!(nb.edge_neighbors().unwrap().contains(&c), "{c} <-> {nb}");
                    }
                }
            }
        }
    }

    #[test]
    fn level16_cell_size() {
        let p = GeoPoint::new(40.758, -73.985).unwrap();
        let c = CellId::from_point(p, 16).unwrap();
        let center = c.center();
        for v in c.vertices() {
            let d = haversine_distance(center, v);
            assert!(d < 300.0, "{d}");
        }
    }

    #[test]
    fn level30_cells_are_centimeter_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let c = CellId::from_point(random_point(&mut rng), 30).unwrap();
            let v = c.vertices();
            let diag = haversine_distance(v[0], v[2]).max(haversine_distance(v[1], v[3]));
            assert!(diag < 0.02, "{diag}");
        }
    }
}
