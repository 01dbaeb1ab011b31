//! Geodesic primitives on a spherical Earth.
//!
//! Every distance in the toolkit is a haversine distance on a sphere of the
//! IUGG mean radius. Distances in scope stay under ~10 km, where the
//! spherical error against an ellipsoid is far below a meter.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// IUGG mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Tolerance used when comparing coordinates, in degrees.
pub const COORD_EPSILON_DEG: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180)")]
    LongitudeOutOfRange(f64),
    #[error("bearing is undefined between coincident points")]
    CoincidentPoints,
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
}

/// A WGS84 latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lng: f64,
}

impl GeoPoint {
    /// Validated constructor. A longitude of exactly 180 is folded to -180.
    pub fn new(lat: f64, lng: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        if !lng.is_finite() || !(-180.0..=180.0).contains(&lng) {
            return Err(GeoError::LongitudeOutOfRange(lng));
        }
        let lng = if lng == 180.0 { -180.0 } else { lng };
        Ok(Self { lat, lng })
    }

    /// Equality within [`COORD_EPSILON_DEG`].
    pub fn approx_eq(&self, other: &GeoPoint) -> bool {
        (self.lat - other.lat).abs() <= COORD_EPSILON_DEG
            && (self.lng - other.lng).abs() <= COORD_EPSILON_DEG
    }

    /// Unit vector on the sphere.
    pub fn to_xyz(&self) -> [f64; 3] {
        let (lat, lng) = (self.lat.to_radians(), self.lng.to_radians());
        [lat.cos() * lng.cos(), lat.cos() * lng.sin(), lat.sin()]
    }

    /// Inverse of [`GeoPoint::to_xyz`]; the input need not be normalized.
    pub fn from_xyz(v: [f64; 3]) -> Self {
        let lat = v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt()).to_degrees();
        let mut lng = v[1].atan2(v[0]).to_degrees();
        if lng >= 180.0 {
            lng -= 360.0;
        }
        Self { lat, lng }
    }

    /// Point reached by travelling `distance_m` along the great circle with
    /// initial bearing `bearing_deg`.
    pub fn destination(&self, bearing_deg: f64, distance_m: f64) -> GeoPoint {
        let delta = distance_m / EARTH_RADIUS_M;
        let theta = bearing_deg.to_radians();
        let (phi1, lambda1) = (self.lat.to_radians(), self.lng.to_radians());
        let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
        let lambda2 = lambda1
            + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
        let mut lng = lambda2.to_degrees();
        lng = (lng + 540.0).rem_euclid(360.0) - 180.0;
        GeoPoint {
            lat: phi2.to_degrees(),
            lng,
        }
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.7}, {:.7})", self.lat, self.lng)
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lng - a.lng).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// The eight compass sectors, each 45 degrees wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cardinal {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Cardinal {
    const ALL: [Cardinal; 8] = [
        Cardinal::N,
        Cardinal::NE,
        Cardinal::E,
        Cardinal::SE,
        Cardinal::S,
        Cardinal::SW,
        Cardinal::W,
        Cardinal::NW,
    ];

    /// Sector whose center is nearest to `bearing_deg`.
    pub fn from_bearing(bearing_deg: f64) -> Self {
        let idx = ((bearing_deg.rem_euclid(360.0) + 22.5) / 45.0).floor() as usize % 8;
        Self::ALL[idx]
    }
}

/// Initial great-circle bearing from `a` to `b` in `[0, 360)` and its
/// compass sector.
pub fn cardinal_bearing(a: GeoPoint, b: GeoPoint) -> Result<(f64, Cardinal), GeoError> {
    if a.approx_eq(&b) {
        return Err(GeoError::CoincidentPoints);
    }
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlambda = (b.lng - a.lng).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    let mut bearing = y.atan2(x).to_degrees().rem_euclid(360.0);
    if bearing >= 360.0 {
        bearing = 0.0;
    }
    Ok((bearing, Cardinal::from_bearing(bearing)))
}

/// A latitude/longitude rectangle that does not cross the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl BoundingBox {
    pub fn new(south: f64, west: f64, north: f64, east: f64) -> Result<Self, GeoError> {
        let bbox = Self {
            south,
            west,
            north,
            east,
        };
        bbox.validate()?;
        Ok(bbox)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        GeoPoint::new(self.south, self.west)?;
        GeoPoint::new(self.north, self.east)?;
        if self.south > self.north {
            return Err(GeoError::InvalidBox(format!(
                "south {} above north {}",
                self.south, self.north
            )));
        }
        if self.west > self.east {
            return Err(GeoError::InvalidBox(format!(
                "west {} east of east {} (antimeridian crossing unsupported)",
                self.west, self.east
            )));
        }
        Ok(())
    }

    /// Smallest box enclosing every point; `None` for an empty iterator.
    pub fn enclosing<I: IntoIterator<Item = GeoPoint>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Self {
            south: first.lat,
            west: first.lng,
            north: first.lat,
            east: first.lng,
        };
        for p in it {
            b.south = b.south.min(p.lat);
            b.north = b.north.max(p.lat);
            b.west = b.west.min(p.lng);
            b.east = b.east.max(p.lng);
        }
        Some(b)
    }

    pub fn is_degenerate(&self) -> bool {
        self.north - self.south <= COORD_EPSILON_DEG || self.east - self.west <= COORD_EPSILON_DEG
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.south - COORD_EPSILON_DEG
            && p.lat <= self.north + COORD_EPSILON_DEG
            && p.lng >= self.west - COORD_EPSILON_DEG
            && p.lng <= self.east + COORD_EPSILON_DEG
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.south <= other.north
            && other.south <= self.north
            && self.west <= other.east
            && other.west <= self.east
    }

    /// Midpoint in latitude/longitude.
    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: (self.south + self.north) / 2.0,
            lng: (self.west + self.east) / 2.0,
        }
    }

    /// Spherical area of the rectangle in square kilometers.
    pub fn area_km2(&self) -> f64 {
        let r_km = EARTH_RADIUS_M / 1000.0;
        r_km * r_km
            * (self.east - self.west).to_radians()
            * (self.north.to_radians().sin() - self.south.to_radians().sin())
    }
}

/// Equirectangular tangent frame around an origin, in meters.
///
/// Accurate to well under a meter over a few kilometers, which is the scale
/// at which it is used (point-to-segment projection, bucketing).
#[derive(Debug, Clone, Copy)]
pub struct LocalFrame {
    origin: GeoPoint,
    meters_per_deg_lat: f64,
    meters_per_deg_lng: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        let m = EARTH_RADIUS_M.to_radians();
        Self {
            origin,
            meters_per_deg_lat: m,
            meters_per_deg_lng: m * origin.lat.to_radians().cos(),
        }
    }

    pub fn to_xy(&self, p: GeoPoint) -> [f64; 2] {
        [
            (p.lng - self.origin.lng) * self.meters_per_deg_lng,
            (p.lat - self.origin.lat) * self.meters_per_deg_lat,
        ]
    }

    pub fn to_geo(&self, xy: [f64; 2]) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + xy[1] / self.meters_per_deg_lat,
            lng: self.origin.lng + xy[0] / self.meters_per_deg_lng,
        }
    }
}

/// Closest point on segment `a`-`b` to `p`, as `(point, t)` with `t` in
/// `[0, 1]` the fraction along the segment.
pub fn nearest_on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> (GeoPoint, f64) {
    let frame = LocalFrame::new(p);
    let pa = frame.to_xy(a);
    let pb = frame.to_xy(b);
    let d = [pb[0] - pa[0], pb[1] - pa[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((-pa[0] * d[0] - pa[1] * d[1]) / len2).clamp(0.0, 1.0)
    };
    let q = frame.to_geo([pa[0] + t * d[0], pa[1] + t * d[1]]);
    (q, t)
}
