//! OpenStreetMap extract ingestion (XML or PBF) into streets and landmarks.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{BoundingBox, GeoPoint, LocalFrame};

#[derive(Debug, Error)]
pub enum OsmError {
    #[error("cannot read extract {path}: {reason}")]
    UnreadableExtract { path: String, reason: String },
    #[error("no streets inside the region")]
    EmptyRegion,
    #[error("degenerate region {0:?}")]
    DegenerateRegion(BoundingBox),
}

/// Element kind of an OSM id; ordering puts nodes before ways.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OsmKind {
    Node,
    Way,
    Relation,
}

/// Stable landmark identifier: OSM element kind plus numeric id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OsmId {
    pub kind: OsmKind,
    pub id: i64,
}

impl OsmId {
    pub fn node(id: i64) -> Self {
        Self { kind: OsmKind::Node, id }
    }

    pub fn way(id: i64) -> Self {
        Self { kind: OsmKind::Way, id }
    }
}

impl fmt::Display for OsmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.kind {
            OsmKind::Node => 'n',
            OsmKind::Way => 'w',
            OsmKind::Relation => 'r',
        };
        write!(f, "{c}{}", self.id)
    }
}

impl FromStr for OsmId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s.chars().next() {
            Some('n') => OsmKind::Node,
            Some('w') => OsmKind::Way,
            Some('r') => OsmKind::Relation,
            _ => return Err(format!("bad osm id {s:?}")),
        };
        let id = s[1..].parse().map_err(|_| format!("bad osm id {s:?}"))?;
        Ok(Self { kind, id })
    }
}

impl Serialize for OsmId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OsmId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "coords")]
pub enum Geometry {
    Point(GeoPoint),
    Line(Vec<GeoPoint>),
    Polygon(Vec<GeoPoint>),
}

impl Geometry {
    pub fn bounds(&self) -> BoundingBox {
        match self {
            Geometry::Point(p) => BoundingBox::enclosing([*p]).expect("one point"),
            Geometry::Line(pts) | Geometry::Polygon(pts) => {
                BoundingBox::enclosing(pts.iter().copied()).expect("non-empty geometry")
            }
        }
    }

    /// Area centroid for polygons, vertex mean for lines.
    pub fn centroid(&self) -> GeoPoint {
        match self {
            Geometry::Point(p) => *p,
            Geometry::Line(pts) => vertex_mean(pts),
            Geometry::Polygon(pts) => polygon_centroid(pts),
        }
    }
}

fn vertex_mean(pts: &[GeoPoint]) -> GeoPoint {
    let n = pts.len() as f64;
    GeoPoint {
        lat: pts.iter().map(|p| p.lat).sum::<f64>() / n,
        lng: pts.iter().map(|p| p.lng).sum::<f64>() / n,
    }
}

fn polygon_centroid(pts: &[GeoPoint]) -> GeoPoint {
    let frame = LocalFrame::new(pts[0]);
    let xy: Vec<[f64; 2]> = pts.iter().map(|p| frame.to_xy(*p)).collect();
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..xy.len() {
        let p = xy[k];
        let q = xy[(k + 1) % xy.len()];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    if a2.abs() < 1e-6 {
        return vertex_mean(pts);
    }
    frame.to_geo([cx / (3.0 * a2), cy / (3.0 * a2)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: OsmId,
    pub name: Option<String>,
    pub tags: BTreeMap<String, String>,
    pub geometry: Geometry,
    pub centroid: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Street {
    pub way_id: i64,
    pub name: Option<String>,
    pub highway: String,
    pub node_ids: Vec<i64>,
    pub points: Vec<GeoPoint>,
}

/// Which OSM elements become streets and landmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    /// `highway=*` values treated as streets.
    pub highway_classes: Vec<String>,
    /// Keys that make an element a landmark on their own.
    pub landmark_keys: Vec<String>,
    /// Named buildings count as landmarks.
    pub named_buildings: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            highway_classes: s(&[
                "primary",
                "secondary",
                "tertiary",
                "residential",
                "unclassified",
                "pedestrian",
                "living_street",
            ]),
            landmark_keys: s(&[
                "amenity",
                "shop",
                "tourism",
                "brand",
                "wikipedia",
                "wikidata",
                "leisure",
                "historic",
            ]),
            named_buildings: true,
        }
    }
}

impl IngestConfig {
    pub fn is_landmark(&self, tags: &BTreeMap<String, String>) -> bool {
        self.landmark_keys.iter().any(|k| tags.contains_key(k))
            || (self.named_buildings && tags.contains_key("building") && tags.contains_key("name"))
    }

    pub fn is_street(&self, tags: &BTreeMap<String, String>) -> bool {
        tags.get("highway")
            .is_some_and(|h| self.highway_classes.iter().any(|c| c == h))
    }
}

#[derive(Debug, Clone, Default)]
pub struct OsmExtract {
    pub landmarks: Vec<Landmark>,
    pub streets: Vec<Street>,
}

/// Raw elements as read from either file format.
#[derive(Default)]
struct RawElements {
    nodes: HashMap<i64, GeoPoint>,
    tagged_nodes: Vec<(i64, BTreeMap<String, String>)>,
    ways: Vec<(i64, Vec<i64>, BTreeMap<String, String>)>,
}

/// Reads an extract and keeps the streets and landmarks inside `region`.
///
/// A street is kept when any of its vertices falls inside the region; a
/// landmark when its centroid does. Relations are not interpreted.
pub fn ingest_osm(
    path: &Path,
    region: &BoundingBox,
    config: &IngestConfig,
) -> Result<OsmExtract, OsmError> {
    if region.is_degenerate() {
        return Err(OsmError::DegenerateRegion(*region));
    }
    let unreadable = |reason: String| OsmError::UnreadableExtract {
        path: path.display().to_string(),
        reason,
    };
    let mut file = File::open(path).map_err(|e| unreadable(e.to_string()))?;
    let mut magic = [0u8; 64];
    let n = file.read(&mut magic).map_err(|e| unreadable(e.to_string()))?;
    let looks_xml = magic[..n].iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'<');
    let raw = if looks_xml {
        let file = File::open(path).map_err(|e| unreadable(e.to_string()))?;
        read_xml(BufReader::new(file)).map_err(unreadable)?
    } else {
        read_pbf(path).map_err(unreadable)?
    };
    let extract = assemble(raw, region, config);
    if extract.streets.is_empty() {
        return Err(OsmError::EmptyRegion);
    }
    log::info!(
        "ingested {} streets and {} landmarks from {}",
        extract.streets.len(),
        extract.landmarks.len(),
        path.display()
    );
    Ok(extract)
}

/// Same as [`ingest_osm`] over an in-memory XML document.
pub fn ingest_osm_xml<R: BufRead>(
    reader: R,
    region: &BoundingBox,
    config: &IngestConfig,
) -> Result<OsmExtract, OsmError> {
    let raw = read_xml(reader).map_err(|reason| OsmError::UnreadableExtract {
        path: "<memory>".into(),
        reason,
    })?;
    let extract = assemble(raw, region, config);
    if extract.streets.is_empty() {
        return Err(OsmError::EmptyRegion);
    }
    Ok(extract)
}

fn assemble(raw: RawElements, region: &BoundingBox, config: &IngestConfig) -> OsmExtract {
    let mut out = OsmExtract::default();
    for (id, tags) in raw.tagged_nodes {
        if !config.is_landmark(&tags) {
            continue;
        }
        let p = raw.nodes[&id];
        if !region.contains(p) {
            continue;
        }
        out.landmarks.push(Landmark {
            id: OsmId::node(id),
            name: tags.get("name").cloned(),
            geometry: Geometry::Point(p),
            centroid: p,
            tags,
        });
    }
    for (id, refs, tags) in raw.ways {
        let street = config.is_street(&tags);
        let landmark = config.is_landmark(&tags);
        if !street && !landmark {
            continue;
        }
        let mut node_ids = Vec::with_capacity(refs.len());
        let mut points = Vec::with_capacity(refs.len());
        for r in &refs {
            match raw.nodes.get(r) {
                Some(p) => {
                    node_ids.push(*r);
                    points.push(*p);
                }
                None => log::debug!("way {id} references missing node {r}"),
            }
        }
        if points.is_empty() {
            continue;
        }
        if street && points.len() >= 2 && points.iter().any(|p| region.contains(*p)) {
            out.streets.push(Street {
                way_id: id,
                name: tags.get("name").cloned(),
                highway: tags["highway"].clone(),
                node_ids: node_ids.clone(),
                points: points.clone(),
            });
        }
        if landmark {
            let closed = refs.len() >= 4 && refs.first() == refs.last();
            let geometry = if points.len() == 1 {
                Geometry::Point(points[0])
            } else if closed {
                points.pop();
                Geometry::Polygon(points)
            } else {
                Geometry::Line(points)
            };
            let centroid = geometry.centroid();
            if region.contains(centroid) {
                out.landmarks.push(Landmark {
                    id: OsmId::way(id),
                    name: tags.get("name").cloned(),
                    tags,
                    geometry,
                    centroid,
                });
            }
        }
    }
    out.landmarks.sort_by_key(|l| l.id);
    out.streets.sort_by_key(|s| s.way_id);
    out
}

fn attr_map(e: &BytesStart<'_>) -> Result<HashMap<String, String>, String> {
    let mut m = HashMap::new();
    for a in e.attributes() {
        let a = a.map_err(|e| e.to_string())?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a.unescape_value().map_err(|e| e.to_string())?.into_owned();
        m.insert(key, value);
    }
    Ok(m)
}

fn parse_attr<T: FromStr>(attrs: &HashMap<String, String>, key: &str) -> Result<T, String> {
    attrs
        .get(key)
        .ok_or_else(|| format!("missing attribute {key}"))?
        .parse()
        .map_err(|_| format!("bad attribute {key}"))
}

fn read_xml<R: BufRead>(reader: R) -> Result<RawElements, String> {
    enum Current {
        None,
        Node(i64, BTreeMap<String, String>),
        Way(i64, Vec<i64>, BTreeMap<String, String>),
        Skip,
    }
    let mut xml = quick_xml::Reader::from_reader(reader);
    let mut raw = RawElements::default();
    let mut buf = Vec::new();
    let mut current = Current::None;
    let mut saw_root = false;
    loop {
        let event = xml
            .read_event_into(&mut buf)
            .map_err(|e| format!("xml error at byte {}: {e}", xml.buffer_position()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                match e.name().as_ref() {
                    b"osm" => saw_root = true,
                    b"node" => {
                        let a = attr_map(e)?;
                        let id: i64 = parse_attr(&a, "id")?;
                        let lat: f64 = parse_attr(&a, "lat")?;
                        let lon: f64 = parse_attr(&a, "lon")?;
                        let p = GeoPoint::new(lat, lon).map_err(|e| format!("node {id}: {e}"))?;
                        raw.nodes.insert(id, p);
                        if !empty {
                            current = Current::Node(id, BTreeMap::new());
                        }
                    }
                    b"way" => {
                        let a = attr_map(e)?;
                        let id: i64 = parse_attr(&a, "id")?;
                        let way = Current::Way(id, Vec::new(), BTreeMap::new());
                        if empty {
                            if let Current::Way(id, refs, tags) = way {
                                raw.ways.push((id, refs, tags));
                            }
                        } else {
                            current = way;
                        }
                    }
                    b"relation" => {
                        if !empty {
                            current = Current::Skip;
                        }
                    }
                    b"nd" => {
                        if let Current::Way(_, refs, _) = &mut current {
                            refs.push(parse_attr(&attr_map(e)?, "ref")?);
                        }
                    }
                    b"tag" => {
                        let a = attr_map(e)?;
                        let (Some(k), Some(v)) = (a.get("k"), a.get("v")) else {
                            continue;
                        };
                        match &mut current {
                            Current::Node(_, tags) | Current::Way(_, _, tags) => {
                                tags.insert(k.clone(), v.clone());
                            }
                            _ => {}
                        }
                    }
                    _ => {}
                }
            }
            Event::End(ref e) => match (e.name().as_ref(), std::mem::replace(&mut current, Current::None)) {
                (b"node", Current::Node(id, tags)) => {
                    if !tags.is_empty() {
                        raw.tagged_nodes.push((id, tags));
                    }
                }
                (b"way", Current::Way(id, refs, tags)) => raw.ways.push((id, refs, tags)),
                (b"relation", _) => {}
                (_, other) => current = other,
            },
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !saw_root {
        return Err("not an OSM XML document".into());
    }
    Ok(raw)
}

fn read_pbf(path: &Path) -> Result<RawElements, String> {
    use osmpbf::{Element, ElementReader};
    let reader = ElementReader::from_path(path).map_err(|e| e.to_string())?;
    let mut raw = RawElements::default();
    let collect_tags = |it: &mut dyn Iterator<Item = (&str, &str)>| -> BTreeMap<String, String> {
        it.map(|(k, v)| (k.to_string(), v.to_string())).collect()
    };
    reader
        .for_each(|element| match element {
            Element::Node(n) => {
                if let Ok(p) = GeoPoint::new(n.lat(), n.lon()) {
                    raw.nodes.insert(n.id(), p);
                    let tags = collect_tags(&mut n.tags());
                    if !tags.is_empty() {
                        raw.tagged_nodes.push((n.id(), tags));
                    }
                }
            }
            Element::DenseNode(n) => {
                if let Ok(p) = GeoPoint::new(n.lat(), n.lon()) {
                    raw.nodes.insert(n.id(), p);
                    let tags = collect_tags(&mut n.tags());
                    if !tags.is_empty() {
                        raw.tagged_nodes.push((n.id(), tags));
                    }
                }
            }
            Element::Way(w) => {
                let tags = collect_tags(&mut w.tags());
                raw.ways.push((w.id(), w.refs().collect(), tags));
            }
            Element::Relation(_) => {}
        })
        .map_err(|e| e.to_string())?;
    Ok(raw)
}
