use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::polygon::{BBox, Coord, Polygon};
use super::GeoError;
use crate::data::LatLon;

/// Land-use class of a polygon or point. Declaration order is classification priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandClass {
    Greenspace,
    Bluespace,
    Other,
}

impl LandClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LandClass::Greenspace => "greenspace",
            LandClass::Bluespace => "bluespace",
            LandClass::Other => "other",
        }
    }
}

impl fmt::Display for LandClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LandClass {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greenspace" => Ok(LandClass::Greenspace),
            "bluespace" => Ok(LandClass::Bluespace),
            "other" => Ok(LandClass::Other),
            _ => Err(GeoError::Format(format!("unknown land class {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPolygon {
    pub class: LandClass,
    pub polygon: Polygon,
}

/// Classed polygons plus a uniform-grid bucket index over their bounding boxes.
#[derive(Debug, Clone)]
pub struct PolygonLayer {
    polygons: Vec<LayerPolygon>,
    index: BucketIndex,
}

#[derive(Debug, Clone)]
struct BucketIndex {
    bounds: Option<BBox>,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl BucketIndex {
    fn build(polygons: &[LayerPolygon]) -> Self {
        let bounds = polygons.iter().map(|p| p.polygon.bbox()).reduce(|a, b| a.union(&b));
        let side = ((polygons.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
        let mut index = BucketIndex { bounds, nx: side, ny: side, cells: vec![Vec::new(); side * side] };
        for (k, p) in polygons.iter().enumerate() {
            let b = p.polygon.bbox();
            let (i0, j0) = index.cell(b.min_lon, b.min_lat);
            let (i1, j1) = index.cell(b.max_lon, b.max_lat);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    index.cells[j * index.nx + i].push(k);
                }
            }
        }
        index
    }

    fn cell(&self, lon: f64, lat: f64) -> (usize, usize) {
        let b = self.bounds.expect("cell lookup on empty index");
        let frac = |v: f64, lo: f64, hi: f64, n: usize| {
            if hi > lo {
                (((v - lo) / (hi - lo) * n as f64).floor().max(0.0) as usize).min(n - 1)
            } else {
                0
            }
        };
        (frac(lon, b.min_lon, b.max_lon, self.nx), frac(lat, b.min_lat, b.max_lat, self.ny))
    }

    fn candidates(&self, p: LatLon) -> &[usize] {
        match self.bounds {
            Some(b) if b.min_lat <= p.lat && p.lat <= b.max_lat && b.min_lon <= p.lon && p.lon <= b.max_lon => {
                let (i, j) = self.cell(p.lon, p.lat);
                &self.cells[j * self.nx + i]
            }
            _ => &[],
        }
    }
}

/// Per-point classes and how many point-in-polygon tests were needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub classes: Vec<LandClass>,
    pub polygon_tests: usize,
}

impl PolygonLayer {
    pub fn new(polygons: Vec<LayerPolygon>) -> Self {
        let index = BucketIndex::build(&polygons);
        Self { polygons, index }
    }

    pub fn polygons(&self) -> &[LayerPolygon] {
        &self.polygons
    }

    /// Union of all polygon bounds, `None` for an empty layer.
    pub fn bounds(&self) -> Option<BBox> {
        self.index.bounds
    }

    /// Class of one point, greenspace taking priority over bluespace.
    pub fn classify(&self, p: LatLon) -> LandClass {
        self.classify_counting(p).0
    }

    fn classify_counting(&self, p: LatLon) -> (LandClass, usize) {
        let candidates = self.index.candidates(p);
        let mut tests = 0;
        for class in [LandClass::Greenspace, LandClass::Bluespace] {
            for &k in candidates {
                let lp = &self.polygons[k];
                if lp.class != class {
                    continue;
                }
                tests += 1;
                if lp.polygon.contains(p) {
                    return (class, tests);
                }
            }
        }
        (LandClass::Other, tests)
    }

    /// Reads a GeoJSON FeatureCollection. Each feature's `class` property names
    /// its land class; features without one are tagged `other`. MultiPolygons
    /// are flattened into their member polygons.
    pub fn from_geojson(text: &str) -> Result<Self, GeoError> {
        let root: Value = serde_json::from_str(text).map_err(|e| GeoError::Format(e.to_string()))?;
        let mut polygons = Vec::new();
        for (class, geometry) in features(&root)? {
            for polygon in geometry_polygons(geometry)? {
                polygons.push(LayerPolygon { class, polygon });
            }
        }
        Ok(Self::new(polygons))
    }

    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .polygons
            .iter()
            .map(|lp| {
                let ring = |r: &[Coord]| Value::Array(r.iter().map(|c| serde_json::json!([c.x, c.y])).collect());
                let mut rings = vec![ring(lp.polygon.exterior())];
                rings.extend(lp.polygon.holes().iter().map(|h| ring(h)));
                serde_json::json!({
                    "type": "Feature",
                    "properties": {"class": lp.class.as_str()},
                    "geometry": {"type": "Polygon", "coordinates": rings},
                })
            })
            .collect();
        serde_json::json!({"type": "FeatureCollection", "features": features})
    }
}

/// Classifies every point against the layer.
pub fn classify_points(points: &[LatLon], layer: &PolygonLayer) -> Classification {
    let mut classes = Vec::with_capacity(points.len());
    let mut polygon_tests = 0;
    for &p in points {
        let (class, tests) = layer.classify_counting(p);
        classes.push(class);
        polygon_tests += tests;
    }
    Classification { classes, polygon_tests }
}

pub fn load_layer(path: &Path) -> Result<PolygonLayer, GeoError> {
    let text = fs::read_to_string(path).map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))?;
    PolygonLayer::from_geojson(&text)
}

/// Reads the first polygon of a GeoJSON document (geometry, Feature or
/// FeatureCollection), used as a challenge boundary.
pub fn load_region(path: &Path) -> Result<Polygon, GeoError> {
    let text = fs::read_to_string(path).map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| GeoError::Format(e.to_string()))?;
    let geometry = match root.get("type").and_then(Value::as_str) {
        Some("Polygon") | Some("MultiPolygon") => &root,
        _ => {
            features(&root)?.into_iter().next().map(|(_, g)| g).ok_or_else(|| GeoError::Format("no features".into()))?
        }
    };
    geometry_polygons(geometry)?.into_iter().next().ok_or_else(|| GeoError::Format("no polygon found".into()))
}

fn features(root: &Value) -> Result<Vec<(LandClass, &Value)>, GeoError> {
    match root.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => root
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| GeoError::Format("FeatureCollection without features".into()))?
            .iter()
            .map(feature_parts)
            .collect(),
        Some("Feature") => Ok(vec![feature_parts(root)?]),
        other => Err(GeoError::Format(format!("unsupported GeoJSON root type {other:?}"))),
    }
}

fn feature_parts(feature: &Value) -> Result<(LandClass, &Value), GeoError> {
    let class = match feature.pointer("/properties/class").and_then(Value::as_str) {
        Some(s) => s.parse().unwrap_or(LandClass::Other),
        None => LandClass::Other,
    };
    let geometry = feature.get("geometry").ok_or_else(|| GeoError::Format("feature without geometry".into()))?;
    Ok((class, geometry))
}

fn geometry_polygons(geometry: &Value) -> Result<Vec<Polygon>, GeoError> {
    let coords = geometry.get("coordinates").ok_or_else(|| GeoError::Format("geometry without coordinates".into()))?;
    match geometry.get("type").and_then(Value::as_str) {
        Some("Polygon") => Ok(vec![parse_polygon(coords)?]),
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or_else(|| GeoError::Format("MultiPolygon coordinates must be an array".into()))?
            .iter()
            .map(parse_polygon)
            .collect(),
        other => Err(GeoError::Format(format!("unsupported geometry type {other:?}"))),
    }
}

fn parse_polygon(rings: &Value) -> Result<Polygon, GeoError> {
    let rings = rings.as_array().ok_or_else(|| GeoError::Format("polygon must be an array of rings".into()))?;
    let mut parsed = rings.iter().map(parse_ring).collect::<Result<Vec<_>, _>>()?;
    if parsed.is_empty() {
        return Err(GeoError::Format("polygon without rings".into()));
    }
    let exterior = parsed.remove(0);
    Polygon::new(exterior, parsed)
}

fn parse_ring(ring: &Value) -> Result<Vec<Coord>, GeoError> {
    ring.as_array()
        .ok_or_else(|| GeoError::Format("ring must be an array".into()))?
        .iter()
        .map(|pos| {
            let pair = pos.as_array().filter(|a| a.len() >= 2);
            match pair.map(|a| (a[0].as_f64(), a[1].as_f64())) {
                Some((Some(x), Some(y))) => Ok(Coord::new(x, y)),
                _ => Err(GeoError::Format(format!("bad position {pos}"))),
            }
        })
        .collect()
}
