//! Simple polygons with holes in plate-carrée coordinates (x = lon, y = lat).

use serde::{Deserialize, Serialize};

use super::GeoError;
use crate::data::LatLon;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<LatLon> for Coord {
    fn from(p: LatLon) -> Self {
        Coord { x: p.lon, y: p.lat }
    }
}

/// Axis-aligned bounds in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self, GeoError> {
        let b = Self { min_lat, min_lon, max_lat, max_lon };
        if !(min_lat < max_lat && min_lon < max_lon)
            || ![min_lat, min_lon, max_lat, max_lon].iter().all(|v| v.is_finite())
        {
            return Err(GeoError::InvalidGrid(format!("degenerate bbox {b:?}")));
        }
        Ok(b)
    }

    pub fn contains(&self, p: LatLon) -> bool {
        self.min_lat <= p.lat && p.lat <= self.max_lat && self.min_lon <= p.lon && p.lon <= self.max_lon
    }

    fn of_ring(ring: &[Coord]) -> Self {
        let mut b = BBox {
            min_lat: f64::INFINITY,
            min_lon: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            max_lon: f64::NEG_INFINITY,
        };
        for c in ring {
            b.min_lon = b.min_lon.min(c.x);
            b.max_lon = b.max_lon.max(c.x);
            b.min_lat = b.min_lat.min(c.y);
            b.max_lat = b.max_lat.max(c.y);
        }
        b
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_lat: self.min_lat.min(other.min_lat),
            min_lon: self.min_lon.min(other.min_lon),
            max_lat: self.max_lat.max(other.max_lat),
            max_lon: self.max_lon.max(other.max_lon),
        }
    }
}

/// A validated polygon: closed, non-self-intersecting rings.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Vec<Coord>,
    holes: Vec<Vec<Coord>>,
    bbox: BBox,
}

impl Polygon {
    pub fn new(exterior: Vec<Coord>, holes: Vec<Vec<Coord>>) -> Result<Self, GeoError> {
        validate_ring(&exterior).map_err(|e| GeoError::InvalidPolygon(format!("exterior ring: {e}")))?;
        for (i, h) in holes.iter().enumerate() {
            validate_ring(h).map_err(|e| GeoError::InvalidPolygon(format!("hole {i}: {e}")))?;
        }
        let bbox = BBox::of_ring(&exterior);
        Ok(Self { exterior, holes, bbox })
    }

    /// Axis-aligned rectangle, handy for fixtures and synthetic layers.
    pub fn rectangle(bbox: BBox) -> Self {
        let ring = vec![
            Coord::new(bbox.min_lon, bbox.min_lat),
            Coord::new(bbox.max_lon, bbox.min_lat),
            Coord::new(bbox.max_lon, bbox.max_lat),
            Coord::new(bbox.min_lon, bbox.max_lat),
            Coord::new(bbox.min_lon, bbox.min_lat),
        ];
        Self { exterior: ring, holes: Vec::new(), bbox }
    }

    pub fn exterior(&self) -> &[Coord] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Coord>] {
        &self.holes
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn contains(&self, p: LatLon) -> bool {
        point_in_polygon(p, self)
    }
}

/// Even-odd ray casting. Points on any edge or vertex (including hole
/// boundaries) count as inside; points strictly inside a hole do not.
pub fn point_in_polygon(point: LatLon, polygon: &Polygon) -> bool {
    let p = Coord::from(point);
    let b = &polygon.bbox;
    if p.x < b.min_lon || p.x > b.max_lon || p.y < b.min_lat || p.y > b.max_lat {
        return false;
    }
    if on_ring_boundary(&polygon.exterior, p) || polygon.holes.iter().any(|h| on_ring_boundary(h, p)) {
        return true;
    }
    crossings_odd(&polygon.exterior, p) && !polygon.holes.iter().any(|h| crossings_odd(h, p))
}

pub(crate) fn orient(a: Coord, b: Coord, c: Coord) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Coord, b: Coord, p: Coord) -> bool {
    orient(a, b, p) == 0.0 && a.x.min(b.x) <= p.x && p.x <= a.x.max(b.x) && a.y.min(b.y) <= p.y && p.y <= a.y.max(b.y)
}

fn on_ring_boundary(ring: &[Coord], p: Coord) -> bool {
    ring.windows(2).any(|e| on_segment(e[0], e[1], p))
}

// A rightward ray from p crosses edge (a, b) when the edge straddles p.y
// (half-open in y) and p lies strictly left of the edge's direction of travel.
fn crossings_odd(ring: &[Coord], p: Coord) -> bool {
    let mut inside = false;
    for e in ring.windows(2) {
        let (a, b) = (e[0], e[1]);
        let up = a.y <= p.y && p.y < b.y && orient(a, b, p) > 0.0;
        let down = b.y <= p.y && p.y < a.y && orient(a, b, p) < 0.0;
        if up || down {
            inside = !inside;
        }
    }
    inside
}

fn segments_intersect(p1: Coord, p2: Coord, p3: Coord, p4: Coord) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(p3, p4, p1) || on_segment(p3, p4, p2) || on_segment(p1, p2, p3) || on_segment(p1, p2, p4)
}

fn validate_ring(ring: &[Coord]) -> Result<(), String> {
    if ring.len() < 4 {
        return Err(format!("needs at least 4 positions, got {}", ring.len()));
    }
    if ring.iter().any(|c| !c.x.is_finite() || !c.y.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    if ring.first() != ring.last() {
        return Err("ring is not closed".into());
    }
    let n = ring.len() - 1;
    let edge = |i: usize| (ring[i], ring[i + 1]);
    for i in 0..n {
        let (a, b) = edge(i);
        if a == b {
            return Err(format!("zero-length edge at position {i}"));
        }
    }
    for i in 0..n {
        let (a, b) = edge(i);
        for j in (i + 1)..n {
            let (c, d) = edge(j);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // shared vertex is fine; folding back along the same line is not
                let (shared_i_end, far_j) = if j == i + 1 { (b, d) } else { (a, c) };
                let far_i = if j == i + 1 { a } else { b };
                if on_segment(a, b, far_j) || on_segment(c, d, far_i) {
                    return Err(format!("edges {i} and {j} overlap at {shared_i_end:?}"));
                }
            } else if segments_intersect(a, b, c, d) {
                return Err(format!("edges {i} and {j} intersect"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ll(lat: f64, lon: f64) -> LatLon {
        LatLon { lat, lon }
    }

    fn ring(pts: &[(f64, f64)]) -> Vec<Coord> {
        pts.iter().map(|&(x, y)| Coord::new(x, y)).collect()
    }

    fn unit_square() -> Polygon {
        Polygon::new(ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]), vec![]).unwrap()
    }

    #[test]
    fn unit_square_inside_and_outside() {
        let sq = unit_square();
        assert!(point_in_polygon(ll(0.5, 0.5), &sq));
        assert!(!point_in_polygon(ll(2.0, 2.0), &sq));
    }

    #[test]
    fn boundary_points_count_as_inside() {
        let sq = unit_square();
        for p in [ll(0.0, 0.5), ll(0.5, 1.0), ll(1.0, 1.0), ll(0.0, 0.0), ll(1.0, 0.3)] {
            assert!(point_in_polygon(p, &sq), "{p:?}");
        }
        assert!(!point_in_polygon(ll(1.0 + 1e-12, 0.5), &sq));
    }

    #[test]
    fn holes_subtract_but_their_boundary_is_inside() {
        let poly = Polygon::new(
            ring(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (0.0, 0.0)]),
            vec![ring(&[(1.0, 1.0), (1.0, 3.0), (3.0, 3.0), (3.0, 1.0), (1.0, 1.0)])],
        )
        .unwrap();
        assert!(!point_in_polygon(ll(2.0, 2.0), &poly));
        assert!(point_in_polygon(ll(0.5, 0.5), &poly));
        assert!(point_in_polygon(ll(2.0, 1.0), &poly));
        assert!(point_in_polygon(ll(1.0, 1.0), &poly));
    }

    #[test]
    fn ray_through_vertex_counts_once() {
        // diamond: the horizontal ray from the centre passes through the right vertex
        let d = Polygon::new(ring(&[(0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]), vec![]).unwrap();
        assert!(point_in_polygon(ll(0.0, 0.0), &d));
        assert!(!point_in_polygon(ll(0.0, -2.0), &d));
        assert!(!point_in_polygon(ll(0.0, 2.0), &d));
    }

    #[test]
    fn invalid_rings_rejected() {
        // open
        assert!(Polygon::new(ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]), vec![]).is_err());
        // bow-tie
        assert!(Polygon::new(ring(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]), vec![]).is_err());
        // too short
        assert!(Polygon::new(ring(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]), vec![]).is_err());
        // spike folding back on itself
        assert!(Polygon::new(ring(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 0.0)]), vec![]).is_err());
        // triangle is fine
        assert!(Polygon::new(ring(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]), vec![]).is_ok());
    }
}
