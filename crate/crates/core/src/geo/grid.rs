use serde::{Deserialize, Serialize};

use super::polygon::BBox;
use super::GeoError;
use crate::data::LatLon;

/// A regular `nx` × `ny` grid over a bounding box; `i` runs along longitude,
/// `j` along latitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BBox,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(bbox: BBox, nx: usize, ny: usize) -> Result<Self, GeoError> {
        BBox::new(bbox.min_lat, bbox.min_lon, bbox.max_lat, bbox.max_lon)?;
        if nx == 0 || ny == 0 {
            return Err(GeoError::InvalidGrid(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        Ok(Self { bbox, nx, ny })
    }

    /// Smallest grid covering the points. A zero-extent axis is padded so the
    /// box stays valid. `None` when there are no points.
    pub fn covering(points: &[LatLon], nx: usize, ny: usize) -> Option<Result<Self, GeoError>> {
        let first = points.first()?;
        let mut b = BBox { min_lat: first.lat, min_lon: first.lon, max_lat: first.lat, max_lon: first.lon };
        for p in points {
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
            b.min_lon = b.min_lon.min(p.lon);
            b.max_lon = b.max_lon.max(p.lon);
        }
        const PAD: f64 = 1e-6;
        if b.max_lat <= b.min_lat {
            b.min_lat -= PAD;
            b.max_lat += PAD;
        }
        if b.max_lon <= b.min_lon {
            b.min_lon -= PAD;
            b.max_lon += PAD;
        }
        Some(Self::new(b, nx, ny))
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Cell holding `p`; points on the max edges fall in the last cell.
    pub fn cell_of(&self, p: LatLon) -> Option<(usize, usize)> {
        if !self.bbox.contains(p) {
            return None;
        }
        let b = &self.bbox;
        let index =
            |v: f64, lo: f64, hi: f64, n: usize| (((v - lo) / (hi - lo) * n as f64).floor() as usize).min(n - 1);
        Some((index(p.lon, b.min_lon, b.max_lon, self.nx), index(p.lat, b.min_lat, b.max_lat, self.ny)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantCount {
    pub grid: GridSpec,
    /// Row-major by latitude band: index `j * nx + i`.
    pub counts: Vec<u64>,
    pub out_of_bbox: u64,
}

impl QuadrantCount {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[j * self.grid.nx + i]
    }

    pub fn in_bbox(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(i, j, count)` for every cell, `j` outer.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        let nx = self.grid.nx;
        self.counts.iter().enumerate().map(move |(k, &c)| (k % nx, k / nx, c))
    }
}

pub fn quadrant_count(points: &[LatLon], grid: &GridSpec) -> QuadrantCount {
    let mut counts = vec![0u64; grid.cells()];
    let mut out_of_bbox = 0;
    for &p in points {
        match grid.cell_of(p) {
            Some((i, j)) => counts[j * grid.nx + i] += 1,
            None => out_of_bbox += 1,
        }
    }
    QuadrantCount { grid: *grid, counts, out_of_bbox }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid2() -> GridSpec {
        GridSpec::new(BBox::new(0.0, 0.0, 2.0, 2.0).unwrap(), 2, 2).unwrap()
    }

    #[test]
    fn one_point_per_cell() {
        let pts = [(0.5, 0.5), (0.5, 1.5), (1.5, 0.5), (1.5, 1.5)].map(|(lat, lon)| LatLon { lat, lon });
        let q = quadrant_count(&pts, &grid2());
        assert_eq!(q.counts, vec![1, 1, 1, 1]);
        assert_eq!(q.out_of_bbox, 0);
    }

    #[test]
    fn max_corner_lands_in_last_cell() {
        let q = quadrant_count(&[LatLon { lat: 2.0, lon: 2.0 }], &grid2());
        assert_eq!(q.get(1, 1), 1);
        assert_eq!(q.out_of_bbox, 0);
    }

    #[test]
    fn axes_map_to_i_and_j() {
        let q = quadrant_count(&[LatLon { lat: 0.5, lon: 1.5 }, LatLon { lat: 3.0, lon: 1.0 }], &grid2());
        assert_eq!(q.get(1, 0), 1);
        assert_eq!(q.out_of_bbox, 1);
    }

    #[test]
    fn invalid_grids() {
        assert!(BBox::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(GridSpec::new(BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(), 0, 3).is_err());
    }

    proptest! {
        #[test]
        fn conservation(pts in prop::collection::vec((-1.0f64..3.0, -1.0f64..3.0), 0..200), nx in 1usize..7, ny in 1usize..7) {
            let pts: Vec<LatLon> = pts.into_iter().map(|(lat, lon)| LatLon { lat, lon }).collect();
            let grid = GridSpec::new(BBox::new(0.0, 0.0, 2.0, 2.0).unwrap(), nx, ny).unwrap();
            let q = quadrant_count(&pts, &grid);
            prop_assert_eq!(q.in_bbox() + q.out_of_bbox, pts.len() as u64);
        }
    }
}
