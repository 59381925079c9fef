use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{quadrant_count, GridSpec};
use super::layer::{LandClass, PolygonLayer};
use super::GeoError;
use crate::data::{ChallengeWindow, Dataset, LatLon};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadMetric {
    /// Shannon entropy of the in-bbox cell distribution, in nats.
    pub entropy: f64,
    /// Mean great-circle distance from the points' centroid, in metres.
    pub mean_radial: f64,
    pub n_points: usize,
}

/// Great-circle distance by the haversine formula.
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Normalized mean of the points as unit vectors; falls back to the first point
/// when the mean vanishes (antipodal input).
fn spherical_centroid(points: &[LatLon]) -> LatLon {
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for p in points {
        let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
        x += lat.cos() * lon.cos();
        y += lat.cos() * lon.sin();
        z += lat.sin();
    }
    let norm = (x * x + y * y + z * z).sqrt();
    if norm < 1e-12 {
        return points[0];
    }
    LatLon { lat: (z / norm).asin().to_degrees(), lon: y.atan2(x).to_degrees() }
}

pub fn spread_metric(points: &[LatLon], grid: &GridSpec) -> Result<SpreadMetric, GeoError> {
    let inside: Vec<LatLon> = points.iter().copied().filter(|p| grid.bbox.contains(*p)).collect();
    if inside.is_empty() {
        return Err(GeoError::NoPointsInGrid);
    }
    let q = quadrant_count(&inside, grid);
    let n = inside.len() as f64;
    let entropy = q
        .counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0);
    let centre = spherical_centroid(&inside);
    let mean_radial = inside.iter().map(|&p| haversine_m(p, centre)).sum::<f64>() / n;
    Ok(SpreadMetric { entropy, mean_radial, n_points: inside.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenspaceFraction {
    pub city: String,
    pub year: i32,
    pub fraction: f64,
    pub n_green: usize,
    pub n_located: usize,
    pub n_unlocated: usize,
}

/// Share of the window's located observations that fall in greenspace.
pub fn greenspace_fraction(
    dataset: &Dataset,
    layer: &PolygonLayer,
    window: &ChallengeWindow,
) -> Result<GreenspaceFraction, GeoError> {
    let inside = dataset.filter_by_challenge(window);
    let located: Vec<LatLon> = inside.observations().iter().filter_map(|o| o.location).collect();
    let n_unlocated = inside.observations().len() - located.len();
    if located.is_empty() {
        return Err(GeoError::NoLocatedObservations);
    }
    let n_green = located.iter().filter(|&&p| layer.classify(p) == LandClass::Greenspace).count();
    Ok(GreenspaceFraction {
        city: window.city.clone(),
        year: window.year,
        fraction: n_green as f64 / located.len() as f64,
        n_green,
        n_located: located.len(),
        n_unlocated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSpread {
    pub taxon_id: String,
    pub year: i32,
    pub metric: SpreadMetric,
}

/// Spread per (taxon, year) over the located observations inside the given
/// windows. Pairs with fewer than `min_count` located observations, or none
/// inside the grid, are left out.
pub fn species_spread(
    dataset: &Dataset,
    grid: &GridSpec,
    windows: &[ChallengeWindow],
    min_count: usize,
) -> Vec<SpeciesSpread> {
    let mut groups: BTreeMap<(String, i32), Vec<LatLon>> = BTreeMap::new();
    for o in dataset.observations() {
        let (Some(taxon), Some(loc)) = (&o.taxon_id, o.location) else { continue };
        // a window list may hold several cities for one year; an observation counts once
        if let Some(w) = windows.iter().find(|w| w.contains(o)) {
            groups.entry((taxon.clone(), w.year)).or_default().push(loc);
        }
    }
    groups
        .into_iter()
        .filter(|(_, pts)| pts.len() >= min_count.max(1))
        .filter_map(|((taxon_id, year), pts)| {
            spread_metric(&pts, grid).ok().map(|metric| SpeciesSpread { taxon_id, year, metric })
        })
        .collect()
}
