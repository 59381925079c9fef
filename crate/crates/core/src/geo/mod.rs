//! Grid quadrant counts, greenspace classification and spatial spread.
//!
//! Point-in-polygon work treats latitude/longitude as planar coordinates,
//! which is adequate at city extents; distances use the haversine formula.

mod grid;
mod layer;
mod polygon;
mod spread;

pub use grid::{quadrant_count, GridSpec, QuadrantCount};
pub use layer::{classify_points, load_layer, load_region, Classification, LandClass, LayerPolygon, PolygonLayer};
pub use polygon::{point_in_polygon, BBox, Coord, Polygon};
pub use spread::{
    greenspace_fraction, haversine_m, species_spread, spread_metric, GreenspaceFraction, SpeciesSpread, SpreadMetric,
    EARTH_RADIUS_M,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("GeoJSON: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
    #[error("no located observations")]
    NoLocatedObservations,
    #[error("no points inside the grid")]
    NoPointsInGrid,
}
