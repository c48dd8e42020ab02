//! Grid indexing: coordinates, boxes, tiles and tile-prefix names.
//!
//! Free functions at this level use the production grid ([`GridSpec::OGB`]):
//! three levels of 1, 0.1 and 0.01 degree tiles.

mod geometry;
mod grid;

use std::collections::BTreeSet;

use thiserror::Error;

pub use geometry::{BBox, GeoCoord, Geometry};
pub use grid::{CellRect, GridSpec, TileId, ROOT, TERMINATOR};

use crate::name::Name;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("coordinate out of range: ({lng}, {lat})")]
    OutOfRange { lng: f64, lat: f64 },
    #[error("box must satisfy min < max on both axes")]
    EmptyBox,
    #[error("box crosses the antimeridian")]
    CrossesAntimeridian,
    #[error("multipoint without points")]
    EmptyGeometry,
    #[error("level {level} outside 0..{levels}")]
    BadLevel { level: u8, levels: u8 },
    #[error("corner is not aligned to the level-{0} grid")]
    NotAligned(u8),
    #[error("tile index outside the world at level {0}")]
    BadIndex(u8),
    #[error("malformed tile prefix `{0}`")]
    MalformedPrefix(String),
    #[error("grid ratio must be within 2..=10, got {0}")]
    BadRatio(u32),
}

pub fn tile_of<S: Scalar>(c: GeoCoord<S>, level: u8) -> Result<TileId, GridError> {
    GridSpec::OGB.tile_of(c, level)
}

pub fn tile_prefix(t: TileId) -> Name {
    GridSpec::OGB.tile_prefix(t)
}

pub fn parse_tile_prefix(n: &Name) -> Result<TileId, GridError> {
    GridSpec::OGB.parse_tile_prefix(n)
}

pub fn tile_bbox<S: Scalar>(t: TileId) -> BBox<S> {
    GridSpec::OGB.tile_bbox(t)
}

pub fn children(t: TileId) -> Result<Vec<TileId>, GridError> {
    GridSpec::OGB.children(t)
}

pub fn parent(t: TileId) -> Result<TileId, GridError> {
    GridSpec::OGB.parent(t)
}

pub fn intersecting_tiles<S: Scalar>(g: &Geometry<S>, level: u8) -> Result<BTreeSet<TileId>, GridError> {
    GridSpec::OGB.intersecting_tiles(g, level)
}
