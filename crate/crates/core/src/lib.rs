//! Core of the geo-sharded ICN database: tile grid and naming, GeoJSON
//! features, range-query tessellation and the batch performance model.
//!
//! The numeric code is generic over [`Scalar`] (f32 or f64); the aliases
//! below fix the scalar for callers that do not care.

pub mod geogrid;
pub mod geojson;
pub mod name;
pub mod perfmodel;
pub mod scalar;
pub mod tessellate;

pub use name::{name, Name, NameError};
pub use scalar::Scalar;

pub type GeoCoord = geogrid::GeoCoord<f64>;
pub type BBox = geogrid::BBox<f64>;
pub type Geometry = geogrid::Geometry<f64>;
pub type Feature = geojson::Feature<f64>;

pub type GeoCoord32 = geogrid::GeoCoord<f32>;
pub type BBox32 = geogrid::BBox<f32>;
pub type Geometry32 = geogrid::Geometry<f32>;

pub type ModelParams = perfmodel::ModelParams<f64>;
pub type Measurement = perfmodel::Measurement<f64>;
pub type Tessellation = tessellate::Tessellation<geogrid::TileId, f64>;
