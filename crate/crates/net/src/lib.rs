//! ICN forwarding and data-centric security for the geo-sharded store.

pub mod icn;
pub mod trust;

pub use geoicn_core::{name, Name};
