//! Geo-sharded spatial-temporal database over the ICN fabric: database
//! engines, the Bloom-filter server, the front-end library and a cluster
//! launcher.

pub mod bloom;
pub mod bloomsvc;
pub mod bulk;
pub mod cluster;
pub mod engine;
pub mod frontend;
pub mod object;
pub mod service;

use std::time::Duration;

use geoicn_core::geogrid::GridError;
use geoicn_core::geojson::GeoJsonError;
use geoicn_core::Name;
use geoicn_net::icn::GetError;
use geoicn_net::trust::TrustError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bloom::{bloom_key, BloomParams, CountingBloom};
pub use bloomsvc::BloomServer;
pub use cluster::{Cluster, ClusterConfig};
pub use engine::{Engine, EngineConfig, EngineStats};
pub use frontend::{Frontend, FrontendConfig, Mode, QueryResult, QueryStats, RangeQuery};
pub use object::{Body, ObjectBody, ObjectKey, StoredObject, TileQuery};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DbError {
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    GeoJson(#[from] GeoJsonError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Get(#[from] GetError),
    #[error("tile-query {name} failed: {source}")]
    TileQuery { name: Name, source: GetError },
    #[error("i/o: {0}")]
    Io(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

impl From<std::io::Error> for DbError {
    fn from(e: std::io::Error) -> Self {
        DbError::Io(e.to_string())
    }
}

/// Per-object outcome of a bulk insert, sent as one byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum InsertStatus {
    Stored = 0,
    BadSignature = 1,
    Denied = 2,
    Duplicate = 3,
    Malformed = 4,
    NotResponsible = 5,
}

impl InsertStatus {
    pub fn from_u8(b: u8) -> Option<InsertStatus> {
        use InsertStatus::*;
        [Stored, BadSignature, Denied, Duplicate, Malformed, NotResponsible].into_iter().find(|s| *s as u8 == b)
    }
}

/// Outcome of one delete Interest, sent as the single payload byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum DeleteStatus {
    Deleted = 0,
    NotFound = 1,
    Denied = 2,
}

impl DeleteStatus {
    pub fn from_u8(b: u8) -> Option<DeleteStatus> {
        use DeleteStatus::*;
        [Deleted, NotFound, Denied].into_iter().find(|s| *s as u8 == b)
    }
}

/// Injected processing cost: a tile-query handling time of `c1 + c2·items`
/// ms, split between the engine (`p_db`) and the front-end query handler,
/// plus `c3` per batch at the front-end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c1_ms: f64,
    pub c2_ms: f64,
    pub c3_ms: f64,
    pub p_db: f64,
}

impl CostModel {
    pub fn tq_ms(&self, items: usize) -> f64 {
        self.c1_ms + self.c2_ms * items as f64
    }

    pub fn engine_ms(&self, items: usize) -> f64 {
        self.p_db * self.tq_ms(items)
    }

    pub fn handler_ms(&self, items: usize) -> f64 {
        (1.0 - self.p_db) * self.tq_ms(items)
    }
}

/// Sleeps for a fractional number of milliseconds.
pub(crate) fn pause_ms(ms: f64) {
    if ms > 0.0 {
        std::thread::sleep(Duration::from_secs_f64(ms / 1000.0));
    }
}
