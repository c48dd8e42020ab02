//! Workload generators, benchmark runners and statistics for the geo-sharded
//! ICN database.

pub mod runner;
pub mod stats;
pub mod workload;

pub use runner::{BenchCluster, BatchRow, REFERENCE_COST};
pub use workload::Region;
