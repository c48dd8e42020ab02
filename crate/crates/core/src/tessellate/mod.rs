//! Range-query tessellation: covering a query with disjoint multi-level
//! tiles, bounded in count, at the least possible stretch.
//!
//! The algorithms are written once over [`CoverSpace`] and instantiated for
//! the spatial grid and for the 1-D period hierarchy.

mod exhaustive;
mod greedy;
mod space;
mod tree;

use thiserror::Error;

pub use exhaustive::{brute_force, count_covers};
pub use greedy::{constrained, reduce_to};
pub use space::{CoverSpace, Period, Region, SpatialSpace, TemporalSpace, PERIOD_MINUTES};
pub use tree::{IndexTree, Node, NodeState};

use crate::geogrid::{BBox, GridSpec, TileId};
use crate::scalar::Scalar;

/// Default bound on the number of periods of a temporal decomposition.
pub const MAX_PERIODS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TessellateError {
    #[error("tile budget k must be at least 1")]
    ZeroBudget,
    #[error("instance has more than {bound} candidate tiles")]
    TooLarge { bound: usize },
    #[error("tile does not intersect the query")]
    Disjoint,
    #[error("interval start must precede its end")]
    EmptyInterval,
}

/// A disjoint cover. `stretch` is covered measure over query measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Tessellation<T, M> {
    pub tiles: Vec<T>,
    pub stretch: M,
    pub constraint_respected: bool,
}

impl<T, M: Copy> Tessellation<T, M> {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn stretch(&self) -> M {
        self.stretch
    }
}

pub type PeriodSet = Tessellation<Period, f64>;

fn check_k(k: usize) -> Result<(), TessellateError> {
    if k == 0 {
        Err(TessellateError::ZeroBudget)
    } else {
        Ok(())
    }
}

/// All finest-level tiles intersecting `q`.
pub fn min_stretch_in<S: Scalar>(grid: GridSpec, q: &BBox<S>) -> Tessellation<TileId, S> {
    let level = grid.finest();
    let cells = grid.box_cells(q, level);
    let tiles: Vec<TileId> = cells.cells().map(|(x, y)| TileId { level, x, y }).collect();
    let area = S::from_index(tiles.len() as i64) * grid.tile_area::<S>(level);
    let mut tiles = tiles;
    tiles.sort();
    Tessellation { tiles, stretch: area / q.area(), constraint_respected: true }
}

pub fn min_stretch<S: Scalar>(q: &BBox<S>) -> Tessellation<TileId, S> {
    min_stretch_in(GridSpec::OGB, q)
}

/// Tile count of [`min_stretch`] without materializing the tiles.
pub fn min_stretch_count<S: Scalar>(q: &BBox<S>) -> u64 {
    let g = GridSpec::OGB;
    g.box_cells(q, g.finest()).count()
}

/// Minimum stretch with the fewest tiles (no budget).
pub fn min_stretch_tiles<S: Scalar>(grid: GridSpec, region: Region<S>) -> Tessellation<TileId, S> {
    IndexTree::reduced(&SpatialSpace::new(grid, region)).into_tessellation(true)
}

pub fn constrained_tessellation_in<S: Scalar>(
    grid: GridSpec,
    region: Region<S>,
    k: usize,
) -> Result<Tessellation<TileId, S>, TessellateError> {
    check_k(k)?;
    Ok(constrained(&SpatialSpace::new(grid, region), k))
}

pub fn constrained_tessellation<S: Scalar>(q: &BBox<S>, k: usize) -> Result<Tessellation<TileId, S>, TessellateError> {
    constrained_tessellation_in(GridSpec::OGB, Region::Box(*q), k)
}

pub fn brute_force_optimal_in<S: Scalar>(
    grid: GridSpec,
    region: Region<S>,
    k: usize,
    bound: usize,
) -> Result<Tessellation<TileId, S>, TessellateError> {
    check_k(k)?;
    brute_force(&SpatialSpace::new(grid, region), k, bound)
}

pub fn brute_force_optimal<S: Scalar>(
    q: &BBox<S>,
    k: usize,
    bound: usize,
) -> Result<Tessellation<TileId, S>, TessellateError> {
    brute_force_optimal_in(GridSpec::OGB, Region::Box(*q), k, bound)
}

/// Tile area over the area it shares with `q`.
pub fn tile_stretch_in<S: Scalar>(grid: GridSpec, tile: TileId, q: &BBox<S>) -> Result<S, TessellateError> {
    let frac = grid.overlap_fraction(tile, q);
    if frac <= S::zero() {
        return Err(TessellateError::Disjoint);
    }
    Ok(S::one() / frac)
}

pub fn tile_stretch<S: Scalar>(tile: TileId, q: &BBox<S>) -> Result<S, TessellateError> {
    tile_stretch_in(GridSpec::OGB, tile, q)
}

/// Covers the half-open interval `[start, end)` (epoch seconds) with at most
/// `max_periods` aligned periods, falling back to 10000-minute periods.
pub fn temporal_decompose(start: i64, end: i64, max_periods: usize) -> Result<PeriodSet, TessellateError> {
    if start >= end {
        return Err(TessellateError::EmptyInterval);
    }
    check_k(max_periods)?;
    Ok(constrained(&TemporalSpace::new(start, end), max_periods))
}
