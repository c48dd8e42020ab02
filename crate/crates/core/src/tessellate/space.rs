use std::collections::BTreeSet;
use std::fmt::Debug;

use crate::geogrid::{BBox, CellRect, GridSpec, TileId};
use crate::name::Name;
use crate::scalar::Scalar;

/// A covering problem: a tile hierarchy restricted to the tiles that share
/// positive measure with one query region.
pub trait CoverSpace {
    type Tile: Copy + Ord + Debug;
    type M: Scalar;

    fn levels(&self) -> u8;
    /// Children per tile on a full split.
    fn fanout(&self) -> usize;
    fn level(&self, t: &Self::Tile) -> u8;
    /// Level-0 tiles intersecting the region, sorted.
    fn roots(&self) -> Vec<Self::Tile>;
    /// Children of `t` intersecting the region, sorted.
    fn children(&self, t: &Self::Tile) -> Vec<Self::Tile>;
    fn measure(&self, t: &Self::Tile) -> Self::M;
    fn overlap(&self, t: &Self::Tile) -> Self::M;
    fn query_measure(&self) -> Self::M;
    /// Every finest-level descendant of `t` intersects the region.
    fn filled(&self, t: &Self::Tile) -> bool;
    /// Deterministic tie-break key (the tile name).
    fn tie_key(&self, t: &Self::Tile) -> Name;
}

/// A spatial query region.
#[derive(Debug, Clone, PartialEq)]
pub enum Region<S> {
    Box(BBox<S>),
    /// An explicit set of finest-level cells; used for hand-built instances.
    Cells(BTreeSet<(i64, i64)>),
}

pub struct SpatialSpace<S> {
    grid: GridSpec,
    region: Region<S>,
    /// Finest cells touched by the region (bounding rect for `Cells`).
    rect: CellRect,
}

impl<S: Scalar> SpatialSpace<S> {
    pub fn new(grid: GridSpec, region: Region<S>) -> Self {
        let rect = match &region {
            Region::Box(q) => grid.box_cells(q, grid.finest()),
            Region::Cells(cells) => {
                let mut r = CellRect { x0: i64::MAX, x1: i64::MIN, y0: i64::MAX, y1: i64::MIN };
                for &(x, y) in cells {
                    r.x0 = r.x0.min(x);
                    r.x1 = r.x1.max(x + 1);
                    r.y0 = r.y0.min(y);
                    r.y1 = r.y1.max(y + 1);
                }
                r
            }
        };
        SpatialSpace { grid, region, rect }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn region(&self) -> &Region<S> {
        &self.region
    }

    fn region_cells_in(&self, r: &CellRect) -> u64 {
        match &self.region {
            Region::Box(_) => self.rect.intersect(r).count(),
            Region::Cells(cells) => {
                let r = self.rect.intersect(r);
                if r.is_empty() {
                    return 0;
                }
                cells
                    .range((r.x0, r.y0)..(r.x1, r.y0))
                    .filter(|(_, y)| *y >= r.y0 && *y < r.y1)
                    .count() as u64
            }
        }
    }

    fn tiles_at(&self, level: u8, within: CellRect) -> Vec<TileId> {
        let f = self.grid.scale(self.grid.finest() - level);
        let touched = CellRect {
            x0: self.rect.x0.div_euclid(f),
            x1: (self.rect.x1 - 1).div_euclid(f) + 1,
            y0: self.rect.y0.div_euclid(f),
            y1: (self.rect.y1 - 1).div_euclid(f) + 1,
        }
        .intersect(&within);
        let mut out: Vec<TileId> = touched
            .cells()
            .map(|(x, y)| TileId { level, x, y })
            .filter(|t| self.region_cells_in(&self.grid.finest_cells(*t)) > 0)
            .collect();
        out.sort();
        out
    }
}

impl<S: Scalar> CoverSpace for SpatialSpace<S> {
    type Tile = TileId;
    type M = S;

    fn levels(&self) -> u8 {
        self.grid.levels()
    }

    fn fanout(&self) -> usize {
        self.grid.fanout()
    }

    fn level(&self, t: &TileId) -> u8 {
        t.level
    }

    fn roots(&self) -> Vec<TileId> {
        if self.rect.is_empty() {
            return Vec::new();
        }
        let all = CellRect { x0: i64::MIN / 2, x1: i64::MAX / 2, y0: i64::MIN / 2, y1: i64::MAX / 2 };
        self.tiles_at(0, all)
    }

    fn children(&self, t: &TileId) -> Vec<TileId> {
        if t.level >= self.grid.finest() {
            return Vec::new();
        }
        self.tiles_at(t.level + 1, self.grid.cells_at(*t, t.level + 1))
    }

    fn measure(&self, t: &TileId) -> S {
        self.grid.tile_area(t.level)
    }

    fn overlap(&self, t: &TileId) -> S {
        match &self.region {
            Region::Box(q) => self.grid.tile_area::<S>(t.level) * self.grid.overlap_fraction(*t, q),
            Region::Cells(_) => {
                S::from_index(self.region_cells_in(&self.grid.finest_cells(*t)) as i64)
                    * self.grid.tile_area::<S>(self.grid.finest())
            }
        }
    }

    fn query_measure(&self) -> S {
        match &self.region {
            Region::Box(q) => q.area(),
            Region::Cells(c) => S::from_index(c.len() as i64) * self.grid.tile_area::<S>(self.grid.finest()),
        }
    }

    fn filled(&self, t: &TileId) -> bool {
        let cells = self.grid.finest_cells(*t);
        self.region_cells_in(&cells) == cells.count()
    }

    fn tie_key(&self, t: &TileId) -> Name {
        self.grid.tile_prefix(*t)
    }
}

/// Period sizes in minutes, coarsest first.
pub const PERIOD_MINUTES: [i64; 5] = [10000, 1000, 100, 10, 1];

/// An aligned time period: `[start, start + size)` minutes since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Period {
    pub size_minutes: i64,
    pub start_minute: i64,
}

impl Period {
    pub fn level(&self) -> u8 {
        PERIOD_MINUTES.iter().position(|&s| s == self.size_minutes).expect("period size in hierarchy") as u8
    }

    pub fn start_secs(&self) -> i64 {
        self.start_minute * 60
    }

    pub fn end_secs(&self) -> i64 {
        (self.start_minute + self.size_minutes) * 60
    }

    /// Overlap with a closed validity interval `[a, b]` in seconds.
    pub fn overlaps_closed(&self, a: i64, b: i64) -> bool {
        a < self.end_secs() && b >= self.start_secs()
    }
}

/// A half-open interval `[start, end)` of epoch seconds over the period hierarchy.
pub struct TemporalSpace {
    start: i64,
    end: i64,
    /// Touched minutes, half-open.
    m0: i64,
    m1: i64,
}

impl TemporalSpace {
    pub fn new(start: i64, end: i64) -> Self {
        TemporalSpace {
            start,
            end,
            m0: start.div_euclid(60),
            m1: (end - 1).div_euclid(60) + 1,
        }
    }

    fn periods_at(&self, level: u8, lo: i64, hi: i64) -> Vec<Period> {
        let size = PERIOD_MINUTES[level as usize];
        let a = self.m0.max(lo).div_euclid(size);
        let b = (self.m1.min(hi) - 1).div_euclid(size);
        (a..=b)
            .map(|i| Period { size_minutes: size, start_minute: i * size })
            .filter(|p| p.start_minute < self.m1 && p.start_minute + size > self.m0)
            .collect()
    }
}

impl CoverSpace for TemporalSpace {
    type Tile = Period;
    type M = f64;

    fn levels(&self) -> u8 {
        PERIOD_MINUTES.len() as u8
    }

    fn fanout(&self) -> usize {
        10
    }

    fn level(&self, t: &Period) -> u8 {
        t.level()
    }

    fn roots(&self) -> Vec<Period> {
        if self.m0 >= self.m1 {
            return Vec::new();
        }
        self.periods_at(0, self.m0, self.m1)
    }

    fn children(&self, t: &Period) -> Vec<Period> {
        let level = t.level();
        if level + 1 >= self.levels() {
            return Vec::new();
        }
        self.periods_at(level + 1, t.start_minute, t.start_minute + t.size_minutes)
    }

    fn measure(&self, t: &Period) -> f64 {
        (t.size_minutes * 60) as f64
    }

    fn overlap(&self, t: &Period) -> f64 {
        (t.end_secs().min(self.end) - t.start_secs().max(self.start)).max(0) as f64
    }

    fn query_measure(&self) -> f64 {
        (self.end - self.start) as f64
    }

    fn filled(&self, t: &Period) -> bool {
        t.start_minute >= self.m0 && t.start_minute + t.size_minutes <= self.m1
    }

    fn tie_key(&self, t: &Period) -> Name {
        Name::new()
            .child("T")
            .child(t.size_minutes.to_string())
            .child(t.start_minute.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_children_are_the_intersecting_ones() {
        let q = BBox::<f64>::new(12.05, 41.05, 12.25, 41.25).unwrap();
        let s = SpatialSpace::new(GridSpec::OGB, Region::Box(q));
        let roots = s.roots();
        assert_eq!(roots, vec![TileId { level: 0, x: 12, y: 41 }]);
        let kids = s.children(&roots[0]);
        assert_eq!(kids.len(), 9);
        assert!(!s.filled(&roots[0]));
        assert!(s.filled(&TileId { level: 1, x: 121, y: 411 }));
        assert!(!s.filled(&TileId { level: 1, x: 122, y: 411 }));
        assert!((s.overlap(&roots[0]) - q.area()).abs() < 1e-12);
    }

    #[test]
    fn cell_region_counts() {
        let g = GridSpec::new(3, 2).unwrap();
        let cells: BTreeSet<_> = [(0, 0), (1, 0), (0, 1), (1, 1), (5, 2)].into_iter().collect();
        let s = SpatialSpace::<f64>::new(g, Region::Cells(cells));
        assert_eq!(s.roots(), vec![TileId { level: 0, x: 0, y: 0 }, TileId { level: 0, x: 1, y: 0 }]);
        assert!(s.filled(&TileId { level: 1, x: 0, y: 0 }));
        assert!(!s.filled(&TileId { level: 0, x: 0, y: 0 }));
        assert_eq!(s.overlap(&TileId { level: 0, x: 1, y: 0 }), 1.0 / 16.0);
    }

    #[test]
    fn temporal_space() {
        let s = TemporalSpace::new(0, 3600);
        assert_eq!(s.roots(), vec![Period { size_minutes: 10000, start_minute: 0 }]);
        let kids = s.children(&s.roots()[0]);
        assert_eq!(kids, vec![Period { size_minutes: 1000, start_minute: 0 }]);
        let p100 = s.children(&kids[0]);
        assert_eq!(p100, vec![Period { size_minutes: 100, start_minute: 0 }]);
        assert!(!s.filled(&p100[0]));
        assert_eq!(s.children(&p100[0]).len(), 6);
        assert!(s.filled(&Period { size_minutes: 10, start_minute: 50 }));
        assert_eq!(s.overlap(&p100[0]), 3600.0);
    }
}
