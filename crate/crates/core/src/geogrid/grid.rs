use std::collections::BTreeSet;

use crate::name::Name;
use crate::scalar::Scalar;

use super::{BBox, GeoCoord, Geometry, GridError};

pub const ROOT: &str = "OGB";
pub const TERMINATOR: &str = "GPS-ID";

/// Tile hierarchy parameters. `ratio` is the per-axis split factor, so each
/// tile has `ratio²` children; level-0 tiles are always 1°×1°.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    levels: u8,
    ratio: u32,
}

/// A grid tile: integer cell indices at its level's scale. The south-west
/// corner is `(x, y) / ratio^level` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileId {
    pub level: u8,
    pub x: i64,
    pub y: i64,
}

/// Half-open rectangle of cell indices `[x0, x1) × [y0, y1)` at one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRect {
    pub x0: i64,
    pub x1: i64,
    pub y0: i64,
    pub y1: i64,
}

impl CellRect {
    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    pub fn count(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            ((self.x1 - self.x0) * (self.y1 - self.y0)) as u64
        }
    }

    pub fn contains_cell(&self, x: i64, y: i64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn contains_rect(&self, o: &CellRect) -> bool {
        o.is_empty() || (o.x0 >= self.x0 && o.x1 <= self.x1 && o.y0 >= self.y0 && o.y1 <= self.y1)
    }

    pub fn intersect(&self, o: &CellRect) -> CellRect {
        CellRect {
            x0: self.x0.max(o.x0),
            x1: self.x1.min(o.x1),
            y0: self.y0.max(o.y0),
            y1: self.y1.min(o.y1),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.y0..self.y1.max(self.y0)).flat_map(move |y| (self.x0..self.x1).map(move |x| (x, y)))
    }
}

/// Boundary `i / scale` in degrees, computed in `S` so that every place in
/// the crate agrees on where a cell starts.
fn boundary<S: Scalar>(i: i64, scale: i64) -> S {
    S::from_index(i) / S::from_index(scale)
}

/// The `i` with `boundary(i) <= v < boundary(i + 1)`.
fn cell_floor<S: Scalar>(v: S, scale: i64) -> i64 {
    let mut i = (v * S::from_index(scale)).floor().to_i64().unwrap_or(0);
    while boundary::<S>(i, scale) > v {
        i -= 1;
    }
    while boundary::<S>(i + 1, scale) <= v {
        i += 1;
    }
    i
}

/// The smallest `i` with `boundary(i) >= v`.
fn cell_ceil<S: Scalar>(v: S, scale: i64) -> i64 {
    let mut i = (v * S::from_index(scale)).ceil().to_i64().unwrap_or(0);
    while boundary::<S>(i - 1, scale) >= v {
        i -= 1;
    }
    while boundary::<S>(i, scale) < v {
        i += 1;
    }
    i
}

impl GridSpec {
    /// The production grid: levels 0, 1, 2 with 10 splits per axis.
    pub const OGB: GridSpec = GridSpec { levels: 3, ratio: 10 };

    pub fn new(levels: u8, ratio: u32) -> Result<Self, GridError> {
        if !(2..=10).contains(&ratio) {
            return Err(GridError::BadRatio(ratio));
        }
        if levels == 0 || (ratio as f64).powi(levels as i32 - 1) > 1e6 {
            return Err(GridError::BadLevel { level: levels, levels: 0 });
        }
        Ok(GridSpec { levels, ratio })
    }

    pub fn levels(&self) -> u8 {
        self.levels
    }

    pub fn finest(&self) -> u8 {
        self.levels - 1
    }

    /// Per-axis split factor between consecutive levels.
    pub fn ratio(&self) -> u32 {
        self.ratio
    }

    /// Number of children of a non-finest tile.
    pub fn fanout(&self) -> usize {
        (self.ratio * self.ratio) as usize
    }

    /// Cells per degree at `level`.
    pub fn scale(&self, level: u8) -> i64 {
        (self.ratio as i64).pow(level as u32)
    }

    fn check_level(&self, level: u8) -> Result<(), GridError> {
        if level < self.levels {
            Ok(())
        } else {
            Err(GridError::BadLevel { level, levels: self.levels })
        }
    }

    pub fn is_valid(&self, t: TileId) -> bool {
        if t.level >= self.levels {
            return false;
        }
        let s = self.scale(t.level);
        (-180 * s..180 * s).contains(&t.x) && (-90 * s..90 * s).contains(&t.y)
    }

    fn checked(&self, t: TileId) -> Result<TileId, GridError> {
        self.check_level(t.level)?;
        if self.is_valid(t) {
            Ok(t)
        } else {
            Err(GridError::BadIndex(t.level))
        }
    }

    pub fn tile(&self, level: u8, x: i64, y: i64) -> Result<TileId, GridError> {
        self.checked(TileId { level, x, y })
    }

    /// The tile containing `c`, south-west inclusive.
    pub fn tile_of<S: Scalar>(&self, c: GeoCoord<S>, level: u8) -> Result<TileId, GridError> {
        self.check_level(level)?;
        let c = GeoCoord::new(c.lng, c.lat)?;
        let s = self.scale(level);
        Ok(TileId {
            level,
            x: cell_floor(c.lng, s),
            y: cell_floor(c.lat, s),
        })
    }

    /// The tile whose south-west corner is exactly `sw`.
    pub fn tile_at<S: Scalar>(&self, level: u8, sw: GeoCoord<S>) -> Result<TileId, GridError> {
        let t = self.tile_of(sw, level)?;
        if self.sw::<S>(t) == sw {
            Ok(t)
        } else {
            Err(GridError::NotAligned(level))
        }
    }

    pub fn sw<S: Scalar>(&self, t: TileId) -> GeoCoord<S> {
        let s = self.scale(t.level);
        GeoCoord {
            lng: boundary(t.x, s),
            lat: boundary(t.y, s),
        }
    }

    pub fn tile_bbox<S: Scalar>(&self, t: TileId) -> BBox<S> {
        let s = self.scale(t.level);
        BBox::from_raw(
            GeoCoord { lng: boundary(t.x, s), lat: boundary(t.y, s) },
            GeoCoord { lng: boundary(t.x + 1, s), lat: boundary(t.y + 1, s) },
        )
    }

    /// Fraction of the tile's area inside the box `q`, in `[0, 1]`. Axes on
    /// which the tile lies inside `q` contribute exactly 1.
    pub fn overlap_fraction<S: Scalar>(&self, t: TileId, q: &BBox<S>) -> S {
        let b = self.tile_bbox::<S>(t);
        let axis = |lo: S, hi: S, qlo: S, qhi: S| -> S {
            if lo >= qlo && hi <= qhi {
                S::one()
            } else {
                ((hi.min(qhi) - lo.max(qlo)) / (hi - lo)).max(S::zero()).min(S::one())
            }
        };
        let (min, max) = (b.min(), b.max());
        axis(min.lng, max.lng, q.min().lng, q.max().lng) * axis(min.lat, max.lat, q.min().lat, q.max().lat)
    }

    pub fn tile_area<S: Scalar>(&self, level: u8) -> S {
        let side = S::one() / S::from_index(self.scale(level));
        side * side
    }

    pub fn children(&self, t: TileId) -> Result<Vec<TileId>, GridError> {
        let t = self.checked(t)?;
        if t.level + 1 >= self.levels {
            return Err(GridError::BadLevel { level: t.level + 1, levels: self.levels });
        }
        let r = self.ratio as i64;
        let level = t.level + 1;
        Ok((0..r)
            .flat_map(|dy| (0..r).map(move |dx| TileId { level, x: t.x * r + dx, y: t.y * r + dy }))
            .collect())
    }

    pub fn parent(&self, t: TileId) -> Result<TileId, GridError> {
        let t = self.checked(t)?;
        if t.level == 0 {
            return Err(GridError::BadLevel { level: 0, levels: self.levels });
        }
        self.ancestor(t, t.level - 1)
    }

    /// The tile at `level` (≤ t.level) containing `t`.
    pub fn ancestor(&self, t: TileId, level: u8) -> Result<TileId, GridError> {
        if level > t.level {
            return Err(GridError::BadLevel { level, levels: t.level + 1 });
        }
        let f = self.scale(t.level - level);
        Ok(TileId {
            level,
            x: t.x.div_euclid(f),
            y: t.y.div_euclid(f),
        })
    }

    /// True when `a` equals `b` or contains it.
    pub fn covers(&self, a: TileId, b: TileId) -> bool {
        a.level <= b.level && self.ancestor(b, a.level) == Ok(a)
    }

    /// Cells of `level` (≥ t.level) inside `t`.
    pub fn cells_at(&self, t: TileId, level: u8) -> CellRect {
        let f = self.scale(level.saturating_sub(t.level));
        CellRect {
            x0: t.x * f,
            x1: (t.x + 1) * f,
            y0: t.y * f,
            y1: (t.y + 1) * f,
        }
    }

    /// Finest-level cells inside `t`.
    pub fn finest_cells(&self, t: TileId) -> CellRect {
        self.cells_at(t, self.finest())
    }

    fn world(&self, level: u8) -> CellRect {
        let s = self.scale(level);
        CellRect { x0: -180 * s, x1: 180 * s, y0: -90 * s, y1: 90 * s }
    }

    /// Cells at `level` sharing positive area with the half-open box `q`.
    pub fn box_cells<S: Scalar>(&self, q: &BBox<S>, level: u8) -> CellRect {
        let s = self.scale(level);
        let r = CellRect {
            x0: cell_floor(q.min().lng, s),
            x1: cell_ceil(q.max().lng, s),
            y0: cell_floor(q.min().lat, s),
            y1: cell_ceil(q.max().lat, s),
        };
        r.intersect(&self.world(level))
    }

    /// Tiles at `level` intersecting a geometry. Points count for the tile
    /// containing them; other kinds use their closed envelope.
    pub fn intersecting_tiles<S: Scalar>(&self, g: &Geometry<S>, level: u8) -> Result<BTreeSet<TileId>, GridError> {
        self.check_level(level)?;
        match g {
            Geometry::Point(_) | Geometry::MultiPoint(_) => {
                if g.points().is_empty() {
                    return Err(GridError::EmptyGeometry);
                }
                g.points().iter().map(|p| self.tile_of(*p, level)).collect()
            }
            Geometry::Other { bbox, .. } => {
                let s = self.scale(level);
                let min = bbox.min();
                let max = bbox.max();
                if !g.is_valid() {
                    return Err(GridError::OutOfRange { lng: max.lng.as_f64(), lat: max.lat.as_f64() });
                }
                let w = self.world(level);
                let r = CellRect {
                    x0: cell_floor(min.lng, s),
                    x1: (cell_floor(max.lng, s) + 1).min(w.x1),
                    y0: cell_floor(min.lat, s),
                    y1: (cell_floor(max.lat, s) + 1).min(w.y1),
                };
                Ok(r.cells().map(|(x, y)| TileId { level, x, y }).collect())
            }
        }
    }

    /// Components of the tile prefix, without the trailing `GPS-ID`.
    fn prefix_parts(&self, t: TileId) -> Vec<String> {
        let s = self.scale(t.level);
        let lng0 = t.x.div_euclid(s);
        let lat0 = t.y.div_euclid(s);
        let ox = t.x.rem_euclid(s);
        let oy = t.y.rem_euclid(s);
        let r = self.ratio as i64;
        let mut parts = vec![ROOT.to_string(), lng0.to_string(), lat0.to_string()];
        for j in 1..=t.level {
            let d = self.scale(t.level - j);
            parts.push(format!("{}{}", (ox / d) % r, (oy / d) % r));
        }
        parts
    }

    /// `ndn:/OGB/lng0/lat0/{digit pairs}/GPS-ID`.
    pub fn tile_prefix(&self, t: TileId) -> Name {
        let mut parts = self.prefix_parts(t);
        parts.push(TERMINATOR.to_string());
        Name::from_components(parts).expect("short components")
    }

    /// Number of name components in the prefix of a `level` tile.
    pub fn prefix_len(level: u8) -> usize {
        4 + level as usize
    }

    /// Parses the tile prefix at the start of `n`; components after
    /// `GPS-ID` are ignored.
    pub fn parse_tile_prefix(&self, n: &Name) -> Result<TileId, GridError> {
        let bad = || GridError::MalformedPrefix(n.to_string());
        let mut comps = n.components();
        if comps.next() != Some(ROOT.as_bytes()) {
            return Err(bad());
        }
        let int = |c: Option<&[u8]>| -> Result<i64, GridError> {
            let s = c.and_then(|c| std::str::from_utf8(c).ok()).ok_or_else(bad)?;
            let v: i64 = s.parse().map_err(|_| bad())?;
            // canonical rendering only, so prefixes stay unique
            if v.to_string() != s {
                return Err(bad());
            }
            Ok(v)
        };
        let lng0 = int(comps.next())?;
        let lat0 = int(comps.next())?;
        if !(-180..180).contains(&lng0) || !(-90..90).contains(&lat0) {
            return Err(bad());
        }
        let (mut x, mut y, mut level) = (lng0, lat0, 0u8);
        let r = self.ratio as i64;
        loop {
            let c = comps.next().ok_or_else(bad)?;
            if c == TERMINATOR.as_bytes() {
                break;
            }
            let digit = |b: u8| -> Result<i64, GridError> {
                let d = b.wrapping_sub(b'0') as i64;
                if b.is_ascii_digit() && d < r {
                    Ok(d)
                } else {
                    Err(bad())
                }
            };
            if c.len() != 2 {
                return Err(bad());
            }
            x = x * r + digit(c[0])?;
            y = y * r + digit(c[1])?;
            level += 1;
            if level >= self.levels {
                return Err(bad());
            }
        }
        Ok(TileId { level, x, y })
    }
}
