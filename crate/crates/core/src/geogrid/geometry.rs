use crate::scalar::Scalar;

use super::GridError;

/// A GPS position in decimal degrees. Valid positions satisfy
/// `lng ∈ [-180, 180)` and `lat ∈ [-90, 90)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeoCoord<S> {
    pub lng: S,
    pub lat: S,
}

impl<S: Scalar> GeoCoord<S> {
    pub fn new(lng: S, lat: S) -> Result<Self, GridError> {
        let c = GeoCoord { lng, lat };
        if c.is_valid() {
            Ok(c)
        } else {
            Err(GridError::OutOfRange {
                lng: lng.as_f64(),
                lat: lat.as_f64(),
            })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lng >= S::lit(-180.0)
            && self.lng < S::lit(180.0)
            && self.lat >= S::lit(-90.0)
            && self.lat < S::lit(90.0)
    }
}

/// Axis-aligned box in degrees.
///
/// Query boxes are half-open, `[min, max)`, matching tile containment; a
/// box never crosses the antimeridian. Geometry envelopes built with
/// [`BBox::envelope`] are closed and may be degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<S> {
    min: GeoCoord<S>,
    max: GeoCoord<S>,
}

impl<S: Scalar> BBox<S> {
    /// A query box. Requires `min < max` on both axes, `lng ∈ [-180, 180]`, `lat ∈ [-90, 90]`.
    pub fn new(min_lng: S, min_lat: S, max_lng: S, max_lat: S) -> Result<Self, GridError> {
        let ok_range = min_lng >= S::lit(-180.0)
            && max_lng <= S::lit(180.0)
            && min_lat >= S::lit(-90.0)
            && max_lat <= S::lit(90.0);
        if !ok_range {
            return Err(GridError::OutOfRange {
                lng: if min_lng < S::lit(-180.0) { min_lng } else { max_lng }.as_f64(),
                lat: if min_lat < S::lit(-90.0) { min_lat } else { max_lat }.as_f64(),
            });
        }
        if !(min_lng < max_lng && min_lat < max_lat) {
            return Err(GridError::EmptyBox);
        }
        Ok(BBox {
            min: GeoCoord { lng: min_lng, lat: min_lat },
            max: GeoCoord { lng: max_lng, lat: max_lat },
        })
    }

    /// A box from two corners given west-to-east. Boxes whose west edge lies
    /// east of their east edge cross the antimeridian and are rejected; use
    /// [`BBox::split_antimeridian`] for those.
    pub fn from_corners(sw: GeoCoord<S>, ne: GeoCoord<S>) -> Result<Self, GridError> {
        if sw.lng > ne.lng {
            return Err(GridError::CrossesAntimeridian);
        }
        Self::new(sw.lng, sw.lat, ne.lng, ne.lat)
    }

    /// Splits a west-to-east box that wraps past 180° into two boxes.
    pub fn split_antimeridian(west: S, south: S, east: S, north: S) -> Result<Vec<Self>, GridError> {
        if west <= east {
            return Ok(vec![Self::new(west, south, east, north)?]);
        }
        Ok(vec![
            Self::new(west, south, S::lit(180.0), north)?,
            Self::new(S::lit(-180.0), south, east, north)?,
        ])
    }

    /// Closed envelope of a point set; may be degenerate. `None` for no points.
    pub fn envelope(points: &[GeoCoord<S>]) -> Option<Self> {
        let first = points.first()?;
        let mut min = *first;
        let mut max = *first;
        for p in &points[1..] {
            min.lng = min.lng.min(p.lng);
            min.lat = min.lat.min(p.lat);
            max.lng = max.lng.max(p.lng);
            max.lat = max.lat.max(p.lat);
        }
        Some(BBox { min, max })
    }

    pub(crate) fn from_raw(min: GeoCoord<S>, max: GeoCoord<S>) -> Self {
        BBox { min, max }
    }

    pub fn min(&self) -> GeoCoord<S> {
        self.min
    }

    pub fn max(&self) -> GeoCoord<S> {
        self.max
    }

    pub fn width(&self) -> S {
        self.max.lng - self.min.lng
    }

    pub fn height(&self) -> S {
        self.max.lat - self.min.lat
    }

    /// Planar area in squared degrees.
    pub fn area(&self) -> S {
        self.width() * self.height()
    }

    /// Half-open containment `min <= p < max`.
    pub fn contains(&self, p: &GeoCoord<S>) -> bool {
        p.lng >= self.min.lng && p.lng < self.max.lng && p.lat >= self.min.lat && p.lat < self.max.lat
    }

    /// Area of the intersection with another box (zero when disjoint).
    pub fn overlap_area(&self, other: &BBox<S>) -> S {
        let w = self.max.lng.min(other.max.lng) - self.min.lng.max(other.min.lng);
        let h = self.max.lat.min(other.max.lat) - self.min.lat.max(other.min.lat);
        if w <= S::zero() || h <= S::zero() {
            S::zero()
        } else {
            w * h
        }
    }

    pub fn center(&self) -> GeoCoord<S> {
        let two = S::lit(2.0);
        GeoCoord {
            lng: (self.min.lng + self.max.lng) / two,
            lat: (self.min.lat + self.max.lat) / two,
        }
    }
}

/// Geometry reduced to what tiling and post-filtering need.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry<S> {
    Point(GeoCoord<S>),
    MultiPoint(Vec<GeoCoord<S>>),
    /// Any other GeoJSON geometry, represented by its closed envelope.
    Other { kind: String, bbox: BBox<S> },
}

impl<S: Scalar> Geometry<S> {
    pub fn multi_point(points: Vec<GeoCoord<S>>) -> Result<Self, GridError> {
        if points.is_empty() {
            return Err(GridError::EmptyGeometry);
        }
        Ok(Geometry::MultiPoint(points))
    }

    pub fn kind(&self) -> &str {
        match self {
            Geometry::Point(_) => "Point",
            Geometry::MultiPoint(_) => "MultiPoint",
            Geometry::Other { kind, .. } => kind,
        }
    }

    pub fn points(&self) -> &[GeoCoord<S>] {
        match self {
            Geometry::Point(p) => std::slice::from_ref(p),
            Geometry::MultiPoint(ps) => ps,
            Geometry::Other { .. } => &[],
        }
    }

    pub fn bbox(&self) -> BBox<S> {
        match self {
            Geometry::Point(p) => BBox::from_raw(*p, *p),
            Geometry::MultiPoint(ps) => BBox::envelope(ps).expect("multipoint is non-empty"),
            Geometry::Other { bbox, .. } => *bbox,
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Geometry::Point(p) => p.is_valid(),
            Geometry::MultiPoint(ps) => !ps.is_empty() && ps.iter().all(GeoCoord::is_valid),
            Geometry::Other { bbox, .. } => {
                bbox.min.is_valid() && bbox.max.lng <= S::lit(180.0) && bbox.max.lat <= S::lit(90.0)
            }
        }
    }

    /// Intersect predicate against a half-open query box.
    pub fn intersects(&self, q: &BBox<S>) -> bool {
        match self {
            Geometry::Point(_) | Geometry::MultiPoint(_) => self.points().iter().any(|p| q.contains(p)),
            Geometry::Other { bbox, .. } => {
                bbox.min.lng < q.max.lng
                    && bbox.max.lng >= q.min.lng
                    && bbox.min.lat < q.max.lat
                    && bbox.max.lat >= q.min.lat
            }
        }
    }

    /// Inclusion predicate: the whole geometry lies inside the half-open query box.
    pub fn within(&self, q: &BBox<S>) -> bool {
        match self {
            Geometry::Point(_) | Geometry::MultiPoint(_) => self.points().iter().all(|p| q.contains(p)),
            Geometry::Other { bbox, .. } => {
                bbox.min.lng >= q.min.lng
                    && bbox.max.lng < q.max.lng
                    && bbox.min.lat >= q.min.lat
                    && bbox.max.lat < q.max.lat
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(a: f64, b: f64, c: f64, d: f64) -> BBox<f64> {
        BBox::new(a, b, c, d).unwrap()
    }

    #[test]
    fn coord_ranges_are_half_open() {
        assert!(GeoCoord::new(-180.0, -90.0).is_ok());
        assert!(GeoCoord::new(180.0, 0.0).is_err());
        assert!(GeoCoord::new(0.0, 90.0).is_err());
        assert!(GeoCoord::new(12.51133f32, 41.8919).is_ok());
    }

    #[test]
    fn box_validation() {
        assert_eq!(BBox::new(1.0, 1.0, 1.0, 2.0), Err(GridError::EmptyBox));
        assert!(BBox::new(-181.0, 0.0, 1.0, 2.0).is_err());
        assert!(BBox::new(179.0, 0.0, 180.0, 90.0).is_ok());
        let sw = GeoCoord { lng: 179.5, lat: 0.0 };
        let ne = GeoCoord { lng: -179.5, lat: 1.0 };
        assert_eq!(BBox::from_corners(sw, ne), Err(GridError::CrossesAntimeridian));
        let parts = BBox::<f64>::split_antimeridian(179.5, 0.0, -179.5, 1.0).unwrap();
        assert_eq!(parts.len(), 2);
        assert!((parts[0].area() + parts[1].area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_area() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(a.overlap_area(&bb(1.0, 1.0, 3.0, 3.0)), 1.0);
        assert_eq!(a.overlap_area(&bb(2.0, 0.0, 3.0, 1.0)), 0.0);
    }

    #[test]
    fn predicates_use_half_open_query_boxes() {
        let q = bb(10.0, 10.0, 11.0, 11.0);
        let on_max_edge = Geometry::Point(GeoCoord { lng: 11.0, lat: 10.5 });
        assert!(!on_max_edge.intersects(&q));
        let on_min_edge = Geometry::Point(GeoCoord { lng: 10.0, lat: 10.5 });
        assert!(on_min_edge.intersects(&q) && on_min_edge.within(&q));

        let mp = Geometry::multi_point(vec![
            GeoCoord { lng: 10.5, lat: 10.5 },
            GeoCoord { lng: 12.0, lat: 10.5 },
        ])
        .unwrap();
        assert!(mp.intersects(&q));
        assert!(!mp.within(&q));

        let line = Geometry::Other {
            kind: "LineString".into(),
            bbox: BBox::envelope(&[GeoCoord { lng: 9.0, lat: 10.5 }, GeoCoord { lng: 10.0, lat: 10.5 }]).unwrap(),
        };
        assert!(line.intersects(&q));
        assert!(!line.within(&q));
    }

    #[test]
    fn empty_multipoint_rejected() {
        assert_eq!(Geometry::<f64>::multi_point(vec![]), Err(GridError::EmptyGeometry));
    }
}
