//! GeoJSON Feature parsing for stored objects.
//!
//! Point and MultiPoint geometries are kept as coordinates; every other
//! geometry type is reduced to the envelope of its positions.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::geogrid::{BBox, GeoCoord, Geometry, GridError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoJsonError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("not a GeoJSON Feature")]
    NotAFeature,
    #[error("missing or invalid property `{0}`")]
    Property(&'static str),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid temporal extent")]
    Temporal,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Closed validity interval `[start, end]` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValidTime {
    pub start: i64,
    pub end: i64,
}

impl ValidTime {
    pub fn new(start: i64, end: i64) -> Result<Self, GeoJsonError> {
        if start <= end {
            Ok(ValidTime { start, end })
        } else {
            Err(GeoJsonError::Temporal)
        }
    }

    /// Overlap with a half-open query interval `[s, e)`.
    pub fn overlaps(&self, s: i64, e: i64) -> bool {
        self.start < e && self.end >= s
    }
}

/// A parsed Feature with its mandatory identity properties.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature<S> {
    pub oid: String,
    pub tid: String,
    pub uid: String,
    pub cid: String,
    pub geometry: Geometry<S>,
    pub valid_time: Option<ValidTime>,
    /// The original document, re-serialized as the stored payload.
    pub raw: Value,
}

/// Identifier charset for tenant, collection and user ids (they become name
/// components and certificate names).
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

impl<S: Scalar> Feature<S> {
    pub fn parse(bytes: &[u8]) -> Result<Self, GeoJsonError> {
        let v: Value = serde_json::from_slice(bytes).map_err(|e| GeoJsonError::Json(e.to_string()))?;
        Self::from_value(v)
    }

    pub fn from_value(v: Value) -> Result<Self, GeoJsonError> {
        let obj = v.as_object().ok_or(GeoJsonError::NotAFeature)?;
        if obj.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(GeoJsonError::NotAFeature);
        }
        let props = obj
            .get("properties")
            .and_then(Value::as_object)
            .ok_or(GeoJsonError::Property("properties"))?;
        let prop = |key: &'static str| -> Result<String, GeoJsonError> {
            match props.get(key) {
                Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
                Some(Value::Number(n)) => Ok(n.to_string()),
                _ => Err(GeoJsonError::Property(key)),
            }
        };
        let oid = prop("oid")?;
        let tid = prop("tid")?;
        let uid = prop("uid")?;
        let cid = prop("cid")?;
        for (k, v) in [("tid", &tid), ("uid", &uid), ("cid", &cid)] {
            if !is_identifier(v) {
                return Err(GeoJsonError::Property(k));
            }
        }
        let geometry = parse_geometry(obj.get("geometry").ok_or_else(|| GeoJsonError::Geometry("missing".into()))?)?;
        let extent = obj
            .get("temporalExtent")
            .or_else(|| props.get("temporalExtent"));
        let valid_time = extent.map(parse_valid_time).transpose()?;
        Ok(Feature { oid, tid, uid, cid, geometry, valid_time, raw: v })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.raw).expect("JSON value serializes")
    }

    /// Builds a point feature; used by generators and tests.
    pub fn point(oid: &str, tid: &str, cid: &str, uid: &str, at: GeoCoord<S>, extra: Map<String, Value>) -> Self {
        let mut props = extra;
        for (k, v) in [("oid", oid), ("tid", tid), ("cid", cid), ("uid", uid)] {
            props.insert(k.into(), Value::String(v.into()));
        }
        let raw = serde_json::json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [at.lng.as_f64(), at.lat.as_f64()]},
            "properties": props,
        });
        Self::from_value(raw).expect("generated point feature is valid")
    }
}

fn parse_valid_time(v: &Value) -> Result<ValidTime, GeoJsonError> {
    let vt = v.get("validTime").ok_or(GeoJsonError::Temporal)?;
    let pair = match vt {
        Value::Array(_) => vt,
        Value::Object(o) => o.get("value").ok_or(GeoJsonError::Temporal)?,
        _ => return Err(GeoJsonError::Temporal),
    };
    match pair.as_array().map(Vec::as_slice) {
        Some([a, b]) => ValidTime::new(
            a.as_i64().ok_or(GeoJsonError::Temporal)?,
            b.as_i64().ok_or(GeoJsonError::Temporal)?,
        ),
        _ => Err(GeoJsonError::Temporal),
    }
}

fn position<S: Scalar>(v: &Value) -> Result<GeoCoord<S>, GeoJsonError> {
    let bad = || GeoJsonError::Geometry(format!("bad position {v}"));
    let arr = v.as_array().ok_or_else(bad)?;
    if arr.len() < 2 {
        return Err(bad());
    }
    let lng = arr[0].as_f64().ok_or_else(bad)?;
    let lat = arr[1].as_f64().ok_or_else(bad)?;
    Ok(GeoCoord::new(S::lit(lng), S::lit(lat))?)
}

fn collect_positions<S: Scalar>(v: &Value, out: &mut Vec<GeoCoord<S>>) -> Result<(), GeoJsonError> {
    match v.as_array() {
        Some(arr) if arr.first().is_some_and(Value::is_number) => out.push(position(v)?),
        Some(arr) => {
            for x in arr {
                collect_positions(x, out)?;
            }
        }
        None => return Err(GeoJsonError::Geometry(format!("bad coordinates {v}"))),
    }
    Ok(())
}

fn geometry_positions<S: Scalar>(g: &Value, out: &mut Vec<GeoCoord<S>>) -> Result<(), GeoJsonError> {
    if let Some(parts) = g.get("geometries").and_then(Value::as_array) {
        for p in parts {
            geometry_positions(p, out)?;
        }
        return Ok(());
    }
    collect_positions(g.get("coordinates").ok_or_else(|| GeoJsonError::Geometry("no coordinates".into()))?, out)
}

pub fn parse_geometry<S: Scalar>(g: &Value) -> Result<Geometry<S>, GeoJsonError> {
    let kind = g
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| GeoJsonError::Geometry("missing type".into()))?;
    match kind {
        "Point" => Ok(Geometry::Point(position(
            g.get("coordinates").ok_or_else(|| GeoJsonError::Geometry("no coordinates".into()))?,
        )?)),
        "MultiPoint" => {
            let coords = g
                .get("coordinates")
                .and_then(Value::as_array)
                .ok_or_else(|| GeoJsonError::Geometry("no coordinates".into()))?;
            let pts = coords.iter().map(position).collect::<Result<Vec<_>, _>>()?;
            Ok(Geometry::multi_point(pts)?)
        }
        other => {
            let mut pts = Vec::new();
            geometry_positions(g, &mut pts)?;
            let bbox = BBox::envelope(&pts).ok_or_else(|| GeoJsonError::Geometry("empty geometry".into()))?;
            Ok(Geometry::Other { kind: other.to_string(), bbox })
        }
    }
}
