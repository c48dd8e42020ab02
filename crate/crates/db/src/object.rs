//! OGB-Data objects and the OGB-Tile container.

use bytes::{BufMut, Bytes};
use geoicn_core::geogrid::{GridSpec, TileId};
use geoicn_core::geojson::ValidTime;
use geoicn_core::Name;
use geoicn_net::icn::{put_name, Data, Packet, PacketError, Reader};

use crate::DbError;

pub const DATA: &str = "DATA";
pub const TILE: &str = "TILE";
pub const IP_RES: &str = "IP-RES";
pub const DELETE: &str = "DELETE";
/// Marker of the temporal suffix `/T/{size}/{start}` of a tile-query.
pub const PERIOD: &str = "T";

const KIND_MASTER: u8 = 0;
const KIND_REFERENCE: u8 = 1;
const HAS_TIME: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    /// The GeoJSON document itself.
    Master(Bytes),
    /// Name of the master object.
    Reference(Name),
}

/// Object content: master or reference, plus the validity interval so
/// engines can filter references by period without the master.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectBody {
    pub valid_time: Option<ValidTime>,
    pub body: Body,
}

impl ObjectBody {
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.put_u8(match self.body {
            Body::Master(_) => KIND_MASTER,
            Body::Reference(_) => KIND_REFERENCE,
        });
        let vt = self.valid_time.unwrap_or(ValidTime { start: 0, end: 0 });
        b.put_u8(if self.valid_time.is_some() { HAS_TIME } else { 0 });
        b.put_i64(vt.start);
        b.put_i64(vt.end);
        match &self.body {
            Body::Master(json) => b.put_slice(json),
            Body::Reference(master) => put_name(&mut b, master),
        }
        b
    }

    pub fn decode(buf: &[u8]) -> Result<ObjectBody, DbError> {
        let bad = |_: PacketError| DbError::Malformed("object body");
        let mut r = Reader::new(buf);
        let kind = r.u8().map_err(bad)?;
        let flags = r.u8().map_err(bad)?;
        let start = r.u64().map_err(bad)? as i64;
        let end = r.u64().map_err(bad)? as i64;
        let valid_time = if flags & HAS_TIME != 0 {
            Some(ValidTime::new(start, end).map_err(|_| DbError::Malformed("object interval"))?)
        } else {
            None
        };
        let body = match kind {
            KIND_MASTER => Body::Master(Bytes::copy_from_slice(&buf[r.pos..])),
            KIND_REFERENCE => {
                let n = r.name().map_err(bad)?;
                if !r.is_empty() {
                    return Err(DbError::Malformed("reference trailer"));
                }
                Body::Reference(n)
            }
            _ => return Err(DbError::Malformed("object kind")),
        };
        Ok(ObjectBody { valid_time, body })
    }
}

/// The identity encoded in an OGB-Data name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectKey {
    pub tile: TileId,
    pub tid: String,
    pub cid: String,
    pub uid: String,
    pub oid: String,
}

impl ObjectKey {
    /// `tile-prefix/DATA/tid/cid/uid/oid`.
    pub fn name(&self, grid: GridSpec) -> Name {
        grid.tile_prefix(self.tile)
            .child(DATA)
            .child(&self.tid)
            .child(&self.cid)
            .child(&self.uid)
            .child(&self.oid)
    }

    pub fn parse(grid: GridSpec, n: &Name) -> Result<ObjectKey, DbError> {
        let tile = grid.parse_tile_prefix(n)?;
        let at = GridSpec::prefix_len(tile.level);
        let part = |i: usize| n.get_str(at + i).filter(|s| !s.is_empty()).ok_or(DbError::Malformed("object name"));
        if n.len() != at + 5 || part(0)? != DATA {
            return Err(DbError::Malformed("object name"));
        }
        Ok(ObjectKey {
            tile,
            tid: part(1)?.to_string(),
            cid: part(2)?.to_string(),
            uid: part(3)?.to_string(),
            oid: part(4)?.to_string(),
        })
    }
}

/// A parsed, not yet verified OGB-Data packet.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredObject {
    pub key: ObjectKey,
    pub body: ObjectBody,
    pub data: Data,
}

impl StoredObject {
    pub fn from_data(grid: GridSpec, data: Data) -> Result<StoredObject, DbError> {
        let key = ObjectKey::parse(grid, &data.name)?;
        let body = ObjectBody::decode(&data.payload)?;
        Ok(StoredObject { key, body, data })
    }

    /// Unsigned OGB-Data for `key` carrying `body`.
    pub fn build(grid: GridSpec, key: &ObjectKey, body: &ObjectBody) -> Data {
        Data::new(key.name(grid), body.encode())
    }

    pub fn is_master(&self) -> bool {
        matches!(self.body.body, Body::Master(_))
    }

    /// The master's name: this object's own name, or the one it points to.
    pub fn master_name(&self) -> &Name {
        match &self.body.body {
            Body::Master(_) => &self.data.name,
            Body::Reference(m) => m,
        }
    }
}

/// OGB-Tile payload: a sequence of `[u32 length][encoded Data]`.
pub fn encode_tile<'a>(items: impl IntoIterator<Item = &'a Data>) -> Vec<u8> {
    let mut b = Vec::new();
    for d in items {
        let enc = Packet::Data(d.clone()).encode();
        b.put_u32(enc.len() as u32);
        b.put_slice(&enc);
    }
    b
}

pub fn decode_tile(buf: &[u8]) -> Result<Vec<Data>, DbError> {
    let mut r = Reader::new(buf);
    let mut out = Vec::new();
    while !r.is_empty() {
        let bad = |_| DbError::Malformed("tile payload");
        let len = r.u32().map_err(bad)? as usize;
        match Packet::decode(r.take(len).map_err(bad)?) {
            Ok(Packet::Data(d)) => out.push(d),
            _ => return Err(DbError::Malformed("tile item")),
        }
    }
    Ok(out)
}

/// `tile-prefix/TILE/tid/cid`, optionally followed by `/T/{size}/{start}`.
pub fn tile_query_name(grid: GridSpec, tile: TileId, tid: &str, cid: &str, period: Option<(i64, i64)>) -> Name {
    let n = grid.tile_prefix(tile).child(TILE).child(tid).child(cid);
    match period {
        Some((size, start)) => n.child(PERIOD).child(size.to_string()).child(start.to_string()),
        None => n,
    }
}

/// A parsed tile-query base name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileQuery {
    pub tile: TileId,
    pub tid: String,
    pub cid: String,
    /// `(size_minutes, start_minute)`.
    pub period: Option<(i64, i64)>,
}

impl TileQuery {
    pub fn parse(grid: GridSpec, n: &Name) -> Result<TileQuery, DbError> {
        let bad = DbError::Malformed("tile-query name");
        let tile = grid.parse_tile_prefix(n)?;
        let at = GridSpec::prefix_len(tile.level);
        let part = |i: usize| n.get_str(at + i).filter(|s| !s.is_empty());
        if part(0) != Some(TILE) {
            return Err(bad);
        }
        let (Some(tid), Some(cid)) = (part(1), part(2)) else { return Err(bad) };
        let period = match n.len() - at {
            3 => None,
            6 if part(3) == Some(PERIOD) => {
                let num = |i| part(i).and_then(|s| s.parse::<i64>().ok());
                match (num(4), num(5)) {
                    (Some(size), Some(start)) if size > 0 => Some((size, start)),
                    _ => return Err(bad),
                }
            }
            _ => return Err(bad),
        };
        Ok(TileQuery { tile, tid: tid.to_string(), cid: cid.to_string(), period })
    }

    /// Closed-interval overlap of an object's validity with the period.
    /// Objects without a validity interval never match a period.
    pub fn admits(&self, vt: Option<ValidTime>) -> bool {
        match (self.period, vt) {
            (None, _) => true,
            (Some((size, start)), Some(vt)) => vt.start < (start + size) * 60 && vt.end >= start * 60,
            (Some(_), None) => false,
        }
    }
}
