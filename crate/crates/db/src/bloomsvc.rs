//! Bloom-filter server: OR-combines the bucket state published by engines
//! and answers batched membership requests.
//!
//! Updates arrive as signed Interests `/OGB/BF/update/<engine>/<seq>` whose
//! parameters list `(bucket u32, direction u8)` pairs. Membership requests
//! are `/OGB/BF/member/<sha256 of params>` with the keys as parameters; the
//! reply is a bitmask, bit `i` (LSB first) for key `i`.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use bytes::{BufMut, Bytes};
use geoicn_core::Name;
use geoicn_net::icn::{parse_segment, segment, Data, Endpoint, Interest, Node, Reader};
use geoicn_net::trust::{Identity, Role, TrustStore};
use parking_lot::RwLock;
use sha2::{Digest, Sha256};

use crate::bloom::{BloomParams, Transition};
use crate::engine::BF_PREFIX;
use crate::DbError;

pub const MAX_MEMBER_BATCH: usize = 1024;

pub fn encode_update(t: &[Transition]) -> Vec<u8> {
    let mut b = Vec::with_capacity(4 + 5 * t.len());
    b.put_u32(t.len() as u32);
    for x in t {
        b.put_u32(x.index);
        b.put_u8(u8::from(x.set));
    }
    b
}

pub fn decode_update(buf: &[u8]) -> Result<Vec<Transition>, DbError> {
    let bad = |_| DbError::Malformed("BF update");
    let mut r = Reader::new(buf);
    let n = r.u32().map_err(bad)?;
    let out = (0..n)
        .map(|_| {
            let index = r.u32().map_err(bad)?;
            match r.u8().map_err(bad)? {
                0 => Ok(Transition { index, set: false }),
                1 => Ok(Transition { index, set: true }),
                _ => Err(DbError::Malformed("BF update direction")),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if !r.is_empty() {
        return Err(DbError::Malformed("BF update trailer"));
    }
    Ok(out)
}

pub fn encode_keys<S: AsRef<str>>(keys: &[S]) -> Vec<u8> {
    let mut b = Vec::new();
    b.put_u16(keys.len() as u16);
    for k in keys {
        b.put_u16(k.as_ref().len() as u16);
        b.put_slice(k.as_ref().as_bytes());
    }
    b
}

pub fn decode_keys(buf: &[u8]) -> Result<Vec<Vec<u8>>, DbError> {
    let bad = |_| DbError::Malformed("membership request");
    let mut r = Reader::new(buf);
    let n = r.u16().map_err(bad)? as usize;
    if n > MAX_MEMBER_BATCH {
        return Err(DbError::Malformed("membership batch too large"));
    }
    let keys = (0..n)
        .map(|_| {
            let len = r.u16().map_err(bad)? as usize;
            Ok(r.take(len).map_err(bad)?.to_vec())
        })
        .collect::<Result<Vec<_>, DbError>>()?;
    if !r.is_empty() {
        return Err(DbError::Malformed("membership trailer"));
    }
    Ok(keys)
}

/// Name of a membership request carrying `params`.
pub fn member_name(params: &[u8]) -> Name {
    let base: Name = BF_PREFIX.parse().expect("static name");
    base.child("member").child(hex::encode(Sha256::digest(params)))
}

pub fn decode_bitmask(mask: &[u8], n: usize) -> Result<Vec<bool>, DbError> {
    if mask.len() != n.div_ceil(8) {
        return Err(DbError::Malformed("membership reply"));
    }
    Ok((0..n).map(|i| mask[i / 8] & (1 << (i % 8)) != 0).collect())
}

struct EngineBits {
    bits: HashSet<u32>,
    last_seq: u64,
}

struct State {
    engines: HashMap<String, EngineBits>,
    /// Number of engines holding each bucket set.
    refcount: Vec<u16>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BloomStats {
    pub updates: u64,
    pub duplicates: u64,
    pub dropped: u64,
    pub membership_requests: u64,
}

struct Inner {
    params: BloomParams,
    identity: Arc<Identity>,
    trust: Arc<TrustStore>,
    state: RwLock<State>,
    updates: AtomicU64,
    duplicates: AtomicU64,
    dropped: AtomicU64,
    membership_requests: AtomicU64,
}

pub struct BloomServer {
    inner: Arc<Inner>,
    endpoint: Endpoint,
}

impl BloomServer {
    /// Serves `/OGB/BF` on `node`, accepting updates from `engines` only.
    pub fn start(node: &Node, params: BloomParams, engines: &[String], identity: Arc<Identity>, trust: Arc<TrustStore>) -> BloomServer {
        let inner = Arc::new(Inner {
            params,
            identity,
            trust,
            state: RwLock::new(State {
                engines: engines.iter().map(|e| (e.clone(), EngineBits { bits: HashSet::new(), last_seq: 0 })).collect(),
                refcount: vec![0; params.m as usize],
            }),
            updates: AtomicU64::new(0),
            duplicates: AtomicU64::new(0),
            dropped: AtomicU64::new(0),
            membership_requests: AtomicU64::new(0),
        });
        let endpoint = Endpoint::new(node);
        endpoint.advertise(BF_PREFIX.parse().expect("static name"));
        let h = inner.clone();
        endpoint.serve(1, Arc::new(move |i: Interest| h.handle(i)));
        BloomServer { inner, endpoint }
    }

    pub fn params(&self) -> BloomParams {
        self.inner.params
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        let st = self.inner.state.read();
        self.inner.params.indices(key).all(|i| st.refcount[i as usize] > 0)
    }

    pub fn membership<K: AsRef<[u8]>>(&self, keys: &[K]) -> Vec<bool> {
        keys.iter().map(|k| self.contains(k.as_ref())).collect()
    }

    /// Buckets currently set.
    pub fn set_bits(&self) -> Vec<u32> {
        let st = self.inner.state.read();
        (0..self.inner.params.m).filter(|&i| st.refcount[i as usize] > 0).collect()
    }

    pub fn stats(&self) -> BloomStats {
        let g = |a: &AtomicU64| a.load(Ordering::Relaxed);
        BloomStats {
            updates: g(&self.inner.updates),
            duplicates: g(&self.inner.duplicates),
            dropped: g(&self.inner.dropped),
            membership_requests: g(&self.inner.membership_requests),
        }
    }

    /// Applies an update as if received from `engine`; returns false when
    /// the engine is unknown.
    pub fn apply(&self, engine: &str, seq: u64, t: &[Transition]) -> bool {
        self.inner.apply(engine, seq, t)
    }
}

impl Inner {
    fn handle(&self, i: Interest) -> Option<Data> {
        let (base, idx) = parse_segment(&i.name)?;
        let at = 2;
        let reply = match (base.get_str(at), idx) {
            (Some("update"), 0) => self.on_update(&i, &base),
            (Some("member"), 0) => self.on_member(&i, &base),
            _ => None,
        };
        if reply.is_none() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        reply
    }

    fn reply(&self, base: &Name, payload: Vec<u8>) -> Data {
        let mut d = segment(base, Bytes::from(payload), usize::MAX, 0, 0).remove(0);
        self.identity.sign_data(&mut d);
        d
    }

    fn on_update(&self, i: &Interest, base: &Name) -> Option<Data> {
        if base.len() != 5 {
            return None;
        }
        let engine = base.get_str(3)?;
        let seq: u64 = base.get_str(4)?.parse().ok()?;
        let cert = self.trust.verify_interest(i).ok()?;
        if Role::parse(&cert.name).ok()? != Role::Node(engine.to_string()) {
            return None;
        }
        let t = decode_update(i.params.as_deref()?).ok()?;
        if t.iter().any(|x| x.index >= self.params.m) || !self.apply(engine, seq, &t) {
            return None;
        }
        Some(self.reply(base, Vec::new()))
    }

    fn apply(&self, engine: &str, seq: u64, t: &[Transition]) -> bool {
        let mut st = self.state.write();
        let State { engines, refcount } = &mut *st;
        let Some(e) = engines.get_mut(engine) else { return false };
        if seq <= e.last_seq {
            self.duplicates.fetch_add(1, Ordering::Relaxed);
            return true;
        }
        e.last_seq = seq;
        for x in t {
            let rc = &mut refcount[x.index as usize];
            if x.set {
                if e.bits.insert(x.index) {
                    *rc += 1;
                }
            } else if e.bits.remove(&x.index) {
                *rc -= 1;
            }
        }
        self.updates.fetch_add(1, Ordering::Relaxed);
        true
    }

    fn on_member(&self, i: &Interest, base: &Name) -> Option<Data> {
        let params = i.params.as_deref()?;
        if base.len() != 4 || member_name(params) != *base {
            return None;
        }
        let keys = decode_keys(params).ok()?;
        self.membership_requests.fetch_add(1, Ordering::Relaxed);
        let st = self.state.read();
        let mut mask = vec![0u8; keys.len().div_ceil(8)];
        for (n, k) in keys.iter().enumerate() {
            if self.params.indices(k).all(|b| st.refcount[b as usize] > 0) {
                mask[n / 8] |= 1 << (n % 8);
            }
        }
        drop(st);
        Some(self.reply(base, mask))
    }
}
