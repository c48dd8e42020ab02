//! Front-end library: range-queries (tessellation, optional Bloom-filter
//! pre-filter, parallel tile-queries, validation, reference resolution and
//! post-filtering), level-replicated insertion and deletion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use bytes::Bytes;
use geoicn_core::geogrid::{GridSpec, TileId};
use geoicn_core::tessellate::{constrained_tessellation, min_stretch, temporal_decompose, MAX_PERIODS};
use geoicn_core::{BBox, Feature, Geometry, Name};
use geoicn_net::icn::{Data, Endpoint, GetOptions, Node};
use geoicn_net::trust::{check_provenance, Identity, TrustStore};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::bloom::bloom_key;
use crate::bloomsvc::{decode_bitmask, encode_keys, member_name, MAX_MEMBER_BATCH};
use crate::bulk::BulkClient;
use crate::object::{decode_tile, tile_query_name, Body, ObjectBody, ObjectKey, StoredObject, DELETE, IP_RES};
use crate::{pause_ms, CostModel, DbError, DeleteStatus, InsertStatus};

pub const DEFAULT_K: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Any part of the object lies in the box.
    Intersect,
    /// The whole object lies in the box.
    Include,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeQuery {
    pub bbox: BBox,
    pub mode: Mode,
    pub tid: String,
    pub cid: String,
    /// Half-open `[start, end)` in epoch seconds.
    pub interval: Option<(i64, i64)>,
    /// Tile budget; `None` uses every level-2 tile touching the box.
    pub k: Option<usize>,
    pub use_bf: bool,
    pub parallelism: usize,
}

impl RangeQuery {
    pub fn new(bbox: BBox, tid: impl Into<String>, cid: impl Into<String>) -> RangeQuery {
        RangeQuery {
            bbox,
            mode: Mode::Intersect,
            tid: tid.into(),
            cid: cid.into(),
            interval: None,
            k: Some(DEFAULT_K),
            use_bf: false,
            parallelism: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct QueryStats {
    pub tessellation_ms: f64,
    pub bf_ms: f64,
    pub batch_ms: f64,
    pub resolve_ms: f64,
    pub postfilter_ms: f64,
    pub tiles: usize,
    pub tiles_after_bf: usize,
    pub bf_fallback: bool,
    pub subqueries: usize,
    pub items: usize,
    pub bytes: usize,
    pub references_resolved: usize,
    pub invalid: usize,
    pub max_inflight: usize,
}

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub objects: Vec<Feature>,
    pub stats: QueryStats,
}

impl QueryResult {
    pub fn oids(&self) -> BTreeSet<String> {
        self.objects.iter().map(|f| f.oid.clone()).collect()
    }
}

/// Result of one batch of tile-queries.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub tiles: Vec<Vec<Data>>,
    pub bytes: usize,
    pub max_inflight: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InsertReport {
    pub objects: usize,
    pub stored: usize,
    pub engines: usize,
    pub rejected: Vec<(Name, InsertStatus)>,
}

/// The identity of a stored object apart from its tile.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectId {
    pub tid: String,
    pub cid: String,
    pub uid: String,
    pub oid: String,
}

impl ObjectId {
    pub fn of(f: &Feature) -> ObjectId {
        ObjectId { tid: f.tid.clone(), cid: f.cid.clone(), uid: f.uid.clone(), oid: f.oid.clone() }
    }

    fn at(&self, tile: TileId) -> ObjectKey {
        ObjectKey { tile, tid: self.tid.clone(), cid: self.cid.clone(), uid: self.uid.clone(), oid: self.oid.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeleteReport {
    pub tiles: Vec<(Name, Result<DeleteStatus, DbError>)>,
}

impl DeleteReport {
    /// `Deleted` if any tile removed the object and none refused,
    /// `Denied` if any tile refused, otherwise `NotFound`.
    pub fn status(&self) -> Result<DeleteStatus, DbError> {
        let mut deleted = false;
        for (_, r) in &self.tiles {
            match r {
                Err(e) => return Err(e.clone()),
                Ok(DeleteStatus::Denied) => return Ok(DeleteStatus::Denied),
                Ok(DeleteStatus::Deleted) => deleted = true,
                Ok(DeleteStatus::NotFound) => {}
            }
        }
        Ok(if deleted { DeleteStatus::Deleted } else { DeleteStatus::NotFound })
    }
}

#[derive(Debug, Clone)]
pub struct FrontendConfig {
    pub lifetime_ms: u32,
    pub retries: u32,
    pub cost: Option<CostModel>,
    pub max_periods: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig { lifetime_ms: 2000, retries: 2, cost: None, max_periods: MAX_PERIODS }
    }
}

pub struct Frontend {
    endpoint: Endpoint,
    trust: Arc<TrustStore>,
    grid: GridSpec,
    config: Mutex<FrontendConfig>,
    bulk: BulkClient,
}

/// Runs `f` over `items` on up to `p` scoped threads, keeping order. The
/// first error stops further work and is returned.
fn parallel<T: Sync, R: Send>(
    items: &[T],
    p: usize,
    f: impl Fn(&T) -> Result<R, DbError> + Sync,
) -> (Result<Vec<R>, DbError>, usize) {
    let next = AtomicUsize::new(0);
    let inflight = AtomicUsize::new(0);
    let peak = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let failure: Mutex<Option<DbError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..p.max(1).min(items.len()) {
            s.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let now = inflight.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                let r = f(item);
                inflight.fetch_sub(1, Ordering::SeqCst);
                match r {
                    Ok(v) => *slots[i].lock() = Some(v),
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        failure.lock().get_or_insert(e);
                    }
                }
            });
        }
    });
    let peak = peak.load(Ordering::SeqCst);
    if let Some(e) = failure.into_inner() {
        return (Err(e), peak);
    }
    (Ok(slots.into_iter().map(|s| s.into_inner().expect("every slot filled")).collect()), peak)
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

impl Frontend {
    pub fn new(node: &Node, trust: Arc<TrustStore>, config: FrontendConfig) -> Frontend {
        Frontend {
            endpoint: Endpoint::new(node),
            trust,
            grid: GridSpec::OGB,
            config: Mutex::new(config),
            bulk: BulkClient::new(),
        }
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn trust(&self) -> &Arc<TrustStore> {
        &self.trust
    }

    pub fn set_cost(&self, cost: Option<CostModel>) {
        self.config.lock().cost = cost;
    }

    fn opts(&self, user: &Arc<Identity>) -> GetOptions {
        let c = self.config.lock();
        GetOptions::default()
            .with_lifetime(c.lifetime_ms)
            .with_retries(c.retries)
            .with_signer(user.clone())
            .with_validator(self.trust.clone())
    }

    /// Tiles covering the query box: constrained to `k`, or every level-2 tile.
    pub fn tessellate(&self, q: &RangeQuery) -> Result<Vec<TileId>, DbError> {
        match q.k {
            Some(k) => Ok(constrained_tessellation(&q.bbox, k).map_err(|e| DbError::Invalid(e.to_string()))?.tiles),
            None => Ok(min_stretch(&q.bbox).tiles),
        }
    }

    /// Tile-query names for `tiles`, crossed with the covering periods of
    /// the interval when one is given.
    pub fn subqueries(&self, tiles: &[TileId], tid: &str, cid: &str, interval: Option<(i64, i64)>) -> Result<Vec<Name>, DbError> {
        let periods = match interval {
            Some((s, e)) => Some(
                temporal_decompose(s, e, self.config.lock().max_periods)
                    .map_err(|e| DbError::Invalid(e.to_string()))?
                    .tiles,
            ),
            None => None,
        };
        let mut out = Vec::new();
        for t in tiles {
            match &periods {
                Some(ps) => {
                    out.extend(ps.iter().map(|p| tile_query_name(self.grid, *t, tid, cid, Some((p.size_minutes, p.start_minute)))))
                }
                None => out.push(tile_query_name(self.grid, *t, tid, cid, None)),
            }
        }
        Ok(out)
    }

    /// Sub-query names of a range-query, without Bloom filtering.
    pub fn decompose(&self, q: &RangeQuery) -> Result<Vec<Name>, DbError> {
        let tiles = self.tessellate(q)?;
        self.subqueries(&tiles, &q.tid, &q.cid, q.interval)
    }

    /// Tiles of `tiles` the Bloom-filter server reports as possibly non-void.
    pub fn prefilter(&self, user: &Arc<Identity>, tiles: &[TileId], tid: &str, cid: &str) -> Result<Vec<TileId>, DbError> {
        let opts = self.opts(user);
        let mut out = Vec::new();
        for chunk in tiles.chunks(MAX_MEMBER_BATCH) {
            let keys: Vec<String> = chunk.iter().map(|t| bloom_key(self.grid, *t, tid, cid)).collect();
            let params = encode_keys(&keys);
            let name = member_name(&params);
            let mask = self.endpoint.get(&name, &opts.clone().with_params(params))?;
            let bits = decode_bitmask(&mask, chunk.len())?;
            out.extend(chunk.iter().zip(bits).filter(|(_, b)| *b).map(|(t, _)| *t));
        }
        Ok(out)
    }

    /// Fetches a batch of tile-queries with at most `parallelism` in flight,
    /// then applies the per-tile query-handler cost and the per-batch cost.
    pub fn tile_batch(&self, user: &Arc<Identity>, names: &[Name], parallelism: usize) -> Result<Batch, DbError> {
        let opts = self.opts(user);
        let bytes = AtomicUsize::new(0);
        let (res, peak) = parallel(names, parallelism, |n| {
            let payload = self
                .endpoint
                .get(n, &opts)
                .map_err(|source| DbError::TileQuery { name: n.clone(), source })?;
            bytes.fetch_add(payload.len(), Ordering::Relaxed);
            decode_tile(&payload)
        });
        let tiles = res?;
        if let Some(cost) = self.config.lock().cost {
            let post: f64 = tiles.iter().map(|t| cost.handler_ms(t.len())).sum();
            pause_ms(post + cost.c3_ms);
        }
        Ok(Batch { tiles, bytes: bytes.into_inner(), max_inflight: peak })
    }

    /// Verifies an item's signature, chain and ownership.
    fn check_item(&self, d: Data) -> Option<StoredObject> {
        let cert = self.trust.verify_data(&d).ok()?;
        if !check_provenance(&d.name, &cert.name) {
            return None;
        }
        StoredObject::from_data(self.grid, d).ok()
    }

    pub fn range_query(&self, user: &Arc<Identity>, q: &RangeQuery) -> Result<QueryResult, DbError> {
        let mut stats = QueryStats::default();
        let t = Instant::now();
        let mut tiles = self.tessellate(q)?;
        stats.tessellation_ms = ms_since(t);
        stats.tiles = tiles.len();

        if q.use_bf {
            let t = Instant::now();
            match self.prefilter(user, &tiles, &q.tid, &q.cid) {
                Ok(kept) => tiles = kept,
                Err(e) => {
                    log::warn!("Bloom filter unavailable, querying every tile: {e}");
                    stats.bf_fallback = true;
                }
            }
            stats.bf_ms = ms_since(t);
        }
        stats.tiles_after_bf = tiles.len();

        let names = self.subqueries(&tiles, &q.tid, &q.cid, q.interval)?;
        stats.subqueries = names.len();
        let t = Instant::now();
        let batch = self.tile_batch(user, &names, q.parallelism)?;
        stats.batch_ms = ms_since(t);
        stats.bytes = batch.bytes;
        stats.max_inflight = batch.max_inflight;

        let t = Instant::now();
        let mut masters: HashMap<Name, StoredObject> = HashMap::new();
        let mut wanted: BTreeSet<Name> = BTreeSet::new();
        for d in batch.tiles.into_iter().flatten() {
            stats.items += 1;
            match self.check_item(d) {
                Some(o) if o.key.tid == q.tid && o.key.cid == q.cid => {
                    if o.is_master() {
                        masters.insert(o.data.name.clone(), o);
                    } else {
                        wanted.insert(o.master_name().clone());
                    }
                }
                _ => stats.invalid += 1,
            }
        }
        let missing: Vec<Name> = wanted.into_iter().filter(|n| !masters.contains_key(n)).collect();
        stats.references_resolved = missing.len();
        let opts = self.opts(user);
        let (fetched, _) = parallel(&missing, q.parallelism, |n| Ok(self.endpoint.fetch(n, &opts).ok()));
        for d in fetched?.into_iter() {
            match d.and_then(|d| self.check_item(d)) {
                Some(o) if o.is_master() => {
                    masters.insert(o.data.name.clone(), o);
                }
                _ => stats.invalid += 1,
            }
        }
        stats.resolve_ms = ms_since(t);

        let t = Instant::now();
        let mut by_oid: BTreeMap<String, Feature> = BTreeMap::new();
        for o in masters.into_values() {
            let Body::Master(json) = &o.body.body else { continue };
            let Ok(f) = Feature::parse(json) else {
                stats.invalid += 1;
                continue;
            };
            if f.oid != o.key.oid || f.tid != o.key.tid || f.cid != o.key.cid || f.uid != o.key.uid {
                stats.invalid += 1;
                continue;
            }
            if matches(&f, q) {
                by_oid.insert(f.oid.clone(), f);
            }
        }
        stats.postfilter_ms = ms_since(t);
        Ok(QueryResult { objects: by_oid.into_values().collect(), stats })
    }

    /// OGB-Data items of one feature: the master at the smallest level-2
    /// tile prefix and references at every other intersecting tile of every
    /// level, signed by `user`.
    pub fn replicate(&self, user: &Identity, f: &Feature) -> Result<Vec<Data>, DbError> {
        if !f.geometry.is_valid() {
            return Err(DbError::Invalid(format!("object {} has an invalid geometry", f.oid)));
        }
        let id = ObjectId::of(f);
        let finest = self.grid.finest();
        let master_tile = self
            .grid
            .intersecting_tiles(&f.geometry, finest)?
            .into_iter()
            .min_by_key(|t| self.grid.tile_prefix(*t))
            .ok_or(DbError::Invalid("empty footprint".into()))?;
        let master_name = id.at(master_tile).name(self.grid);
        let mut out = Vec::new();
        let master = ObjectBody { valid_time: f.valid_time, body: Body::Master(Bytes::from(f.to_bytes())) };
        let reference = ObjectBody { valid_time: f.valid_time, body: Body::Reference(master_name) };
        for level in 0..self.grid.levels() {
            for tile in self.grid.intersecting_tiles(&f.geometry, level)? {
                let body = if tile == master_tile { &master } else { &reference };
                let mut d = StoredObject::build(self.grid, &id.at(tile), body);
                user.sign_data(&mut d);
                out.push(d);
            }
        }
        Ok(out)
    }

    /// Bulk-insert address of the engine owning a level-0 tile.
    pub fn resolve_engine(&self, user: &Arc<Identity>, tile: TileId) -> Result<SocketAddr, DbError> {
        let name = self.grid.tile_prefix(tile).child(IP_RES);
        let payload = self.endpoint.get(&name, &self.opts(user))?;
        std::str::from_utf8(&payload)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(DbError::Malformed("IP-RES payload"))
    }

    pub fn insert(&self, user: &Arc<Identity>, f: &Feature) -> Result<InsertReport, DbError> {
        self.insert_batch(user, std::slice::from_ref(f))
    }

    /// Inserts features: one IP resolution per level-0 tile touched, then
    /// one bulk push per engine.
    pub fn insert_batch(&self, user: &Arc<Identity>, features: &[Feature]) -> Result<InsertReport, DbError> {
        let mut by_tile: BTreeMap<TileId, Vec<Data>> = BTreeMap::new();
        for f in features {
            for d in self.replicate(user, f)? {
                let key = ObjectKey::parse(self.grid, &d.name)?;
                by_tile.entry(self.grid.ancestor(key.tile, 0)?).or_default().push(d);
            }
        }
        let tiles: Vec<TileId> = by_tile.keys().copied().collect();
        let (addrs, _) = parallel(&tiles, 8, |t| self.resolve_engine(user, *t));
        let mut by_addr: BTreeMap<SocketAddr, Vec<Data>> = BTreeMap::new();
        for (addr, (_, objs)) in addrs?.into_iter().zip(by_tile) {
            by_addr.entry(addr).or_default().extend(objs);
        }
        let pushes: Vec<(SocketAddr, Vec<Data>)> = by_addr.into_iter().collect();
        let (results, _) = parallel(&pushes, pushes.len(), |(addr, objs)| {
            let st = self.bulk.push(*addr, objs)?;
            Ok(objs.iter().map(|d| d.name.clone()).zip(st).collect::<Vec<_>>())
        });
        let mut report = InsertReport { engines: pushes.len(), ..InsertReport::default() };
        for (name, status) in results?.into_iter().flatten() {
            report.objects += 1;
            if status == InsertStatus::Stored {
                report.stored += 1;
            } else {
                report.rejected.push((name, status));
            }
        }
        Ok(report)
    }

    /// Sends one delete Interest per intersecting tile of every level.
    pub fn delete(&self, user: &Arc<Identity>, id: &ObjectId, footprint: &Geometry) -> Result<DeleteReport, DbError> {
        let opts = self.opts(user);
        let mut names = Vec::new();
        for level in 0..self.grid.levels() {
            for tile in self.grid.intersecting_tiles(footprint, level)? {
                names.push(id.at(tile).name(self.grid).child(DELETE));
            }
        }
        let tiles = names
            .into_iter()
            .map(|n| {
                let r = self.endpoint.get(&n, &opts).map_err(DbError::from).and_then(|p| match &p[..] {
                    [b] => DeleteStatus::from_u8(*b).ok_or(DbError::Malformed("delete status")),
                    _ => Err(DbError::Malformed("delete status")),
                });
                (n, r)
            })
            .collect();
        Ok(DeleteReport { tiles })
    }
}

/// Spatial predicate of the mode plus, when an interval is given, overlap
/// of the object's validity with it. Objects without validity never match
/// a temporal query.
pub fn matches(f: &Feature, q: &RangeQuery) -> bool {
    let spatial = match q.mode {
        Mode::Intersect => f.geometry.intersects(&q.bbox),
        Mode::Include => f.geometry.within(&q.bbox),
    };
    let temporal = match q.interval {
        None => true,
        Some((s, e)) => f.valid_time.is_some_and(|vt| vt.overlaps(s, e)),
    };
    spatial && temporal && f.tid == q.tid && f.cid == q.cid
}

/// Splits a disjunction of equality conditions into one sub-query name per
/// condition, `prefix/field=value`.
pub fn decompose_or(prefix: &Name, conditions: &[(&str, &str)]) -> Vec<Name> {
    let mut seen = BTreeSet::new();
    conditions
        .iter()
        .filter(|c| seen.insert(**c))
        .map(|(field, value)| prefix.clone().child(format!("{field}={value}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use geoicn_core::name;

    #[test]
    fn or_conditions_split() {
        let p = name("/AB/persons");
        let q = decompose_or(&p, &[("surname", "Detti"), ("surname", "Rossi"), ("surname", "Detti")]);
        assert_eq!(q, vec![name("/AB/persons/surname=Detti"), name("/AB/persons/surname=Rossi")]);
    }

    #[test]
    fn parallel_bounds_inflight_and_keeps_order() {
        let items: Vec<usize> = (0..50).collect();
        let (r, peak) = parallel(&items, 4, |i| {
            std::thread::sleep(std::time::Duration::from_millis(1));
            Ok(i * 2)
        });
        assert_eq!(r.unwrap(), items.iter().map(|i| i * 2).collect::<Vec<_>>());
        assert!((1..=4).contains(&peak));
        let (r, _) = parallel(&items, 3, |i| if *i == 7 { Err(DbError::Invalid("x".into())) } else { Ok(*i) });
        assert_eq!(r.unwrap_err(), DbError::Invalid("x".into()));
    }

    #[test]
    fn delete_report_summary() {
        let n = name("/a");
        let r = |s: Vec<DeleteStatus>| DeleteReport { tiles: s.into_iter().map(|s| (n.clone(), Ok(s))).collect() };
        use DeleteStatus::*;
        assert_eq!(r(vec![Deleted, Deleted, Deleted]).status(), Ok(Deleted));
        assert_eq!(r(vec![NotFound, NotFound]).status(), Ok(NotFound));
        assert_eq!(r(vec![Denied, Denied]).status(), Ok(Denied));
    }
}
