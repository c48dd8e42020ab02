//! Database engine: per-level tile tables, tile-query answering with an
//! invalidating qData cache, bulk insertion, deletion, IP resolution and the
//! counting Bloom filter with its update publisher.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Weak};
use std::thread;

use bytes::Bytes;
use crossbeam_channel::{unbounded, Sender};
use geoicn_core::geogrid::{GridSpec, TileId};
use geoicn_core::geojson::ValidTime;
use geoicn_core::Name;
use geoicn_net::icn::{parse_segment, segment, Data, Endpoint, GetOptions, Interest, Node, DEFAULT_MAX_PAYLOAD};
use geoicn_net::trust::{check_provenance, Identity, Operation, Role, TrustStore};
use lru::LruCache;
use parking_lot::{Mutex, RwLock};

use crate::bloom::{bloom_key, BloomParams, CountingBloom, Transition};
use crate::bulk::{read_batch, write_statuses};
use crate::object::{encode_tile, ObjectKey, StoredObject, TileQuery, DELETE, IP_RES};
use crate::{pause_ms, CostModel, DeleteStatus, InsertStatus};

pub const BF_PREFIX: &str = "/OGB/BF";

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub id: String,
    /// Owned level-0 tiles.
    pub tiles: Vec<TileId>,
    pub bulk_addr: String,
    pub tile_freshness_ms: u32,
    pub ip_res_freshness_ms: u32,
    pub object_freshness_ms: u32,
    pub max_payload: usize,
    pub cost: Option<CostModel>,
    pub bloom: BloomParams,
    /// Cached tile-query answers; 0 disables the cache.
    pub qcache_capacity: usize,
    /// Answer tile-queries for tiles nobody owns with void tiles.
    pub default_responder: bool,
    pub workers: usize,
}

impl EngineConfig {
    pub fn new(id: impl Into<String>, tiles: Vec<TileId>) -> EngineConfig {
        EngineConfig {
            id: id.into(),
            tiles,
            bulk_addr: "127.0.0.1:0".into(),
            tile_freshness_ms: 0,
            ip_res_freshness_ms: 1000,
            object_freshness_ms: 0,
            max_payload: DEFAULT_MAX_PAYLOAD,
            cost: None,
            bloom: BloomParams::for_capacity(100_000, 0.01),
            qcache_capacity: 4096,
            default_responder: false,
            workers: 1,
        }
    }
}

/// Snapshot of the engine counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub tile_queries: u64,
    pub cache_hits: u64,
    pub index_lookups: u64,
    pub denied: u64,
    pub malformed: u64,
    pub stored: u64,
    pub rejected: u64,
    pub deleted: u64,
    pub bf_messages: u64,
}

#[derive(Default)]
struct Counters {
    tile_queries: AtomicU64,
    cache_hits: AtomicU64,
    index_lookups: AtomicU64,
    denied: AtomicU64,
    malformed: AtomicU64,
    stored: AtomicU64,
    rejected: AtomicU64,
    deleted: AtomicU64,
    bf_messages: AtomicU64,
}

fn bump(c: &AtomicU64) {
    c.fetch_add(1, Ordering::Relaxed);
}

type TableKey = (TileId, String, String);

struct Row {
    data: Data,
    key: ObjectKey,
    valid_time: Option<ValidTime>,
}

/// Object table plus one tile table per grid level.
struct Store {
    objects: HashMap<Name, Row>,
    tables: Vec<BTreeMap<TableKey, BTreeSet<Name>>>,
}

impl Store {
    fn table_key(k: &ObjectKey) -> TableKey {
        (k.tile, k.tid.clone(), k.cid.clone())
    }
}

type CachedTile = Arc<Vec<Data>>;

/// Tile-query answers by base name, with an index from tile table keys to
/// the entries built from them.
struct QCache {
    lru: LruCache<Name, (TableKey, CachedTile)>,
    by_key: HashMap<TableKey, HashSet<Name>>,
}

impl QCache {
    fn get(&mut self, n: &Name) -> Option<CachedTile> {
        self.lru.get(n).map(|(_, t)| t.clone())
    }

    fn put(&mut self, n: Name, key: TableKey, tile: CachedTile) {
        self.by_key.entry(key.clone()).or_default().insert(n.clone());
        if let Some((old, (okey, _))) = self.lru.push(n.clone(), (key, tile)) {
            if old != n {
                self.forget(&okey, &old);
            }
        }
    }

    fn forget(&mut self, key: &TableKey, n: &Name) {
        if let Some(set) = self.by_key.get_mut(key) {
            set.remove(n);
            if set.is_empty() {
                self.by_key.remove(key);
            }
        }
    }

    fn invalidate(&mut self, key: &TableKey) {
        for n in self.by_key.remove(key).into_iter().flatten() {
            self.lru.pop(&n);
        }
    }

    fn clear(&mut self) {
        self.lru.clear();
        self.by_key.clear();
    }
}

struct Inner {
    config: EngineConfig,
    grid: GridSpec,
    owned: HashSet<TileId>,
    identity: Arc<Identity>,
    trust: Arc<TrustStore>,
    bulk_addr: SocketAddr,
    store: RwLock<Store>,
    qcache: Option<Mutex<QCache>>,
    cbf: Mutex<CountingBloom>,
    cost: RwLock<Option<CostModel>>,
    bf_tx: Mutex<Option<Sender<Vec<Transition>>>>,
    bf_pending: Arc<AtomicUsize>,
    counters: Counters,
}

/// A running engine. Dropping it withdraws its producer and stops the
/// bulk-insert listener.
pub struct Engine {
    inner: Arc<Inner>,
    endpoint: Endpoint,
    stop: Arc<AtomicBool>,
}

impl Engine {
    /// Starts the engine on `node`: advertises its level-0 prefixes (and
    /// `/OGB` when it is the default responder), binds the bulk-insert
    /// listener and starts the BF update publisher.
    pub fn start(node: &Node, config: EngineConfig, identity: Arc<Identity>, trust: Arc<TrustStore>) -> std::io::Result<Engine> {
        let grid = GridSpec::OGB;
        let listener = TcpListener::bind(&config.bulk_addr)?;
        let bulk_addr = listener.local_addr()?;
        let (bf_tx, bf_rx) = unbounded::<Vec<Transition>>();
        let bf_pending = Arc::new(AtomicUsize::new(0));
        let qcache = NonZeroUsize::new(config.qcache_capacity)
            .map(|cap| Mutex::new(QCache { lru: LruCache::new(cap), by_key: HashMap::new() }));
        let inner = Arc::new(Inner {
            owned: config.tiles.iter().copied().collect(),
            grid,
            identity: identity.clone(),
            trust,
            bulk_addr,
            store: RwLock::new(Store {
                objects: HashMap::new(),
                tables: (0..grid.levels()).map(|_| BTreeMap::new()).collect(),
            }),
            qcache,
            cbf: Mutex::new(CountingBloom::new(config.bloom)),
            cost: RwLock::new(config.cost),
            bf_tx: Mutex::new(Some(bf_tx)),
            bf_pending: bf_pending.clone(),
            counters: Counters::default(),
            config,
        });

        let publisher = Endpoint::new(node);
        let engine_id = inner.config.id.clone();
        thread::Builder::new()
            .name(format!("bf-publish-{engine_id}"))
            .spawn(move || {
                let opts = GetOptions::default().with_lifetime(500).with_retries(20).with_signer(identity);
                for (seq, batch) in (1u64..).zip(bf_rx) {
                    let n: Name = BF_PREFIX.parse::<Name>().expect("static name").child("update").child(&engine_id).child(seq.to_string());
                    let opts = opts.clone().with_params(crate::bloomsvc::encode_update(&batch));
                    if let Err(e) = publisher.get(&n, &opts) {
                        log::warn!("BF update {n} lost: {e}");
                    }
                    bf_pending.fetch_sub(1, Ordering::SeqCst);
                }
            })?;

        let stop = Arc::new(AtomicBool::new(false));
        let weak = Arc::downgrade(&inner);
        let stop2 = stop.clone();
        thread::Builder::new()
            .name(format!("bulk-{}", inner.config.id))
            .spawn(move || accept_loop(listener, weak, stop2))?;

        let endpoint = Endpoint::new(node);
        for t in &inner.config.tiles {
            endpoint.advertise(grid.tile_prefix(*t).prefix(3));
        }
        if inner.config.default_responder {
            endpoint.advertise(Name::new().child(geoicn_core::geogrid::ROOT));
        }
        let handler_inner = inner.clone();
        endpoint.serve(inner.config.workers, Arc::new(move |i: Interest| handler_inner.handle(i)));
        Ok(Engine { inner, endpoint, stop })
    }

    pub fn id(&self) -> &str {
        &self.inner.config.id
    }

    pub fn config(&self) -> &EngineConfig {
        &self.inner.config
    }

    pub fn bulk_addr(&self) -> SocketAddr {
        self.inner.bulk_addr
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn stats(&self) -> EngineStats {
        let c = &self.inner.counters;
        let g = |a: &AtomicU64| a.load(Ordering::Relaxed);
        EngineStats {
            tile_queries: g(&c.tile_queries),
            cache_hits: g(&c.cache_hits),
            index_lookups: g(&c.index_lookups),
            denied: g(&c.denied),
            malformed: g(&c.malformed),
            stored: g(&c.stored),
            rejected: g(&c.rejected),
            deleted: g(&c.deleted),
            bf_messages: g(&c.bf_messages),
        }
    }

    /// Names in the tile table of `tile`'s level for one tenant and collection.
    pub fn select_names(&self, tile: TileId, tid: &str, cid: &str) -> Vec<Name> {
        self.inner.select_names(&self.inner.store.read(), &(tile, tid.to_string(), cid.to_string()))
    }

    pub fn object_count(&self) -> usize {
        self.inner.store.read().objects.len()
    }

    /// Object names stored in the table of `level`, over all keys.
    pub fn table_rows(&self, level: u8) -> usize {
        self.inner.store.read().tables.get(level as usize).map_or(0, |t| t.values().map(BTreeSet::len).sum())
    }

    /// The stored Data named `n`.
    pub fn object(&self, n: &Name) -> Option<Data> {
        self.inner.store.read().objects.get(n).map(|r| r.data.clone())
    }

    /// Every stored object name.
    pub fn object_names(&self) -> Vec<Name> {
        self.inner.store.read().objects.keys().cloned().collect()
    }

    /// Bulk insert without the TCP hop.
    pub fn insert(&self, objects: Vec<Data>) -> Vec<InsertStatus> {
        self.inner.insert(objects)
    }

    pub fn cbf_nonzero(&self) -> Vec<u32> {
        self.inner.cbf.lock().nonzero().collect()
    }

    pub fn cbf_contains(&self, key: &str) -> bool {
        self.inner.cbf.lock().contains(key.as_bytes())
    }

    /// BF update messages queued or in flight.
    pub fn bf_pending(&self) -> usize {
        self.inner.bf_pending.load(Ordering::SeqCst)
    }

    /// Blocks until every BF update has been acknowledged or given up.
    pub fn wait_bf_quiescent(&self, timeout: std::time::Duration) -> bool {
        let end = std::time::Instant::now() + timeout;
        while self.bf_pending() > 0 {
            if std::time::Instant::now() > end {
                return false;
            }
            thread::sleep(std::time::Duration::from_millis(2));
        }
        true
    }

    pub fn clear_qcache(&self) {
        if let Some(c) = &self.inner.qcache {
            c.lock().clear();
        }
    }

    pub fn set_cost(&self, cost: Option<CostModel>) {
        *self.inner.cost.write() = cost;
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.inner.bulk_addr);
        self.inner.bf_tx.lock().take();
    }
}

fn accept_loop(listener: TcpListener, inner: Weak<Inner>, stop: Arc<AtomicBool>) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(conn) = conn else { continue };
        let inner = inner.clone();
        let _ = thread::Builder::new().name("bulk-conn".into()).spawn(move || serve_bulk(conn, inner));
    }
}

fn serve_bulk(mut conn: TcpStream, inner: Weak<Inner>) {
    let _ = conn.set_nodelay(true);
    let Ok(read_half) = conn.try_clone() else { return };
    let mut reader = std::io::BufReader::with_capacity(1 << 16, read_half);
    loop {
        let batch = match read_batch(&mut reader) {
            Ok(Some(b)) => b,
            Ok(None) => return,
            Err(e) => {
                log::debug!("bulk connection closed: {e}");
                return;
            }
        };
        let Some(engine) = inner.upgrade() else { return };
        let statuses = engine.insert_encoded(batch);
        drop(engine);
        if write_statuses(&mut conn, &statuses).is_err() {
            return;
        }
    }
}

impl Inner {
    fn owns(&self, tile: TileId) -> bool {
        self.grid.ancestor(tile, 0).is_ok_and(|t| self.owned.contains(&t))
    }

    fn publish(&self, transitions: Vec<Transition>) {
        if transitions.is_empty() {
            return;
        }
        if let Some(tx) = self.bf_tx.lock().as_ref() {
            self.bf_pending.fetch_add(1, Ordering::SeqCst);
            bump(&self.counters.bf_messages);
            if tx.send(transitions).is_err() {
                self.bf_pending.fetch_sub(1, Ordering::SeqCst);
            }
        }
    }

    fn select_names(&self, store: &Store, key: &TableKey) -> Vec<Name> {
        bump(&self.counters.index_lookups);
        store
            .tables
            .get(key.0.level as usize)
            .and_then(|t| t.get(key))
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    fn handle(&self, i: Interest) -> Option<Data> {
        let Some((base, idx)) = parse_segment(&i.name) else {
            return self.handle_object(i);
        };
        match base.last() {
            Some(c) if c == IP_RES.as_bytes() => self.handle_ip_res(&base, idx),
            Some(c) if c == DELETE.as_bytes() => self.handle_delete(&i, &base),
            _ => self.handle_tile_query(&i, &base, idx),
        }
    }

    fn sign(&self, mut d: Data) -> Data {
        self.identity.sign_data(&mut d);
        d
    }

    fn single(&self, base: &Name, payload: impl Into<Bytes>, freshness: u32) -> Data {
        let payload = payload.into();
        let version = geoicn_net::icn::endpoint::fnv1a(&payload);
        let d = segment(base, payload, usize::MAX, freshness, version).remove(0);
        self.sign(d)
    }

    fn handle_ip_res(&self, base: &Name, idx: u32) -> Option<Data> {
        let tile = self.grid.parse_tile_prefix(base).ok()?;
        if idx != 0 || tile.level != 0 || !self.owns(tile) || base.len() != GridSpec::prefix_len(0) + 1 {
            bump(&self.counters.malformed);
            return None;
        }
        Some(self.single(base, self.bulk_addr.to_string().into_bytes(), self.config.ip_res_freshness_ms))
    }

    fn handle_tile_query(&self, i: &Interest, base: &Name, idx: u32) -> Option<Data> {
        let Ok(q) = TileQuery::parse(self.grid, base) else {
            bump(&self.counters.malformed);
            return None;
        };
        match self.trust.authorize(Operation::Query, i) {
            Ok(d) if d.allow => {}
            _ => {
                bump(&self.counters.denied);
                return None;
            }
        }
        if idx == 0 {
            bump(&self.counters.tile_queries);
        }
        if !self.owns(q.tile) {
            if !self.config.default_responder {
                return None;
            }
            return (idx == 0).then(|| self.single(base, Bytes::new(), self.config.tile_freshness_ms));
        }
        let cached = self.qcache.as_ref().and_then(|c| c.lock().get(base));
        let segments = match cached {
            Some(s) => {
                bump(&self.counters.cache_hits);
                s
            }
            None => self.build_tile(base, &q),
        };
        segments.get(idx as usize).cloned()
    }

    /// Builds and caches the signed segments of a tile-query answer. The
    /// cache insert happens under the store read lock so a concurrent write
    /// cannot slip between the read and the insert.
    fn build_tile(&self, base: &Name, q: &TileQuery) -> CachedTile {
        let key: TableKey = (q.tile, q.tid.clone(), q.cid.clone());
        let store = self.store.read();
        let items: Vec<&Data> = self
            .select_names(&store, &key)
            .iter()
            .filter_map(|n| store.objects.get(n))
            .filter(|r| q.admits(r.valid_time))
            .map(|r| &r.data)
            .collect();
        let n_items = items.len();
        let payload = Bytes::from(encode_tile(items));
        let version = geoicn_net::icn::endpoint::fnv1a(&payload);
        let segments: CachedTile = Arc::new(
            segment(base, payload, self.config.max_payload, self.config.tile_freshness_ms, version)
                .into_iter()
                .map(|d| self.sign(d))
                .collect(),
        );
        if let Some(c) = &self.qcache {
            c.lock().put(base.clone(), key, segments.clone());
        }
        drop(store);
        if let Some(cost) = *self.cost.read() {
            pause_ms(cost.engine_ms(n_items));
        }
        segments
    }

    fn handle_object(&self, i: Interest) -> Option<Data> {
        let key = ObjectKey::parse(self.grid, &i.name).ok()?;
        let allowed = self.trust.verify_interest(&i).ok().and_then(|c| Role::parse(&c.name).ok()).is_some_and(|r| {
            matches!(r, Role::User { did, .. } if did.tid == key.tid && did.cid == key.cid)
        });
        if !allowed {
            bump(&self.counters.denied);
            return None;
        }
        let store = self.store.read();
        let mut d = store.objects.get(&i.name)?.data.clone();
        d.freshness_ms = d.freshness_ms.max(self.config.object_freshness_ms);
        Some(d)
    }

    fn handle_delete(&self, i: &Interest, base: &Name) -> Option<Data> {
        let status = match self.trust.authorize(Operation::Delete, i) {
            Ok(d) if d.allow => self.delete(&base.prefix(base.len() - 1)),
            _ => {
                bump(&self.counters.denied);
                DeleteStatus::Denied
            }
        };
        Some(self.single(base, vec![status as u8], 0))
    }

    fn delete(&self, oname: &Name) -> DeleteStatus {
        let mut store = self.store.write();
        let Some(row) = store.objects.remove(oname) else {
            return DeleteStatus::NotFound;
        };
        let key = Store::table_key(&row.key);
        let table = &mut store.tables[row.key.tile.level as usize];
        let emptied = match table.get_mut(&key) {
            Some(set) => {
                set.remove(oname);
                set.is_empty()
            }
            None => false,
        };
        if emptied {
            table.remove(&key);
            let t = self.cbf.lock().remove(bloom_key(self.grid, key.0, &key.1, &key.2).as_bytes());
            self.publish(t);
        }
        if let Some(c) = &self.qcache {
            c.lock().invalidate(&key);
        }
        bump(&self.counters.deleted);
        DeleteStatus::Deleted
    }

    fn insert_encoded(&self, frames: Vec<Vec<u8>>) -> Vec<InsertStatus> {
        let mut decoded = Vec::with_capacity(frames.len());
        for f in frames {
            decoded.push(match geoicn_net::icn::Packet::decode(&f) {
                Ok(geoicn_net::icn::Packet::Data(d)) => Ok(d),
                _ => Err(InsertStatus::Malformed),
            });
        }
        self.insert_checked(decoded)
    }

    fn insert(&self, objects: Vec<Data>) -> Vec<InsertStatus> {
        self.insert_checked(objects.into_iter().map(Ok).collect())
    }

    fn verify(&self, d: Data) -> Result<StoredObject, InsertStatus> {
        let obj = StoredObject::from_data(self.grid, d).map_err(|_| InsertStatus::Malformed)?;
        if !self.owns(obj.key.tile) {
            return Err(InsertStatus::NotResponsible);
        }
        let cert = self.trust.verify_data(&obj.data).map_err(|_| InsertStatus::BadSignature)?;
        if !check_provenance(&obj.data.name, &cert.name) {
            return Err(InsertStatus::Denied);
        }
        Ok(obj)
    }

    /// Verifies every object outside the lock, then commits the batch under
    /// one write lock.
    fn insert_checked(&self, objects: Vec<Result<Data, InsertStatus>>) -> Vec<InsertStatus> {
        let verified: Vec<Result<StoredObject, InsertStatus>> =
            objects.into_iter().map(|o| o.and_then(|d| self.verify(d))).collect();
        let mut out = Vec::with_capacity(verified.len());
        let mut transitions = Vec::new();
        let mut store = self.store.write();
        for v in verified {
            let status = match v {
                Err(s) => s,
                Ok(obj) if store.objects.contains_key(&obj.data.name) => InsertStatus::Duplicate,
                Ok(obj) => {
                    let key = Store::table_key(&obj.key);
                    let set = store.tables[obj.key.tile.level as usize].entry(key.clone()).or_default();
                    set.insert(obj.data.name.clone());
                    if set.len() == 1 {
                        transitions.extend(self.cbf.lock().insert(bloom_key(self.grid, key.0, &key.1, &key.2).as_bytes()));
                    }
                    if let Some(c) = &self.qcache {
                        c.lock().invalidate(&key);
                    }
                    let row = Row { valid_time: obj.body.valid_time, key: obj.key, data: obj.data };
                    store.objects.insert(row.data.name.clone(), row);
                    InsertStatus::Stored
                }
            };
            bump(if status == InsertStatus::Stored { &self.counters.stored } else { &self.counters.rejected });
            out.push(status);
        }
        self.publish(transitions);
        drop(store);
        out
    }
}
