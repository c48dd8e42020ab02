use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use geoicn_core::geogrid::{GridSpec, TileId};
use geoicn_core::tessellate::{temporal_decompose, MAX_PERIODS};
use geoicn_core::{BBox, Feature, GeoCoord, Geometry};
use geoicn_db::bloom::{bloom_key, BloomParams, Transition};
use geoicn_db::cluster::{Scheme, UserSpec};
use geoicn_db::frontend::{Mode, ObjectId, RangeQuery};
use geoicn_db::object::{decode_tile, tile_query_name, StoredObject};
use geoicn_db::service::{execute, Request};
use geoicn_db::{Cluster, ClusterConfig, DeleteStatus, InsertStatus};
use geoicn_net::icn::GetOptions;
use geoicn_net::trust::{Identity, Permission};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

const G: GridSpec = GridSpec::OGB;

fn user(tid: &str, uid: &str) -> UserSpec {
    UserSpec { tid: tid.into(), cid: "Shop".into(), uid: uid.into(), perm: "rw".into() }
}

fn config(engines: usize) -> ClusterConfig {
    ClusterConfig {
        scheme: Scheme::Hmac,
        lifetime_ms: 400,
        retries: 1,
        tenants: vec!["Foo".into(), "Bar".into()],
        users: vec![user("Foo", "Alice"), user("Foo", "Bob"), user("Bar", "Carol")],
        ..ClusterConfig::default()
    }
    .with_grid_engines(engines, [10, 40], 4, 4)
}

fn start(engines: usize) -> Cluster {
    Cluster::start(config(engines)).unwrap()
}

fn id(c: &Cluster, tid: &str, uid: &str) -> Arc<Identity> {
    c.user(tid, "Shop", uid, Permission::ReadWrite).unwrap()
}

fn pt(lng: f64, lat: f64) -> GeoCoord {
    GeoCoord::new(lng, lat).unwrap()
}

fn point(oid: &str, tid: &str, uid: &str, lng: f64, lat: f64) -> Feature {
    Feature::point(oid, tid, "Shop", uid, pt(lng, lat), Map::new())
}

fn feature(oid: &str, uid: &str, coords: &[(f64, f64)], time: Option<(i64, i64)>) -> Feature {
    let geometry = match coords {
        [(x, y)] => json!({"type": "Point", "coordinates": [x, y]}),
        _ => json!({"type": "MultiPoint", "coordinates": coords.iter().map(|(x, y)| json!([x, y])).collect::<Vec<_>>()}),
    };
    let mut props = json!({"oid": oid, "tid": "Foo", "cid": "Shop", "uid": uid});
    if let Some((s, e)) = time {
        props["temporalExtent"] = json!({"validTime": [s, e]});
    }
    Feature::from_value(json!({"type": "Feature", "geometry": geometry, "properties": props})).unwrap()
}

fn starbucks() -> Feature {
    point("starbucks", "Foo", "Alice", 12.515, 41.895)
}

fn tile(level: u8, x: i64, y: i64) -> TileId {
    G.tile(level, x, y).unwrap()
}

fn bbox(w: f64, s: f64, e: f64, n: f64) -> BBox {
    BBox::new(w, s, e, n).unwrap()
}

fn oids(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn starbucks_insert_stores_three_items_on_owner() {
    let c = start(4);
    let alice = id(&c, "Foo", "Alice");
    let r = c.frontend().insert(&alice, &starbucks()).unwrap();
    assert_eq!((r.objects, r.stored, r.engines), (3, 3, 1));
    let owner = c.engines.iter().find(|e| e.object_count() > 0).unwrap();
    assert!(owner.config().tiles.contains(&tile(0, 12, 41)));
    assert_eq!(c.engines.iter().map(|e| e.object_count()).sum::<usize>(), 3);
    for level in 0..3 {
        assert_eq!(owner.table_rows(level), 1);
    }
    let master = owner.object(&geoicn_core::name("/OGB/12/41/58/19/GPS-ID/DATA/Foo/Shop/Alice/starbucks"));
    assert!(StoredObject::from_data(G, master.unwrap()).unwrap().is_master());

    let q = c.frontend().range_query(&alice, &RangeQuery::new(bbox(12.5, 41.8, 12.6, 41.9), "Foo", "Shop")).unwrap();
    assert_eq!(q.oids(), oids(&["starbucks"]));
}

#[test]
fn tile_query_returns_both_users_objects() {
    let c = start(1);
    let (alice, bob) = (id(&c, "Foo", "Alice"), id(&c, "Foo", "Bob"));
    c.frontend().insert(&alice, &point("a1", "Foo", "Alice", 12.515, 41.895)).unwrap();
    c.frontend().insert(&bob, &point("b1", "Foo", "Bob", 12.518, 41.891)).unwrap();
    let name = tile_query_name(G, tile(2, 1251, 4189), "Foo", "Shop", None);
    let b = c.frontend().tile_batch(&alice, &[name], 1).unwrap();
    let uids: BTreeSet<String> =
        b.tiles[0].iter().map(|d| StoredObject::from_data(G, d.clone()).unwrap().key.uid).collect();
    assert_eq!(uids, oids(&["Alice", "Bob"]));

    let void = tile_query_name(G, tile(2, 1100, 4000), "Foo", "Shop", None);
    let b = c.frontend().tile_batch(&alice, &[void], 1).unwrap();
    assert!(b.tiles[0].is_empty());
}

#[test]
fn void_tile_outside_every_engine_is_signed_and_empty() {
    let c = start(2);
    let alice = id(&c, "Foo", "Alice");
    let name = tile_query_name(G, tile(2, -7000, -3000), "Foo", "Shop", None);
    let opts = GetOptions::default().with_signer(alice.clone()).with_validator(c.frontend().trust().clone());
    let payload = c.frontend().endpoint().get(&name, &opts).unwrap();
    assert!(decode_tile(&payload).unwrap().is_empty());
}

#[test]
fn repeated_tile_query_hits_cache_without_index_lookup() {
    let c = start(1);
    let alice = id(&c, "Foo", "Alice");
    c.frontend().insert(&alice, &starbucks()).unwrap();
    let e = &c.engines[0];
    let name = tile_query_name(G, tile(1, 125, 418), "Foo", "Shop", None);
    c.frontend().tile_batch(&alice, std::slice::from_ref(&name), 1).unwrap();
    let before = e.stats();
    let b = c.frontend().tile_batch(&alice, &[name], 1).unwrap();
    let after = e.stats();
    assert_eq!(b.tiles[0].len(), 1);
    assert_eq!(after.index_lookups, before.index_lookups);
    assert_eq!(after.cache_hits, before.cache_hits + 1);
}

#[test]
fn cache_is_invalidated_by_writes() {
    let c = start(1);
    let alice = id(&c, "Foo", "Alice");
    let fe = c.frontend();
    let name = tile_query_name(G, tile(2, 1251, 4189), "Foo", "Shop", None);
    assert!(fe.tile_batch(&alice, std::slice::from_ref(&name), 1).unwrap().tiles[0].is_empty());
    fe.insert(&alice, &starbucks()).unwrap();
    assert_eq!(fe.tile_batch(&alice, std::slice::from_ref(&name), 1).unwrap().tiles[0].len(), 1);
    let f = starbucks();
    fe.delete(&alice, &ObjectId::of(&f), &f.geometry).unwrap();
    assert!(fe.tile_batch(&alice, &[name], 1).unwrap().tiles[0].is_empty());
}

#[test]
fn object_signed_by_another_user_is_rejected() {
    let c = start(1);
    let bob = id(&c, "Foo", "Bob");
    let forged = c.frontend().replicate(&bob, &starbucks()).unwrap();
    let st = c.engines[0].insert(forged);
    assert!(st.iter().all(|s| *s == InsertStatus::Denied), "{st:?}");
    assert_eq!(c.engines[0].object_count(), 0);

    let alice = id(&c, "Foo", "Alice");
    let ok = c.frontend().replicate(&alice, &starbucks()).unwrap();
    assert!(c.engines[0].insert(ok.clone()).iter().all(|s| *s == InsertStatus::Stored));
    assert!(c.engines[0].insert(ok).iter().all(|s| *s == InsertStatus::Duplicate));
}

#[test]
fn thousand_object_batch_fills_every_level() {
    let c = start(1);
    let alice = id(&c, "Foo", "Alice");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fs: Vec<Feature> = (0..1000)
        .map(|i| point(&format!("o{i}"), "Foo", "Alice", rng.gen_range(10.0..14.0), rng.gen_range(40.0..44.0)))
        .collect();
    let r = c.frontend().insert_batch(&alice, &fs).unwrap();
    assert_eq!((r.objects, r.stored), (3000, 3000));
    let e = &c.engines[0];
    for level in 0..3u8 {
        let expected: BTreeSet<(TileId, String)> = fs
            .iter()
            .flat_map(|f| G.intersecting_tiles(&f.geometry, level).unwrap().into_iter().map(|t| (t, f.oid.clone())))
            .collect();
        assert_eq!(e.table_rows(level), expected.len(), "level {level}");
    }
    assert_eq!(e.object_count(), 3000);
}

#[test]
fn ip_resolution_reaches_the_owner() {
    let c = start(4);
    let alice = id(&c, "Foo", "Alice");
    for e in &c.engines {
        for t in &e.config().tiles {
            assert_eq!(c.frontend().resolve_engine(&alice, *t).unwrap(), e.bulk_addr(), "{}", e.id());
        }
    }
}

#[test]
fn delete_own_foreign_and_unknown() {
    let c = start(1);
    let (alice, bob) = (id(&c, "Foo", "Alice"), id(&c, "Foo", "Bob"));
    let fe = c.frontend();
    let f = starbucks();
    fe.insert(&alice, &f).unwrap();

    let r = fe.delete(&bob, &ObjectId::of(&f), &f.geometry).unwrap();
    assert_eq!(r.status().unwrap(), DeleteStatus::Denied);
    assert_eq!(c.engines[0].object_count(), 3);

    let r = fe.delete(&alice, &ObjectId::of(&f), &f.geometry).unwrap();
    assert_eq!(r.tiles.len(), 3);
    assert_eq!(r.status().unwrap(), DeleteStatus::Deleted);
    assert_eq!(c.engines[0].object_count(), 0);
    let q = fe.range_query(&alice, &RangeQuery::new(bbox(12.0, 41.0, 13.0, 42.0), "Foo", "Shop")).unwrap();
    assert!(q.objects.is_empty());

    let ghost = ObjectId { oid: "ghost".into(), ..ObjectId::of(&f) };
    assert_eq!(fe.delete(&alice, &ghost, &f.geometry).unwrap().status().unwrap(), DeleteStatus::NotFound);
}

#[test]
fn select_names_separates_tenants_and_levels() {
    let c = start(1);
    let e = &c.engines[0];
    let t2 = tile(2, 1251, 4189);
    assert!(e.select_names(t2, "Foo", "Shop").is_empty());
    c.frontend().insert(&id(&c, "Foo", "Alice"), &starbucks()).unwrap();
    c.frontend().insert(&id(&c, "Bar", "Carol"), &point("cafe", "Bar", "Carol", 12.512, 41.893)).unwrap();
    let foo = e.select_names(t2, "Foo", "Shop");
    assert_eq!(foo.len(), 1);
    assert_eq!(foo[0].last(), Some(&b"starbucks"[..]));
    assert_eq!(e.select_names(t2, "Bar", "Shop").len(), 1);
    let l1 = e.select_names(tile(1, 125, 418), "Foo", "Shop");
    assert_eq!(l1.len(), 1);
    assert_ne!(l1, foo);
}

#[test]
fn multipoint_across_engines_has_one_master() {
    let c = start(4);
    let alice = id(&c, "Foo", "Alice");
    let f = feature("pair", "Alice", &[(10.5, 40.5), (13.5, 43.5)], None);
    let r = c.frontend().insert(&alice, &f).unwrap();
    assert_eq!(r.engines, 2);
    assert_eq!(r.stored, 6);
    let objs: Vec<StoredObject> = c
        .engines
        .iter()
        .flat_map(|e| e.object_names().into_iter().map(move |n| e.object(&n).unwrap()))
        .map(|d| StoredObject::from_data(G, d).unwrap())
        .collect();
    assert_eq!(objs.len(), 6);
    let masters: Vec<&StoredObject> = objs.iter().filter(|o| o.is_master()).collect();
    assert_eq!(masters.len(), 1);
    assert!(objs.iter().all(|o| o.master_name() == &masters[0].data.name));

    let q = c.frontend().range_query(&alice, &RangeQuery::new(bbox(13.0, 43.0, 14.0, 44.0), "Foo", "Shop")).unwrap();
    assert_eq!(q.oids(), oids(&["pair"]));
    assert_eq!(q.stats.references_resolved, 1);
}

#[test]
fn other_tenant_gets_nothing() {
    let c = start(1);
    c.frontend().insert(&id(&c, "Foo", "Alice"), &starbucks()).unwrap();
    let carol = id(&c, "Bar", "Carol");
    let name = tile_query_name(G, tile(2, 1251, 4189), "Foo", "Shop", None);
    assert!(c.frontend().tile_batch(&carol, &[name], 1).is_err());
    assert!(c.engines[0].stats().denied >= 1);
    let q = c.frontend().range_query(&carol, &RangeQuery::new(bbox(12.0, 41.0, 13.0, 42.0), "Bar", "Shop")).unwrap();
    assert!(q.objects.is_empty());
}

#[test]
fn missing_property_is_rejected_locally() {
    let v = json!({"type": "Feature", "geometry": {"type": "Point", "coordinates": [12.5, 41.8]},
                   "properties": {"oid": "x", "tid": "Foo", "uid": "Alice"}});
    assert!(Feature::from_value(v).is_err());
}

#[test]
fn bloom_filter_follows_engine_counters() {
    let c = start(2);
    let alice = id(&c, "Foo", "Alice");
    let fe = c.frontend();
    let f = starbucks();
    let key = bloom_key(G, tile(2, 1251, 4189), "Foo", "Shop");
    assert!(!c.bloom.contains(key.as_bytes()));
    fe.insert(&alice, &f).unwrap();
    assert!(c.wait_bf_quiescent(Duration::from_secs(5)));
    assert!(c.bloom.contains(key.as_bytes()));
    let nonzero: BTreeSet<u32> = c.engines.iter().flat_map(|e| e.cbf_nonzero()).collect();
    assert_eq!(nonzero, c.bloom.set_bits().into_iter().collect());

    fe.delete(&alice, &ObjectId::of(&f), &f.geometry).unwrap();
    assert!(c.wait_bf_quiescent(Duration::from_secs(5)));
    assert!(c.bloom.set_bits().is_empty());
}

#[test]
fn bloom_bits_are_or_combined_across_engines() {
    let c = start(2);
    let b = &c.bloom;
    let set = [Transition { index: 5, set: true }];
    let clear = [Transition { index: 5, set: false }];
    assert!(b.apply("e0", 1, &set));
    assert!(b.apply("e1", 1, &set));
    assert!(b.apply("e0", 2, &clear));
    assert_eq!(b.set_bits(), vec![5]);
    assert!(b.apply("e0", 2, &set), "replayed sequence numbers are acknowledged");
    assert_eq!(b.stats().duplicates, 1);
    assert!(b.apply("e1", 2, &clear));
    assert!(b.set_bits().is_empty());
    assert!(!b.apply("intruder", 1, &set));
}

#[test]
fn bloom_false_positive_rate_tracks_analytic() {
    let c = Cluster::start(ClusterConfig { bloom: geoicn_db::cluster::BloomConfig { capacity: 1000, fp: 0.01 }, ..config(1) })
        .unwrap();
    let b = &c.bloom;
    let p = b.params();
    assert_eq!(p, BloomParams { m: 9586, h: 7 });
    let mut bits = BTreeSet::new();
    for i in 0..1000 {
        bits.extend(p.indices(format!("present/{i}").as_bytes()));
    }
    let t: Vec<Transition> = bits.into_iter().map(|index| Transition { index, set: true }).collect();
    b.apply("e0", 1, &t);
    assert!((0..1000).all(|i| b.contains(format!("present/{i}").as_bytes())));
    let trials = 100_000;
    let fp = (0..trials).filter(|i| b.contains(format!("absent/{i}").as_bytes())).count() as f64 / trials as f64;
    let analytic = p.analytic_fp(1000);
    assert!(fp <= 2.0 * analytic && fp >= analytic / 2.0, "measured {fp}, analytic {analytic}");
}

/// Ground truth kept by the test, independent of the engine code.
struct Obj {
    oid: String,
    pts: Vec<(f64, f64)>,
    time: Option<(i64, i64)>,
}

fn inside(b: (f64, f64, f64, f64), p: (f64, f64)) -> bool {
    p.0 >= b.0 && p.0 < b.2 && p.1 >= b.1 && p.1 < b.3
}

fn oracle(objs: &[Obj], b: (f64, f64, f64, f64), mode: Mode, interval: Option<(i64, i64)>) -> BTreeSet<String> {
    objs.iter()
        .filter(|o| match mode {
            Mode::Intersect => o.pts.iter().any(|p| inside(b, *p)),
            Mode::Include => o.pts.iter().all(|p| inside(b, *p)),
        })
        .filter(|o| match (interval, o.time) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((s, e)), Some((vs, ve))) => vs < e && ve >= s,
        })
        .map(|o| o.oid.clone())
        .collect()
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize) -> Vec<Obj> {
    let t0 = 1_700_000_000i64;
    (0..n)
        .map(|i| {
            let k = if rng.gen_bool(0.7) { 1 } else { rng.gen_range(2..4) };
            let (cx, cy) = (rng.gen_range(11.0..13.0), rng.gen_range(41.0..43.0));
            let pts = (0..k).map(|_| (cx + rng.gen_range(-0.3..0.3), cy + rng.gen_range(-0.3..0.3))).collect();
            let time = rng.gen_bool(0.8).then(|| {
                let s = t0 + rng.gen_range(0..30 * 86_400);
                (s, s + rng.gen_range(0..3 * 86_400))
            });
            Obj { oid: format!("r{i}"), pts, time }
        })
        .collect()
}

#[test]
fn range_queries_match_linear_scan() {
    let c = start(4);
    let alice = id(&c, "Foo", "Alice");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let objs = random_dataset(&mut rng, 300);
    let fs: Vec<Feature> = objs.iter().map(|o| feature(&o.oid, "Alice", &o.pts, o.time)).collect();
    c.frontend().insert_batch(&alice, &fs).unwrap();
    assert!(c.wait_bf_quiescent(Duration::from_secs(10)));

    let t0 = 1_700_000_000i64;
    for round in 0..12 {
        let (w, s) = (rng.gen_range(10.8..12.8), rng.gen_range(40.8..42.8));
        let b = (w, s, w + rng.gen_range(0.05..0.6), s + rng.gen_range(0.05..0.6));
        let mode = if round % 2 == 0 { Mode::Intersect } else { Mode::Include };
        let interval = (round % 3 == 0).then(|| {
            let a = t0 + rng.gen_range(0..30 * 86_400);
            (a, a + rng.gen_range(3_600..10 * 86_400))
        });
        let want = oracle(&objs, b, mode, interval);
        let mut seen = Vec::new();
        for (k, use_bf) in [(Some(5), false), (Some(50), true), (None, round % 2 == 0)] {
            let q = RangeQuery { mode, interval, k, use_bf, ..RangeQuery::new(bbox(b.0, b.1, b.2, b.3), "Foo", "Shop") };
            let r = c.frontend().range_query(&alice, &q).unwrap();
            assert_eq!(r.oids(), want, "round {round} k {k:?} bf {use_bf}");
            assert_eq!(r.stats.invalid, 0);
            seen.push(r.stats.tiles);
        }
        assert!(seen[0] <= 5);
    }
}

#[test]
fn object_outside_interval_but_inside_period_is_excluded() {
    let c = start(1);
    let alice = id(&c, "Foo", "Alice");
    let day = 86_400i64;
    let t0 = 1_700_006_400i64 - 1_700_006_400 % day;
    let inside_f = feature("in", "Alice", &[(12.5, 41.8)], Some((t0 + 10 * 3600, t0 + 11 * 3600)));
    let boundary = feature("edge", "Alice", &[(12.5, 41.8)], Some((t0 + 100, t0 + 200)));
    c.frontend().insert_batch(&alice, &[inside_f, boundary]).unwrap();
    let q = RangeQuery { interval: Some((t0 + 3600, t0 + 23 * 3600)), ..RangeQuery::new(bbox(12.0, 41.0, 13.0, 42.0), "Foo", "Shop") };
    let r = c.frontend().range_query(&alice, &q).unwrap();
    assert_eq!(r.oids(), oids(&["in"]));
    assert!(r.stats.items > 1, "the boundary object is fetched by its covering period");
}

#[test]
fn tile_batch_respects_parallelism() {
    let c = start(1);
    let alice = id(&c, "Foo", "Alice");
    let q = RangeQuery { k: None, ..RangeQuery::new(bbox(12.0, 41.0, 12.3, 41.3), "Foo", "Shop") };
    let names = c.frontend().decompose(&q).unwrap();
    assert_eq!(names.len(), 900);
    for p in [1, 4] {
        let b = c.frontend().tile_batch(&alice, &names[..120], p).unwrap();
        assert_eq!(b.tiles.len(), 120);
        assert!(b.max_inflight <= p);
    }
}

#[test]
fn subqueries_cross_tiles_and_periods() {
    let c = start(1);
    let fe = c.frontend();
    let tiles = [tile(2, 1200, 4100), tile(2, 1201, 4100), tile(2, 1202, 4100)];
    let day = 86_400i64;
    let t0 = 1_699_920_000i64 - 1_699_920_000 % day;
    let hundred_min = 6000;
    let a = t0 - t0 % hundred_min;
    let one = fe.subqueries(&tiles, "Foo", "Shop", Some((a, a + hundred_min))).unwrap();
    assert_eq!(one.len(), 3);
    let span = (t0 + day - 3600, t0 + day + 3600);
    let periods = temporal_decompose(span.0, span.1, MAX_PERIODS).unwrap().tiles.len();
    assert!(periods >= 2);
    assert_eq!(fe.subqueries(&tiles, "Foo", "Shop", Some(span)).unwrap().len(), 3 * periods);
    let plain = fe.subqueries(&tiles[..1], "Foo", "Shop", None).unwrap();
    assert_eq!(plain, vec![geoicn_core::name("/OGB/12/41/00/00/GPS-ID/TILE/Foo/Shop")]);
}

#[test]
fn json_service_round_trip() {
    let c = start(1);
    let alice = id(&c, "Foo", "Alice");
    let fe = c.frontend();
    let req = |v: Value| serde_json::from_value::<Request>(v).unwrap();
    let ins = execute(fe, &alice, req(json!({"op": "insert", "features": [starbucks().raw]}))).unwrap();
    assert_eq!(ins["stored"], 3);
    let q = execute(fe, &alice, req(json!({"op": "range_query", "bbox": [12.0, 41.0, 13.0, 42.0], "tid": "Foo", "cid": "Shop"})))
        .unwrap();
    assert_eq!(q["objects"].as_array().unwrap().len(), 1);
    let d = execute(fe, &alice, req(json!({"op": "delete", "feature": starbucks().raw}))).unwrap();
    assert_eq!(d["status"], json!("Deleted"));

    let addr = geoicn_db::service::serve(fe.clone(), alice, "127.0.0.1:0").unwrap();
    use std::io::{BufRead, BufReader, Write};
    let mut s = std::net::TcpStream::connect(addr).unwrap();
    s.write_all(b"{\"op\":\"bogus\"}\n").unwrap();
    let mut line = String::new();
    BufReader::new(s).read_line(&mut line).unwrap();
    let v: Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["ok"], false);
}

#[test]
fn empty_store_answers_void_everywhere() {
    let c = start(2);
    let alice = id(&c, "Foo", "Alice");
    let q = RangeQuery { k: Some(20), ..RangeQuery::new(bbox(11.0, 40.5, 13.5, 43.0), "Foo", "Shop") };
    let r = c.frontend().range_query(&alice, &q).unwrap();
    assert!(r.objects.is_empty());
    assert!(r.stats.subqueries > 0 && r.stats.items == 0);
    let g: Geometry = starbucks().geometry;
    assert!(g.is_valid());
}

#[test]
fn tcp_links_with_ed25519_keys() {
    let cfg = ClusterConfig { scheme: Scheme::Ed25519, transport: geoicn_db::cluster::Transport::Tcp, ..config(2) };
    let c = Cluster::start(cfg).unwrap();
    let alice = id(&c, "Foo", "Alice");
    assert_eq!(c.frontend().insert(&alice, &starbucks()).unwrap().stored, 3);
    let q = c.frontend().range_query(&alice, &RangeQuery::new(bbox(12.0, 41.0, 13.0, 42.0), "Foo", "Shop")).unwrap();
    assert_eq!(q.oids(), oids(&["starbucks"]));
}
