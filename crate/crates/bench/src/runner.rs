//! Benchmark runners over an in-process cluster. Each produces rows that
//! serialize to one CSV line.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use geoicn_core::geogrid::{GridSpec, TileId};
use geoicn_core::perfmodel::model_tb;
use geoicn_core::tessellate::constrained_tessellation;
use geoicn_core::{BBox, Feature, Measurement, ModelParams};
use geoicn_db::cluster::{Scheme, UserSpec};
use geoicn_db::frontend::RangeQuery;
use geoicn_db::object::tile_query_name;
use geoicn_db::{Cluster, ClusterConfig, CostModel, Frontend};
use geoicn_net::trust::{Identity, Permission};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::stats::{mann_kendall, mean, percentile};
use crate::workload::{batch_tiles, random_square, PoissonArrivals, Region, COLLECTION, TENANT, USER};

const G: GridSpec = GridSpec::OGB;

/// Injected costs matching the reference constants of the model.
pub const REFERENCE_COST: CostModel = CostModel { c1_ms: 3.0, c2_ms: 0.008, c3_ms: 20.0, p_db: 0.85 };

/// Application-layer throughput of every link, bits/s.
pub const LAB_RATE_BPS: u64 = 200_000_000;

/// Cluster of `n_db` engines splitting `region`, one benchmark user.
pub fn lab_config(n_db: usize, region: Region, cost: Option<CostModel>) -> ClusterConfig {
    ClusterConfig {
        scheme: Scheme::Hmac,
        link_rate_bps: Some(LAB_RATE_BPS),
        qcache_capacity: 8192,
        lifetime_ms: 4000,
        retries: 2,
        cost,
        tenants: vec![TENANT.into()],
        users: vec![UserSpec { tid: TENANT.into(), cid: COLLECTION.into(), uid: USER.into(), perm: "rw".into() }],
        ..ClusterConfig::default()
    }
    .with_grid_engines(n_db, region.sw, region.width, region.height)
}

pub struct BenchCluster {
    pub cluster: Cluster,
    pub user: Arc<Identity>,
}

impl BenchCluster {
    pub fn start(config: ClusterConfig) -> Result<BenchCluster> {
        let cluster = Cluster::start(config)?;
        let user = cluster.issue_user(TENANT, COLLECTION, USER, Permission::ReadWrite)?;
        Ok(BenchCluster { cluster, user })
    }

    pub fn frontend(&self) -> &Arc<Frontend> {
        self.cluster.frontend()
    }

    pub fn n_db(&self) -> usize {
        self.cluster.engines.len()
    }

    /// Inserts features in chunks; returns the number of stored objects.
    pub fn ingest(&self, features: &[Feature], chunk: usize) -> Result<usize> {
        let mut stored = 0;
        for c in features.chunks(chunk.max(1)) {
            let r = self.frontend().insert_batch(&self.user, c)?;
            if !r.rejected.is_empty() {
                bail!("{} objects rejected, first {:?}", r.rejected.len(), r.rejected[0]);
            }
            stored += r.stored;
        }
        Ok(stored)
    }
}

/// One measured tile-query batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchRow {
    pub n_db: usize,
    pub n_q: usize,
    /// Mean items per tile-query.
    pub n_i: f64,
    pub h: f64,
    pub parallelism: usize,
    pub tb_ms: f64,
    pub bytes: usize,
    pub items: usize,
    /// Mean bytes per item as carried in the tile payloads.
    pub d_s: f64,
    /// Model prediction with the injected constants.
    pub model_ms: f64,
}

impl BatchRow {
    pub fn measurement(&self) -> Measurement {
        Measurement {
            n_q: self.n_q as f64,
            n_i: self.n_i,
            n_db: self.n_db as f64,
            h: self.h,
            d_s: self.d_s,
            b_w: LAB_RATE_BPS as f64,
            tb_ms: self.tb_ms,
        }
    }
}

/// Model parameters for a cost model and a measured workload.
pub fn model_params(cost: &CostModel, row: &BatchRow) -> ModelParams {
    ModelParams {
        c1: cost.c1_ms,
        c2: cost.c2_ms,
        c3: cost.c3_ms,
        p_db: cost.p_db,
        p_qh: 1.0 - cost.p_db,
        d_s: row.d_s,
        b_w: LAB_RATE_BPS as f64,
        ..ModelParams::reference()
    }
    .with_workload(row.n_q as f64, row.n_i, row.n_db as f64, row.h)
}

fn names_for(tiles: &[TileId]) -> Vec<geoicn_core::Name> {
    tiles.iter().map(|t| tile_query_name(G, *t, TENANT, COLLECTION, None)).collect()
}

/// Times one batch over `tiles` after pre-warming the engine caches with
/// the first `round(h·n)` of them.
pub fn measure_batch(bc: &BenchCluster, tiles: &[TileId], h: f64, parallelism: usize) -> Result<BatchRow> {
    let cost = bc.cluster.config.cost;
    let names = names_for(tiles);
    bc.cluster.clear_caches();
    let warm = ((h * names.len() as f64).round() as usize).min(names.len());
    if warm > 0 {
        bc.cluster.set_cost(None);
        let r = bc.frontend().tile_batch(&bc.user, &names[..warm], parallelism);
        bc.cluster.set_cost(cost);
        r?;
    }
    let t = Instant::now();
    let batch = bc.frontend().tile_batch(&bc.user, &names, parallelism)?;
    let tb_ms = t.elapsed().as_secs_f64() * 1000.0;
    let items: usize = batch.tiles.iter().map(Vec::len).sum();
    let n_q = names.len();
    let mut row = BatchRow {
        n_db: bc.n_db(),
        n_q,
        n_i: items as f64 / n_q.max(1) as f64,
        h: warm as f64 / n_q.max(1) as f64,
        parallelism,
        tb_ms,
        bytes: batch.bytes,
        items,
        d_s: if items > 0 { batch.bytes as f64 / items as f64 } else { 0.0 },
        model_ms: 0.0,
    };
    if let Some(c) = cost {
        row.model_ms = model_tb(&model_params(&c, &row));
    }
    Ok(row)
}

/// Batches of `n_q` distinct tiles of each level, evenly spread over the
/// region, with no cache.
pub fn tile_batch_sweep(
    bc: &BenchCluster,
    region: Region,
    n_qs: &[usize],
    levels: &[u8],
    parallelism: usize,
    rng: &mut impl Rng,
) -> Result<Vec<BatchRow>> {
    let mut rows = Vec::new();
    for &level in levels {
        for &n in n_qs {
            let tiles = batch_tiles(rng, region, level, n);
            rows.push(measure_batch(bc, &tiles, 0.0, parallelism)?);
        }
    }
    Ok(rows)
}

/// One batch of `n_q` tiles of `level` per cache-hit probability.
pub fn cache_sweep(
    bc: &BenchCluster,
    region: Region,
    n_q: usize,
    level: u8,
    hs: &[f64],
    parallelism: usize,
    rng: &mut impl Rng,
) -> Result<Vec<BatchRow>> {
    hs.iter()
        .map(|&h| {
            let tiles = batch_tiles(rng, region, level, n_q);
            measure_batch(bc, &tiles, h, parallelism)
        })
        .collect()
}

/// Mean range-query breakdown for one area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaRow {
    pub area_km2: f64,
    pub k: usize,
    pub use_bf: bool,
    pub queries: usize,
    pub mean_total_ms: f64,
    pub mean_tessellation_ms: f64,
    pub mean_bf_ms: f64,
    pub mean_batch_ms: f64,
    pub mean_resolve_ms: f64,
    pub mean_postfilter_ms: f64,
    pub mean_tiles: f64,
    pub mean_tiles_after_bf: f64,
    pub mean_objects: f64,
}

pub struct AreaSweep {
    pub areas: Vec<f64>,
    pub k: usize,
    pub use_bf: bool,
    pub queries: usize,
    pub within: BBox,
    pub parallelism: usize,
}

/// Randomly centred square intersect range-queries per area.
pub fn area_sweep(bc: &BenchCluster, s: &AreaSweep, rng: &mut impl Rng) -> Result<Vec<AreaRow>> {
    let mut rows = Vec::new();
    for &area in &s.areas {
        let mut acc = vec![Vec::new(); 9];
        for _ in 0..s.queries {
            let q = RangeQuery {
                k: Some(s.k),
                use_bf: s.use_bf,
                parallelism: s.parallelism,
                ..RangeQuery::new(random_square(rng, area, &s.within), TENANT, COLLECTION)
            };
            let t = Instant::now();
            let r = bc.frontend().range_query(&bc.user, &q)?;
            let st = r.stats;
            let vals = [
                t.elapsed().as_secs_f64() * 1000.0,
                st.tessellation_ms,
                st.bf_ms,
                st.batch_ms,
                st.resolve_ms,
                st.postfilter_ms,
                st.tiles as f64,
                st.tiles_after_bf as f64,
                r.objects.len() as f64,
            ];
            for (a, v) in acc.iter_mut().zip(vals) {
                a.push(v);
            }
        }
        let m: Vec<f64> = acc.iter().map(|v| mean(v)).collect();
        rows.push(AreaRow {
            area_km2: area,
            k: s.k,
            use_bf: s.use_bf,
            queries: s.queries,
            mean_total_ms: m[0],
            mean_tessellation_ms: m[1],
            mean_bf_ms: m[2],
            mean_batch_ms: m[3],
            mean_resolve_ms: m[4],
            mean_postfilter_ms: m[5],
            mean_tiles: m[6],
            mean_tiles_after_bf: m[7],
            mean_objects: m[8],
        });
    }
    Ok(rows)
}

/// Constrained tessellation statistics per area and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TessRow {
    pub area_km2: f64,
    pub k: usize,
    pub queries: usize,
    pub mean_tiles: f64,
    pub mean_stretch_minus_1: f64,
    pub mean_ms: f64,
    pub fallback_fraction: f64,
}

pub fn tessellation_sweep(areas: &[f64], ks: &[usize], queries: usize, within: &BBox, rng: &mut impl Rng) -> Result<Vec<TessRow>> {
    let mut rows = Vec::new();
    for &area in areas {
        let boxes: Vec<BBox> = (0..queries).map(|_| random_square(rng, area, within)).collect();
        for &k in ks {
            let (mut tiles, mut stretch, mut ms, mut fallback) = (Vec::new(), Vec::new(), Vec::new(), 0usize);
            for q in &boxes {
                let t = Instant::now();
                let tess = constrained_tessellation(q, k)?;
                ms.push(t.elapsed().as_secs_f64() * 1000.0);
                tiles.push(tess.len() as f64);
                stretch.push(tess.stretch - 1.0);
                fallback += usize::from(!tess.constraint_respected);
            }
            rows.push(TessRow {
                area_km2: area,
                k,
                queries,
                mean_tiles: mean(&tiles),
                mean_stretch_minus_1: mean(&stretch),
                mean_ms: mean(&ms),
                fallback_fraction: fallback as f64 / queries.max(1) as f64,
            });
        }
    }
    Ok(rows)
}

/// Outcome of one fixed-rate Poisson run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub rate_qps: f64,
    pub queries: usize,
    pub errors: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub mk_z: f64,
    pub p_increasing: f64,
    pub stable: bool,
}

pub struct RateProbe {
    pub queries: usize,
    pub area_km2: f64,
    pub within: BBox,
    pub k: usize,
    pub use_bf: bool,
    pub parallelism: usize,
    /// Concurrent query workers, like front-end server threads.
    pub workers: usize,
    /// Significance of the increasing-trend test.
    pub alpha: f64,
    pub seed: u64,
}

/// Open-loop run: queries arrive as a Poisson process and latency counts
/// from the scheduled arrival, so queueing shows up as a latency trend.
pub fn probe_rate(bc: &BenchCluster, p: &RateProbe, rate: f64) -> RateRow {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let boxes: Vec<BBox> = (0..p.queries).map(|_| random_square(&mut rng, p.area_km2, &p.within)).collect();
    let gaps: Vec<f64> = PoissonArrivals::new(rate, ChaCha8Rng::seed_from_u64(p.seed ^ 0x9e37)).take(p.queries).collect();
    let (tx, rx) = crossbeam_channel::unbounded::<(usize, Instant)>();
    let start = Instant::now();
    let results: Vec<Vec<(usize, Option<f64>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..p.workers.max(1))
            .map(|_| {
                let rx = rx.clone();
                let boxes = &boxes;
                s.spawn(move || {
                    let mut local = Vec::new();
                    for (i, due) in rx.iter() {
                        let q = RangeQuery {
                            k: Some(p.k),
                            use_bf: p.use_bf,
                            parallelism: p.parallelism,
                            ..RangeQuery::new(boxes[i], TENANT, COLLECTION)
                        };
                        let ok = bc.frontend().range_query(&bc.user, &q).is_ok();
                        local.push((i, ok.then(|| due.elapsed().as_secs_f64() * 1000.0)));
                    }
                    local
                })
            })
            .collect();
        let mut due = start;
        for (i, gap) in gaps.iter().enumerate() {
            due += Duration::from_secs_f64(*gap);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
            tx.send((i, due)).expect("workers alive");
        }
        drop(tx);
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut lat = vec![None; p.queries];
    for (i, l) in results.into_iter().flatten() {
        lat[i] = l;
    }
    let ok: Vec<f64> = lat.iter().flatten().copied().collect();
    let errors = p.queries - ok.len();
    let mk = mann_kendall(&ok);
    RateRow {
        rate_qps: rate,
        queries: p.queries,
        errors,
        mean_ms: mean(&ok),
        p95_ms: percentile(&ok, 95.0),
        mk_z: mk.z,
        p_increasing: mk.p_increasing,
        stable: errors == 0 && mk.p_increasing >= p.alpha,
    }
}

/// Bisection for the highest stable rate in `[lo, hi]`, to `resolution`
/// queries per second. Returns the rate and every probe.
pub fn max_rate_search(lo: f64, hi: f64, resolution: f64, mut probe: impl FnMut(f64) -> RateRow) -> (f64, Vec<RateRow>) {
    let mut rows = Vec::new();
    let top = probe(hi);
    rows.push(top);
    if top.stable {
        return (hi, rows);
    }
    let bottom = probe(lo);
    rows.push(bottom);
    if !bottom.stable {
        return (0.0, rows);
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > resolution {
        let mid = (lo + hi) / 2.0;
        let r = probe(mid);
        rows.push(r);
        if r.stable {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, rows)
}

pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).context("writing CSV row")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_brackets_threshold() {
        let row = |rate: f64, stable: bool| RateRow {
            rate_qps: rate,
            queries: 1,
            errors: 0,
            mean_ms: 0.0,
            p95_ms: 0.0,
            mk_z: 0.0,
            p_increasing: 1.0,
            stable,
        };
        let (r, rows) = max_rate_search(1.0, 100.0, 0.5, |x| row(x, x <= 37.3));
        assert!(r <= 37.3 && 37.3 - r <= 0.5, "{r}");
        assert!(rows.len() < 12);
        assert_eq!(max_rate_search(1.0, 10.0, 0.5, |x| row(x, true)).0, 10.0);
        assert_eq!(max_rate_search(1.0, 10.0, 0.5, |x| row(x, false)).0, 0.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rows = [TessRow { area_km2: 1.0, k: 5, queries: 2, mean_tiles: 1.5, mean_stretch_minus_1: 0.25, mean_ms: 0.1, fallback_fraction: 0.0 }];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "area_km2,k,queries,mean_tiles,mean_stretch_minus_1,mean_ms,fallback_fraction");
        assert_eq!(s.lines().count(), 2);
    }
}
