//! Synthetic datasets and query streams.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use geoicn_core::geogrid::{GridSpec, TileId};
use geoicn_core::{BBox, Feature, GeoCoord};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde_json::{json, Map};

const G: GridSpec = GridSpec::OGB;

/// Kilometres per degree used to convert query areas.
pub const KM_PER_DEG: f64 = 100.0;

/// Query areas of the sweeps, in km².
pub const AREA_SWEEP_KM2: [f64; 7] = [1.0, 10.0, 100.0, 1_000.0, 10_000.0, 100_000.0, 1_000_000.0];

/// Tenant, collection and user of benchmark data.
pub const TENANT: &str = "Lab";
pub const COLLECTION: &str = "Grid";
pub const USER: &str = "bench";

/// A level-0 aligned rectangle: south-west corner and size in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub sw: [i64; 2],
    pub width: i64,
    pub height: i64,
}

impl Region {
    /// The 4×4 degree laboratory area.
    pub const LAB: Region = Region { sw: [10, 40], width: 4, height: 4 };
    /// Rough European extent for application-style workloads.
    pub const EUROPE: Region = Region { sw: [-10, 36], width: 40, height: 24 };

    pub fn bbox(&self) -> BBox {
        let [x, y] = self.sw;
        BBox::new(x as f64, y as f64, (x + self.width) as f64, (y + self.height) as f64).expect("region inside the world")
    }

    /// Tiles of `level` inside the region, in row-major order per level-0 tile.
    pub fn tiles(&self, level: u8) -> Vec<TileId> {
        let s = G.scale(level);
        let [x0, y0] = self.sw;
        let mut out = Vec::new();
        for x in x0 * s..(x0 + self.width) * s {
            for y in y0 * s..(y0 + self.height) * s {
                out.push(TileId { level, x, y });
            }
        }
        out
    }

    pub fn level0(&self) -> Vec<TileId> {
        self.tiles(0)
    }

    fn tile_count(&self, level: u8) -> i64 {
        let s = G.scale(level);
        self.width * self.height * s * s
    }
}

fn center(t: TileId) -> GeoCoord {
    G.tile_bbox::<f64>(t).center()
}

/// One point at the centre of every level-2 tile of `region`.
pub fn dense_points(region: Region) -> Vec<Feature> {
    region
        .tiles(G.finest())
        .into_iter()
        .map(|t| Feature::point(&format!("p{}_{}", t.x, t.y), TENANT, COLLECTION, USER, center(t), Map::new()))
        .collect()
}

/// Sparse multipoint dataset.
///
/// `non_void` distinct level-2 tiles of `region` are drawn uniformly; each
/// feature places between 1 and `max_points` points in tiles of that pool
/// sharing one level-0 tile, like stops along a short route.
pub fn sparse_multipoints(rng: &mut impl Rng, region: Region, non_void: usize, features: usize, max_points: usize) -> Vec<Feature> {
    let finest = G.finest();
    let s = G.scale(finest);
    let target = non_void.min(region.tile_count(finest) as usize).max(1);
    let mut pool = HashSet::new();
    while pool.len() < target {
        let x = rng.gen_range(region.sw[0] * s..(region.sw[0] + region.width) * s);
        let y = rng.gen_range(region.sw[1] * s..(region.sw[1] + region.height) * s);
        pool.insert(TileId { level: finest, x, y });
    }
    let mut groups: BTreeMap<TileId, Vec<TileId>> = BTreeMap::new();
    for t in pool {
        groups.entry(G.ancestor(t, 0).expect("finest tile")).or_default().push(t);
    }
    let groups: Vec<Vec<TileId>> = groups.into_values().map(|mut g| {
        g.sort();
        g
    }).collect();
    let scale = G.tile_area::<f64>(finest).sqrt();
    (0..features)
        .map(|i| {
            let g = groups.choose(rng).expect("non-empty pool");
            let n = rng.gen_range(1..=max_points.max(1));
            let coords: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    let t = g.choose(rng).expect("non-empty group");
                    let sw = G.sw::<f64>(*t);
                    [sw.lng + rng.gen_range(0.0..scale), sw.lat + rng.gen_range(0.0..scale)]
                })
                .collect();
            let geometry = match coords.as_slice() {
                [c] => json!({"type": "Point", "coordinates": c}),
                _ => json!({"type": "MultiPoint", "coordinates": coords}),
            };
            let v = json!({
                "type": "Feature",
                "geometry": geometry,
                "properties": {"oid": format!("s{i}"), "tid": TENANT, "cid": COLLECTION, "uid": USER},
            });
            Feature::from_value(v).expect("generated feature is valid")
        })
        .collect()
}

/// Level-`level` tiles holding at least one point of `features`.
pub fn non_void_tiles(features: &[Feature], level: u8) -> BTreeSet<TileId> {
    features
        .iter()
        .flat_map(|f| G.intersecting_tiles(&f.geometry, level).expect("valid geometry"))
        .collect()
}

/// `n` distinct level-`level` tiles of `region`, spread evenly over its
/// level-0 tiles so that every engine of a tile-aligned split gets an equal
/// share.
pub fn batch_tiles(rng: &mut impl Rng, region: Region, level: u8, n: usize) -> Vec<TileId> {
    let mut per: Vec<Vec<TileId>> = region
        .level0()
        .into_iter()
        .map(|t0| {
            let mut v: Vec<TileId> = G.cells_at(t0, level).cells().map(|(x, y)| TileId { level, x, y }).collect();
            v.shuffle(rng);
            v
        })
        .collect();
    per.shuffle(rng);
    let mut out = Vec::with_capacity(n);
    'fill: loop {
        let mut progressed = false;
        for v in per.iter_mut() {
            if out.len() == n {
                break 'fill;
            }
            if let Some(t) = v.pop() {
                out.push(t);
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    out.shuffle(rng);
    out
}

/// Square of `area_km2` with a uniformly random centre, kept inside `within`
/// when it fits.
pub fn random_square(rng: &mut impl Rng, area_km2: f64, within: &BBox) -> BBox {
    let side = area_km2.sqrt() / KM_PER_DEG;
    let (min, max) = (within.min(), within.max());
    let pick = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| {
        if hi - lo > side {
            rng.gen_range(lo + side / 2.0..hi - side / 2.0)
        } else {
            (lo + hi) / 2.0
        }
    };
    let cx = pick(rng, min.lng, max.lng);
    let cy = pick(rng, min.lat, max.lat);
    let h = side / 2.0;
    BBox::new((cx - h).max(-180.0), (cy - h).max(-90.0), (cx + h).min(180.0), (cy + h).min(90.0)).expect("non-degenerate square")
}

/// Poisson arrivals: exponential inter-arrival times in seconds.
pub struct PoissonArrivals<R> {
    exp: Exp<f64>,
    rng: R,
}

impl<R: Rng> PoissonArrivals<R> {
    pub fn new(rate_per_s: f64, rng: R) -> PoissonArrivals<R> {
        PoissonArrivals { exp: Exp::new(rate_per_s).expect("positive rate"), rng }
    }
}

impl<R: Rng> Iterator for PoissonArrivals<R> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.exp.sample(&mut self.rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_lab_region_has_160k_points() {
        assert_eq!(Region::LAB.tiles(2).len(), 4 * 4 * 100 * 100);
        let small = Region { sw: [12, 41], width: 1, height: 1 };
        let pts = dense_points(small);
        assert_eq!(pts.len(), 10_000);
        assert_eq!(non_void_tiles(&pts, 2).len(), 10_000);
        assert_eq!(non_void_tiles(&pts, 1).len(), 100);
    }

    #[test]
    fn batch_tiles_are_distinct_and_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = batch_tiles(&mut rng, Region::LAB, 1, 800);
        assert_eq!(t.iter().collect::<BTreeSet<_>>().len(), 800);
        let mut per = BTreeMap::new();
        for x in &t {
            *per.entry(G.ancestor(*x, 0).unwrap()).or_insert(0) += 1;
        }
        assert!(per.values().all(|&n| n == 50));
        assert_eq!(batch_tiles(&mut rng, Region { sw: [0, 0], width: 1, height: 1 }, 1, 500).len(), 100);
    }

    #[test]
    fn sparse_features_stay_in_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fs = sparse_multipoints(&mut rng, Region::LAB, 300, 1000, 3);
        assert_eq!(fs.len(), 1000);
        let nv = non_void_tiles(&fs, 2);
        assert!(nv.len() <= 300 && nv.len() > 250);
        assert!(fs.iter().all(|f| f.geometry.within(&Region::LAB.bbox())));
        assert!(fs.iter().any(|f| f.geometry.points().len() > 1));
    }

    #[test]
    fn squares_have_requested_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eu = Region::EUROPE.bbox();
        for a in AREA_SWEEP_KM2 {
            let q = random_square(&mut rng, a, &eu);
            let km2 = q.area() * KM_PER_DEG * KM_PER_DEG;
            assert!((km2 - a).abs() / a < 1e-9, "{a} -> {km2}");
        }
    }

    #[test]
    fn poisson_mean_interarrival() {
        // Seeded sample: the mean of 10^4 exponential draws at rate 40/s
        // must land within 5% of 1/40 s.
        let rate = 40.0;
        let xs: Vec<f64> = PoissonArrivals::new(rate, ChaCha8Rng::seed_from_u64(4)).take(10_000).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean * rate - 1.0).abs() < 0.05, "mean {mean}");
        assert!(xs.iter().all(|x| *x >= 0.0));
    }
}
