//! Bloom-filter parameters, hashing and the engine-side counting filter.

use geoicn_core::geogrid::{GridSpec, TileId};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Filter geometry shared by the BF server and every engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BloomParams {
    pub m: u32,
    pub h: u32,
}

impl BloomParams {
    /// Optimal `m` and `h` for `capacity` keys at false-positive rate `fp`.
    pub fn for_capacity(capacity: usize, fp: f64) -> BloomParams {
        let n = capacity.max(1) as f64;
        let ln2 = std::f64::consts::LN_2;
        let m = (-n * fp.ln() / (ln2 * ln2)).ceil().max(8.0);
        let h = (m / n * ln2).round().max(1.0);
        BloomParams { m: m as u32, h: h as u32 }
    }

    /// Bucket indices of `key` by double hashing over SHA-256.
    pub fn indices(&self, key: &[u8]) -> impl Iterator<Item = u32> + '_ {
        let d = Sha256::digest(key);
        let h1 = u64::from_be_bytes(d[0..8].try_into().expect("8 bytes"));
        let h2 = u64::from_be_bytes(d[8..16].try_into().expect("8 bytes")) | 1;
        let m = u64::from(self.m);
        (0..u64::from(self.h)).map(move |i| (h1.wrapping_add(i.wrapping_mul(h2)) % m) as u32)
    }

    /// `(1 − e^{−hn/m})^h` for `n` distinct keys.
    pub fn analytic_fp(&self, n: usize) -> f64 {
        let h = f64::from(self.h);
        (1.0 - (-h * n as f64 / f64::from(self.m)).exp()).powf(h)
    }
}

/// Membership key of a tile for one tenant and collection.
pub fn bloom_key(grid: GridSpec, tile: TileId, tid: &str, cid: &str) -> String {
    format!("{}/{tid}/{cid}", grid.tile_prefix(tile).to_uri())
}

/// Bucket transition to publish: `set` is true for 0→1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub index: u32,
    pub set: bool,
}

const MAX_COUNT: u8 = 15;

/// 4-bit saturating counters, two per byte. A saturated counter is never
/// decremented, so it can only overstate membership.
#[derive(Debug, Clone)]
pub struct CountingBloom {
    params: BloomParams,
    nibbles: Vec<u8>,
}

impl CountingBloom {
    pub fn new(params: BloomParams) -> CountingBloom {
        CountingBloom { params, nibbles: vec![0; (params.m as usize).div_ceil(2)] }
    }

    pub fn params(&self) -> BloomParams {
        self.params
    }

    pub fn count(&self, i: u32) -> u8 {
        let b = self.nibbles[i as usize / 2];
        if i.is_multiple_of(2) {
            b & 0x0f
        } else {
            b >> 4
        }
    }

    fn set_count(&mut self, i: u32, v: u8) {
        let b = &mut self.nibbles[i as usize / 2];
        *b = if i.is_multiple_of(2) { (*b & 0xf0) | v } else { (*b & 0x0f) | (v << 4) };
    }

    /// Adds one key; returns the buckets that became non-zero.
    pub fn insert(&mut self, key: &[u8]) -> Vec<Transition> {
        let idx: Vec<u32> = self.params.indices(key).collect();
        let mut out = Vec::new();
        for i in idx {
            let c = self.count(i);
            if c < MAX_COUNT {
                self.set_count(i, c + 1);
                if c == 0 {
                    out.push(Transition { index: i, set: true });
                }
            }
        }
        out
    }

    /// Removes one key previously inserted; returns the buckets that became zero.
    pub fn remove(&mut self, key: &[u8]) -> Vec<Transition> {
        let idx: Vec<u32> = self.params.indices(key).collect();
        let mut out = Vec::new();
        for i in idx {
            let c = self.count(i);
            if c > 0 && c < MAX_COUNT {
                self.set_count(i, c - 1);
                if c == 1 {
                    out.push(Transition { index: i, set: false });
                }
            }
        }
        out
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.params.indices(key).all(|i| self.count(i) > 0)
    }

    /// Indices of non-zero buckets.
    pub fn nonzero(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.params.m).filter(|&i| self.count(i) > 0)
    }
}
