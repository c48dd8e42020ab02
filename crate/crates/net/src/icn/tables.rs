//! FIB, PIT, content store and dead-nonce list.

use std::collections::{HashMap, HashSet, VecDeque};
use std::num::NonZeroUsize;

use geoicn_core::Name;
use lru::LruCache;

use super::packet::Data;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceId(pub u32);

impl std::fmt::Display for FaceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "face{}", self.0)
    }
}

#[derive(Debug, Default, Clone)]
pub struct Fib {
    routes: HashMap<Name, Vec<FaceId>>,
    longest: usize,
}

impl Fib {
    /// Registering the same (prefix, face) twice is a no-op.
    pub fn add_route(&mut self, prefix: Name, face: FaceId) {
        self.longest = self.longest.max(prefix.len());
        let faces = self.routes.entry(prefix).or_default();
        if !faces.contains(&face) {
            faces.push(face);
        }
    }

    pub fn remove_route(&mut self, prefix: &Name, face: FaceId) {
        if let Some(faces) = self.routes.get_mut(prefix) {
            faces.retain(|f| *f != face);
            if faces.is_empty() {
                self.routes.remove(prefix);
            }
        }
    }

    pub fn remove_face(&mut self, face: FaceId) {
        self.routes.retain(|_, faces| {
            faces.retain(|f| *f != face);
            !faces.is_empty()
        });
    }

    /// Faces of the entry sharing the most leading components with `name`.
    pub fn longest_prefix_match(&self, name: &Name) -> Option<&[FaceId]> {
        (0..=name.len().min(self.longest))
            .rev()
            .find_map(|n| self.routes.get(&name.prefix(n)))
            .map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct InRecord {
    pub face: FaceId,
    pub nonce: u32,
    pub expiry: u64,
}

#[derive(Debug, Clone, Default)]
pub struct PitEntry {
    pub in_records: Vec<InRecord>,
    pub nonces: HashSet<u32>,
    pub expiry: u64,
}

#[derive(Debug, Default)]
pub struct Pit {
    entries: HashMap<Name, PitEntry>,
}

impl Pit {
    /// Live entry for `name`; an expired one is discarded first.
    pub fn get_live(&mut self, name: &Name, now: u64) -> Option<&mut PitEntry> {
        if self.entries.get(name).is_some_and(|e| e.expiry <= now) {
            self.entries.remove(name);
        }
        self.entries.get_mut(name)
    }

    pub fn insert(&mut self, name: Name, entry: PitEntry) {
        self.entries.insert(name, entry);
    }

    pub fn take_live(&mut self, name: &Name, now: u64) -> Option<PitEntry> {
        self.entries.remove(name).filter(|e| e.expiry > now)
    }

    pub fn expire(&mut self, now: u64) -> usize {
        let before = self.entries.len();
        self.entries.retain(|_, e| e.expiry > now);
        before - self.entries.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// LRU content store. Data with zero freshness is never admitted.
#[derive(Debug)]
pub struct ContentStore {
    cache: Option<LruCache<Name, (Data, u64)>>,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        ContentStore { cache: NonZeroUsize::new(capacity).map(LruCache::new) }
    }

    pub fn insert(&mut self, data: Data, now: u64) {
        if data.freshness_ms == 0 {
            return;
        }
        if let Some(c) = &mut self.cache {
            c.put(data.name.clone(), (data, now));
        }
    }

    /// Fresh entry for `name`; a stale one is evicted.
    pub fn lookup(&mut self, name: &Name, now: u64) -> Option<Data> {
        let c = self.cache.as_mut()?;
        let (data, at) = c.get(name)?;
        if now.saturating_sub(*at) < u64::from(data.freshness_ms) {
            return Some(data.clone());
        }
        c.pop(name);
        None
    }

    pub fn len(&self) -> usize {
        self.cache.as_ref().map_or(0, LruCache::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        if let Some(c) = &mut self.cache {
            c.clear();
        }
    }
}

/// Recently satisfied (name, nonce) pairs, remembered for a fixed window so
/// looping Interests are not forwarded again after their PIT entry is gone.
#[derive(Debug)]
pub struct DeadNonceList {
    window_ms: u64,
    order: VecDeque<(u64, Name, u32)>,
    set: HashSet<(Name, u32)>,
}

impl DeadNonceList {
    pub fn new(window_ms: u64) -> Self {
        DeadNonceList { window_ms, order: VecDeque::new(), set: HashSet::new() }
    }

    fn prune(&mut self, now: u64) {
        while let Some((t, _, _)) = self.order.front() {
            if *t > now {
                break;
            }
            let (_, n, nonce) = self.order.pop_front().expect("front exists");
            self.set.remove(&(n, nonce));
        }
    }

    pub fn insert(&mut self, name: &Name, nonce: u32, now: u64) {
        self.prune(now);
        if self.set.insert((name.clone(), nonce)) {
            self.order.push_back((now + self.window_ms, name.clone(), nonce));
        }
    }

    pub fn contains(&mut self, name: &Name, nonce: u32, now: u64) -> bool {
        self.prune(now);
        self.set.contains(&(name.clone(), nonce))
    }
}
