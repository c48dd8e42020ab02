//! Forwarding engine as a pure state machine: packets in, packets out.

use std::sync::Arc;

use super::clock::Clock;
use super::packet::{Data, Interest, Packet};
use super::tables::{ContentStore, DeadNonceList, FaceId, Fib, InRecord, Pit, PitEntry};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub interests_in: u64,
    pub interests_out: u64,
    pub aggregated: u64,
    pub cs_hits: u64,
    pub no_route: u64,
    pub loop_dropped: u64,
    pub data_in: u64,
    pub data_out: u64,
    pub unsolicited: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwarderConfig {
    pub cs_capacity: usize,
    pub dead_nonce_ms: u64,
}

impl Default for ForwarderConfig {
    fn default() -> Self {
        ForwarderConfig { cs_capacity: 65_536, dead_nonce_ms: 6_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub face: FaceId,
    pub packet: Packet,
}

#[derive(Debug)]
pub struct Forwarder {
    pub fib: Fib,
    pub pit: Pit,
    pub cs: ContentStore,
    dead: DeadNonceList,
    clock: Arc<dyn Clock>,
    counters: Counters,
}

impl Forwarder {
    pub fn new(config: ForwarderConfig, clock: Arc<dyn Clock>) -> Self {
        Forwarder {
            fib: Fib::default(),
            pit: Pit::default(),
            cs: ContentStore::new(config.cs_capacity),
            dead: DeadNonceList::new(config.dead_nonce_ms),
            clock,
            counters: Counters::default(),
        }
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn receive(&mut self, face: FaceId, packet: Packet) -> Vec<Outgoing> {
        match packet {
            Packet::Interest(i) => self.on_interest(face, i),
            Packet::Data(d) => self.on_data(face, d),
        }
    }

    pub fn on_interest(&mut self, face: FaceId, interest: Interest) -> Vec<Outgoing> {
        let now = self.clock.now_ms();
        self.counters.interests_in += 1;
        if self.dead.contains(&interest.name, interest.nonce, now) {
            self.counters.loop_dropped += 1;
            return Vec::new();
        }
        if let Some(data) = self.cs.lookup(&interest.name, now) {
            self.counters.cs_hits += 1;
            self.counters.data_out += 1;
            return vec![Outgoing { face, packet: Packet::Data(data) }];
        }
        let expiry = now + u64::from(interest.lifetime_ms);
        let record = InRecord { face, nonce: interest.nonce, expiry };
        if let Some(entry) = self.pit.get_live(&interest.name, now) {
            if !entry.nonces.insert(interest.nonce) {
                self.counters.loop_dropped += 1;
                return Vec::new();
            }
            entry.expiry = entry.expiry.max(expiry);
            if let Some(existing) = entry.in_records.iter_mut().find(|r| r.face == face) {
                // Same downstream with a fresh nonce: a consumer retransmission.
                *existing = record;
            } else {
                entry.in_records.push(record);
                self.counters.aggregated += 1;
                return Vec::new();
            }
            return self.forward(face, interest);
        }
        let out = self.forward(face, interest.clone());
        if !out.is_empty() {
            let mut entry = PitEntry { in_records: vec![record], expiry, ..Default::default() };
            entry.nonces.insert(interest.nonce);
            self.pit.insert(interest.name, entry);
        }
        out
    }

    fn forward(&mut self, from: FaceId, interest: Interest) -> Vec<Outgoing> {
        let next = self
            .fib
            .longest_prefix_match(&interest.name)
            .and_then(|faces| faces.iter().copied().find(|f| *f != from));
        match next {
            Some(face) => {
                self.counters.interests_out += 1;
                vec![Outgoing { face, packet: Packet::Interest(interest) }]
            }
            None => {
                self.counters.no_route += 1;
                Vec::new()
            }
        }
    }

    pub fn on_data(&mut self, face: FaceId, data: Data) -> Vec<Outgoing> {
        let now = self.clock.now_ms();
        self.counters.data_in += 1;
        let Some(entry) = self.pit.take_live(&data.name, now) else {
            self.counters.unsolicited += 1;
            return Vec::new();
        };
        for r in &entry.in_records {
            self.dead.insert(&data.name, r.nonce, now);
        }
        let out: Vec<Outgoing> = entry
            .in_records
            .iter()
            .filter(|r| r.face != face && r.expiry > now)
            .map(|r| Outgoing { face: r.face, packet: Packet::Data(data.clone()) })
            .collect();
        self.counters.data_out += out.len() as u64;
        self.cs.insert(data, now);
        out
    }

    /// Drops PIT entries whose lifetime has elapsed.
    pub fn expire(&mut self) -> usize {
        let now = self.clock.now_ms();
        self.pit.expire(now)
    }

    /// Removes every route through `face`.
    pub fn remove_face(&mut self, face: FaceId) {
        self.fib.remove_face(face);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::icn::clock::ManualClock;
    use geoicn_core::name;
    use proptest::prelude::*;

    const UP: FaceId = FaceId(100);

    fn setup() -> (Forwarder, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(1_000));
        let mut f = Forwarder::new(ForwarderConfig::default(), clock.clone());
        f.fib.add_route(name("/OGB"), UP);
        (f, clock)
    }

    fn interest(n: &str, nonce: u32) -> Interest {
        Interest { nonce, ..Interest::new(name(n)) }
    }

    fn upstream(out: &[Outgoing]) -> usize {
        out.iter().filter(|o| o.face == UP).count()
    }

    #[test]
    fn concurrent_interests_aggregate() {
        let (mut f, _) = setup();
        let n = "/OGB/x/TILE/t/c";
        assert_eq!(upstream(&f.on_interest(FaceId(1), interest(n, 1))), 1);
        assert!(f.on_interest(FaceId(2), interest(n, 2)).is_empty());
        let out = f.on_data(UP, Data::new(name(n), vec![1]));
        let mut faces: Vec<_> = out.iter().map(|o| o.face).collect();
        faces.sort();
        assert_eq!(faces, vec![FaceId(1), FaceId(2)]);
        assert!(f.pit.is_empty());
    }

    #[test]
    fn multicast_eight_consumers() {
        let (mut f, _) = setup();
        let n = "/OGB/12/41/GPS-ID/TILE/Foo/Shop";
        let mut up = 0;
        for c in 0..8 {
            up += upstream(&f.on_interest(FaceId(c), interest(n, c + 10)));
        }
        assert_eq!(up, 1);
        let out = f.on_data(UP, Data::new(name(n), vec![1]));
        assert_eq!(out.len(), 8);
        assert_eq!(f.counters().interests_out, 1);
        assert_eq!(f.counters().aggregated, 7);
    }

    #[test]
    fn cache_hit_creates_no_pit_entry() {
        let (mut f, _) = setup();
        f.on_interest(FaceId(1), interest("/OGB/a", 1));
        f.on_data(UP, Data::new(name("/OGB/a"), vec![1]).with_freshness(1000));
        let out = f.on_interest(FaceId(2), interest("/OGB/a", 2));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].face, FaceId(2));
        assert!(f.pit.is_empty());
        assert_eq!(f.counters().cs_hits, 1);
    }

    #[test]
    fn expired_twin_is_forwarded_anew() {
        let (mut f, clock) = setup();
        let i = interest("/OGB/a", 1).with_lifetime(100);
        assert_eq!(upstream(&f.on_interest(FaceId(1), i)), 1);
        clock.advance(101);
        assert_eq!(upstream(&f.on_interest(FaceId(2), interest("/OGB/a", 2))), 1);
        assert_eq!(f.counters().interests_out, 2);
    }

    #[test]
    fn zero_freshness_goes_upstream_again() {
        let (mut f, _) = setup();
        f.on_interest(FaceId(1), interest("/OGB/a", 1));
        assert_eq!(f.on_data(UP, Data::new(name("/OGB/a"), vec![1])).len(), 1);
        assert_eq!(upstream(&f.on_interest(FaceId(1), interest("/OGB/a", 2))), 1);
    }

    #[test]
    fn unsolicited_data_dropped() {
        let (mut f, _) = setup();
        assert!(f.on_data(UP, Data::new(name("/OGB/zzz"), vec![])).is_empty());
        assert_eq!(f.counters().unsolicited, 1);
    }

    #[test]
    fn no_route_drops() {
        let (mut f, _) = setup();
        assert!(f.on_interest(FaceId(1), interest("/other", 1)).is_empty());
        assert_eq!(f.counters().no_route, 1);
        assert!(f.pit.is_empty());
    }

    #[test]
    fn duplicate_nonce_is_loop_dropped() {
        let (mut f, _) = setup();
        f.on_interest(FaceId(1), interest("/OGB/a", 5));
        assert!(f.on_interest(FaceId(2), interest("/OGB/a", 5)).is_empty());
        f.on_data(UP, Data::new(name("/OGB/a"), vec![]));
        assert!(f.on_interest(FaceId(3), interest("/OGB/a", 5)).is_empty());
        assert_eq!(f.counters().loop_dropped, 2);
    }

    #[test]
    fn retransmission_from_same_face_is_forwarded() {
        let (mut f, _) = setup();
        f.on_interest(FaceId(1), interest("/OGB/a", 1));
        assert_eq!(upstream(&f.on_interest(FaceId(1), interest("/OGB/a", 2))), 1);
        assert_eq!(f.on_data(UP, Data::new(name("/OGB/a"), vec![])).len(), 1);
    }

    #[test]
    fn level0_route_covers_descendants() {
        let clock = Arc::new(ManualClock::new(0));
        let mut f = Forwarder::new(ForwarderConfig::default(), clock);
        f.fib.add_route(name("/OGB/12/41"), UP);
        for n in ["/OGB/12/41/GPS-ID/TILE/a/b", "/OGB/12/41/5/1/GPS-ID/TILE/a/b", "/OGB/12/41/58/19/GPS-ID/IP-RES"] {
            assert_eq!(upstream(&f.on_interest(FaceId(1), interest(n, 1))), 1);
        }
    }

    proptest! {
        #[test]
        fn never_serves_stale(ops in proptest::collection::vec((0u64..50, 0u32..40, any::<bool>()), 1..80)) {
            let (mut f, clock) = setup();
            let mut inserted: Option<(u64, u32)> = None;
            for (i, (dt, fresh, put)) in ops.into_iter().enumerate() {
                clock.advance(dt);
                if put {
                    f.on_interest(FaceId(1), interest("/OGB/a", i as u32 * 2));
                    if !f.on_data(UP, Data::new(name("/OGB/a"), vec![]).with_freshness(fresh)).is_empty() {
                        inserted = Some((clock.now_ms(), fresh));
                    }
                } else {
                    let hits = f.counters().cs_hits;
                    f.on_interest(FaceId(2), interest("/OGB/a", i as u32 * 2 + 1));
                    if f.counters().cs_hits > hits {
                        let (at, fresh) = inserted.expect("hit implies insert");
                        prop_assert!(clock.now_ms() - at < u64::from(fresh));
                    }
                }
            }
        }

        #[test]
        fn same_nonce_never_forwarded_twice(faces in proptest::collection::vec(0u32..4, 1..20)) {
            let (mut f, _) = setup();
            for face in faces {
                f.on_interest(FaceId(face), interest("/OGB/a", 99));
            }
            prop_assert_eq!(f.counters().interests_out, 1);
        }
    }
}
