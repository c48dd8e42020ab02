//! Face transports. A face is the node-side id of a channel; the transport
//! is the outbound half, and an [`Inlet`] is the inbound half pointing into
//! a node's inbox.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Sender};
use parking_lot::Mutex;

use super::packet::Packet;
use super::tables::FaceId;

pub trait Transport: Send + Sync {
    fn send(&self, packet: Packet);
}

pub(crate) enum Event {
    Packet(FaceId, Packet),
    Stop,
}

/// Delivers packets into a node as if they arrived on `face`.
#[derive(Clone)]
pub struct Inlet {
    pub(crate) inbox: Sender<Event>,
    pub(crate) face: FaceId,
}

impl Inlet {
    pub fn face(&self) -> FaceId {
        self.face
    }

    pub fn deliver(&self, packet: Packet) {
        // A stopped node silently discards traffic, like a dead link.
        let _ = self.inbox.send(Event::Packet(self.face, packet));
    }
}

impl Transport for Inlet {
    fn send(&self, packet: Packet) {
        self.deliver(packet);
    }
}

/// Hands packets to an application over a channel.
pub struct AppTransport(pub Sender<Packet>);

impl Transport for AppTransport {
    fn send(&self, packet: Packet) {
        let _ = self.0.send(packet);
    }
}

/// Token-bucket shaper: packets leave in order, each after its serialization
/// time at `rate_bps` has elapsed.
pub struct Shaped {
    tx: Sender<Packet>,
    sent_bytes: Arc<AtomicU64>,
}

impl Shaped {
    pub fn new(inner: Arc<dyn Transport>, rate_bps: u64) -> Self {
        let (tx, rx) = unbounded::<Packet>();
        let sent_bytes = Arc::new(AtomicU64::new(0));
        let counter = sent_bytes.clone();
        thread::Builder::new()
            .name("link-shaper".into())
            .spawn(move || {
                let mut free_at = Instant::now();
                for p in rx {
                    let bytes = p.wire_len() as u64;
                    let tx_time = Duration::from_nanos(bytes * 8 * 1_000_000_000 / rate_bps.max(1));
                    free_at = free_at.max(Instant::now()) + tx_time;
                    let wait = free_at.saturating_duration_since(Instant::now());
                    if !wait.is_zero() {
                        thread::sleep(wait);
                    }
                    counter.fetch_add(bytes, Ordering::Relaxed);
                    inner.send(p);
                }
            })
            .expect("spawn shaper thread");
        Shaped { tx, sent_bytes }
    }

    pub fn sent_bytes(&self) -> u64 {
        self.sent_bytes.load(Ordering::Relaxed)
    }
}

impl Transport for Shaped {
    fn send(&self, packet: Packet) {
        let _ = self.tx.send(packet);
    }
}

type DropRule = Box<dyn FnMut(&Packet) -> bool + Send>;

/// Drops every packet for which the rule returns true.
pub struct Lossy {
    inner: Arc<dyn Transport>,
    rule: Mutex<DropRule>,
    dropped: AtomicU64,
}

impl Lossy {
    pub fn new(inner: Arc<dyn Transport>, rule: impl FnMut(&Packet) -> bool + Send + 'static) -> Self {
        Lossy { inner, rule: Mutex::new(Box::new(rule)), dropped: AtomicU64::new(0) }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

impl Transport for Lossy {
    fn send(&self, packet: Packet) {
        if (self.rule.lock())(&packet) {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        } else {
            self.inner.send(packet);
        }
    }
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn send(&self, packet: Packet) {
        (**self).send(packet)
    }
}
