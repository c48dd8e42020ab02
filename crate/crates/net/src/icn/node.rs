//! Forwarding node runtime: one thread per node draining an inbox, so all
//! state changes are serialized while faces deliver from any thread.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use geoicn_core::Name;
use parking_lot::{Mutex, RwLock};

use super::clock::Clock;
use super::face::{AppTransport, Event, Inlet, Shaped, Transport};
use super::forwarder::{Counters, Forwarder, ForwarderConfig};
use super::packet::Packet;
use super::tables::FaceId;

const EXPIRE_EVERY: Duration = Duration::from_millis(100);

struct Shared {
    id: String,
    fwd: Mutex<Forwarder>,
    faces: RwLock<HashMap<FaceId, Arc<dyn Transport>>>,
    next_face: AtomicU32,
    inbox: Sender<Event>,
}

struct Runtime {
    shared: Arc<Shared>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl Drop for Runtime {
    fn drop(&mut self) {
        let _ = self.shared.inbox.send(Event::Stop);
        if let Some(h) = self.thread.lock().take() {
            let _ = h.join();
        }
    }
}

/// Cheaply cloneable handle; the node stops when the last handle drops.
#[derive(Clone)]
pub struct Node {
    rt: Arc<Runtime>,
}

/// Link properties for [`Node::connect`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LinkConfig {
    /// Bits per second in each direction; unlimited when `None`.
    pub rate_bps: Option<u64>,
}

/// Application attachment: packets the node sends to the app arrive on `rx`.
pub struct AppFace {
    pub inlet: Inlet,
    pub rx: Receiver<Packet>,
}

impl Node {
    pub fn new(id: impl Into<String>, config: ForwarderConfig, clock: Arc<dyn Clock>) -> Node {
        let (tx, rx) = unbounded();
        let shared = Arc::new(Shared {
            id: id.into(),
            fwd: Mutex::new(Forwarder::new(config, clock)),
            faces: RwLock::new(HashMap::new()),
            next_face: AtomicU32::new(1),
            inbox: tx,
        });
        let worker = shared.clone();
        let handle = thread::Builder::new()
            .name(format!("node-{}", shared.id))
            .spawn(move || run(worker, rx))
            .expect("spawn node thread");
        Node { rt: Arc::new(Runtime { shared, thread: Mutex::new(Some(handle)) }) }
    }

    fn shared(&self) -> &Shared {
        &self.rt.shared
    }

    pub fn id(&self) -> &str {
        &self.shared().id
    }

    /// Allocates a face id and its inbound half. Packets sent to the face are
    /// dropped until a transport is attached.
    pub fn reserve_face(&self) -> Inlet {
        let face = FaceId(self.shared().next_face.fetch_add(1, Ordering::Relaxed));
        Inlet { inbox: self.shared().inbox.clone(), face }
    }

    pub fn attach(&self, face: FaceId, transport: Arc<dyn Transport>) {
        self.shared().faces.write().insert(face, transport);
    }

    pub fn add_face(&self, transport: Arc<dyn Transport>) -> Inlet {
        let inlet = self.reserve_face();
        self.attach(inlet.face, transport);
        inlet
    }

    pub fn remove_face(&self, face: FaceId) {
        self.shared().faces.write().remove(&face);
        self.shared().fwd.lock().remove_face(face);
    }

    pub fn add_app(&self) -> AppFace {
        let (tx, rx) = unbounded();
        let inlet = self.add_face(Arc::new(AppTransport(tx)));
        AppFace { inlet, rx }
    }

    pub fn add_route(&self, prefix: Name, face: FaceId) {
        self.shared().fwd.lock().fib.add_route(prefix, face);
    }

    pub fn remove_route(&self, prefix: &Name, face: FaceId) {
        self.shared().fwd.lock().fib.remove_route(prefix, face);
    }

    pub fn counters(&self) -> Counters {
        self.shared().fwd.lock().counters()
    }

    pub fn clear_cache(&self) {
        self.shared().fwd.lock().cs.clear();
    }

    pub fn pit_len(&self) -> usize {
        self.shared().fwd.lock().pit.len()
    }

    /// Runs `f` with exclusive access to the forwarder state.
    pub fn with_forwarder<R>(&self, f: impl FnOnce(&mut Forwarder) -> R) -> R {
        f(&mut self.shared().fwd.lock())
    }

    /// Bidirectional link; returns (face on `a` towards `b`, face on `b` towards `a`).
    pub fn connect(a: &Node, b: &Node, link: LinkConfig) -> (FaceId, FaceId) {
        let ia = a.reserve_face();
        let ib = b.reserve_face();
        let shape = |t: Inlet| -> Arc<dyn Transport> {
            match link.rate_bps {
                Some(r) => Arc::new(Shaped::new(Arc::new(t), r)),
                None => Arc::new(t),
            }
        };
        let (fa, fb) = (ia.face, ib.face);
        a.attach(fa, shape(ib));
        b.attach(fb, shape(ia));
        (fa, fb)
    }
}

fn run(shared: Arc<Shared>, rx: Receiver<Event>) {
    let mut last_expire = Instant::now();
    loop {
        match rx.recv_timeout(EXPIRE_EVERY) {
            Ok(Event::Packet(face, packet)) => {
                let out = shared.fwd.lock().receive(face, packet);
                if !out.is_empty() {
                    let faces = shared.faces.read();
                    for o in out {
                        match faces.get(&o.face) {
                            Some(t) => t.send(o.packet),
                            None => log::debug!("node {}: no transport on {}", shared.id, o.face),
                        }
                    }
                }
            }
            Ok(Event::Stop) | Err(RecvTimeoutError::Disconnected) => break,
            Err(RecvTimeoutError::Timeout) => {}
        }
        if last_expire.elapsed() >= EXPIRE_EVERY {
            shared.fwd.lock().expire();
            last_expire = Instant::now();
        }
    }
}
