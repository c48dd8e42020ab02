//! Application endpoint on a node: consumer `get` with segment pipelining and
//! retransmission, and a producer side dispatching Interests to a handler.

use std::collections::HashMap;
use std::sync::{Arc, Weak};
use std::thread;
use std::time::{Duration, Instant};

use bytes::Bytes;
use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use geoicn_core::Name;
use parking_lot::Mutex;
use thiserror::Error;

use super::face::Inlet;
use super::node::Node;
use super::packet::{Data, Interest, Packet, SegmentInfo, DEFAULT_LIFETIME_MS};
use super::segment::{parse_segment, reassemble, segment_name};
use super::tables::FaceId;

pub trait InterestSigner: Send + Sync {
    fn sign_interest(&self, interest: &mut Interest);
}

pub trait DataSigner: Send + Sync {
    fn sign_data(&self, data: &mut Data);
}

pub trait DataValidator: Send + Sync {
    fn validate(&self, data: &Data) -> Result<(), String>;
}

pub type Handler = dyn Fn(Interest) -> Option<Data> + Send + Sync;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GetError {
    #[error("no data for {name} after {attempts} attempts")]
    Timeout { name: Name, attempts: u32 },
    #[error("validation of {name} failed: {reason}")]
    Validation { name: Name, reason: String },
    #[error("content under {0} changed during retrieval")]
    Inconsistent(Name),
}

#[derive(Clone)]
pub struct GetOptions {
    pub lifetime_ms: u32,
    pub retries: u32,
    pub window: usize,
    pub params: Option<Bytes>,
    pub signer: Option<Arc<dyn InterestSigner>>,
    pub validator: Option<Arc<dyn DataValidator>>,
}

impl Default for GetOptions {
    fn default() -> Self {
        GetOptions {
            lifetime_ms: DEFAULT_LIFETIME_MS,
            retries: 3,
            window: 16,
            params: None,
            signer: None,
            validator: None,
        }
    }
}

impl GetOptions {
    pub fn with_lifetime(mut self, ms: u32) -> Self {
        self.lifetime_ms = ms;
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_params(mut self, params: impl Into<Bytes>) -> Self {
        self.params = Some(params.into());
        self
    }

    pub fn with_signer(mut self, signer: Arc<dyn InterestSigner>) -> Self {
        self.signer = Some(signer);
        self
    }

    pub fn with_validator(mut self, validator: Arc<dyn DataValidator>) -> Self {
        self.validator = Some(validator);
        self
    }

    fn interest(&self, name: Name) -> Interest {
        let mut i = Interest::new(name).with_lifetime(self.lifetime_ms);
        i.params = self.params.clone();
        if let Some(s) = &self.signer {
            s.sign_interest(&mut i);
        }
        i
    }

    fn check(&self, d: &Data) -> Result<(), GetError> {
        match &self.validator {
            Some(v) => v
                .validate(d)
                .map_err(|reason| GetError::Validation { name: d.name.clone(), reason }),
            None => Ok(()),
        }
    }

    fn interval(&self) -> Duration {
        Duration::from_millis(u64::from(self.lifetime_ms.max(1)))
    }
}

struct Inner {
    node: Node,
    inlet: Inlet,
    waiters: Mutex<HashMap<Name, Vec<Sender<Data>>>>,
    jobs: Mutex<Option<Sender<Interest>>>,
}

impl Drop for Inner {
    fn drop(&mut self) {
        self.node.remove_face(self.inlet.face());
    }
}

#[derive(Clone)]
pub struct Endpoint {
    inner: Arc<Inner>,
}

impl Endpoint {
    pub fn new(node: &Node) -> Endpoint {
        let app = node.add_app();
        let inner = Arc::new(Inner {
            node: node.clone(),
            inlet: app.inlet,
            waiters: Mutex::new(HashMap::new()),
            jobs: Mutex::new(None),
        });
        let weak = Arc::downgrade(&inner);
        thread::Builder::new()
            .name(format!("app-{}-{}", node.id(), inner.inlet.face().0))
            .spawn(move || dispatch(weak, app.rx))
            .expect("spawn endpoint dispatcher");
        Endpoint { inner }
    }

    pub fn face(&self) -> FaceId {
        self.inner.inlet.face()
    }

    pub fn node(&self) -> &Node {
        &self.inner.node
    }

    /// Routes Interests under `prefix` on this endpoint's node to the handler.
    pub fn advertise(&self, prefix: Name) {
        self.inner.node.add_route(prefix, self.face());
    }

    pub fn withdraw(&self, prefix: &Name) {
        self.inner.node.remove_route(prefix, self.face());
    }

    /// Installs the producer handler, run on `workers` threads. The handler
    /// must not hold a clone of this endpoint.
    pub fn serve(&self, workers: usize, handler: Arc<Handler>) {
        let (tx, rx) = unbounded::<Interest>();
        for w in 0..workers.max(1) {
            let rx = rx.clone();
            let inlet = self.inner.inlet.clone();
            let handler = handler.clone();
            thread::Builder::new()
                .name(format!("producer-{}-{w}", self.inner.node.id()))
                .spawn(move || {
                    for i in rx {
                        if let Some(d) = handler(i) {
                            inlet.deliver(Packet::Data(d));
                        }
                    }
                })
                .expect("spawn producer worker");
        }
        *self.inner.jobs.lock() = Some(tx);
    }

    /// Injects a Data packet into the node as a producer reply.
    pub fn put(&self, data: Data) {
        self.inner.inlet.deliver(Packet::Data(data));
    }

    /// Sends `interest`; a matching Data is forwarded to `tx`.
    pub fn express(&self, interest: Interest, tx: &Sender<Data>) {
        self.inner.waiters.lock().entry(interest.name.clone()).or_default().push(tx.clone());
        self.inner.inlet.deliver(Packet::Interest(interest));
    }

    fn cancel(&self, name: &Name, tx: &Sender<Data>) {
        let mut w = self.inner.waiters.lock();
        if let Some(list) = w.get_mut(name) {
            list.retain(|s| !s.same_channel(tx));
            if list.is_empty() {
                w.remove(name);
            }
        }
    }

    /// Fetches the Data with exactly `name`, retransmitting every lifetime.
    pub fn fetch(&self, name: &Name, opts: &GetOptions) -> Result<Data, GetError> {
        let (tx, rx) = unbounded();
        for _ in 0..=opts.retries {
            self.express(opts.interest(name.clone()), &tx);
            match rx.recv_timeout(opts.interval()) {
                Ok(d) => {
                    self.cancel(name, &tx);
                    opts.check(&d)?;
                    return Ok(d);
                }
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        self.cancel(name, &tx);
        Err(GetError::Timeout { name: name.clone(), attempts: opts.retries + 1 })
    }

    /// Fetches all segments of `base` in index order.
    pub fn get_segments(&self, base: &Name, opts: &GetOptions) -> Result<Vec<Data>, GetError> {
        for _ in 0..=opts.retries {
            match self.try_segments(base, opts)? {
                Some(segments) => return Ok(segments),
                None => continue,
            }
        }
        Err(GetError::Inconsistent(base.clone()))
    }

    /// Fetches and reassembles segmented content.
    pub fn get(&self, base: &Name, opts: &GetOptions) -> Result<Bytes, GetError> {
        let segments = self.get_segments(base, opts)?;
        reassemble(&segments).map_err(|_| GetError::Inconsistent(base.clone()))
    }

    /// One pass; `Ok(None)` when segments of different versions were mixed.
    fn try_segments(&self, base: &Name, opts: &GetOptions) -> Result<Option<Vec<Data>>, GetError> {
        let first = self.fetch(&segment_name(base, 0), opts)?;
        let info = first.segment.unwrap_or(SegmentInfo { index: 0, last: 0, version: 0 });
        if info.last == 0 {
            return Ok(Some(vec![first]));
        }
        let total = info.last as usize + 1;
        let mut slots: Vec<Option<Data>> = vec![None; total];
        slots[0] = Some(first);
        let (tx, rx) = unbounded();
        let mut inflight: HashMap<u32, (Instant, u32)> = HashMap::new();
        let mut next = 1u32;
        let mut done = 1usize;
        let result = loop {
            while inflight.len() < opts.window.max(1) && next <= info.last {
                self.express(opts.interest(segment_name(base, next)), &tx);
                inflight.insert(next, (Instant::now() + opts.interval(), 0));
                next += 1;
            }
            if done == total {
                break Ok(Some(()));
            }
            let deadline = inflight.values().map(|v| v.0).min().expect("in flight while incomplete");
            match rx.recv_deadline(deadline) {
                Ok(d) => {
                    let Some((_, idx)) = parse_segment(&d.name) else { continue };
                    if inflight.remove(&idx).is_none() {
                        continue;
                    }
                    if let Err(e) = opts.check(&d) {
                        break Err(e);
                    }
                    if d.segment.is_none_or(|s| s.version != info.version || s.last != info.last) {
                        break Ok(None);
                    }
                    slots[idx as usize] = Some(d);
                    done += 1;
                }
                Err(RecvTimeoutError::Timeout) => {
                    let now = Instant::now();
                    let expired: Vec<u32> = inflight.iter().filter(|(_, v)| v.0 <= now).map(|(k, _)| *k).collect();
                    let mut failed = None;
                    for idx in expired {
                        let entry = inflight.get_mut(&idx).expect("listed");
                        if entry.1 >= opts.retries {
                            failed = Some(idx);
                            break;
                        }
                        entry.1 += 1;
                        entry.0 = now + opts.interval();
                        self.express(opts.interest(segment_name(base, idx)), &tx);
                    }
                    if let Some(idx) = failed {
                        break Err(GetError::Timeout { name: segment_name(base, idx), attempts: opts.retries + 1 });
                    }
                }
                Err(RecvTimeoutError::Disconnected) => unreachable!("sender held locally"),
            }
        };
        for idx in inflight.keys() {
            self.cancel(&segment_name(base, *idx), &tx);
        }
        Ok(result?.map(|()| slots.into_iter().map(|s| s.expect("all filled")).collect()))
    }
}

fn dispatch(inner: Weak<Inner>, rx: Receiver<Packet>) {
    for p in rx {
        let Some(inner) = inner.upgrade() else { break };
        match p {
            Packet::Data(d) => {
                let waiting = inner.waiters.lock().remove(&d.name);
                for tx in waiting.into_iter().flatten() {
                    let _ = tx.send(d.clone());
                }
            }
            Packet::Interest(i) => {
                if let Some(jobs) = inner.jobs.lock().as_ref() {
                    let _ = jobs.send(i);
                }
            }
        }
    }
}

/// Producer helper: answers `<base>/seg=N` from content computed per base
/// name by `content`, which returns the payload and its freshness.
pub fn segmented_handler<F>(max_payload: usize, signer: Option<Arc<dyn DataSigner>>, content: F) -> Arc<Handler>
where
    F: Fn(&Name, &Interest) -> Option<(Bytes, u32)> + Send + Sync + 'static,
{
    Arc::new(move |i: Interest| {
        let (base, idx) = parse_segment(&i.name)?;
        let (payload, freshness) = content(&base, &i)?;
        let version = fnv1a(&payload);
        let mut seg = super::segment::segment(&base, payload, max_payload, freshness, version)
            .into_iter()
            .nth(idx as usize)?;
        if let Some(s) = &signer {
            s.sign_data(&mut seg);
        }
        Some(seg)
    })
}

/// Content fingerprint, so regenerated identical content keeps its version.
pub fn fnv1a(b: &[u8]) -> u32 {
    b.iter().fold(0x811c_9dc5u32, |h, &x| (h ^ u32::from(x)).wrapping_mul(0x0100_0193))
}
