use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use bytes::Bytes;
use geoicn_core::name;
use geoicn_net::icn::{
    segment, segmented_handler, tcp, Data, Endpoint, ForwarderConfig, GetError, GetOptions, Interest, LinkConfig,
    Lossy, Node, Packet, SystemClock, Transport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn node(id: &str) -> Node {
    Node::new(id, ForwarderConfig::default(), Arc::new(SystemClock::new()))
}

/// Producer serving `payload` under any base name.
fn static_producer(n: &Node, prefix: &str, payload: Bytes, max: usize) -> Endpoint {
    let ep = Endpoint::new(n);
    ep.advertise(name(prefix));
    ep.serve(1, segmented_handler(max, None, move |_, _| Some((payload.clone(), 0))));
    ep
}

fn quick() -> GetOptions {
    GetOptions::default().with_lifetime(300).with_retries(3)
}

#[test]
fn single_segment_exchange() {
    let n = node("n");
    let _p = static_producer(&n, "/d", Bytes::from_static(b"hello"), 8192);
    let c = Endpoint::new(&n);
    assert_eq!(c.get(&name("/d/ptr71z"), &quick()).unwrap(), Bytes::from_static(b"hello"));
    assert_eq!(n.counters().interests_out, 1);
}

#[test]
fn kb130_over_two_hops() {
    let (a, b) = (node("a"), node("b"));
    let (fa, _) = Node::connect(&a, &b, LinkConfig::default());
    a.add_route(name("/OGB"), fa);
    let payload: Bytes = (0..130 * 1024).map(|i| (i * 7 % 256) as u8).collect::<Vec<_>>().into();
    let _p = static_producer(&b, "/OGB", payload.clone(), 8192);
    let c = Endpoint::new(&a);
    let segs = c.get_segments(&name("/OGB/x"), &quick()).unwrap();
    assert_eq!(segs.len(), 17);
    assert_eq!(c.get(&name("/OGB/x"), &quick()).unwrap(), payload);
}

#[test]
fn absent_producer_times_out_after_retries() {
    let n = node("n");
    let c = Endpoint::new(&n);
    let silent = Endpoint::new(&n);
    silent.advertise(name("/void"));
    let err = c.get(&name("/void/x"), &GetOptions::default().with_lifetime(50).with_retries(2)).unwrap_err();
    assert_eq!(err, GetError::Timeout { name: name("/void/x/seg=0"), attempts: 3 });
    assert_eq!(n.counters().interests_out, 3);
}

#[test]
fn lost_segment_is_retransmitted() {
    let (a, b) = (node("a"), node("b"));
    let ia = a.reserve_face();
    let ib = b.reserve_face();
    let mut dropped_once = false;
    let lossy = Arc::new(Lossy::new(Arc::new(ia.clone()), move |p: &Packet| {
        let hit = !dropped_once && matches!(p, Packet::Data(d) if d.name == name("/OGB/big/seg=3"));
        dropped_once |= hit;
        hit
    }));
    b.attach(ib.face(), lossy.clone());
    a.attach(ia.face(), Arc::new(ib.clone()));
    a.add_route(name("/OGB"), ia.face());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let payload: Bytes = (0..100_000).map(|_| rng.gen::<u8>()).collect::<Vec<_>>().into();
    let _p = static_producer(&b, "/OGB", payload.clone(), 8192);
    let c = Endpoint::new(&a);
    assert_eq!(c.get(&name("/OGB/big"), &quick()).unwrap(), payload);
    assert_eq!(lossy.dropped(), 1);
}

#[test]
fn sibling_prefixes_route_disjointly() {
    let hub = node("hub");
    let engines: Vec<Node> = (0..2).map(|i| node(&format!("e{i}"))).collect();
    let mut producers = Vec::new();
    for (e, prefix) in engines.iter().zip(["/OGB/12/41", "/OGB/12/42"]) {
        let (f, _) = Node::connect(&hub, e, LinkConfig::default());
        hub.add_route(name(prefix), f);
        let tag = Bytes::from(e.id().to_string());
        producers.push(static_producer(e, prefix, tag, 8192));
    }
    let c = Endpoint::new(&hub);
    assert_eq!(c.get(&name("/OGB/12/41/GPS-ID/IP-RES"), &quick()).unwrap(), "e0");
    assert_eq!(c.get(&name("/OGB/12/42/GPS-ID/IP-RES"), &quick()).unwrap(), "e1");
    hub.with_forwarder(|f| f.fib.remove_face(f.fib.longest_prefix_match(&name("/OGB/12/41/x")).unwrap()[0]));
    let err = c.get(&name("/OGB/12/41/GPS-ID/IP-RES"), &GetOptions::default().with_lifetime(50).with_retries(0));
    assert!(err.is_err());
}

#[test]
fn eight_concurrent_consumers_one_upstream() {
    let (fwd, up) = (node("fwd"), node("up"));
    let (f, _) = Node::connect(&fwd, &up, LinkConfig::default());
    fwd.add_route(name("/OGB"), f);
    let seen = Arc::new(AtomicUsize::new(0));
    let (release_tx, release_rx) = crossbeam_channel::bounded::<()>(1);
    let producer = Endpoint::new(&up);
    producer.advertise(name("/OGB"));
    let counter = seen.clone();
    producer.serve(
        1,
        Arc::new(move |i: Interest| {
            counter.fetch_add(1, Ordering::SeqCst);
            release_rx.recv().ok()?;
            let mut segs = segment(&i.name.prefix(i.name.len() - 1), Bytes::from_static(b"tile"), 8192, 0, 1);
            Some(segs.remove(0))
        }),
    );
    let consumers: Vec<Endpoint> = (0..8).map(|_| Endpoint::new(&fwd)).collect();
    let handles: Vec<_> = consumers
        .iter()
        .cloned()
        .map(|c| {
            std::thread::spawn(move || {
                c.get(&name("/OGB/12/41/GPS-ID/TILE/Foo/Shop"), &GetOptions::default().with_lifetime(5000))
            })
        })
        .collect();
    while fwd.counters().interests_in < 8 {
        std::thread::sleep(Duration::from_millis(5));
    }
    release_tx.send(()).unwrap();
    for h in handles {
        assert_eq!(h.join().unwrap().unwrap(), "tile");
    }
    let c = fwd.counters();
    assert_eq!(c.interests_out, 1);
    assert_eq!(c.data_out, 8);
    assert_eq!(seen.load(Ordering::SeqCst), 1);
}

#[test]
fn tcp_faces_carry_segmented_content() {
    let (a, b) = (node("a"), node("b"));
    let addr = tcp::listen(&b, "127.0.0.1:0", |_| {}).unwrap();
    let face = tcp::connect(&a, addr).unwrap();
    a.add_route(name("/OGB"), face);
    let payload: Bytes = vec![42u8; 50_000].into();
    let _p = static_producer(&b, "/OGB", payload.clone(), 8192);
    let c = Endpoint::new(&a);
    assert_eq!(c.get(&name("/OGB/t"), &quick()).unwrap(), payload);
}

#[test]
fn shaped_link_imposes_transmission_time() {
    let (a, b) = (node("a"), node("b"));
    let (f, _) = Node::connect(&a, &b, LinkConfig { rate_bps: Some(8_000_000) });
    a.add_route(name("/OGB"), f);
    let payload: Bytes = vec![0u8; 200_000].into();
    let _p = static_producer(&b, "/OGB", payload.clone(), 8192);
    let c = Endpoint::new(&a);
    let t = std::time::Instant::now();
    assert_eq!(c.get(&name("/OGB/t"), &quick()).unwrap().len(), 200_000);
    // 1.6 Mbit at 8 Mbit/s.
    assert!(t.elapsed() >= Duration::from_millis(190), "{:?}", t.elapsed());
}

#[test]
fn cached_data_served_without_producer() {
    let (a, b) = (node("a"), node("b"));
    let (f, _) = Node::connect(&a, &b, LinkConfig::default());
    a.add_route(name("/OGB"), f);
    let p = Endpoint::new(&b);
    p.advertise(name("/OGB"));
    p.serve(1, segmented_handler(8192, None, |_, _| Some((Bytes::from_static(b"obj"), 60_000))));
    let c = Endpoint::new(&a);
    c.get(&name("/OGB/o"), &quick()).unwrap();
    drop(p);
    assert_eq!(c.get(&name("/OGB/o"), &quick()).unwrap(), "obj");
    assert_eq!(a.counters().cs_hits, 1);
}

struct Sink;
impl Transport for Sink {
    fn send(&self, _: Packet) {}
}

#[test]
fn unsolicited_data_counted_at_runtime() {
    let n = node("n");
    let inlet = n.add_face(Arc::new(Sink));
    inlet.deliver(Packet::Data(Data::new(name("/nobody/asked"), vec![1])));
    for _ in 0..100 {
        if n.counters().unsolicited == 1 {
            return;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    panic!("unsolicited data not counted");
}
