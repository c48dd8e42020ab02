use std::collections::HashMap;
use std::sync::Arc;

use bytes::Bytes;
use geoicn_core::name;
use geoicn_net::icn::{Data, Endpoint, ForwarderConfig, GetOptions, Interest, ManualClock, Node, SigScheme};
use geoicn_net::trust::{
    check_access, check_provenance, decide, network_fetcher, serve_certificates, Certificate, Did, Identity, KeyPair,
    Operation, Permission, Role, Target, TrustError, TrustStore,
};
use parking_lot::RwLock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NOW: u64 = 1_700_000_000;

struct Pki {
    rng: ChaCha8Rng,
    anchor: Identity,
    clock: Arc<ManualClock>,
}

impl Pki {
    fn new(scheme: SigScheme) -> Pki {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let anchor = Identity::self_signed(Role::Anchor.name(), KeyPair::generate(scheme, &mut rng), 0, u64::MAX);
        Pki { rng, anchor, clock: Arc::new(ManualClock::new(NOW * 1000)) }
    }

    fn issue(&mut self, issuer: &Identity, role: Role) -> Identity {
        let key = KeyPair::generate(issuer.key.scheme(), &mut self.rng);
        issuer.issue(role.name(), key, NOW - 10, NOW + 1000)
    }

    fn tenant(&mut self, tid: &str) -> Identity {
        let a = self.anchor.clone();
        self.issue(&a, Role::Tenant(tid.into()))
    }

    fn user(&mut self, tenant: &Identity, did: Did, uid: &str, perm: Permission) -> Identity {
        self.issue(tenant, Role::User { did, uid: uid.into(), perm })
    }

    fn store(&self, certs: &[&Identity]) -> TrustStore {
        let s = TrustStore::new(self.anchor.cert.clone(), self.clock.clone());
        for c in certs {
            s.add(c.cert.clone());
        }
        s
    }
}

#[test]
fn sign_verify_round_trip_and_tamper() {
    for scheme in [SigScheme::Ed25519, SigScheme::HmacSha256] {
        let mut pki = Pki::new(scheme);
        let foo = pki.tenant("Foo");
        let alice = pki.user(&foo, Did::new("Foo", "Shop"), "Alice", Permission::ReadWrite);
        let store = pki.store(&[&foo, &alice]);
        let mut d = Data::new(name("/OGB/12/41/GPS-ID/DATA/Foo/Shop/Alice/o1"), vec![1, 2, 3]);
        alice.sign_data(&mut d);
        assert_eq!(store.verify_data(&d).unwrap().name, *alice.name());
        let mut bad = d.clone();
        bad.payload = Bytes::from(vec![1, 2, 2]);
        assert!(matches!(store.verify_data(&bad), Err(TrustError::BadSignature(_))));
        let mut bad = d.clone();
        bad.freshness_ms = 9;
        assert!(store.verify_data(&bad).is_err());

        let mut i = Interest::new(name("/OGB/12/41/GPS-ID/TILE/Foo/Shop"));
        alice.sign_interest(&mut i);
        assert!(store.verify_interest(&i).is_ok());
        i.refresh_nonce();
        assert!(store.verify_interest(&i).is_ok());
        i.name = name("/OGB/12/41/GPS-ID/TILE/Foo/Other");
        assert!(store.verify_interest(&i).is_err());
    }
}

#[test]
fn sibling_key_does_not_verify() {
    let mut pki = Pki::new(SigScheme::Ed25519);
    let foo = pki.tenant("Foo");
    let did = Did::new("Foo", "Shop");
    let alice = pki.user(&foo, did.clone(), "Alice", Permission::ReadWrite);
    let bob = pki.user(&foo, did, "Bob", Permission::ReadWrite);
    let store = pki.store(&[&foo, &alice, &bob]);
    let mut d = Data::new(name("/x"), vec![1]);
    alice.sign_data(&mut d);
    let sig = d.signature.as_mut().unwrap();
    sig.key_locator = bob.name().clone();
    assert!(matches!(store.verify_data(&d), Err(TrustError::BadSignature(_))));
}

#[test]
fn chains() {
    let mut pki = Pki::new(SigScheme::Ed25519);
    let foo = pki.tenant("Foo");
    let bar = pki.tenant("Bar");
    let alice = pki.user(&foo, Did::new("Foo", "Shop"), "Alice", Permission::Read);
    let store = pki.store(&[&foo, &bar]);
    assert!(store.validate_chain(&pki.anchor.cert).is_ok());
    assert!(store.validate_chain(&alice.cert).is_ok());

    // Bar signs a certificate naming a Foo data set.
    let forged = pki.user(&bar, Did::new("Foo", "Shop"), "Mallory", Permission::ReadWrite);
    assert!(matches!(store.validate_chain(&forged.cert), Err(TrustError::BadChain { .. })));

    // Correct issuer name, wrong issuer key.
    let mut forged = forged.cert.clone();
    forged.issuer = foo.name().clone();
    assert!(matches!(store.validate_chain(&forged), Err(TrustError::BadSignature(_))));

    // Missing intermediate.
    let lonely = pki.store(&[]);
    assert!(matches!(lonely.validate_chain(&alice.cert), Err(TrustError::MissingCertificate(_))));

    // A different self-signed anchor is not trusted.
    let rogue = Identity::self_signed(Role::Anchor.name(), KeyPair::from_seed(SigScheme::Ed25519, [9; 32]), 0, u64::MAX);
    assert!(store.validate_chain(&rogue.cert).is_err());

    pki.clock.set((NOW + 2000) * 1000);
    assert!(matches!(store.validate_chain(&alice.cert), Err(TrustError::Expired(_))));
}

#[test]
fn certificate_codec_round_trip() {
    let mut pki = Pki::new(SigScheme::Ed25519);
    let foo = pki.tenant("Foo");
    assert_eq!(Certificate::decode(&foo.cert.encode()).unwrap(), foo.cert);
    let id = Identity::from_bytes(&foo.to_bytes()).unwrap();
    assert_eq!(id.cert, foo.cert);
    assert!(Certificate::decode(&foo.cert.encode()[..20]).is_err());
}

/// Every combination of did match, uid match and permission for each
/// operation, against the table written out independently.
#[test]
fn exhaustive_access_matrix() {
    let mut allows = 0;
    for op in [Operation::Insert, Operation::Query, Operation::Delete] {
        for did_ok in [true, false] {
            for uid_ok in [true, false] {
                for perm in [Permission::Read, Permission::ReadWrite] {
                    let target = Target { did: Did::new("a", "b"), uid: Some("u1".into()) };
                    let did = if did_ok { Did::new("a", "b") } else { Did::new("a", "c") };
                    let uid = if uid_ok { "u1" } else { "u2" };
                    let expected = match op {
                        Operation::Insert | Operation::Delete => did_ok && uid_ok && perm == Permission::ReadWrite,
                        Operation::Query => did_ok,
                    };
                    let got = decide(op, &target, &did, uid, perm);
                    assert_eq!(got.allow, expected, "{op:?} did={did_ok} uid={uid_ok} {perm:?}");
                    allows += usize::from(got.allow);
                }
            }
        }
    }
    // Query ignores uid, so its allow row covers both uid cases and both permissions.
    assert_eq!(allows, 1 + 4 + 1);
}

#[test]
fn access_by_name() {
    let o = name("/OGB/12/41/58/19/GPS-ID/DATA/ab/x/u1/o1");
    let q = name("/OGB/12/41/58/19/GPS-ID/TILE/ab/x");
    let d = o.clone().child("DELETE");
    let allow = |op, t: &geoicn_core::Name, kl: &str| check_access(op, t, &name(kl)).unwrap().allow;
    assert!(allow(Operation::Insert, &o, "/CERT/ab:x/u1/rw"));
    assert!(!allow(Operation::Insert, &o, "/CERT/ab:x/u1/r"));
    assert!(!allow(Operation::Insert, &o, "/CERT/ab:x/u2/rw"));
    assert!(!allow(Operation::Insert, &o, "/CERT/ab:y/u1/rw"));
    assert!(allow(Operation::Query, &q, "/CERT/ab:x/u2/r"));
    assert!(allow(Operation::Query, &q, "/CERT/ab:x/u2/rw"));
    assert!(!allow(Operation::Query, &q, "/CERT/zz:x/u2/rw"));
    assert!(allow(Operation::Delete, &d, "/CERT/ab:x/u1/rw"));
    assert!(!allow(Operation::Delete, &d, "/CERT/ab:x/u2/rw"));
    assert!(!allow(Operation::Delete, &d, "/CERT/ab:x/u1/r"));
    assert!(!allow(Operation::Query, &q, "/CERT/TENANT/ab"));
    assert!(check_access(Operation::Query, &name("/junk"), &name("/CERT/ab:x/u1/r")).is_err());
    assert!(check_provenance(&o, &name("/CERT/ab:x/u1/rw")));
    assert!(!check_provenance(&o, &name("/CERT/ab:x/u2/rw")));
}

#[test]
fn authorize_requires_tenant_issued_chain() {
    let mut pki = Pki::new(SigScheme::HmacSha256);
    let foo = pki.tenant("Foo");
    let bar = pki.tenant("Bar");
    let alice = pki.user(&foo, Did::new("Foo", "Shop"), "Alice", Permission::Read);
    let eve = pki.user(&bar, Did::new("Bar", "Shop"), "Eve", Permission::ReadWrite);
    let store = pki.store(&[&foo, &bar, &alice, &eve]);
    let q = name("/OGB/12/41/GPS-ID/TILE/Foo/Shop/seg=0");
    let mut i = Interest::new(q.clone());
    alice.sign_interest(&mut i);
    assert!(store.authorize(Operation::Query, &i).unwrap().allow);
    let mut i = Interest::new(q);
    eve.sign_interest(&mut i);
    assert!(!store.authorize(Operation::Query, &i).unwrap().allow);
    assert_eq!(store.authorize(Operation::Query, &Interest::new(name("/x"))), Err(TrustError::Unsigned));
}

#[test]
fn certificates_fetched_from_repo_over_icn() {
    let mut pki = Pki::new(SigScheme::Ed25519);
    let foo = pki.tenant("Foo");
    let alice = pki.user(&foo, Did::new("Foo", "Shop"), "Alice", Permission::ReadWrite);
    let node = Node::new("n", ForwarderConfig::default(), pki.clock.clone());
    let repo = Endpoint::new(&node);
    let certs: HashMap<_, _> = [&foo, &alice].iter().map(|c| (c.name().clone(), c.cert.clone())).collect();
    serve_certificates(&repo, Arc::new(RwLock::new(certs)), 1000);
    let store = pki.store(&[]);
    let opts = GetOptions::default().with_lifetime(300).with_retries(1);
    store.set_fetcher(network_fetcher(Endpoint::new(&node), opts));
    let mut d = Data::new(name("/OGB/GPS-ID/DATA/Foo/Shop/Alice/o"), vec![0]);
    alice.sign_data(&mut d);
    assert!(store.verify_data(&d).is_ok());
    let mut d = Data::new(name("/x"), vec![0]);
    d.signature = Some(geoicn_net::icn::Signature {
        scheme: SigScheme::Ed25519,
        key_locator: name("/CERT/Foo:Shop/Nobody/r"),
        value: Bytes::from_static(&[0; 64]),
    });
    assert!(matches!(store.verify_data(&d), Err(TrustError::MissingCertificate(_))));
}
