//! Certificate store, chain validation and packet verification.

use std::collections::HashMap;
use std::sync::Arc;

use bytes::Bytes;
use geoicn_core::Name;
use parking_lot::RwLock;

use super::access::{check_access, AccessDecision, Operation, Role};
use super::cert::Certificate;
use super::TrustError;
use crate::icn::endpoint::{segmented_handler, DataValidator, Endpoint, GetOptions};
use crate::icn::{Clock, Data, Interest, Signature};

const MAX_CHAIN: usize = 4;

pub type CertFetcher = dyn Fn(&Name) -> Option<Certificate> + Send + Sync;

pub struct TrustStore {
    anchor: Certificate,
    certs: RwLock<HashMap<Name, Certificate>>,
    /// Certificates whose chain already validated, keyed by name, holding
    /// the signature that was checked.
    validated: RwLock<HashMap<Name, Bytes>>,
    fetcher: RwLock<Option<Arc<CertFetcher>>>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for TrustStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TrustStore(anchor={}, certs={})", self.anchor.name, self.certs.read().len())
    }
}

impl TrustStore {
    pub fn new(anchor: Certificate, clock: Arc<dyn Clock>) -> TrustStore {
        let mut certs = HashMap::new();
        certs.insert(anchor.name.clone(), anchor.clone());
        TrustStore {
            anchor,
            certs: RwLock::new(certs),
            validated: RwLock::new(HashMap::new()),
            fetcher: RwLock::new(None),
            clock,
        }
    }

    pub fn anchor(&self) -> &Certificate {
        &self.anchor
    }

    pub fn add(&self, cert: Certificate) {
        self.certs.write().insert(cert.name.clone(), cert);
    }

    pub fn set_fetcher(&self, fetcher: Arc<CertFetcher>) {
        *self.fetcher.write() = Some(fetcher);
    }

    /// Local certificate, or one retrieved through the fetcher and cached.
    pub fn certificate(&self, name: &Name) -> Result<Certificate, TrustError> {
        if let Some(c) = self.certs.read().get(name) {
            return Ok(c.clone());
        }
        let fetcher = self.fetcher.read().clone();
        let cert = fetcher
            .and_then(|f| f(name))
            .filter(|c| &c.name == name)
            .ok_or_else(|| TrustError::MissingCertificate(name.clone()))?;
        self.add(cert.clone());
        Ok(cert)
    }

    /// Checks every link from `cert` up to the trust anchor: signatures,
    /// validity windows and that each issuer has the role allowed to issue.
    pub fn validate_chain(&self, cert: &Certificate) -> Result<(), TrustError> {
        if self.validated.read().get(&cert.name) == Some(&cert.signature)
            && cert.is_valid_at(self.clock.now_secs())
        {
            return Ok(());
        }
        let now = self.clock.now_secs();
        let mut cur = cert.clone();
        for _ in 0..MAX_CHAIN {
            let chain_err = |reason: &'static str| TrustError::BadChain { cert: cur.name.clone(), reason };
            if !cur.is_valid_at(now) {
                return Err(TrustError::Expired(cur.name.clone()));
            }
            let role = Role::parse(&cur.name)?;
            if role == Role::Anchor {
                if cur != self.anchor {
                    return Err(chain_err("unknown anchor"));
                }
                if !cur.verify_issued_by(&cur.key) {
                    return Err(TrustError::BadSignature(cur.name.clone()));
                }
                self.validated.write().insert(cert.name.clone(), cert.signature.clone());
                return Ok(());
            }
            if cur.issuer != role.expected_issuer().name() {
                return Err(chain_err("issuer may not certify this name"));
            }
            let issuer = self.certificate(&cur.issuer)?;
            if !cur.verify_issued_by(&issuer.key) {
                return Err(TrustError::BadSignature(cur.name.clone()));
            }
            cur = issuer;
        }
        Err(TrustError::BadChain { cert: cert.name.clone(), reason: "chain too long" })
    }

    fn check_signature(&self, sig: Option<&Signature>, portion: impl FnOnce(&Signature) -> Vec<u8>) -> Result<Certificate, TrustError> {
        let sig = sig.ok_or(TrustError::Unsigned)?;
        let cert = self.certificate(&sig.key_locator)?;
        if cert.key.scheme() != sig.scheme {
            return Err(TrustError::BadSignature(sig.key_locator.clone()));
        }
        self.validate_chain(&cert)?;
        if !cert.key.verify(&portion(sig), &sig.value) {
            return Err(TrustError::BadSignature(sig.key_locator.clone()));
        }
        Ok(cert)
    }

    /// Verifies a Data signature and its signer's chain; returns the signer.
    pub fn verify_data(&self, d: &Data) -> Result<Certificate, TrustError> {
        self.check_signature(d.signature.as_ref(), |s| d.signed_portion(s.scheme, &s.key_locator))
    }

    pub fn verify_interest(&self, i: &Interest) -> Result<Certificate, TrustError> {
        self.check_signature(i.signature.as_ref(), |s| i.signed_portion(s.scheme, &s.key_locator))
    }

    /// Verifies a signed Interest and applies the access table to its name.
    /// A user's chain passing validation already ties the key to the tenant
    /// named in its data-set id, which is what the tenancy check requires.
    pub fn authorize(&self, op: Operation, i: &Interest) -> Result<AccessDecision, TrustError> {
        let cert = self.verify_interest(i)?;
        check_access(op, &i.name, &cert.name)
    }
}

/// Validates Data by signature and chain.
impl DataValidator for TrustStore {
    fn validate(&self, data: &Data) -> Result<(), String> {
        self.verify_data(data).map(|_| ()).map_err(|e| e.to_string())
    }
}

/// Serves the certificates in `certs` under their names (segment 0 only).
pub fn serve_certificates(endpoint: &Endpoint, certs: Arc<RwLock<HashMap<Name, Certificate>>>, freshness_ms: u32) {
    endpoint.advertise(Name::new().child(super::access::CERT));
    let handler = segmented_handler(crate::icn::DEFAULT_MAX_PAYLOAD, None, move |base, _| {
        certs.read().get(base).map(|c| (Bytes::from(c.encode()), freshness_ms))
    });
    endpoint.serve(1, handler);
}

/// Fetcher that retrieves certificates over the network through `endpoint`.
pub fn network_fetcher(endpoint: Endpoint, opts: GetOptions) -> Arc<CertFetcher> {
    Arc::new(move |name: &Name| {
        let bytes = endpoint.get(name, &opts).ok()?;
        Certificate::decode(&bytes).ok()
    })
}
