//! Keys, certificates with permission-bearing names, packet signing and
//! verification, chain validation and the access-control table.

pub mod access;
pub mod cert;
pub mod keys;
pub mod store;

use geoicn_core::Name;
use thiserror::Error;

pub use access::{check_access, check_provenance, decide, parse_target, AccessDecision, Did, Operation, Permission, Role, Target};
pub use cert::{Certificate, Identity};
pub use keys::{KeyPair, PublicKey};
pub use store::{network_fetcher, serve_certificates, CertFetcher, TrustStore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrustError {
    #[error("packet is not signed")]
    Unsigned,
    #[error("no certificate named {0}")]
    MissingCertificate(Name),
    #[error("signature by {0} does not verify")]
    BadSignature(Name),
    #[error("certificate {0} is outside its validity window")]
    Expired(Name),
    #[error("certificate {cert}: {reason}")]
    BadChain { cert: Name, reason: &'static str },
    #[error("malformed key-locator name {0}")]
    BadKeyLocator(Name),
    #[error("name {0} does not address an object or tile")]
    BadTarget(Name),
    #[error("malformed {0}")]
    Malformed(&'static str),
}

/// Validity window used for generated certificates: ten years from `now`.
pub fn default_validity(now_secs: u64) -> (u64, u64) {
    (now_secs.saturating_sub(3600), now_secs + 10 * 365 * 86_400)
}
