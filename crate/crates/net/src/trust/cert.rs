use std::fmt;

use bytes::{BufMut, Bytes};
use geoicn_core::Name;

use super::keys::{KeyPair, PublicKey};
use super::TrustError;
use crate::icn::endpoint::{DataSigner, InterestSigner};
use crate::icn::packet::{put_name, Reader};
use crate::icn::{Data, Interest, SigScheme, Signature};

/// Binds a key-locator name to a public key, signed by the issuer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub name: Name,
    pub key: PublicKey,
    pub issuer: Name,
    pub not_before: u64,
    pub not_after: u64,
    pub signature: Bytes,
}

impl Certificate {
    fn encode_body(&self, b: &mut Vec<u8>) {
        put_name(b, &self.name);
        b.put_u8(self.key.scheme() as u8);
        b.put_slice(&self.key.key_bytes());
        put_name(b, &self.issuer);
        b.put_u64(self.not_before);
        b.put_u64(self.not_after);
    }

    pub fn signed_portion(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(128);
        self.encode_body(&mut b);
        b
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut b = self.signed_portion();
        b.put_u16(self.signature.len() as u16);
        b.put_slice(&self.signature);
        b
    }

    pub fn decode(buf: &[u8]) -> Result<Certificate, TrustError> {
        let bad = |_| TrustError::Malformed("certificate");
        let mut r = Reader::new(buf);
        let name = r.name().map_err(bad)?;
        let scheme = SigScheme::from_u8(r.u8().map_err(bad)?).map_err(bad)?;
        let key: [u8; 32] = r.take(32).map_err(bad)?.try_into().expect("32 bytes");
        let key = PublicKey::from_parts(scheme, key)?;
        let issuer = r.name().map_err(bad)?;
        let not_before = r.u64().map_err(bad)?;
        let not_after = r.u64().map_err(bad)?;
        let n = r.u16().map_err(bad)? as usize;
        let signature = Bytes::copy_from_slice(r.take(n).map_err(bad)?);
        if !r.is_empty() {
            return Err(TrustError::Malformed("certificate trailing bytes"));
        }
        Ok(Certificate { name, key, issuer, not_before, not_after, signature })
    }

    pub fn issue(name: Name, key: PublicKey, issuer: &Identity, not_before: u64, not_after: u64) -> Certificate {
        let mut c = Certificate {
            name,
            key,
            issuer: issuer.name().clone(),
            not_before,
            not_after,
            signature: Bytes::new(),
        };
        c.signature = issuer.key.sign(&c.signed_portion());
        c
    }

    pub fn self_signed(name: Name, key: &KeyPair, not_before: u64, not_after: u64) -> Certificate {
        let mut c = Certificate {
            name: name.clone(),
            key: key.public(),
            issuer: name,
            not_before,
            not_after,
            signature: Bytes::new(),
        };
        c.signature = key.sign(&c.signed_portion());
        c
    }

    pub fn is_valid_at(&self, secs: u64) -> bool {
        self.not_before <= secs && secs <= self.not_after
    }

    pub fn verify_issued_by(&self, issuer_key: &PublicKey) -> bool {
        issuer_key.verify(&self.signed_portion(), &self.signature)
    }
}

/// A private key together with its certificate; signs packets under the
/// certificate name as key locator.
#[derive(Clone)]
pub struct Identity {
    pub key: KeyPair,
    pub cert: Certificate,
}

impl fmt::Debug for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Identity({})", self.cert.name)
    }
}

impl Identity {
    pub fn name(&self) -> &Name {
        &self.cert.name
    }

    /// Issues a certificate for a fresh key under `name`, signed by `self`.
    pub fn issue(&self, name: Name, key: KeyPair, not_before: u64, not_after: u64) -> Identity {
        let cert = Certificate::issue(name, key.public(), self, not_before, not_after);
        Identity { key, cert }
    }

    pub fn self_signed(name: Name, key: KeyPair, not_before: u64, not_after: u64) -> Identity {
        let cert = Certificate::self_signed(name, &key, not_before, not_after);
        Identity { key, cert }
    }

    fn signature_over(&self, msg: &[u8]) -> Signature {
        Signature { scheme: self.key.scheme(), key_locator: self.cert.name.clone(), value: self.key.sign(msg) }
    }

    pub fn sign_data(&self, data: &mut Data) {
        let portion = data.signed_portion(self.key.scheme(), &self.cert.name);
        data.signature = Some(self.signature_over(&portion));
    }

    pub fn sign_interest(&self, interest: &mut Interest) {
        let portion = interest.signed_portion(self.key.scheme(), &self.cert.name);
        interest.signature = Some(self.signature_over(&portion));
    }

    /// `[key bytes len:u16][key bytes][certificate]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let k = self.key.to_bytes();
        let mut b = Vec::new();
        b.put_u16(k.len() as u16);
        b.put_slice(&k);
        b.put_slice(&self.cert.encode());
        b
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Identity, TrustError> {
        let bad = |_| TrustError::Malformed("identity");
        let mut r = Reader::new(buf);
        let n = r.u16().map_err(bad)? as usize;
        let key = KeyPair::from_bytes(r.take(n).map_err(bad)?)?;
        let cert = Certificate::decode(&buf[r.pos..])?;
        if key.public() != cert.key {
            return Err(TrustError::Malformed("identity key does not match certificate"));
        }
        Ok(Identity { key, cert })
    }
}

impl DataSigner for Identity {
    fn sign_data(&self, data: &mut Data) {
        Identity::sign_data(self, data);
    }
}

impl InterestSigner for Identity {
    fn sign_interest(&self, interest: &mut Interest) {
        Identity::sign_interest(self, interest);
    }
}
