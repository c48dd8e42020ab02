use bytes::Bytes;
use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use hmac::{Hmac, KeyInit, Mac};
use rand::RngCore;
use sha2::Sha256;

use super::TrustError;
use crate::icn::SigScheme;

type HmacSha256 = Hmac<Sha256>;

/// Signing key. The HMAC variant is a fast symmetric stand-in: its "public"
/// half is the shared secret itself, so it only suits closed test clusters.
#[derive(Clone)]
pub enum KeyPair {
    Ed25519(SigningKey),
    Hmac([u8; 32]),
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyPair({:?})", self.scheme())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublicKey {
    Ed25519(VerifyingKey),
    Hmac([u8; 32]),
}

impl KeyPair {
    pub fn generate(scheme: SigScheme, rng: &mut impl RngCore) -> KeyPair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(scheme, seed)
    }

    pub fn from_seed(scheme: SigScheme, seed: [u8; 32]) -> KeyPair {
        match scheme {
            SigScheme::Ed25519 => KeyPair::Ed25519(SigningKey::from_bytes(&seed)),
            SigScheme::HmacSha256 => KeyPair::Hmac(seed),
        }
    }

    pub fn scheme(&self) -> SigScheme {
        match self {
            KeyPair::Ed25519(_) => SigScheme::Ed25519,
            KeyPair::Hmac(_) => SigScheme::HmacSha256,
        }
    }

    pub fn public(&self) -> PublicKey {
        match self {
            KeyPair::Ed25519(k) => PublicKey::Ed25519(k.verifying_key()),
            KeyPair::Hmac(k) => PublicKey::Hmac(*k),
        }
    }

    pub fn sign(&self, msg: &[u8]) -> Bytes {
        match self {
            KeyPair::Ed25519(k) => Bytes::copy_from_slice(&k.sign(msg).to_bytes()),
            KeyPair::Hmac(k) => {
                let mut mac = HmacSha256::new_from_slice(k).expect("any key length");
                mac.update(msg);
                Bytes::copy_from_slice(&mac.finalize().into_bytes())
            }
        }
    }

    /// `[scheme][32-byte secret]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let secret = match self {
            KeyPair::Ed25519(k) => k.to_bytes(),
            KeyPair::Hmac(k) => *k,
        };
        let mut out = vec![self.scheme() as u8];
        out.extend_from_slice(&secret);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<KeyPair, TrustError> {
        let (&tag, rest) = b.split_first().ok_or(TrustError::Malformed("empty key"))?;
        let seed: [u8; 32] = rest.try_into().map_err(|_| TrustError::Malformed("key length"))?;
        let scheme = SigScheme::from_u8(tag).map_err(|_| TrustError::Malformed("key scheme"))?;
        Ok(Self::from_seed(scheme, seed))
    }
}

impl PublicKey {
    pub fn scheme(&self) -> SigScheme {
        match self {
            PublicKey::Ed25519(_) => SigScheme::Ed25519,
            PublicKey::Hmac(_) => SigScheme::HmacSha256,
        }
    }

    pub fn verify(&self, msg: &[u8], sig: &[u8]) -> bool {
        match self {
            PublicKey::Ed25519(k) => {
                let Ok(bytes) = <[u8; 64]>::try_from(sig) else { return false };
                k.verify(msg, &ed25519_dalek::Signature::from_bytes(&bytes)).is_ok()
            }
            PublicKey::Hmac(k) => {
                let mut mac = HmacSha256::new_from_slice(k).expect("any key length");
                mac.update(msg);
                mac.verify_slice(sig).is_ok()
            }
        }
    }

    pub fn key_bytes(&self) -> [u8; 32] {
        match self {
            PublicKey::Ed25519(k) => k.to_bytes(),
            PublicKey::Hmac(k) => *k,
        }
    }

    pub fn from_parts(scheme: SigScheme, key: [u8; 32]) -> Result<PublicKey, TrustError> {
        match scheme {
            SigScheme::Ed25519 => VerifyingKey::from_bytes(&key)
                .map(PublicKey::Ed25519)
                .map_err(|_| TrustError::Malformed("ed25519 public key")),
            SigScheme::HmacSha256 => Ok(PublicKey::Hmac(key)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sign_verify_both_schemes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scheme in [SigScheme::Ed25519, SigScheme::HmacSha256] {
            let k = KeyPair::generate(scheme, &mut rng);
            let other = KeyPair::generate(scheme, &mut rng);
            let sig = k.sign(b"payload");
            assert!(k.public().verify(b"payload", &sig));
            assert!(!k.public().verify(b"payloaD", &sig));
            assert!(!other.public().verify(b"payload", &sig));
            let back = KeyPair::from_bytes(&k.to_bytes()).unwrap();
            assert_eq!(back.public(), k.public());
        }
    }
}
