//! Interest/Data packets and their binary TLV encoding.
//!
//! Layout: `[type:u8][name-count:u16][name components][fields...]`, all
//! integers big-endian. Interests carry nonce, lifetime, flags, then the
//! optional parameters and signature blocks. Data carries freshness, flags,
//! the optional segment and signature blocks, then the length-prefixed payload.

use bytes::{BufMut, Bytes};
use geoicn_core::Name;
use thiserror::Error;

pub const TYPE_INTEREST: u8 = 0x01;
pub const TYPE_DATA: u8 = 0x02;

const FLAG_PARAMS: u8 = 0x01;
const FLAG_SIGNED: u8 = 0x02;
const FLAG_SEGMENT: u8 = 0x04;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("packet truncated")]
    Truncated,
    #[error("unknown packet type {0:#04x}")]
    UnknownType(u8),
    #[error("unknown signature scheme {0}")]
    UnknownScheme(u8),
    #[error("malformed name")]
    BadName,
    #[error("{0} trailing bytes after packet")]
    Trailing(usize),
    #[error("field too large to encode")]
    TooLarge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SigScheme {
    Ed25519 = 1,
    HmacSha256 = 2,
}

impl SigScheme {
    pub fn from_u8(v: u8) -> Result<Self, PacketError> {
        match v {
            1 => Ok(Self::Ed25519),
            2 => Ok(Self::HmacSha256),
            other => Err(PacketError::UnknownScheme(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub scheme: SigScheme,
    pub key_locator: Name,
    pub value: Bytes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interest {
    pub name: Name,
    pub nonce: u32,
    pub lifetime_ms: u32,
    pub params: Option<Bytes>,
    pub signature: Option<Signature>,
}

pub const DEFAULT_LIFETIME_MS: u32 = 4000;

impl Interest {
    pub fn new(name: Name) -> Self {
        Interest {
            name,
            nonce: rand::random(),
            lifetime_ms: DEFAULT_LIFETIME_MS,
            params: None,
            signature: None,
        }
    }

    pub fn with_lifetime(mut self, ms: u32) -> Self {
        self.lifetime_ms = ms;
        self
    }

    pub fn with_params(mut self, params: impl Into<Bytes>) -> Self {
        self.params = Some(params.into());
        self
    }

    pub fn refresh_nonce(&mut self) {
        self.nonce = rand::random();
    }

    /// Bytes covered by the signature: name, parameters and the signer's
    /// scheme and key locator. Nonce and lifetime are excluded so a
    /// retransmission keeps its signature.
    pub fn signed_portion(&self, scheme: SigScheme, key_locator: &Name) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.name.encoded().len() + 64);
        b.put_u8(TYPE_INTEREST);
        put_name(&mut b, &self.name);
        match &self.params {
            Some(p) => {
                b.put_u8(1);
                b.put_u32(p.len() as u32);
                b.put_slice(p);
            }
            None => b.put_u8(0),
        }
        b.put_u8(scheme as u8);
        put_name(&mut b, key_locator);
        b
    }
}

/// Position of a Data packet within segmented content. `version` is equal
/// across all segments produced from one payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SegmentInfo {
    pub index: u32,
    pub last: u32,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Data {
    pub name: Name,
    pub payload: Bytes,
    pub freshness_ms: u32,
    pub segment: Option<SegmentInfo>,
    pub signature: Option<Signature>,
}

impl Data {
    pub fn new(name: Name, payload: impl Into<Bytes>) -> Self {
        Data {
            name,
            payload: payload.into(),
            freshness_ms: 0,
            segment: None,
            signature: None,
        }
    }

    pub fn with_freshness(mut self, ms: u32) -> Self {
        self.freshness_ms = ms;
        self
    }

    pub fn key_locator(&self) -> Option<&Name> {
        self.signature.as_ref().map(|s| &s.key_locator)
    }

    /// Bytes covered by the signature: the full encoding with an empty
    /// signature value.
    pub fn signed_portion(&self, scheme: SigScheme, key_locator: &Name) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.wire_len() + 16);
        let sig = Signature { scheme, key_locator: key_locator.clone(), value: Bytes::new() };
        self.encode_with(&mut b, Some(&sig));
        b
    }

    fn encode_with(&self, b: &mut Vec<u8>, sig: Option<&Signature>) {
        b.put_u8(TYPE_DATA);
        put_name(b, &self.name);
        b.put_u32(self.freshness_ms);
        let mut flags = 0;
        if self.segment.is_some() {
            flags |= FLAG_SEGMENT;
        }
        if sig.is_some() {
            flags |= FLAG_SIGNED;
        }
        b.put_u8(flags);
        if let Some(s) = &self.segment {
            b.put_u32(s.index);
            b.put_u32(s.last);
            b.put_u32(s.version);
        }
        if let Some(sig) = sig {
            put_signature(b, sig);
        }
        b.put_u32(self.payload.len() as u32);
        b.put_slice(&self.payload);
    }

    pub fn wire_len(&self) -> usize {
        let sig = self
            .signature
            .as_ref()
            .map_or(0, |s| 1 + 2 + s.key_locator.encoded().len() + 2 + s.value.len());
        let seg = if self.segment.is_some() { 12 } else { 0 };
        1 + 2 + self.name.encoded().len() + 4 + 1 + seg + sig + 4 + self.payload.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
}

impl Packet {
    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.wire_len());
        match self {
            Packet::Interest(i) => {
                b.put_u8(TYPE_INTEREST);
                put_name(&mut b, &i.name);
                b.put_u32(i.nonce);
                b.put_u32(i.lifetime_ms);
                let mut flags = 0;
                if i.params.is_some() {
                    flags |= FLAG_PARAMS;
                }
                if i.signature.is_some() {
                    flags |= FLAG_SIGNED;
                }
                b.put_u8(flags);
                if let Some(p) = &i.params {
                    b.put_u32(p.len() as u32);
                    b.put_slice(p);
                }
                if let Some(sig) = &i.signature {
                    put_signature(&mut b, sig);
                }
            }
            Packet::Data(d) => d.encode_with(&mut b, d.signature.as_ref()),
        }
        b
    }

    /// Encoded size in bytes, without encoding.
    pub fn wire_len(&self) -> usize {
        match self {
            Packet::Interest(i) => {
                let params = i.params.as_ref().map_or(0, |p| 4 + p.len());
                let sig = i
                    .signature
                    .as_ref()
                    .map_or(0, |s| 1 + 2 + s.key_locator.encoded().len() + 2 + s.value.len());
                1 + 2 + i.name.encoded().len() + 4 + 4 + 1 + params + sig
            }
            Packet::Data(d) => d.wire_len(),
        }
    }

    pub fn decode(buf: &[u8]) -> Result<Packet, PacketError> {
        let mut r = Reader { buf, pos: 0 };
        let kind = r.u8()?;
        let name = r.name()?;
        let packet = match kind {
            TYPE_INTEREST => {
                let nonce = r.u32()?;
                let lifetime_ms = r.u32()?;
                let flags = r.u8()?;
                let params = if flags & FLAG_PARAMS != 0 {
                    let n = r.u32()? as usize;
                    Some(Bytes::copy_from_slice(r.take(n)?))
                } else {
                    None
                };
                let signature = if flags & FLAG_SIGNED != 0 { Some(r.signature()?) } else { None };
                Packet::Interest(Interest { name, nonce, lifetime_ms, params, signature })
            }
            TYPE_DATA => {
                let freshness_ms = r.u32()?;
                let flags = r.u8()?;
                let segment = if flags & FLAG_SEGMENT != 0 {
                    Some(SegmentInfo { index: r.u32()?, last: r.u32()?, version: r.u32()? })
                } else {
                    None
                };
                let signature = if flags & FLAG_SIGNED != 0 { Some(r.signature()?) } else { None };
                let n = r.u32()? as usize;
                let payload = Bytes::copy_from_slice(r.take(n)?);
                Packet::Data(Data { name, payload, freshness_ms, segment, signature })
            }
            other => return Err(PacketError::UnknownType(other)),
        };
        match buf.len() - r.pos {
            0 => Ok(packet),
            extra => Err(PacketError::Trailing(extra)),
        }
    }
}

impl From<Interest> for Packet {
    fn from(i: Interest) -> Self {
        Packet::Interest(i)
    }
}

impl From<Data> for Packet {
    fn from(d: Data) -> Self {
        Packet::Data(d)
    }
}

pub fn put_name(b: &mut Vec<u8>, name: &Name) {
    b.put_u16(name.len() as u16);
    b.put_slice(name.encoded());
}

fn put_signature(b: &mut Vec<u8>, sig: &Signature) {
    b.put_u8(sig.scheme as u8);
    put_name(b, &sig.key_locator);
    b.put_u16(sig.value.len() as u16);
    b.put_slice(&sig.value);
}

/// Cursor over an encoded buffer.
pub struct Reader<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], PacketError> {
        let end = self.pos.checked_add(n).ok_or(PacketError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(PacketError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, PacketError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, PacketError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32, PacketError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, PacketError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn name(&mut self) -> Result<Name, PacketError> {
        let count = self.u16()?;
        let start = self.pos;
        for _ in 0..count {
            let len = self.u16()? as usize;
            self.take(len)?;
        }
        Name::from_encoded(count, self.buf[start..self.pos].to_vec()).ok_or(PacketError::BadName)
    }

    fn signature(&mut self) -> Result<Signature, PacketError> {
        let scheme = SigScheme::from_u8(self.u8()?)?;
        let key_locator = self.name()?;
        let n = self.u16()? as usize;
        let value = Bytes::copy_from_slice(self.take(n)?);
        Ok(Signature { scheme, key_locator, value })
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use geoicn_core::name;
    use proptest::prelude::*;

    fn sig() -> Signature {
        Signature {
            scheme: SigScheme::HmacSha256,
            key_locator: name("/CERT/Foo:Shop/Alice/rw"),
            value: Bytes::from_static(&[7; 32]),
        }
    }

    #[test]
    fn interest_round_trip() {
        let mut i = Interest::new(name("/OGB/12/41/GPS-ID/TILE/Foo/Shop")).with_params(vec![1, 2, 3]);
        i.signature = Some(sig());
        let p = Packet::Interest(i);
        let wire = p.encode();
        assert_eq!(wire[0], TYPE_INTEREST);
        assert_eq!(wire.len(), p.wire_len());
        assert_eq!(Packet::decode(&wire).unwrap(), p);
    }

    #[test]
    fn data_round_trip() {
        let mut d = Data::new(name("/a/b/seg=0"), vec![9u8; 100]).with_freshness(10);
        d.segment = Some(SegmentInfo { index: 0, last: 3, version: 42 });
        d.signature = Some(sig());
        let p = Packet::Data(d);
        let wire = p.encode();
        assert_eq!(wire.len(), p.wire_len());
        assert_eq!(Packet::decode(&wire).unwrap(), p);
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(Packet::decode(&[0x09, 0, 0]), Err(PacketError::UnknownType(9)));
        assert_eq!(Packet::decode(&[0x01, 0, 1, 0, 5, b'a']), Err(PacketError::Truncated));
        let mut wire = Packet::Data(Data::new(name("/a"), vec![1])).encode();
        wire.push(0);
        assert_eq!(Packet::decode(&wire), Err(PacketError::Trailing(1)));
    }

    #[test]
    fn signed_portion_ignores_nonce() {
        let kl = name("/CERT/x/y/r");
        let mut i = Interest::new(name("/a/b"));
        let before = i.signed_portion(SigScheme::Ed25519, &kl);
        i.refresh_nonce();
        i.lifetime_ms += 1;
        assert_eq!(before, i.signed_portion(SigScheme::Ed25519, &kl));
        i.params = Some(Bytes::from_static(b"x"));
        assert_ne!(before, i.signed_portion(SigScheme::Ed25519, &kl));
    }

    proptest! {
        #[test]
        fn decode_never_panics(buf in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = Packet::decode(&buf);
        }

        #[test]
        fn data_codec_round_trips(
            comps in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..8), 0..6),
            payload in proptest::collection::vec(any::<u8>(), 0..256),
            fresh in any::<u32>(),
        ) {
            let n = Name::from_components(comps).unwrap();
            let p = Packet::Data(Data::new(n, payload).with_freshness(fresh));
            prop_assert_eq!(Packet::decode(&p.encode()).unwrap(), p);
        }
    }
}
