//! Splitting content into named segments and reassembling it.

use bytes::{Bytes, BytesMut};
use geoicn_core::Name;
use thiserror::Error;

use super::packet::{Data, SegmentInfo};

pub const SEGMENT_PREFIX: &str = "seg=";
pub const DEFAULT_MAX_PAYLOAD: usize = 8 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("no segments")]
    Empty,
    #[error("segment {0} missing or out of order")]
    Missing(u32),
    #[error("segment {0} lacks segment metadata")]
    Unmarked(u32),
    #[error("segments come from different versions of the content")]
    VersionMismatch,
}

pub fn segment_name(base: &Name, index: u32) -> Name {
    base.clone().child(format!("{SEGMENT_PREFIX}{index}"))
}

/// Splits a segment name into its base and index.
pub fn parse_segment(name: &Name) -> Option<(Name, u32)> {
    let last = std::str::from_utf8(name.last()?).ok()?;
    let index = last.strip_prefix(SEGMENT_PREFIX)?.parse().ok()?;
    Some((name.prefix(name.len() - 1), index))
}

/// `ceil(len / max_payload)` unsigned Data packets (one when empty).
pub fn segment(base: &Name, payload: Bytes, max_payload: usize, freshness_ms: u32, version: u32) -> Vec<Data> {
    assert!(max_payload >= 1, "max_payload must be positive");
    let count = payload.len().div_ceil(max_payload).max(1);
    let last = (count - 1) as u32;
    (0..count)
        .map(|i| {
            let start = i * max_payload;
            let end = (start + max_payload).min(payload.len());
            Data {
                name: segment_name(base, i as u32),
                payload: payload.slice(start..end),
                freshness_ms,
                segment: Some(SegmentInfo { index: i as u32, last, version }),
                signature: None,
            }
        })
        .collect()
}

/// Concatenates segments given in index order.
pub fn reassemble(segments: &[Data]) -> Result<Bytes, SegmentError> {
    let first = segments.first().ok_or(SegmentError::Empty)?;
    let info0 = first.segment.ok_or(SegmentError::Unmarked(0))?;
    if segments.len() != info0.last as usize + 1 {
        return Err(SegmentError::Missing(segments.len() as u32));
    }
    if segments.len() == 1 {
        return Ok(first.payload.clone());
    }
    let mut out = BytesMut::with_capacity(segments.iter().map(|d| d.payload.len()).sum());
    for (i, d) in segments.iter().enumerate() {
        let info = d.segment.ok_or(SegmentError::Unmarked(i as u32))?;
        if info.index != i as u32 {
            return Err(SegmentError::Missing(i as u32));
        }
        if info.version != info0.version || info.last != info0.last {
            return Err(SegmentError::VersionMismatch);
        }
        out.extend_from_slice(&d.payload);
    }
    Ok(out.freeze())
}

#[cfg(test)]
mod tests {
    use super::*;
    use geoicn_core::name;
    use proptest::prelude::*;

    #[test]
    fn empty_payload_is_one_final_segment() {
        let s = segment(&name("/a"), Bytes::new(), 8192, 0, 1);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].segment.unwrap().last, 0);
        assert!(s[0].payload.is_empty());
        assert_eq!(s[0].name, name("/a/seg=0"));
    }

    #[test]
    fn exact_fit_is_one_segment() {
        assert_eq!(segment(&name("/a"), Bytes::from(vec![0; 8192]), 8192, 0, 1).len(), 1);
    }

    #[test]
    fn kb130_gives_17_segments() {
        let payload: Bytes = (0..130 * 1024).map(|i| (i % 251) as u8).collect::<Vec<_>>().into();
        let s = segment(&name("/a"), payload.clone(), 8192, 0, 1);
        assert_eq!(s.len(), 17);
        assert!(s.iter().all(|d| d.segment.unwrap().last == 16));
        assert_eq!(reassemble(&s).unwrap(), payload);
    }

    #[test]
    fn names_parse_back() {
        assert_eq!(parse_segment(&name("/x/y/seg=12")), Some((name("/x/y"), 12)));
        assert_eq!(parse_segment(&name("/x/y")), None);
        assert_eq!(parse_segment(&name("/x/seg=-1")), None);
    }

    #[test]
    fn mixed_versions_rejected() {
        let mut s = segment(&name("/a"), Bytes::from(vec![1; 20]), 8, 0, 1);
        s[1].segment.as_mut().unwrap().version = 2;
        assert_eq!(reassemble(&s), Err(SegmentError::VersionMismatch));
        s.remove(1);
        assert!(matches!(reassemble(&s), Err(SegmentError::Missing(_))));
    }

    proptest! {
        #[test]
        fn round_trip(payload in proptest::collection::vec(any::<u8>(), 0..5000), max in 1usize..700) {
            let payload = Bytes::from(payload);
            let s = segment(&name("/p"), payload.clone(), max, 0, 7);
            prop_assert_eq!(s.len(), payload.len().div_ceil(max).max(1));
            prop_assert_eq!(reassemble(&s).unwrap(), payload);
        }
    }
}
