//! Hierarchical ICN names.
//!
//! A name is an ordered list of byte-string components. It is stored as a
//! single buffer of `[u16 length][bytes]` records so that cloning a name is
//! one allocation; all comparisons and prefix tests are component-wise.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("name component longer than 65535 bytes")]
    ComponentTooLong,
    #[error("invalid percent escape in name `{0}`")]
    BadEscape(String),
    #[error("name must start with `/` or `ndn:/`: `{0}`")]
    MissingSlash(String),
}

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Name {
    buf: Vec<u8>,
    count: u16,
}

impl Name {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_components<I, C>(components: I) -> Result<Self, NameError>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[u8]>,
    {
        let mut name = Name::new();
        for c in components {
            name.push(c)?;
        }
        Ok(name)
    }

    pub fn push(&mut self, component: impl AsRef<[u8]>) -> Result<(), NameError> {
        let c = component.as_ref();
        let len = u16::try_from(c.len()).map_err(|_| NameError::ComponentTooLong)?;
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(c);
        self.count += 1;
        Ok(())
    }

    /// Appends a component, consuming `self`. Panics on components over 64 KiB,
    /// which only code-generated names could produce.
    pub fn child(mut self, component: impl AsRef<[u8]>) -> Self {
        self.push(component).expect("component fits in u16 length");
        self
    }

    pub fn append(mut self, other: &Name) -> Self {
        self.buf.extend_from_slice(&other.buf);
        self.count += other.count;
        self
    }

    pub fn len(&self) -> usize {
        self.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn components(&self) -> Components<'_> {
        Components { rest: &self.buf }
    }

    pub fn get(&self, index: usize) -> Option<&[u8]> {
        self.components().nth(index)
    }

    pub fn get_str(&self, index: usize) -> Option<&str> {
        self.get(index).and_then(|c| std::str::from_utf8(c).ok())
    }

    pub fn last(&self) -> Option<&[u8]> {
        self.components().last()
    }

    /// The first `n` components (all of them when `n >= len`).
    pub fn prefix(&self, n: usize) -> Name {
        if n >= self.len() {
            return self.clone();
        }
        let mut end = 0;
        for _ in 0..n {
            let len = u16::from_be_bytes([self.buf[end], self.buf[end + 1]]) as usize;
            end += 2 + len;
        }
        Name {
            buf: self.buf[..end].to_vec(),
            count: n as u16,
        }
    }

    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.count <= other.count && other.buf.starts_with(&self.buf)
    }

    /// Encoded component records, as used on the wire after the component count.
    pub fn encoded(&self) -> &[u8] {
        &self.buf
    }

    pub fn from_encoded(count: u16, buf: Vec<u8>) -> Option<Self> {
        let name = Name { buf, count };
        let mut seen = 0u16;
        let mut rest = &name.buf[..];
        while !rest.is_empty() {
            if rest.len() < 2 {
                return None;
            }
            let len = u16::from_be_bytes([rest[0], rest[1]]) as usize;
            if rest.len() < 2 + len {
                return None;
            }
            rest = &rest[2 + len..];
            seen = seen.checked_add(1)?;
        }
        (seen == count).then_some(name)
    }

    /// Renders as `ndn:/a/b/c`.
    pub fn to_uri(&self) -> String {
        self.to_string()
    }
}

pub struct Components<'a> {
    rest: &'a [u8],
}

impl<'a> Iterator for Components<'a> {
    type Item = &'a [u8];

    fn next(&mut self) -> Option<&'a [u8]> {
        if self.rest.len() < 2 {
            return None;
        }
        let len = u16::from_be_bytes([self.rest[0], self.rest[1]]) as usize;
        let (c, rest) = self.rest[2..].split_at(len);
        self.rest = rest;
        Some(c)
    }
}

impl Ord for Name {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.components();
        let mut b = other.components();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(x), Some(y)) => match x.cmp(y) {
                    Ordering::Equal => continue,
                    o => return o,
                },
            }
        }
    }
}

impl PartialOrd for Name {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn is_plain(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~' | b'=' | b':' | b'+' | b',')
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ndn:")?;
        if self.is_empty() {
            return f.write_str("/");
        }
        for c in self.components() {
            f.write_str("/")?;
            for &b in c {
                if is_plain(b) {
                    write!(f, "{}", b as char)?;
                } else {
                    write!(f, "%{b:02X}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Name({self})")
    }
}

impl FromStr for Name {
    type Err = NameError;

    /// Parses `ndn:/a/b`, `/a/b`. Empty components are skipped.
    fn from_str(s: &str) -> Result<Self, NameError> {
        let body = s.strip_prefix("ndn:").unwrap_or(s);
        let body = body
            .strip_prefix('/')
            .ok_or_else(|| NameError::MissingSlash(s.to_string()))?;
        let mut name = Name::new();
        for part in body.split('/').filter(|p| !p.is_empty()) {
            let bytes = part.as_bytes();
            let mut out = Vec::with_capacity(bytes.len());
            let mut i = 0;
            while i < bytes.len() {
                if bytes[i] == b'%' {
                    let hex = part
                        .get(i + 1..i + 3)
                        .ok_or_else(|| NameError::BadEscape(s.to_string()))?;
                    let v = u8::from_str_radix(hex, 16)
                        .map_err(|_| NameError::BadEscape(s.to_string()))?;
                    out.push(v);
                    i += 3;
                } else {
                    out.push(bytes[i]);
                    i += 1;
                }
            }
            name.push(out)?;
        }
        Ok(name)
    }
}

/// Shorthand for literal names in code and tests. Panics on malformed input.
pub fn name(s: &str) -> Name {
    s.parse().unwrap_or_else(|e| panic!("bad name literal {s:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renders_and_parses() {
        let n = name("ndn:/OGB/12/41/58/19/GPS-ID");
        assert_eq!(n.len(), 6);
        assert_eq!(n.to_string(), "ndn:/OGB/12/41/58/19/GPS-ID");
        assert_eq!(name("/OGB/12/41/58/19/GPS-ID"), n);
        assert_eq!(n.get_str(4), Some("19"));
    }

    #[test]
    fn prefix_is_component_wise() {
        let a = name("/OGB/12");
        let b = name("/OGB/123");
        assert!(!a.is_prefix_of(&b));
        assert!(a.is_prefix_of(&name("/OGB/12/41")));
        assert!(a.is_prefix_of(&a));
        assert_eq!(name("/a/b/c").prefix(2), name("/a/b"));
    }

    #[test]
    fn ordering_is_component_wise() {
        assert!(name("/a") < name("/a/b"));
        assert!(name("/a/b") < name("/a/c"));
        // "12" < "3" byte-wise even though the second name is shorter overall
        assert!(name("/x/12/zzz") < name("/x/3"));
    }

    #[test]
    fn escapes_non_plain_bytes() {
        let n = Name::from_components([&b"a/b"[..], &[0u8, 255][..]]).unwrap();
        let s = n.to_string();
        assert_eq!(s, "ndn:/a%2Fb/%00%FF");
        assert_eq!(s.parse::<Name>().unwrap(), n);
    }

    #[test]
    fn rejects_relative_names() {
        assert!(matches!("a/b".parse::<Name>(), Err(NameError::MissingSlash(_))));
        assert!(matches!("/a%zz".parse::<Name>(), Err(NameError::BadEscape(_))));
    }

    proptest! {
        #[test]
        fn uri_round_trip(parts in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 1..12), 0..8)) {
            let n = Name::from_components(&parts).unwrap();
            let back: Name = n.to_string().parse().unwrap();
            prop_assert_eq!(&back, &n);
            prop_assert_eq!(Name::from_encoded(n.len() as u16, n.encoded().to_vec()), Some(n.clone()));
            for k in 0..=n.len() {
                prop_assert!(n.prefix(k).is_prefix_of(&n));
            }
        }
    }
}
