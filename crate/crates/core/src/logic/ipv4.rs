//! IPv4 prefixes (`a.b.c.d/len`) and the containment test used by the
//! routing policies.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed IPv4 prefix `{text}`: {reason}")]
pub struct PrefixError {
    pub text: String,
    pub reason: &'static str,
}

/// A CIDR block. Host bits are always zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ipv4Prefix {
    addr: u32,
    len: u8,
}

fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len as u32)
    }
}

impl Ipv4Prefix {
    pub fn new(addr: Ipv4Addr, len: u8) -> Result<Self, PrefixError> {
        let text = format!("{addr}/{len}");
        if len > 32 {
            return Err(PrefixError { text, reason: "length exceeds 32" });
        }
        let bits = u32::from(addr);
        if bits & !mask(len) != 0 {
            return Err(PrefixError { text, reason: "host bits set" });
        }
        Ok(Ipv4Prefix { addr: bits, len })
    }

    pub fn addr(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.addr)
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    /// True iff every address of `inner` lies inside `self`.
    pub fn contains(&self, inner: &Ipv4Prefix) -> bool {
        inner.len >= self.len && inner.addr & mask(self.len) == self.addr
    }

    pub fn contains_addr(&self, a: Ipv4Addr) -> bool {
        u32::from(a) & mask(self.len) == self.addr
    }

    /// The `index`-th sub-prefix of length `len` (used by generators).
    pub fn subprefix(&self, len: u8, index: u32) -> Option<Ipv4Prefix> {
        if len < self.len || len > 32 {
            return None;
        }
        let span = len - self.len;
        if span < 32 && index >= (1u32 << span) {
            return None;
        }
        let shift = 32 - len as u32;
        let offset = if shift == 32 { 0 } else { index << shift };
        Some(Ipv4Prefix { addr: self.addr | offset, len })
    }
}

impl FromStr for Ipv4Prefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| PrefixError { text: s.to_string(), reason };
        let (a, l) = s.split_once('/').ok_or_else(|| err("missing `/len`"))?;
        let addr: Ipv4Addr = a.parse().map_err(|_| err("bad address"))?;
        if l.is_empty() || l.len() > 2 || !l.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("bad length"));
        }
        let len: u8 = l.parse().map_err(|_| err("bad length"))?;
        Ipv4Prefix::new(addr, len).map_err(|e| PrefixError { text: s.to_string(), reason: e.reason })
    }
}

impl fmt::Display for Ipv4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

/// Parses both prefixes and tests containment.
pub fn ipv4_contains(outer: &str, inner: &str) -> Result<bool, PrefixError> {
    let o: Ipv4Prefix = outer.parse()?;
    let i: Ipv4Prefix = inner.parse()?;
    Ok(o.contains(&i))
}
