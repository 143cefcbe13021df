//! IPv4 prefix arithmetic used across plan construction and simulation.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

/// An IPv4 prefix: network address plus prefix length.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Prefix {
    addr: u32,
    len: u8,
}

impl Prefix {
    /// Creates a prefix, truncating host bits of `addr`.
    pub fn new(addr: Ipv4Addr, len: u8) -> Self {
        assert!(len <= 32, "prefix length out of range");
        let raw = u32::from(addr) & mask_bits(len);
        Prefix { addr: raw, len }
    }

    pub fn from_u32(addr: u32, len: u8) -> Self {
        Prefix::new(Ipv4Addr::from(addr), len)
    }

    pub fn host(addr: Ipv4Addr) -> Self {
        Prefix::new(addr, 32)
    }

    pub fn network(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.addr)
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    /// First address of the prefix (the network address itself).
    pub fn first_address(&self) -> Ipv4Addr {
        self.network()
    }

    pub fn netmask(&self) -> Ipv4Addr {
        Ipv4Addr::from(mask_bits(self.len))
    }

    /// IOS wildcard mask (inverted netmask).
    pub fn wildcard(&self) -> Ipv4Addr {
        Ipv4Addr::from(!mask_bits(self.len))
    }

    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        (u32::from(addr) & mask_bits(self.len)) == self.addr
    }

    pub fn covers(&self, other: &Prefix) -> bool {
        other.len >= self.len && self.contains(other.network())
    }
}

fn mask_bits(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - u32::from(len))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network(), self.len)
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl From<Prefix> for String {
    fn from(p: Prefix) -> String {
        p.to_string()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid prefix '{0}'")]
pub struct PrefixParseError(String);

impl FromStr for Prefix {
    type Err = PrefixParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s.split_once('/').ok_or_else(|| PrefixParseError(s.into()))?;
        let addr: Ipv4Addr = addr.parse().map_err(|_| PrefixParseError(s.into()))?;
        let len: u8 = len.parse().map_err(|_| PrefixParseError(s.into()))?;
        if len > 32 {
            return Err(PrefixParseError(s.into()));
        }
        Ok(Prefix::new(addr, len))
    }
}

impl TryFrom<String> for Prefix {
    type Error = PrefixParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Parses a dotted netmask into a prefix length, if it is a valid mask.
pub fn mask_to_len(mask: Ipv4Addr) -> Option<u8> {
    let raw = u32::from(mask);
    let len = raw.leading_ones() as u8;
    if mask_bits(len) == raw {
        Some(len)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_truncates_host_bits() {
        let p = Prefix::new(Ipv4Addr::new(10, 0, 0, 3), 31);
        assert_eq!(p.network(), Ipv4Addr::new(10, 0, 0, 2));
        assert!(p.contains(Ipv4Addr::new(10, 0, 0, 3)));
        assert!(!p.contains(Ipv4Addr::new(10, 0, 0, 4)));
    }

    #[test]
    fn display_round_trips() {
        let p: Prefix = "172.20.0.1/32".parse().unwrap();
        assert_eq!(p.to_string(), "172.20.0.1/32");
        assert_eq!(p.netmask(), Ipv4Addr::new(255, 255, 255, 255));
    }

    #[test]
    fn wildcard_and_mask() {
        let p: Prefix = "100.64.3.0/24".parse().unwrap();
        assert_eq!(p.netmask(), Ipv4Addr::new(255, 255, 255, 0));
        assert_eq!(p.wildcard(), Ipv4Addr::new(0, 0, 0, 255));
        assert_eq!(mask_to_len(Ipv4Addr::new(255, 255, 255, 254)), Some(31));
        assert_eq!(mask_to_len(Ipv4Addr::new(255, 0, 255, 0)), None);
    }

    #[test]
    fn covers_nested() {
        let outer: Prefix = "10.0.0.0/8".parse().unwrap();
        let inner: Prefix = "10.5.0.0/31".parse().unwrap();
        assert!(outer.covers(&inner));
        assert!(!inner.covers(&outer));
    }
}
