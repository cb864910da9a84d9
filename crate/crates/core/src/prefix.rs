//! IPv4/IPv6 prefixes in canonical form and containment.

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    V4,
    V6,
}

impl Family {
    pub const fn max_len(self) -> u8 {
        match self {
            Family::V4 => 32,
            Family::V6 => 128,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrefixError {
    #[error("malformed prefix {0:?}")]
    Malformed(String),
    #[error("prefix length {len} out of range for {family:?}")]
    LengthOutOfRange { family: Family, len: u8 },
    #[error("prefix {0} has host bits set")]
    HostBitsSet(String),
    #[error("mixed address families: {0} vs {1}")]
    FamilyMismatch(IpPrefix, IpPrefix),
}

/// An IP prefix with host bits zeroed.
///
/// IPv4 addresses occupy the low 32 bits of `bits`. Ordering is by family,
/// then address, then length, which puts a covering prefix before the
/// prefixes it covers.
#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd)]
pub struct IpPrefix {
    family: Family,
    bits: u128,
    len: u8,
}

fn width_mask(family: Family) -> u128 {
    match family {
        Family::V4 => u32::MAX as u128,
        Family::V6 => u128::MAX,
    }
}

fn net_mask(family: Family, len: u8) -> u128 {
    let w = family.max_len() as u32;
    if len == 0 {
        0
    } else {
        (u128::MAX << (w - len as u32)) & width_mask(family)
    }
}

impl IpPrefix {
    /// Builds a prefix, rejecting set host bits.
    pub fn new(addr: IpAddr, len: u8) -> Result<Self, PrefixError> {
        let p = Self::truncating(addr, len)?;
        if p.bits != addr_bits(addr) {
            return Err(PrefixError::HostBitsSet(format!("{addr}/{len}")));
        }
        Ok(p)
    }

    /// Builds a prefix, zeroing any host bits.
    pub fn truncating(addr: IpAddr, len: u8) -> Result<Self, PrefixError> {
        let family = match addr {
            IpAddr::V4(_) => Family::V4,
            IpAddr::V6(_) => Family::V6,
        };
        if len > family.max_len() {
            return Err(PrefixError::LengthOutOfRange { family, len });
        }
        Ok(IpPrefix {
            family,
            bits: addr_bits(addr) & net_mask(family, len),
            len,
        })
    }

    pub fn from_raw(family: Family, bits: u128, len: u8) -> Result<Self, PrefixError> {
        if len > family.max_len() {
            return Err(PrefixError::LengthOutOfRange { family, len });
        }
        let bits = bits & width_mask(family);
        if bits & !net_mask(family, len) != 0 {
            return Err(PrefixError::HostBitsSet(format!("{bits:#x}/{len}")));
        }
        Ok(IpPrefix { family, bits, len })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// The prefix length in bits (not a collection size).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    /// Raw network bits (IPv4 in the low 32 bits).
    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn addr(&self) -> IpAddr {
        match self.family {
            Family::V4 => IpAddr::V4(Ipv4Addr::from(self.bits as u32)),
            Family::V6 => IpAddr::V6(Ipv6Addr::from(self.bits)),
        }
    }

    /// The covering prefix of length `len` (`len` must not exceed ours).
    pub fn supernet(&self, len: u8) -> Option<IpPrefix> {
        if len > self.len {
            return None;
        }
        Some(IpPrefix {
            family: self.family,
            bits: self.bits & net_mask(self.family, len),
            len,
        })
    }

    /// Containment: true iff `self` is as or less specific than `inner` and
    /// agrees with it on its first `self.len()` bits.
    pub fn covers(&self, inner: &IpPrefix) -> Result<bool, PrefixError> {
        if self.family != inner.family {
            return Err(PrefixError::FamilyMismatch(*self, *inner));
        }
        Ok(self.len <= inner.len && inner.bits & net_mask(self.family, self.len) == self.bits)
    }

    /// Same as [`covers`](Self::covers) but treats mixed families as disjoint.
    pub fn contains(&self, inner: &IpPrefix) -> bool {
        self.covers(inner).unwrap_or(false)
    }
}

/// Free-function form of [`IpPrefix::covers`].
pub fn covers(outer: &IpPrefix, inner: &IpPrefix) -> Result<bool, PrefixError> {
    outer.covers(inner)
}

fn addr_bits(addr: IpAddr) -> u128 {
    match addr {
        IpAddr::V4(a) => u32::from(a) as u128,
        IpAddr::V6(a) => u128::from(a),
    }
}

impl fmt::Display for IpPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

impl FromStr for IpPrefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| PrefixError::Malformed(s.to_string()))?;
        let addr: IpAddr = addr
            .parse()
            .map_err(|_| PrefixError::Malformed(s.to_string()))?;
        let len: u8 = len
            .parse()
            .map_err(|_| PrefixError::Malformed(s.to_string()))?;
        IpPrefix::new(addr, len)
    }
}

impl Serialize for IpPrefix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IpPrefix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
