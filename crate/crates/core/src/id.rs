//! Metadata identifiers and CIDR arithmetic over the 32-bit identifier space.
//!
//! Every partition the controller manages is held internally as a half-open
//! [`IdRange`]; it is only turned into CIDR blocks when flow entries are
//! generated, via [`cover_range`].

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Size of the identifier space, 2^32.
pub const SPACE: u64 = 1 << 32;

const FNV_OFFSET_BASIS: u32 = 0x811c_9dc5;
const FNV_PRIME: u32 = 0x0100_0193;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot split a /32 block ({0})")]
    CannotSplit(CidrBlock),
    #[error("cannot parse `{0}`: {1}")]
    Parse(String, String),
}

/// A 32-bit metadata identifier, displayed as a dotted quad.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct MetaDataId(pub u32);

impl MetaDataId {
    pub const fn new(value: u32) -> Self {
        MetaDataId(value)
    }

    pub const fn value(self) -> u32 {
        self.0
    }
}

impl From<u32> for MetaDataId {
    fn from(v: u32) -> Self {
        MetaDataId(v)
    }
}

impl From<MetaDataId> for u32 {
    fn from(id: MetaDataId) -> Self {
        id.0
    }
}

impl fmt::Display for MetaDataId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&Ipv4Addr::from(self.0), f)
    }
}

impl fmt::Debug for MetaDataId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetaDataId({self})")
    }
}

impl FromStr for MetaDataId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Ipv4Addr>()
            .map(|a| MetaDataId(u32::from(a)))
            .map_err(|e| IdError::Parse(s.to_string(), e.to_string()))
    }
}

impl From<MetaDataId> for String {
    fn from(id: MetaDataId) -> Self {
        id.to_string()
    }
}

impl TryFrom<String> for MetaDataId {
    type Error = IdError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Hashes a file path to its metadata identifier (32-bit FNV-1a over the raw bytes).
pub fn hash_path(path: &[u8]) -> Result<MetaDataId, IdError> {
    if path.is_empty() {
        return Err(IdError::InvalidArgument("empty path".into()));
    }
    Ok(MetaDataId(fnv1a32(path)))
}

pub(crate) fn fnv1a32(bytes: &[u8]) -> u32 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| (h ^ u32::from(b)).wrapping_mul(FNV_PRIME))
}

/// A power-of-two aligned block of identifiers, `prefix/len`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct CidrBlock {
    prefix: u32,
    len: u8,
}

impl CidrBlock {
    /// Builds a block, rejecting host bits set below the prefix length.
    pub fn new(prefix: u32, len: u8) -> Result<Self, IdError> {
        if len > 32 {
            return Err(IdError::InvalidArgument(format!("prefix length {len} > 32")));
        }
        if prefix & !mask(len) != 0 {
            return Err(IdError::InvalidArgument(format!(
                "{}/{len} has bits set below the prefix length",
                Ipv4Addr::from(prefix)
            )));
        }
        Ok(CidrBlock { prefix, len })
    }

    /// The whole identifier space, `0.0.0.0/0`.
    pub const fn full() -> Self {
        CidrBlock { prefix: 0, len: 0 }
    }

    /// The single-identifier block containing `id`.
    pub const fn host(id: u32) -> Self {
        CidrBlock { prefix: id, len: 32 }
    }

    pub const fn prefix(self) -> u32 {
        self.prefix
    }

    pub const fn len(self) -> u8 {
        self.len
    }

    /// Number of identifiers covered, `2^(32 - len)`.
    pub const fn size(self) -> u64 {
        1u64 << (32 - self.len as u32)
    }

    pub const fn start(self) -> u64 {
        self.prefix as u64
    }

    /// Exclusive upper bound; may equal 2^32.
    pub const fn end(self) -> u64 {
        self.prefix as u64 + self.size()
    }

    pub fn range(self) -> IdRange {
        IdRange { lo: MetaDataId(self.prefix), hi_exclusive: self.end() }
    }

    pub fn contains(self, id: MetaDataId) -> bool {
        block_contains(self, id)
    }
}

impl Ord for CidrBlock {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.prefix, self.len).cmp(&(other.prefix, other.len))
    }
}

impl PartialOrd for CidrBlock {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CidrBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.prefix), self.len)
    }
}

impl fmt::Debug for CidrBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CidrBlock({self})")
    }
}

impl FromStr for CidrBlock {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| IdError::Parse(s.to_string(), "missing `/len`".into()))?;
        let addr: Ipv4Addr = addr
            .trim()
            .parse()
            .map_err(|e: std::net::AddrParseError| IdError::Parse(s.to_string(), e.to_string()))?;
        let len: u8 = len
            .trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| IdError::Parse(s.to_string(), e.to_string()))?;
        CidrBlock::new(u32::from(addr), len)
    }
}

impl From<CidrBlock> for String {
    fn from(b: CidrBlock) -> Self {
        b.to_string()
    }
}

impl TryFrom<String> for CidrBlock {
    type Error = IdError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Half-open identifier range `[lo, hi_exclusive)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct IdRange {
    pub lo: MetaDataId,
    pub hi_exclusive: u64,
}

impl IdRange {
    pub fn new(lo: u64, hi_exclusive: u64) -> Result<Self, IdError> {
        if lo >= hi_exclusive || hi_exclusive > SPACE {
            return Err(IdError::InvalidArgument(format!("bad range [{lo}, {hi_exclusive})")));
        }
        Ok(IdRange { lo: MetaDataId(lo as u32), hi_exclusive })
    }

    pub const fn full() -> Self {
        IdRange { lo: MetaDataId(0), hi_exclusive: SPACE }
    }

    pub const fn start(&self) -> u64 {
        self.lo.0 as u64
    }

    pub const fn end(&self) -> u64 {
        self.hi_exclusive
    }

    pub const fn width(&self) -> u64 {
        self.hi_exclusive - self.lo.0 as u64
    }

    pub fn contains(&self, id: MetaDataId) -> bool {
        let v = u64::from(id.0);
        v >= self.start() && v < self.hi_exclusive
    }
}

impl fmt::Display for IdRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hi_exclusive == SPACE {
            write!(f, "[{}, 2^32)", self.lo)
        } else {
            write!(f, "[{}, {})", self.lo, Ipv4Addr::from(self.hi_exclusive as u32))
        }
    }
}

const fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len as u32)
    }
}

/// Splits a block into its two ordered halves.
pub fn split_block(b: CidrBlock) -> Result<(CidrBlock, CidrBlock), IdError> {
    if b.len >= 32 {
        return Err(IdError::CannotSplit(b));
    }
    let len = b.len + 1;
    let upper = b.prefix | (1u32 << (32 - len as u32));
    Ok((CidrBlock { prefix: b.prefix, len }, CidrBlock { prefix: upper, len }))
}

pub fn block_contains(b: CidrBlock, id: MetaDataId) -> bool {
    id.0 & mask(b.len) == b.prefix
}

/// Minimal ordered set of disjoint blocks whose union is exactly `r`.
pub fn cover_range(r: IdRange) -> Vec<CidrBlock> {
    cover_span(r.start(), r.end())
}

/// [`cover_range`] over raw bounds; `lo >= hi` yields nothing.
pub fn cover_span(mut lo: u64, hi: u64) -> Vec<CidrBlock> {
    let mut out = Vec::new();
    while lo < hi {
        // Largest aligned block starting at lo that still fits below hi.
        let align = if lo == 0 { 32 } else { lo.trailing_zeros().min(32) };
        let fit = 63 - (hi - lo).leading_zeros();
        let bits = align.min(fit);
        out.push(CidrBlock { prefix: lo as u32, len: (32 - bits) as u8 });
        lo += 1u64 << bits;
    }
    out
}

/// Number of blocks [`cover_span`] would emit, without allocating.
pub fn cover_len(mut lo: u64, hi: u64) -> usize {
    let mut n = 0;
    while lo < hi {
        let align = if lo == 0 { 32 } else { lo.trailing_zeros().min(32) };
        let fit = 63 - (hi - lo).leading_zeros();
        lo += 1u64 << align.min(fit);
        n += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blk(s: &str) -> CidrBlock {
        s.parse().unwrap()
    }

    fn id(s: &str) -> MetaDataId {
        s.parse().unwrap()
    }

    #[test]
    fn fnv_golden_values() {
        // Published FNV-1a/32 test vectors.
        assert_eq!(hash_path(b"a").unwrap().value(), 0xe40c_292c);
        assert_eq!(hash_path(b"foobar").unwrap().value(), 0xbf9c_f968);
        assert_eq!(hash_path(b"x").unwrap(), hash_path(b"x").unwrap());
    }

    #[test]
    fn empty_path_rejected() {
        assert!(matches!(hash_path(b""), Err(IdError::InvalidArgument(_))));
    }

    #[test]
    fn display_round_trip() {
        let i = id("155.69.146.43");
        assert_eq!(i.value(), 0x9b45_922b);
        assert_eq!(i.to_string(), "155.69.146.43");
        assert_eq!(blk("64.0.0.0/3").to_string(), "64.0.0.0/3");
    }

    #[test]
    fn misaligned_block_rejected() {
        assert!(CidrBlock::new(0x4000_0001, 3).is_err());
        assert!("10.0.0.1/24".parse::<CidrBlock>().is_err());
        assert!("10.0.0.0/33".parse::<CidrBlock>().is_err());
    }

    #[test]
    fn split_examples() {
        assert_eq!(
            split_block(blk("192.168.100.0/24")).unwrap(),
            (blk("192.168.100.0/25"), blk("192.168.100.128/25"))
        );
        assert_eq!(split_block(CidrBlock::full()).unwrap(), (blk("0.0.0.0/1"), blk("128.0.0.0/1")));
        assert_eq!(
            split_block(blk("10.0.0.254/31")).unwrap(),
            (blk("10.0.0.254/32"), blk("10.0.0.255/32"))
        );
        assert!(matches!(split_block(blk("10.0.0.1/32")), Err(IdError::CannotSplit(_))));
    }

    #[test]
    fn contains_examples() {
        assert!(!block_contains(blk("0.0.0.0/1"), id("155.69.146.43")));
        assert!(block_contains(blk("128.0.0.0/1"), id("155.69.146.43")));
        assert!(block_contains(CidrBlock::host(7), MetaDataId(7)));
        assert!(block_contains(CidrBlock::full(), MetaDataId(u32::MAX)));
    }

    #[test]
    fn cover_examples() {
        let r = IdRange::new(0, 0x6000_0000).unwrap();
        assert_eq!(cover_range(r), vec![blk("0.0.0.0/2"), blk("64.0.0.0/3")]);
        let r = IdRange::new(0x6000_0000, 0x8000_0000).unwrap();
        assert_eq!(cover_range(r), vec![blk("96.0.0.0/3")]);
        assert_eq!(cover_range(IdRange::full()), vec![CidrBlock::full()]);
        let r = IdRange::new(u64::from(u32::MAX), SPACE).unwrap();
        assert_eq!(cover_range(r), vec![CidrBlock::host(u32::MAX)]);
    }

    #[test]
    fn cover_len_matches() {
        for (lo, hi) in [(0u64, SPACE), (3, 17), (0x5000_0000, 0x6000_0000), (1, SPACE)] {
            assert_eq!(cover_len(lo, hi), cover_span(lo, hi).len());
        }
    }

    #[test]
    fn range_validation() {
        assert!(IdRange::new(5, 5).is_err());
        assert!(IdRange::new(0, SPACE + 1).is_err());
        assert_eq!(IdRange::full().width(), SPACE);
    }

    #[test]
    fn ids_serialize_as_dotted_quads() {
        let json = serde_json::to_string(&(id("1.2.3.4"), blk("10.0.0.0/8"))).unwrap();
        assert_eq!(json, r#"["1.2.3.4","10.0.0.0/8"]"#);
        let back: (MetaDataId, CidrBlock) = serde_json::from_str(&json).unwrap();
        assert_eq!(back, (id("1.2.3.4"), blk("10.0.0.0/8")));
    }
}
