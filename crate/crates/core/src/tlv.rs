//! Simplified NDN TLV wire format for Interest and Data packets.
//!
//! Types and lengths use the NDN variable-size number encoding (1, 3, 5 or
//! 9 octets). Only the fields the simulator needs are carried:
//!
//! ```text
//! Interest  = 0x05 LEN Name Nonce InterestLifetime [BundleTag]
//! Data      = 0x06 LEN Name Content
//! Name      = 0x07 LEN *GenericComponent [SeqComponent]
//! GenericComponent = 0x08 LEN utf-8 bytes
//! SeqComponent     = 0x32 LEN decimal ascii digits, no leading zeros
//! Nonce            = 0x0A 0x04 4 octets, big endian
//! InterestLifetime = 0x0C LEN nonNegativeInteger (1, 2, 4 or 8 octets), ms
//! BundleTag        = 0xFD 0x0352 0x08 field1(4 octets) field2(4 octets)
//! Content          = 0x15 LEN payload octets
//! ```
//!
//! The encoded length returned here is the exact number of bytes the channel
//! model charges for a frame (plus the MAC header).

use std::fmt;

use thiserror::Error;

pub const TLV_INTEREST: u64 = 0x05;
pub const TLV_DATA: u64 = 0x06;
pub const TLV_NAME: u64 = 0x07;
pub const TLV_GENERIC_COMPONENT: u64 = 0x08;
pub const TLV_NONCE: u64 = 0x0A;
pub const TLV_INTEREST_LIFETIME: u64 = 0x0C;
pub const TLV_CONTENT: u64 = 0x15;
pub const TLV_SEQ_COMPONENT: u64 = 0x32;
/// Application-reserved type number for the bundle tag.
pub const TLV_BUNDLE_TAG: u64 = 850;

/// Size of the encoded bundle tag element: 3-octet type, 1-octet length, 8 value octets.
pub const BUNDLE_TAG_TLV_SIZE: usize = 12;

/// Bit 31 of `field1` marks a transport retransmission.
pub const RTX_FLAG: u32 = 0x8000_0000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated input at offset {offset} while reading {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("unexpected TLV type {found} at offset {offset}, expected {expected}")]
    UnexpectedType {
        offset: usize,
        found: u64,
        expected: u64,
    },
    #[error("TLV type {tlv_type} at offset {offset} has invalid length {length}")]
    BadLength {
        offset: usize,
        tlv_type: u64,
        length: u64,
    },
    #[error("TLV type {tlv_type} at offset {offset} has a malformed value: {reason}")]
    BadValue {
        offset: usize,
        tlv_type: u64,
        reason: &'static str,
    },
    #[error("{count} trailing bytes after packet at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("name prefix must have at least one component")]
    EmptyPrefix,
    #[error("name component may not be empty")]
    EmptyComponent,
}

/// Packs two 32-bit fields into the 64-bit bundle tag, `field1` in the upper word.
pub const fn btag_pack(field1: u32, field2: u32) -> u64 {
    ((field1 as u64) << 32) | field2 as u64
}

pub const fn btag_unpack(raw: u64) -> (u32, u32) {
    ((raw >> 32) as u32, raw as u32)
}

/// The 64-bit bundle tag.
///
/// Between transport and link layer it carries `(RTx flag, cwnd)`; on the
/// wireless medium the encoder rewrites it to `(start seq, end seq)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BundleTag {
    pub field1: u32,
    pub field2: u32,
}

impl BundleTag {
    pub const fn new(field1: u32, field2: u32) -> Self {
        Self { field1, field2 }
    }

    pub const fn from_raw(raw: u64) -> Self {
        let (field1, field2) = btag_unpack(raw);
        Self { field1, field2 }
    }

    pub const fn raw(self) -> u64 {
        btag_pack(self.field1, self.field2)
    }

    /// Transport-phase tag.
    pub const fn transport(is_rtx: bool, cwnd: u32) -> Self {
        Self {
            field1: if is_rtx { RTX_FLAG } else { 0 },
            field2: cwnd,
        }
    }

    /// Link-phase tag describing the bundled range `[start, end]`.
    pub const fn bundle(start: u32, end: u32) -> Self {
        Self {
            field1: start,
            field2: end,
        }
    }

    pub const fn is_rtx(self) -> bool {
        self.field1 & RTX_FLAG != 0
    }

    pub const fn cwnd(self) -> u32 {
        self.field2
    }

    pub const fn start(self) -> u32 {
        self.field1
    }

    pub const fn end(self) -> u32 {
        self.field2
    }
}

/// An NDN name split into a file prefix and an optional chunk sequence suffix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name {
    prefix: Vec<String>,
    seq: Option<u64>,
}

impl Name {
    pub fn new<I, S>(components: I, seq: Option<u64>) -> Result<Self, NameError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let prefix: Vec<String> = components.into_iter().map(Into::into).collect();
        if prefix.is_empty() {
            return Err(NameError::EmptyPrefix);
        }
        if prefix.iter().any(String::is_empty) {
            return Err(NameError::EmptyComponent);
        }
        Ok(Self { prefix, seq })
    }

    /// Parses a URI-style prefix such as `/yt/ml.mp4` (no sequence suffix).
    pub fn parse_prefix(uri: &str) -> Result<Self, NameError> {
        Self::new(uri.split('/').filter(|c| !c.is_empty()), None)
    }

    pub fn with_seq(&self, seq: u64) -> Self {
        Self {
            prefix: self.prefix.clone(),
            seq: Some(seq),
        }
    }

    /// Same name with the sequence suffix removed.
    pub fn prefix_name(&self) -> Self {
        Self {
            prefix: self.prefix.clone(),
            seq: None,
        }
    }

    pub fn components(&self) -> &[String] {
        &self.prefix
    }

    pub fn seq(&self) -> Option<u64> {
        self.seq
    }

    /// True if every prefix component of `self` leads `other`'s components.
    pub fn is_prefix_of(&self, other: &Name) -> bool {
        if self.prefix.len() > other.prefix.len() {
            return false;
        }
        if self.prefix.len() == other.prefix.len() {
            return self.prefix == other.prefix && (self.seq.is_none() || self.seq == other.seq);
        }
        self.seq.is_none() && other.prefix[..self.prefix.len()] == self.prefix[..]
    }

    /// Number of name components, counting the sequence suffix.
    pub fn len(&self) -> usize {
        self.prefix.len() + usize::from(self.seq.is_some())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn encoded_value_len(&self) -> usize {
        let mut len: usize = self
            .prefix
            .iter()
            .map(|c| tlv_len(TLV_GENERIC_COMPONENT, c.len()))
            .sum();
        if let Some(seq) = self.seq {
            len += tlv_len(TLV_SEQ_COMPONENT, decimal_digits(seq));
        }
        len
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        write_var(out, TLV_NAME);
        write_var(out, self.encoded_value_len() as u64);
        for c in &self.prefix {
            write_var(out, TLV_GENERIC_COMPONENT);
            write_var(out, c.len() as u64);
            out.extend_from_slice(c.as_bytes());
        }
        if let Some(seq) = self.seq {
            let digits = seq.to_string();
            write_var(out, TLV_SEQ_COMPONENT);
            write_var(out, digits.len() as u64);
            out.extend_from_slice(digits.as_bytes());
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.prefix {
            write!(f, "/{c}")?;
        }
        if let Some(seq) = self.seq {
            write!(f, "/{seq}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterestPacket {
    pub name: Name,
    pub nonce: u32,
    pub lifetime_ms: u64,
    pub btag: Option<BundleTag>,
}

impl InterestPacket {
    pub fn new(name: Name, nonce: u32, lifetime_ms: u64) -> Self {
        Self {
            name,
            nonce,
            lifetime_ms,
            btag: None,
        }
    }

    pub fn with_btag(mut self, btag: BundleTag) -> Self {
        self.btag = Some(btag);
        self
    }

    fn value_len(&self) -> usize {
        let mut len = tlv_len(TLV_NAME, self.name.encoded_value_len())
            + tlv_len(TLV_NONCE, 4)
            + tlv_len(TLV_INTEREST_LIFETIME, nni_len(self.lifetime_ms));
        if self.btag.is_some() {
            len += BUNDLE_TAG_TLV_SIZE;
        }
        len
    }

    /// Encoded size in bytes without materialising the buffer.
    pub fn wire_len(&self) -> usize {
        tlv_len(TLV_INTEREST, self.value_len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub name: Name,
    pub payload_len: usize,
}

impl DataPacket {
    pub fn new(name: Name, payload_len: usize) -> Self {
        Self { name, payload_len }
    }

    fn value_len(&self) -> usize {
        tlv_len(TLV_NAME, self.name.encoded_value_len()) + tlv_len(TLV_CONTENT, self.payload_len)
    }

    pub fn wire_len(&self) -> usize {
        tlv_len(TLV_DATA, self.value_len())
    }
}

pub fn encode_interest(pkt: &InterestPacket) -> Vec<u8> {
    let mut out = Vec::with_capacity(pkt.wire_len());
    write_var(&mut out, TLV_INTEREST);
    write_var(&mut out, pkt.value_len() as u64);
    pkt.name.encode_into(&mut out);
    write_var(&mut out, TLV_NONCE);
    write_var(&mut out, 4);
    out.extend_from_slice(&pkt.nonce.to_be_bytes());
    write_var(&mut out, TLV_INTEREST_LIFETIME);
    write_nni(&mut out, pkt.lifetime_ms);
    if let Some(tag) = pkt.btag {
        write_var(&mut out, TLV_BUNDLE_TAG);
        write_var(&mut out, 8);
        out.extend_from_slice(&tag.raw().to_be_bytes());
    }
    debug_assert_eq!(out.len(), pkt.wire_len());
    out
}

pub fn encode_data(pkt: &DataPacket) -> Vec<u8> {
    let mut out = Vec::with_capacity(pkt.wire_len());
    write_var(&mut out, TLV_DATA);
    write_var(&mut out, pkt.value_len() as u64);
    pkt.name.encode_into(&mut out);
    write_var(&mut out, TLV_CONTENT);
    write_var(&mut out, pkt.payload_len as u64);
    out.resize(out.len() + pkt.payload_len, 0);
    debug_assert_eq!(out.len(), pkt.wire_len());
    out
}

pub fn decode_interest(bytes: &[u8]) -> Result<InterestPacket, DecodeError> {
    let mut r = Reader::new(bytes);
    let end = r.expect_outer(TLV_INTEREST)?;
    let name = r.read_name()?;

    let (nonce_at, nonce_len) = r.expect_header(TLV_NONCE)?;
    if nonce_len != 4 {
        return Err(DecodeError::BadLength {
            offset: nonce_at,
            tlv_type: TLV_NONCE,
            length: nonce_len,
        });
    }
    let nonce = u32::from_be_bytes(r.take(4, "Nonce")?.try_into().unwrap());

    let (lt_at, lt_len) = r.expect_header(TLV_INTEREST_LIFETIME)?;
    let lifetime_ms = r.read_nni(lt_at, TLV_INTEREST_LIFETIME, lt_len)?;

    let mut btag = None;
    if r.pos < end {
        let (tag_at, tag_len) = r.expect_header(TLV_BUNDLE_TAG)?;
        if tag_len != 8 {
            return Err(DecodeError::BadLength {
                offset: tag_at,
                tlv_type: TLV_BUNDLE_TAG,
                length: tag_len,
            });
        }
        let raw = u64::from_be_bytes(r.take(8, "BundleTag")?.try_into().unwrap());
        btag = Some(BundleTag::from_raw(raw));
    }
    r.finish(end)?;

    Ok(InterestPacket {
        name,
        nonce,
        lifetime_ms,
        btag,
    })
}

pub fn decode_data(bytes: &[u8]) -> Result<DataPacket, DecodeError> {
    let mut r = Reader::new(bytes);
    let end = r.expect_outer(TLV_DATA)?;
    let name = r.read_name()?;
    let (_, content_len) = r.expect_header(TLV_CONTENT)?;
    r.take(content_len as usize, "Content")?;
    r.finish(end)?;
    Ok(DataPacket {
        name,
        payload_len: content_len as usize,
    })
}

fn var_len(v: u64) -> usize {
    match v {
        0..=252 => 1,
        253..=0xFFFF => 3,
        0x1_0000..=0xFFFF_FFFF => 5,
        _ => 9,
    }
}

fn tlv_len(tlv_type: u64, value_len: usize) -> usize {
    var_len(tlv_type) + var_len(value_len as u64) + value_len
}

fn nni_len(v: u64) -> usize {
    match v {
        0..=0xFF => 1,
        0x100..=0xFFFF => 2,
        0x1_0000..=0xFFFF_FFFF => 4,
        _ => 8,
    }
}

fn decimal_digits(mut v: u64) -> usize {
    let mut n = 1;
    while v >= 10 {
        v /= 10;
        n += 1;
    }
    n
}

fn write_var(out: &mut Vec<u8>, v: u64) {
    match var_len(v) {
        1 => out.push(v as u8),
        3 => {
            out.push(0xFD);
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
        5 => {
            out.push(0xFE);
            out.extend_from_slice(&(v as u32).to_be_bytes());
        }
        _ => {
            out.push(0xFF);
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
}

fn write_nni(out: &mut Vec<u8>, v: u64) {
    let len = nni_len(v);
    write_var(out, len as u64);
    out.extend_from_slice(&v.to_be_bytes()[8 - len..]);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                what,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn read_var(&mut self, what: &'static str) -> Result<u64, DecodeError> {
        let first = self.take(1, what)?[0];
        Ok(match first {
            0xFD => u16::from_be_bytes(self.take(2, what)?.try_into().unwrap()) as u64,
            0xFE => u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()) as u64,
            0xFF => u64::from_be_bytes(self.take(8, what)?.try_into().unwrap()),
            b => b as u64,
        })
    }

    /// Reads a type/length header; returns the header offset and the value length.
    fn read_header(&mut self) -> Result<(usize, u64, u64), DecodeError> {
        let at = self.pos;
        let t = self.read_var("TLV type")?;
        let len = self.read_var("TLV length")?;
        if len > (self.buf.len() - self.pos) as u64 {
            return Err(DecodeError::Truncated {
                offset: at,
                what: "TLV value",
            });
        }
        Ok((at, t, len))
    }

    fn expect_header(&mut self, expected: u64) -> Result<(usize, u64), DecodeError> {
        let (at, t, len) = self.read_header()?;
        if t != expected {
            return Err(DecodeError::UnexpectedType {
                offset: at,
                found: t,
                expected,
            });
        }
        Ok((at, len))
    }

    /// Reads the outermost packet header and returns the end offset of its value.
    fn expect_outer(&mut self, expected: u64) -> Result<usize, DecodeError> {
        let (_, len) = self.expect_header(expected)?;
        Ok(self.pos + len as usize)
    }

    fn read_nni(&mut self, at: usize, tlv_type: u64, len: u64) -> Result<u64, DecodeError> {
        if !matches!(len, 1 | 2 | 4 | 8) {
            return Err(DecodeError::BadLength {
                offset: at,
                tlv_type,
                length: len,
            });
        }
        let bytes = self.take(len as usize, "nonNegativeInteger")?;
        let v = bytes.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64);
        if nni_len(v) != len as usize {
            return Err(DecodeError::BadValue {
                offset: at,
                tlv_type,
                reason: "non-minimal integer encoding",
            });
        }
        Ok(v)
    }

    fn read_name(&mut self) -> Result<Name, DecodeError> {
        let (name_at, name_len) = self.expect_header(TLV_NAME)?;
        let end = self.pos + name_len as usize;
        let mut prefix = Vec::new();
        let mut seq = None;
        while self.pos < end {
            let (at, t, len) = self.read_header()?;
            if self.pos + len as usize > end {
                return Err(DecodeError::BadLength {
                    offset: at,
                    tlv_type: t,
                    length: len,
                });
            }
            if seq.is_some() {
                return Err(DecodeError::BadValue {
                    offset: at,
                    tlv_type: t,
                    reason: "component after sequence suffix",
                });
            }
            let value = self.take(len as usize, "name component")?;
            match t {
                TLV_GENERIC_COMPONENT => {
                    if value.is_empty() {
                        return Err(DecodeError::BadLength {
                            offset: at,
                            tlv_type: t,
                            length: 0,
                        });
                    }
                    let s = std::str::from_utf8(value).map_err(|_| DecodeError::BadValue {
                        offset: at,
                        tlv_type: t,
                        reason: "component is not utf-8",
                    })?;
                    prefix.push(s.to_owned());
                }
                TLV_SEQ_COMPONENT => seq = Some(parse_decimal(value, at)?),
                other => {
                    return Err(DecodeError::UnexpectedType {
                        offset: at,
                        found: other,
                        expected: TLV_GENERIC_COMPONENT,
                    })
                }
            }
        }
        if prefix.is_empty() {
            return Err(DecodeError::BadValue {
                offset: name_at,
                tlv_type: TLV_NAME,
                reason: "name has no prefix components",
            });
        }
        Ok(Name { prefix, seq })
    }

    fn finish(&self, end: usize) -> Result<(), DecodeError> {
        if self.pos != end {
            return Err(DecodeError::TrailingBytes {
                offset: self.pos,
                count: end.saturating_sub(self.pos),
            });
        }
        if self.pos != self.buf.len() {
            return Err(DecodeError::TrailingBytes {
                offset: self.pos,
                count: self.buf.len() - self.pos,
            });
        }
        Ok(())
    }
}

fn parse_decimal(value: &[u8], at: usize) -> Result<u64, DecodeError> {
    let bad = |reason| DecodeError::BadValue {
        offset: at,
        tlv_type: TLV_SEQ_COMPONENT,
        reason,
    };
    if value.is_empty() || !value.iter().all(u8::is_ascii_digit) {
        return Err(bad("sequence is not a decimal number"));
    }
    if value.len() > 1 && value[0] == b'0' {
        return Err(bad("sequence has leading zeros"));
    }
    std::str::from_utf8(value)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("sequence overflows 64 bits"))
}
