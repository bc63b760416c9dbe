//! Bit strings and the Elias gamma and delta codes.
//!
//! Bits are stored most-significant-first within each byte; the unused
//! tail of the final byte is always zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Codable integers are `1..=MAX_CODABLE`.
pub const MAX_CODABLE: u64 = (1 << 62) - 1;

/// A gamma prefix longer than this cannot belong to a codable integer.
pub const MAX_PREFIX_ZEROS: usize = 61;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Payload bytes, zero-padded to a whole byte.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Wraps padded bytes holding `len` meaningful bits.
    pub fn from_padded_bytes(mut bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::corrupt(
                bytes.len().min(len.div_ceil(8)),
                format!("{} bytes cannot hold exactly {len} bits", bytes.len()),
            ));
        }
        if len % 8 != 0 {
            let last = bytes.len() - 1;
            let pad = 8 - len % 8;
            if bytes[last] & ((1u8 << pad) - 1) != 0 {
                return Err(Error::corrupt(last, "nonzero padding bits"));
            }
        }
        bytes.shrink_to_fit();
        Ok(Self { bytes, len })
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        (index < self.len).then(|| self.bytes[index / 8] & (0x80 >> (index % 8)) != 0)
    }

    pub fn push_bit(&mut self, bit: bool) {
        self.push_bits(bit as u64, 1);
    }

    /// Appends the low `count` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, count: u32) {
        debug_assert!(count <= 64);
        let mut remaining = count;
        while remaining > 0 {
            let offset = (self.len % 8) as u32;
            if offset == 0 {
                self.bytes.push(0);
            }
            let space = 8 - offset;
            let take = space.min(remaining);
            let chunk = ((value >> (remaining - take)) & ((1u64 << take) - 1)) as u8;
            *self.bytes.last_mut().unwrap() |= chunk << (space - take);
            self.len += take as usize;
            remaining -= take;
        }
    }

    pub fn push_zeros(&mut self, count: usize) {
        let new_len = self.len + count;
        self.bytes.resize(new_len.div_ceil(8), 0);
        self.len = new_len;
    }

    /// Concatenation.
    pub fn append(&mut self, other: &BitString) {
        if self.len % 8 == 0 {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
            return;
        }
        let full = other.len / 8;
        for &b in &other.bytes[..full] {
            self.push_bits(b as u64, 8);
        }
        let rest = (other.len % 8) as u32;
        if rest > 0 {
            self.push_bits((other.bytes[full] >> (8 - rest)) as u64, rest);
        }
    }

    pub fn concat(mut self, other: &BitString) -> BitString {
        self.append(other);
        self
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader::new(&self.bytes, self.len)
    }

    /// Bit length as `u64` little-endian, then the padded payload.
    pub fn to_framed_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.bytes.len());
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }

    /// Inverse of [`BitString::to_framed_bytes`]; returns the bit string and
    /// the number of bytes consumed.
    pub fn from_framed_bytes(data: &[u8]) -> Result<(Self, usize)> {
        let head: [u8; 8] = data
            .get(..8)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(|| Error::corrupt(data.len(), "missing bit-length prefix"))?;
        let len = usize::try_from(u64::from_le_bytes(head))
            .map_err(|_| Error::corrupt(0, "bit length does not fit in memory"))?;
        let nbytes = len.div_ceil(8);
        let body = data
            .get(8..8 + nbytes)
            .ok_or_else(|| Error::corrupt(data.len(), format!("expected {nbytes} payload bytes")))?;
        Ok((Self::from_padded_bytes(body.to_vec(), len)?, 8 + nbytes))
    }

    /// Drops bits past `len`, keeping padding zero.
    pub fn truncate(&mut self, len: usize) {
        assert!(len <= self.len);
        self.bytes.truncate(len.div_ceil(8));
        if len % 8 != 0 {
            let keep = 0xFFu8 << (8 - len % 8);
            *self.bytes.last_mut().unwrap() &= keep;
        }
        self.len = len;
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i).unwrap() { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitString(\"{self}\")")
        } else {
            write!(f, "BitString({} bits)", self.len)
        }
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BitString::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => out.push_bit(false),
                '1' => out.push_bit(true),
                _ => return Err(Error::corrupt(i, format!("'{c}' is not a bit"))),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    len: usize,
    cursor: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], len: usize) -> Self {
        debug_assert!(len <= bytes.len() * 8);
        Self {
            bytes,
            len,
            cursor: 0,
        }
    }

    pub fn position(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.len - self.cursor
    }

    pub fn is_at_end(&self) -> bool {
        self.cursor == self.len
    }

    /// Next 64 bits from the cursor, left-aligned, zero past the end.
    #[inline]
    fn peek64(&self) -> u64 {
        let byte = self.cursor / 8;
        let shift = self.cursor % 8;
        let mut buf = [0u8; 16];
        let avail = self.bytes.len().saturating_sub(byte).min(9);
        buf[..avail].copy_from_slice(&self.bytes[byte..byte + avail]);
        let hi = u64::from_be_bytes(buf[..8].try_into().unwrap());
        let lo = buf[8] as u64;
        let word = if shift == 0 {
            hi
        } else {
            (hi << shift) | (lo >> (8 - shift))
        };
        // Mask bits beyond len (padding is zero anyway, but len may be
        // shorter than the backing slice).
        let rem = self.remaining();
        if rem >= 64 {
            word
        } else if rem == 0 {
            0
        } else {
            word & !(u64::MAX >> rem)
        }
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        Ok(self.read_bits(1)? == 1)
    }

    /// Reads `count <= 56` bits as an unsigned integer.
    pub fn read_bits(&mut self, count: u32) -> Result<u64> {
        debug_assert!(count <= 56);
        if count == 0 {
            return Ok(0);
        }
        if (count as usize) > self.remaining() {
            return Err(Error::Truncated { at: self.len });
        }
        let v = self.peek64() >> (64 - count);
        self.cursor += count as usize;
        Ok(v)
    }

    fn read_wide(&mut self, count: u32) -> Result<u64> {
        if count <= 56 {
            self.read_bits(count)
        } else {
            let hi = self.read_bits(count - 32)?;
            let lo = self.read_bits(32)?;
            Ok((hi << 32) | lo)
        }
    }

    /// Counts and consumes zeros up to (not including) the next one bit.
    fn read_zero_prefix(&mut self, limit: usize) -> Result<usize> {
        let start = self.cursor;
        let mut zeros = 0usize;
        loop {
            if self.remaining() == 0 {
                return Err(Error::Truncated { at: self.len });
            }
            let lz = self.peek64().leading_zeros() as usize;
            let lz = lz.min(self.remaining());
            zeros += lz;
            if zeros > limit {
                return Err(Error::PrefixTooLong { at: start, limit });
            }
            self.cursor += lz;
            if lz < 64 && self.remaining() > 0 {
                return Ok(zeros);
            }
        }
    }
}

pub fn gamma_len(n: u64) -> usize {
    debug_assert!(n >= 1);
    2 * (63 - n.leading_zeros() as usize) + 1
}

pub fn delta_len(n: u64) -> usize {
    debug_assert!(n >= 1);
    let nb = 63 - n.leading_zeros() as usize;
    gamma_len(nb as u64 + 1) + nb
}

fn check_codable(n: u64) -> Result<()> {
    if (1..=MAX_CODABLE).contains(&n) {
        Ok(())
    } else {
        Err(Error::OutOfRange(n))
    }
}

pub fn write_gamma(out: &mut BitString, n: u64) -> Result<()> {
    check_codable(n)?;
    let nb = 63 - n.leading_zeros();
    out.push_zeros(nb as usize);
    if nb < 32 {
        out.push_bits(n, nb + 1);
    } else {
        out.push_bits(n >> 32, nb + 1 - 32);
        out.push_bits(n & 0xFFFF_FFFF, 32);
    }
    Ok(())
}

pub fn write_delta(out: &mut BitString, n: u64) -> Result<()> {
    check_codable(n)?;
    let nb = 63 - n.leading_zeros();
    write_gamma(out, nb as u64 + 1)?;
    if nb > 32 {
        out.push_bits(n >> 32 & ((1 << (nb - 32)) - 1), nb - 32);
        out.push_bits(n & 0xFFFF_FFFF, 32);
    } else if nb > 0 {
        out.push_bits(n & ((1 << nb) - 1), nb);
    }
    Ok(())
}

pub fn gamma_encode(n: u64) -> Result<BitString> {
    let mut out = BitString::new();
    write_gamma(&mut out, n)?;
    Ok(out)
}

pub fn delta_encode(n: u64) -> Result<BitString> {
    let mut out = BitString::new();
    write_delta(&mut out, n)?;
    Ok(out)
}

pub fn gamma_decode(r: &mut BitReader<'_>) -> Result<u64> {
    let nb = r.read_zero_prefix(MAX_PREFIX_ZEROS)?;
    r.read_wide(nb as u32 + 1)
}

pub fn delta_decode(r: &mut BitReader<'_>) -> Result<u64> {
    let at = r.position();
    let width = gamma_decode(r)?;
    let nb = width - 1;
    if nb > MAX_PREFIX_ZEROS as u64 {
        return Err(Error::PrefixTooLong {
            at,
            limit: MAX_PREFIX_ZEROS,
        });
    }
    let low = r.read_wide(nb as u32)?;
    Ok((1 << nb) | low)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniversalCode {
    Gamma,
    Delta,
}

impl UniversalCode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gamma => "gamma",
            Self::Delta => "delta",
        }
    }

    pub fn write(self, out: &mut BitString, n: u64) -> Result<()> {
        match self {
            Self::Gamma => write_gamma(out, n),
            Self::Delta => write_delta(out, n),
        }
    }

    pub fn read(self, r: &mut BitReader<'_>) -> Result<u64> {
        match self {
            Self::Gamma => gamma_decode(r),
            Self::Delta => delta_decode(r),
        }
    }

    pub fn len(self, n: u64) -> usize {
        match self {
            Self::Gamma => gamma_len(n),
            Self::Delta => delta_len(n),
        }
    }
}

impl FromStr for UniversalCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(Self::Gamma),
            "delta" => Ok(Self::Delta),
            other => Err(Error::InvalidParameter(format!("unknown code '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_encode(1).unwrap().to_string(), "1");
        assert_eq!(gamma_encode(4).unwrap().to_string(), "00100");
        assert_eq!(gamma_encode(17).unwrap().to_string(), "000010001");
        assert_eq!(gamma_encode(0), Err(Error::OutOfRange(0)));
        assert_eq!(gamma_encode(1 << 62), Err(Error::OutOfRange(1 << 62)));
    }

    #[test]
    fn gamma_decode_examples() {
        assert_eq!(gamma_decode(&mut bits("1").reader()).unwrap(), 1);
        assert_eq!(gamma_decode(&mut bits("00100").reader()).unwrap(), 4);
        let s = bits("0111");
        let mut r = s.reader();
        assert_eq!(gamma_decode(&mut r).unwrap(), 3);
        assert_eq!(gamma_decode(&mut r).unwrap(), 1);
        assert!(r.is_at_end());
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_encode(1).unwrap().to_string(), "1");
        assert_eq!(delta_encode(2).unwrap().to_string(), "0100");
        assert_eq!(delta_encode(4).unwrap().to_string(), "01100");
        assert_eq!(delta_decode(&mut bits("01100").reader()).unwrap(), 4);
    }

    #[test]
    fn decode_errors() {
        assert_eq!(gamma_decode(&mut bits("001").reader()), Err(Error::Truncated { at: 3 }));
        assert_eq!(gamma_decode(&mut bits("000").reader()), Err(Error::Truncated { at: 3 }));
        assert_eq!(gamma_decode(&mut bits("").reader()), Err(Error::Truncated { at: 0 }));
        let mut long = BitString::new();
        long.push_zeros(70);
        long.push_bit(true);
        assert!(matches!(
            gamma_decode(&mut long.reader()),
            Err(Error::PrefixTooLong { at: 0, .. })
        ));
    }

    #[test]
    fn extreme_values_roundtrip() {
        for n in [MAX_CODABLE, 1 << 61, (1 << 32) - 1, 1 << 32, (1 << 33) + 5] {
            for code in [UniversalCode::Gamma, UniversalCode::Delta] {
                let mut s = BitString::new();
                code.write(&mut s, n).unwrap();
                assert_eq!(s.len(), code.len(n));
                assert_eq!(code.read(&mut s.reader()).unwrap(), n);
            }
        }
    }

    #[test]
    fn append_is_concatenation() {
        let a = bits("101");
        let b = bits("0011010011");
        assert_eq!(a.clone().concat(&b).to_string(), "1010011010011");
        assert_eq!(BitString::new().concat(&a), a);
        assert_eq!(a.clone().concat(&BitString::new()), a);
        let c = bits("11111111");
        assert_eq!(c.clone().concat(&a).to_string(), "11111111101");
    }

    #[test]
    fn framing() {
        let s = bits("1011001");
        let framed = s.to_framed_bytes();
        assert_eq!(framed, vec![7, 0, 0, 0, 0, 0, 0, 0, 0b1011_0010]);
        assert_eq!(BitString::from_framed_bytes(&framed).unwrap(), (s, 9));
        assert!(BitString::from_framed_bytes(&framed[..8]).is_err());
        assert!(BitString::from_padded_bytes(vec![0b1011_0011], 7).is_err());
    }

    #[test]
    fn truncate_clears_tail() {
        let mut s = bits("1111111111");
        s.truncate(3);
        assert_eq!(s, bits("111"));
    }

    #[test]
    fn delta_not_longer_than_gamma_from_32() {
        for n in 32..=(1u64 << 20) {
            assert!(delta_len(n) <= gamma_len(n), "n={n}");
        }
    }

    proptest! {
        #[test]
        fn concat_associative(a in "[01]{0,20}", b in "[01]{0,20}", c in "[01]{0,20}") {
            let (a, b, c) = (bits(&a), bits(&b), bits(&c));
            prop_assert_eq!(a.clone().concat(&b).concat(&c), a.concat(&b.concat(&c)));
        }

        #[test]
        fn gamma_sequence_roundtrip(ns in prop::collection::vec(1u64..=MAX_CODABLE, 0..50)) {
            let mut s = BitString::new();
            for &n in &ns {
                write_gamma(&mut s, n).unwrap();
                write_delta(&mut s, n).unwrap();
            }
            let mut r = s.reader();
            for &n in &ns {
                prop_assert_eq!(gamma_decode(&mut r).unwrap(), n);
                prop_assert_eq!(delta_decode(&mut r).unwrap(), n);
            }
            prop_assert!(r.is_at_end());
        }
    }
}
