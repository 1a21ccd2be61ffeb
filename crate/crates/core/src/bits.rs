//! Bit streams: the payload currency of the whole stack.

use std::fmt;

use rand::Rng;

/// An ordered sequence of binary symbols with an exact length.
///
/// Byte conversion is MSB-first within each byte and never pads: a stream
/// whose length is not a multiple of eight cannot be turned into bytes.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitStream {
    bits: Vec<bool>,
}

impl BitStream {
    pub fn new() -> Self {
        Self { bits: Vec::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            bits: Vec::with_capacity(n),
        }
    }

    /// Bytes to bits, MSB-first within each byte.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for &byte in bytes {
            for i in (0..8).rev() {
                bits.push((byte >> i) & 1 == 1);
            }
        }
        Self { bits }
    }

    /// Bits back to bytes. `None` unless the length is a multiple of eight.
    pub fn to_bytes(&self) -> Option<Vec<u8>> {
        if !self.bits.len().is_multiple_of(8) {
            return None;
        }
        let mut out = Vec::with_capacity(self.bits.len() / 8);
        for chunk in self.bits.chunks(8) {
            let mut byte = 0u8;
            for &b in chunk {
                byte = (byte << 1) | b as u8;
            }
            out.push(byte);
        }
        Some(out)
    }

    /// Parses a string of `0`/`1` characters; whitespace and `_` are ignored.
    pub fn from_binary_str(s: &str) -> Option<Self> {
        let mut bits = Vec::new();
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() || c == '_' => {}
                _ => return None,
            }
        }
        Some(Self { bits })
    }

    /// Parses hex digits into bits, four per digit, MSB-first. Whitespace is ignored.
    pub fn from_hex_str(s: &str) -> Option<Self> {
        let mut bits = Vec::new();
        for c in s.chars() {
            if c.is_whitespace() {
                continue;
            }
            let v = c.to_digit(16)? as u8;
            for i in (0..4).rev() {
                bits.push((v >> i) & 1 == 1);
            }
        }
        Some(Self { bits })
    }

    pub fn to_binary_string(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    /// Uniformly random bits from the given generator.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self {
            bits: (0..len).map(|_| rng.random::<bool>()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Appends a value as `width` bits, most significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    /// Reads `width` bits starting at `at` as an unsigned integer, MSB first.
    pub fn uint_at(&self, at: usize, width: u32) -> Option<u64> {
        let end = at.checked_add(width as usize)?;
        if end > self.bits.len() {
            return None;
        }
        let mut v = 0u64;
        for &b in &self.bits[at..end] {
            v = (v << 1) | b as u64;
        }
        Some(v)
    }

    pub fn extend(&mut self, other: &BitStream) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn slice(&self, start: usize, len: usize) -> Option<BitStream> {
        let end = start.checked_add(len)?;
        if end > self.bits.len() {
            return None;
        }
        Some(Self {
            bits: self.bits[start..end].to_vec(),
        })
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    /// Hamming distance over the common prefix plus the length difference.
    pub fn distance(&self, other: &BitStream) -> usize {
        let common = self
            .bits
            .iter()
            .zip(other.bits.iter())
            .filter(|(a, b)| a != b)
            .count();
        common + self.bits.len().abs_diff(other.bits.len())
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        Self {
            bits: iter.into_iter().collect(),
        }
    }
}

impl From<Vec<bool>> for BitStream {
    fn from(bits: Vec<bool>) -> Self {
        Self { bits }
    }
}

impl std::ops::Index<usize> for BitStream {
    type Output = bool;

    fn index(&self, i: usize) -> &bool {
        &self.bits[i]
    }
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.len() <= 64 {
            write!(f, "BitStream({})", self.to_binary_string())
        } else {
            write!(
                f,
                "BitStream({}… {} bits)",
                self.slice(0, 32).unwrap().to_binary_string(),
                self.bits.len()
            )
        }
    }
}

impl fmt::Display for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_binary_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_roundtrip_is_msb_first() {
        let bs = BitStream::from_bytes(&[0xB2]);
        assert_eq!(bs.to_binary_string(), "10110010");
        assert_eq!(bs.to_bytes().unwrap(), vec![0xB2]);
    }

    #[test]
    fn to_bytes_rejects_ragged_length() {
        let bs = BitStream::from_binary_str("1010101").unwrap();
        assert_eq!(bs.to_bytes(), None);
    }

    #[test]
    fn uint_field_roundtrip() {
        let mut bs = BitStream::new();
        bs.push_uint(0xBEEF, 16);
        assert_eq!(bs.len(), 16);
        assert_eq!(bs.uint_at(0, 16), Some(0xBEEF));
        assert_eq!(bs.uint_at(8, 8), Some(0xEF));
        assert_eq!(bs.uint_at(8, 16), None);
    }

    #[test]
    fn hex_parse() {
        let bs = BitStream::from_hex_str("a5").unwrap();
        assert_eq!(bs.to_binary_string(), "10100101");
        assert!(BitStream::from_hex_str("xy").is_none());
    }

    #[test]
    fn distance_counts_length_mismatch() {
        let a = BitStream::from_binary_str("1010").unwrap();
        let b = BitStream::from_binary_str("100011").unwrap();
        assert_eq!(a.distance(&b), 1 + 2);
    }
}
