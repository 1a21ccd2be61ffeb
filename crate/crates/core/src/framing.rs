//! Frame encoding and parsing: preamble, optional size field, payload, CRC-16.

use thiserror::Error;

use crate::bits::BitStream;

/// Frame header pattern, eight alternating bits used for detection and timing.
pub const PREAMBLE: [bool; 8] = [true, false, true, false, true, false, true, false];

/// Payload length of a fixed frame, in bits.
pub const FIXED_PAYLOAD_BITS: usize = 256;

/// Width of the variable-framing payload size field, in bits.
pub const SIZE_FIELD_BITS: u32 = 16;

/// Width of the checksum field, in bits.
pub const CRC_BITS: u32 = 16;

/// Total length of a fixed frame, in bits.
pub const FIXED_FRAME_BITS: usize = PREAMBLE.len() + FIXED_PAYLOAD_BITS + CRC_BITS as usize;

const CRC_POLY: u16 = 0x1021; // x^16 + x^12 + x^5 + 1
const CRC_INIT: u16 = 0xFFFF;

/// How payloads are packed into frames. Exactly one kind is active per link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramingScheme {
    /// Preamble + 256-bit payload + CRC, 280 bits total.
    Fixed,
    /// Preamble + 16-bit size field (payload length in bits, big-endian) +
    /// payload + CRC, 40 + n bits total.
    Variable,
}

impl FramingScheme {
    /// Encoded frame length for a payload of `payload_bits` bits.
    pub fn frame_bits(&self, payload_bits: usize) -> usize {
        match self {
            FramingScheme::Fixed => FIXED_FRAME_BITS,
            FramingScheme::Variable => {
                PREAMBLE.len() + SIZE_FIELD_BITS as usize + payload_bits + CRC_BITS as usize
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FramingError {
    #[error("payload of {got} bits not allowed by {scheme:?} framing")]
    PayloadSize { scheme: FramingScheme, got: usize },
    #[error("preamble mismatch")]
    PreambleMismatch,
    #[error("crc mismatch: received {received:#06x}, computed {computed:#06x}")]
    CrcMismatch { received: u16, computed: u16 },
    #[error("truncated frame: need {needed} bits, have {got}")]
    TruncatedFrame { needed: usize, got: usize },
}

/// CRC-16/CCITT-FALSE over an arbitrary-length bit sequence.
///
/// Shift-register form: init 0xFFFF, polynomial 0x1021, no reflection, no
/// final XOR. The CRC is transmitted most significant bit first.
pub fn crc16(payload: &BitStream) -> u16 {
    let mut crc = CRC_INIT;
    for bit in payload.iter() {
        let top = (crc >> 15) & 1 == 1;
        crc <<= 1;
        if top ^ bit {
            crc ^= CRC_POLY;
        }
    }
    crc
}

/// Builds `preamble ∥ [size field] ∥ payload ∥ crc16(payload)`.
pub fn encode_frame(payload: &BitStream, scheme: FramingScheme) -> Result<BitStream, FramingError> {
    match scheme {
        FramingScheme::Fixed if payload.len() != FIXED_PAYLOAD_BITS => {
            return Err(FramingError::PayloadSize {
                scheme,
                got: payload.len(),
            });
        }
        FramingScheme::Variable if payload.is_empty() || payload.len() > 0xFFFF => {
            return Err(FramingError::PayloadSize {
                scheme,
                got: payload.len(),
            });
        }
        _ => {}
    }

    let mut out = BitStream::with_capacity(scheme.frame_bits(payload.len()));
    for b in PREAMBLE {
        out.push(b);
    }
    if scheme == FramingScheme::Variable {
        out.push_uint(payload.len() as u64, SIZE_FIELD_BITS);
    }
    out.extend(payload);
    out.push_uint(crc16(payload) as u64, CRC_BITS);
    Ok(out)
}

/// A successfully parsed frame and the number of bits it consumed, so callers
/// can walk a sequence of back-to-back frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFrame {
    pub payload: BitStream,
    pub consumed: usize,
}

/// Parses one frame from the start of `bits`.
///
/// `bits` must begin at a frame boundary; locating that boundary in a sampled
/// signal is the demodulator's job.
pub fn parse_frame(bits: &BitStream, scheme: FramingScheme) -> Result<ParsedFrame, FramingError> {
    let header = PREAMBLE.len();
    if bits.len() < header {
        return Err(FramingError::TruncatedFrame {
            needed: scheme.frame_bits(0).min(header),
            got: bits.len(),
        });
    }
    for (i, want) in PREAMBLE.iter().enumerate() {
        if bits[i] != *want {
            return Err(FramingError::PreambleMismatch);
        }
    }

    let (payload_start, payload_len) = match scheme {
        FramingScheme::Fixed => (header, FIXED_PAYLOAD_BITS),
        FramingScheme::Variable => {
            let n = bits
                .uint_at(header, SIZE_FIELD_BITS)
                .ok_or(FramingError::TruncatedFrame {
                    needed: header + SIZE_FIELD_BITS as usize,
                    got: bits.len(),
                })? as usize;
            if n == 0 {
                return Err(FramingError::PayloadSize { scheme, got: n });
            }
            (header + SIZE_FIELD_BITS as usize, n)
        }
    };

    let total = payload_start + payload_len + CRC_BITS as usize;
    if bits.len() < total {
        return Err(FramingError::TruncatedFrame {
            needed: total,
            got: bits.len(),
        });
    }

    let payload = bits.slice(payload_start, payload_len).unwrap();
    let received = bits.uint_at(payload_start + payload_len, CRC_BITS).unwrap() as u16;
    let computed = crc16(&payload);
    if received != computed {
        return Err(FramingError::CrcMismatch { received, computed });
    }
    Ok(ParsedFrame {
        payload,
        consumed: total,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Independent CRC reference: plain GF(2) long division of the augmented
    /// message M(x)·x^16 + INIT(x)·x^len, with no shift register involved.
    fn crc16_longdiv(payload: &BitStream) -> u16 {
        let mut a: Vec<u8> = payload.iter().map(u8::from).collect();
        a.extend_from_slice(&[0; 16]);
        for (j, slot) in a.iter_mut().take(16).enumerate() {
            *slot ^= ((CRC_INIT >> (15 - j)) & 1) as u8;
        }
        let generator: [u8; 17] = {
            let g = 0x11021u32;
            let mut bits = [0u8; 17];
            for (k, slot) in bits.iter_mut().enumerate() {
                *slot = ((g >> (16 - k)) & 1) as u8;
            }
            bits
        };
        for i in 0..payload.len() {
            if a[i] == 1 {
                for (k, &g) in generator.iter().enumerate() {
                    a[i + k] ^= g;
                }
            }
        }
        a[a.len() - 16..]
            .iter()
            .fold(0u16, |acc, &b| (acc << 1) | b as u16)
    }

    fn alternating(len: usize) -> BitStream {
        (0..len).map(|i| i % 2 == 0).collect()
    }

    #[test]
    fn crc_of_empty_payload() {
        let empty = BitStream::new();
        assert_eq!(crc16_longdiv(&empty), 0xFFFF);
        assert_eq!(crc16(&empty), 0xFFFF);
    }

    #[test]
    fn crc_of_256_zero_bits() {
        let zeros: BitStream = std::iter::repeat_n(false, 256).collect();
        assert_eq!(crc16_longdiv(&zeros), 0xF14C);
        assert_eq!(crc16(&zeros), 0xF14C);
    }

    #[test]
    fn crc_check_value() {
        // Standard CRC-16/CCITT-FALSE check input "123456789" -> 0x29B1.
        let bits = BitStream::from_bytes(b"123456789");
        assert_eq!(bits.len(), 72);
        assert_eq!(crc16_longdiv(&bits), 0x29B1);
        assert_eq!(crc16(&bits), 0x29B1);
    }

    #[test]
    fn crc_routes_agree_on_random_ragged_payloads() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for len in [1usize, 7, 15, 16, 17, 64, 255, 1023] {
            let p = BitStream::random(len, &mut rng);
            assert_eq!(crc16(&p), crc16_longdiv(&p), "len={len}");
        }
    }

    #[test]
    fn fixed_frame_layout() {
        let payload = alternating(256);
        let frame = encode_frame(&payload, FramingScheme::Fixed).unwrap();
        assert_eq!(frame.len(), 280);
        assert_eq!(frame.slice(0, 8).unwrap().to_binary_string(), "10101010");
        // Trailing 16 bits equal the long-division reference CRC of the payload.
        assert_eq!(crc16_longdiv(&payload), 0xF98B);
        assert_eq!(frame.uint_at(264, 16).unwrap(), 0xF98B);
    }

    #[test]
    fn variable_frame_layout() {
        let payload: BitStream = std::iter::repeat_n(false, 8).collect();
        let frame = encode_frame(&payload, FramingScheme::Variable).unwrap();
        assert_eq!(frame.len(), 48);
        assert_eq!(frame.uint_at(8, 16).unwrap(), 8);
    }

    #[test]
    fn encode_rejects_bad_payload_sizes() {
        let short = alternating(255);
        assert!(matches!(
            encode_frame(&short, FramingScheme::Fixed),
            Err(FramingError::PayloadSize { .. })
        ));
        let empty = BitStream::new();
        assert!(matches!(
            encode_frame(&empty, FramingScheme::Variable),
            Err(FramingError::PayloadSize { .. })
        ));
        let huge = alternating(65536);
        assert!(matches!(
            encode_frame(&huge, FramingScheme::Variable),
            Err(FramingError::PayloadSize { .. })
        ));
    }

    #[test]
    fn roundtrip_random_payloads() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = BitStream::random(256, &mut rng);
            let parsed = parse_frame(
                &encode_frame(&p, FramingScheme::Fixed).unwrap(),
                FramingScheme::Fixed,
            )
            .unwrap();
            assert_eq!(parsed.payload, p);
            assert_eq!(parsed.consumed, 280);

            let n = 1 + (rng.random::<u32>() % 512) as usize;
            let p = BitStream::random(n, &mut rng);
            let frame = encode_frame(&p, FramingScheme::Variable).unwrap();
            assert_eq!(frame.len(), 40 + n);
            let parsed = parse_frame(&frame, FramingScheme::Variable).unwrap();
            assert_eq!(parsed.payload, p);
            assert_eq!(parsed.consumed, 40 + n);
        }
    }

    #[test]
    fn every_single_payload_bit_flip_is_caught() {
        let payload = alternating(256);
        let frame = encode_frame(&payload, FramingScheme::Fixed).unwrap();
        for i in 8..264 {
            let mut bad = frame.clone();
            bad.flip(i);
            assert!(matches!(
                parse_frame(&bad, FramingScheme::Fixed),
                Err(FramingError::CrcMismatch { .. })
            ));
        }
    }

    #[test]
    fn preamble_flip_is_caught() {
        let payload = alternating(256);
        let mut frame = encode_frame(&payload, FramingScheme::Fixed).unwrap();
        frame.flip(0); // 10101010 -> 00101010
        assert_eq!(
            parse_frame(&frame, FramingScheme::Fixed),
            Err(FramingError::PreambleMismatch)
        );
    }

    #[test]
    fn truncated_frame_is_caught() {
        let payload = alternating(256);
        let frame = encode_frame(&payload, FramingScheme::Fixed).unwrap();
        let cut = frame.slice(0, 100).unwrap();
        assert!(matches!(
            parse_frame(&cut, FramingScheme::Fixed),
            Err(FramingError::TruncatedFrame { .. })
        ));
    }

    #[test]
    fn parse_reports_consumed_for_frame_sequences() {
        let a = alternating(256);
        let b: BitStream = std::iter::repeat_n(true, 256).collect();
        let mut seq = encode_frame(&a, FramingScheme::Fixed).unwrap();
        seq.extend(&encode_frame(&b, FramingScheme::Fixed).unwrap());
        let first = parse_frame(&seq, FramingScheme::Fixed).unwrap();
        assert_eq!(first.payload, a);
        let rest = seq
            .slice(first.consumed, seq.len() - first.consumed)
            .unwrap();
        let second = parse_frame(&rest, FramingScheme::Fixed).unwrap();
        assert_eq!(second.payload, b);
    }
}
