//! Line coding: mapping frame bits onto LED on/off symbol timelines and back.

use thiserror::Error;

use crate::bits::BitStream;
use crate::txmodel::{CalibrationRangeError, LedCalibration};

/// Idle OFF time inserted between frames, in bit periods, so a receiver can
/// separate consecutive frames.
pub const INTERFRAME_GAP_BITS: f64 = 4.0;

/// LED state during one timeline segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Off,
    On,
}

/// One run of the LED held at a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub level: Level,
    pub duration: f64,
}

/// The line-coded physical signal: ordered `(level, duration)` runs.
///
/// The encoder emits one segment per slot even when neighbors share a level
/// (OOK bits `11`), keeping slot boundaries recoverable; merging happens at
/// waveform synthesis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTimeline {
    pub segments: Vec<Segment>,
}

impl SymbolTimeline {
    pub fn from_segments<I: IntoIterator<Item = (Level, f64)>>(iter: I) -> Self {
        Self {
            segments: iter
                .into_iter()
                .map(|(level, duration)| Segment { level, duration })
                .collect(),
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn level_duration(&self, level: Level) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.level == level)
            .map(|s| s.duration)
            .sum()
    }

    pub fn push(&mut self, level: Level, duration: f64) {
        self.segments.push(Segment { level, duration });
    }

    pub fn extend(&mut self, other: &SymbolTimeline) {
        self.segments.extend_from_slice(&other.segments);
    }
}

/// How logical bits become LED levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModulationScheme {
    /// Light for the slot means 1, dark means 0; equal slot durations.
    Ook { slot: f64 },
    /// Each bit spans two opposite-level slots: 1 is ON·OFF, 0 is OFF·ON.
    Manchester { slot: f64 },
    /// Both values light the LED; the value is carried by the pulse width.
    /// 1 reads `s1` bytes, 0 reads `s0` bytes, each followed by a dark guard.
    Bfsk { s1: u64, s0: u64, guard: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinecodeError {
    #[error("bit stream is empty")]
    EmptyBitStream,
    #[error("invalid modulation parameters: {0}")]
    BadScheme(String),
    #[error("invalid symbol at slot {at}")]
    InvalidSymbol { at: usize },
    #[error(transparent)]
    Calibration(#[from] CalibrationRangeError),
}

impl ModulationScheme {
    pub fn validate(&self) -> Result<(), LinecodeError> {
        match *self {
            ModulationScheme::Ook { slot } | ModulationScheme::Manchester { slot } => {
                if !(slot.is_finite() && slot > 0.0) {
                    return Err(LinecodeError::BadScheme(format!("slot {slot} s")));
                }
            }
            ModulationScheme::Bfsk { s1, s0, guard } => {
                if s1 == s0 {
                    return Err(LinecodeError::BadScheme(
                        "s1 and s0 read sizes must differ".into(),
                    ));
                }
                if !(guard.is_finite() && guard > 0.0) {
                    return Err(LinecodeError::BadScheme(format!("guard {guard} s")));
                }
            }
        }
        Ok(())
    }

    /// Calibrated pulse widths `(t1, t0)` for the two B-FSK read sizes.
    pub fn bfsk_times(&self, calib: &LedCalibration) -> Result<(f64, f64), LinecodeError> {
        match *self {
            ModulationScheme::Bfsk { s1, s0, .. } => Ok((calib.t_on_of(s1)?, calib.t_on_of(s0)?)),
            _ => Err(LinecodeError::BadScheme("not a B-FSK scheme".into())),
        }
    }

    /// Worst-case time to send one logical bit.
    pub fn bit_duration(&self, calib: &LedCalibration) -> Result<f64, LinecodeError> {
        match *self {
            ModulationScheme::Ook { slot } => Ok(slot),
            ModulationScheme::Manchester { slot } => Ok(2.0 * slot),
            ModulationScheme::Bfsk { guard, .. } => {
                let (t1, t0) = self.bfsk_times(calib)?;
                Ok(t1.max(t0) + guard)
            }
        }
    }

    /// Shortest LED run the scheme can produce; receivers must resolve this.
    pub fn min_element_duration(&self, calib: &LedCalibration) -> Result<f64, LinecodeError> {
        match *self {
            ModulationScheme::Ook { slot } | ModulationScheme::Manchester { slot } => Ok(slot),
            ModulationScheme::Bfsk { guard, .. } => {
                let (t1, t0) = self.bfsk_times(calib)?;
                Ok(t1.min(t0).min(guard))
            }
        }
    }
}

/// Maps bits onto a symbol timeline.
pub fn modulate(
    bits: &BitStream,
    scheme: &ModulationScheme,
    calib: &LedCalibration,
) -> Result<SymbolTimeline, LinecodeError> {
    scheme.validate()?;
    if bits.is_empty() {
        return Err(LinecodeError::EmptyBitStream);
    }
    let mut tl = SymbolTimeline::default();
    match *scheme {
        ModulationScheme::Ook { slot } => {
            for bit in bits.iter() {
                tl.push(if bit { Level::On } else { Level::Off }, slot);
            }
        }
        ModulationScheme::Manchester { slot } => {
            for bit in bits.iter() {
                if bit {
                    tl.push(Level::On, slot);
                    tl.push(Level::Off, slot);
                } else {
                    tl.push(Level::Off, slot);
                    tl.push(Level::On, slot);
                }
            }
        }
        ModulationScheme::Bfsk { guard, .. } => {
            let (t1, t0) = scheme.bfsk_times(calib)?;
            for bit in bits.iter() {
                tl.push(Level::On, if bit { t1 } else { t0 });
                tl.push(Level::Off, guard);
            }
        }
    }
    Ok(tl)
}

/// Modulates a frame sequence, inserting an OFF gap of
/// [`INTERFRAME_GAP_BITS`] bit periods between frames.
pub fn modulate_frames(
    frames: &[BitStream],
    scheme: &ModulationScheme,
    calib: &LedCalibration,
) -> Result<SymbolTimeline, LinecodeError> {
    if frames.is_empty() {
        return Err(LinecodeError::EmptyBitStream);
    }
    let gap = INTERFRAME_GAP_BITS * scheme.bit_duration(calib)?;
    let mut tl = SymbolTimeline::default();
    for (i, frame) in frames.iter().enumerate() {
        if i > 0 {
            tl.push(Level::Off, gap);
        }
        tl.extend(&modulate(frame, scheme, calib)?);
    }
    Ok(tl)
}

/// A receiver-side slot decision: the detected level and the slot's measured
/// duration (nominal for sliced schemes, run length for B-FSK).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub level: Level,
    pub duration: f64,
}

/// Exact inverse of [`modulate`]'s bit-to-slot mapping.
///
/// OOK reads one bit per slot; Manchester consumes slot pairs (`10` is 1,
/// `01` is 0, equal-level pairs are invalid); B-FSK classifies each ON slot
/// by whichever calibrated pulse width its duration is nearer to, skipping
/// the OFF guards.
pub fn symbols_to_bits(
    slots: &[Slot],
    scheme: &ModulationScheme,
    calib: &LedCalibration,
) -> Result<BitStream, LinecodeError> {
    match *scheme {
        ModulationScheme::Ook { .. } => Ok(slots.iter().map(|s| s.level == Level::On).collect()),
        ModulationScheme::Manchester { .. } => {
            if !slots.len().is_multiple_of(2) {
                return Err(LinecodeError::InvalidSymbol {
                    at: slots.len() - 1,
                });
            }
            let mut bits = BitStream::with_capacity(slots.len() / 2);
            for (i, pair) in slots.chunks(2).enumerate() {
                match (pair[0].level, pair[1].level) {
                    (Level::On, Level::Off) => bits.push(true),
                    (Level::Off, Level::On) => bits.push(false),
                    _ => return Err(LinecodeError::InvalidSymbol { at: 2 * i }),
                }
            }
            Ok(bits)
        }
        ModulationScheme::Bfsk { .. } => {
            let (t1, t0) = scheme.bfsk_times(calib)?;
            Ok(slots
                .iter()
                .filter(|s| s.level == Level::On)
                .map(|s| (s.duration - t1).abs() <= (s.duration - t0).abs())
                .collect())
        }
    }
}
