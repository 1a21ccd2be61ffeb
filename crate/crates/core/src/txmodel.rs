//! Transmitter hardware path: read-size calibration, read/sleep operation
//! schedules, and synthesis of the emitted light waveform.

use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linecode::{Level, SymbolTimeline};

/// Granularity of device reads. Consecutive reads are spaced at least one
/// block apart so the second read cannot be served from cache.
pub const BLOCK_SIZE: u64 = 4096;

/// One nanosecond, well under any sample period and well over the rounding
/// drift of accumulated segment boundaries.
const BOUNDARY_EPS: f64 = 1e-9;

/// Indicator LED color, selecting a measured amplitude and pulse-width floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LedColor {
    Red,
    Blue,
    White,
}

impl LedColor {
    /// Measured signal amplitude at the reference distance, in volts.
    pub fn amplitude_volts(self) -> f64 {
        match self {
            LedColor::Red => 5.3,
            LedColor::Blue => 0.71,
            LedColor::White => 0.18,
        }
    }

    /// Shortest achievable LED-ON pulse, in seconds.
    pub fn min_pulse_seconds(self) -> f64 {
        match self {
            LedColor::Red => 0.18e-3,
            LedColor::Blue => 0.12e-3,
            LedColor::White => 0.10e-3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LedColor::Red => "red",
            LedColor::Blue => "blue",
            LedColor::White => "white",
        }
    }
}

impl FromStr for LedColor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "red" => Ok(LedColor::Red),
            "blue" => Ok(LedColor::Blue),
            "white" => Ok(LedColor::White),
            other => Err(format!("unknown LED color `{other}`")),
        }
    }
}

/// One measured calibration point: reading `read_size` bytes lights the LED
/// for `on_time` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalPoint {
    pub read_size: u64,
    pub on_time: f64,
}

/// A requested read size or on-time falls outside the calibrated range.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationRangeError {
    #[error("read size {size} B above calibration maximum {max} B")]
    SizeAboveTable { size: u64, max: u64 },
    #[error("on-time {seconds} s outside achievable range [{min} s, {max} s]")]
    TimeOutOfRange { seconds: f64, min: f64, max: f64 },
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration table is empty")]
    Empty,
    #[error("calibration points must be strictly increasing in both size and time: ({0} B, {1} s) then ({2} B, {3} s)")]
    NotMonotone(u64, f64, u64, f64),
    #[error("calibration point at {0} B lies below the {BLOCK_SIZE} B block floor")]
    BelowBlockFloor(u64),
    #[error("pulse floor {floor} s must lie below the first interior point {first} s")]
    FloorAboveTable { floor: f64, first: f64 },
    #[error("on-time {0} s is not positive and finite")]
    BadTime(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Map from read size to LED-ON time for one machine/LED, plus that LED's
/// amplitude and pulse-width floor.
///
/// Any read of `BLOCK_SIZE` or less produces the floor pulse, so the table's
/// first anchor is always `(BLOCK_SIZE, min_pulse)`. Between anchors the map
/// is interpolated linearly in log-log space; the size/time relation spans
/// four orders of magnitude and is close to a power law.
#[derive(Debug, Clone, PartialEq)]
pub struct LedCalibration {
    anchors: Vec<CalPoint>,
    pub color: LedColor,
    pub amplitude: f64,
    pub min_pulse: f64,
}

/// Default measured calibration, read sizes from 256 KB to 60 MB.
const DEFAULT_POINTS: [(u64, f64); 9] = [
    (256_000, 1.2e-3),
    (512_000, 2.0e-3),
    (600_000, 3.2e-3),
    (800_000, 3.6e-3),
    (1_280_000, 5.0e-3),
    (5_120_000, 32.0e-3),
    (8_000_000, 60.0e-3),
    (15_120_000, 250.0e-3),
    (60_000_000, 630.0e-3),
];

impl LedCalibration {
    /// Built-in calibration for the given LED color.
    pub fn for_color(color: LedColor) -> Self {
        let points = DEFAULT_POINTS
            .iter()
            .map(|&(read_size, on_time)| CalPoint { read_size, on_time })
            .collect();
        Self::from_points(points, color).expect("built-in table is valid")
    }

    /// Builds a calibration from measured points, using the color profile for
    /// amplitude and pulse floor. A leading point at or below `BLOCK_SIZE`
    /// overrides the color's floor; all other points must lie above it.
    pub fn from_points(points: Vec<CalPoint>, color: LedColor) -> Result<Self, CalibrationError> {
        if points.is_empty() {
            return Err(CalibrationError::Empty);
        }
        let mut min_pulse = color.min_pulse_seconds();
        let mut interior = &points[..];
        if points[0].read_size <= BLOCK_SIZE {
            min_pulse = points[0].on_time;
            interior = &points[1..];
        }
        if !(min_pulse.is_finite() && min_pulse > 0.0) {
            return Err(CalibrationError::BadTime(min_pulse));
        }

        let mut anchors = Vec::with_capacity(interior.len() + 1);
        anchors.push(CalPoint {
            read_size: BLOCK_SIZE,
            on_time: min_pulse,
        });
        for &p in interior {
            if !(p.on_time.is_finite() && p.on_time > 0.0) {
                return Err(CalibrationError::BadTime(p.on_time));
            }
            if p.read_size <= BLOCK_SIZE {
                return Err(CalibrationError::BelowBlockFloor(p.read_size));
            }
            let last = *anchors.last().unwrap();
            if p.read_size <= last.read_size || p.on_time <= last.on_time {
                return Err(CalibrationError::NotMonotone(
                    last.read_size,
                    last.on_time,
                    p.read_size,
                    p.on_time,
                ));
            }
            anchors.push(p);
        }
        if anchors.len() < 2 {
            return Err(CalibrationError::FloorAboveTable {
                floor: min_pulse,
                first: f64::NAN,
            });
        }
        Ok(Self {
            anchors,
            color,
            amplitude: color.amplitude_volts(),
            min_pulse,
        })
    }

    /// Reads a `read_size_bytes,on_time_seconds` CSV table.
    pub fn from_csv<R: io::Read>(reader: R, color: LedColor) -> Result<Self, CalibrationError> {
        #[derive(Deserialize)]
        struct Row {
            read_size_bytes: u64,
            on_time_seconds: f64,
        }
        let mut points = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = row?;
            points.push(CalPoint {
                read_size: row.read_size_bytes,
                on_time: row.on_time_seconds,
            });
        }
        Self::from_points(points, color)
    }

    /// Writes the table in the same CSV format `from_csv` accepts.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), CalibrationError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["read_size_bytes", "on_time_seconds"])?;
        for p in &self.anchors {
            w.write_record([p.read_size.to_string(), p.on_time.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn anchors(&self) -> &[CalPoint] {
        &self.anchors
    }

    /// Longest calibrated on-time.
    pub fn max_on_time(&self) -> f64 {
        self.anchors.last().unwrap().on_time
    }

    /// Largest calibrated read size.
    pub fn max_read_size(&self) -> u64 {
        self.anchors.last().unwrap().read_size
    }

    /// LED-ON time produced by reading `size` bytes.
    ///
    /// Exact at anchor points, log-log interpolated between them; any size at
    /// or below `BLOCK_SIZE` yields the floor pulse.
    pub fn t_on_of(&self, size: u64) -> Result<f64, CalibrationRangeError> {
        if size <= BLOCK_SIZE {
            return Ok(self.min_pulse);
        }
        let last = self.anchors.last().unwrap();
        if size > last.read_size {
            return Err(CalibrationRangeError::SizeAboveTable {
                size,
                max: last.read_size,
            });
        }
        let hi = self.anchors.partition_point(|p| p.read_size < size);
        let b = self.anchors[hi];
        if b.read_size == size {
            return Ok(b.on_time);
        }
        let a = self.anchors[hi - 1];
        let f = ((size as f64).ln() - (a.read_size as f64).ln())
            / ((b.read_size as f64).ln() - (a.read_size as f64).ln());
        Ok((a.on_time.ln() + f * (b.on_time.ln() - a.on_time.ln())).exp())
    }

    /// The read size whose calibrated on-time best matches `t` (ties go to
    /// the smaller size). Inverts `t_on_of` under the same interpolation.
    pub fn inverse_s_of(&self, t: f64) -> Result<u64, CalibrationRangeError> {
        let max = self.max_on_time();
        if !t.is_finite() || t < self.min_pulse * (1.0 - 1e-9) || t > max * (1.0 + 1e-9) {
            return Err(CalibrationRangeError::TimeOutOfRange {
                seconds: t,
                min: self.min_pulse,
                max,
            });
        }
        if t <= self.min_pulse {
            return Ok(BLOCK_SIZE);
        }
        if t >= max {
            return Ok(self.max_read_size());
        }
        let hi = self.anchors.partition_point(|p| p.on_time < t);
        let b = self.anchors[hi];
        if b.on_time == t {
            return Ok(b.read_size);
        }
        let a = self.anchors[hi - 1];
        let f = (t.ln() - a.on_time.ln()) / (b.on_time.ln() - a.on_time.ln());
        let s = ((a.read_size as f64).ln()
            + f * ((b.read_size as f64).ln() - (a.read_size as f64).ln()))
        .exp();

        // Round to whole bytes by forward error; prefer the smaller size on ties.
        let lo_s = (s.floor() as u64).clamp(a.read_size, b.read_size);
        let hi_s = (s.ceil() as u64).clamp(a.read_size, b.read_size);
        let err = |size: u64| (self.t_on_of(size).unwrap() - t).abs();
        if err(lo_s) <= err(hi_s) {
            Ok(lo_s)
        } else {
            Ok(hi_s)
        }
    }
}

/// One transmitter operation: a device read (lights the LED) or a sleep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Read { size: u64, offset: u64 },
    Sleep { duration: f64 },
}

/// An ordered read/sleep program realizing a symbol timeline.
///
/// Read offsets (block indices) increase by at least the span of the previous
/// read, so no block is ever touched twice and every read hits the device.
/// Consecutive sleeps are merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpSchedule {
    pub ops: Vec<Op>,
}

impl OpSchedule {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Compiles a symbol timeline into a read/sleep schedule.
///
/// ON segments become reads sized by the inverse calibration; OFF segments
/// become sleeps, merged when adjacent.
pub fn schedule_from_timeline(
    timeline: &SymbolTimeline,
    calib: &LedCalibration,
) -> Result<OpSchedule, CalibrationRangeError> {
    let mut ops: Vec<Op> = Vec::with_capacity(timeline.segments.len());
    let mut next_block = 0u64;
    for seg in &timeline.segments {
        match seg.level {
            Level::On => {
                let size = calib.inverse_s_of(seg.duration)?;
                ops.push(Op::Read {
                    size,
                    offset: next_block,
                });
                next_block += size.max(BLOCK_SIZE).div_ceil(BLOCK_SIZE);
            }
            Level::Off => match ops.last_mut() {
                Some(Op::Sleep { duration }) => *duration += seg.duration,
                _ => ops.push(Op::Sleep {
                    duration: seg.duration,
                }),
            },
        }
    }
    Ok(OpSchedule { ops })
}

/// A piecewise-constant light intensity segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub intensity: f64,
}

impl WaveSegment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Piecewise-constant light intensity over `[0, duration]`, zero outside.
/// Segments are contiguous, non-overlapping, and have distinct neighbor
/// intensities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Waveform {
    segments: Vec<WaveSegment>,
    duration: f64,
}

impl Waveform {
    /// Builds a waveform from `(intensity, duration)` runs, dropping empty
    /// runs and merging equal-intensity neighbors.
    pub fn from_runs<I: IntoIterator<Item = (f64, f64)>>(runs: I) -> Self {
        let mut segments: Vec<WaveSegment> = Vec::new();
        let mut t = 0.0f64;
        for (intensity, duration) in runs {
            if duration <= 0.0 {
                continue;
            }
            let t_end = t + duration;
            match segments.last_mut() {
                Some(last) if last.intensity == intensity => last.t_end = t_end,
                _ => segments.push(WaveSegment {
                    t_start: t,
                    t_end,
                    intensity,
                }),
            }
            t = t_end;
        }
        Self {
            segments,
            duration: t,
        }
    }

    pub fn segments(&self) -> &[WaveSegment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Intensity at time `t`; zero outside `[0, duration)`. Segments are
    /// half-open on the right: a sample taken exactly at a boundary reads the
    /// segment that starts there. `BOUNDARY_EPS` keeps that rule stable when
    /// boundary sums accumulate rounding.
    pub fn value_at(&self, t: f64) -> f64 {
        let t = t + BOUNDARY_EPS;
        if t < 0.0 || t >= self.duration {
            return 0.0;
        }
        let idx = self.segments.partition_point(|s| s.t_end <= t);
        match self.segments.get(idx) {
            Some(s) if s.t_start <= t => s.intensity,
            _ => 0.0,
        }
    }

    /// Integral of the intensity over `[t0, t1]`, treating the waveform as
    /// zero outside its span.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let start = self.segments.partition_point(|s| s.t_end <= t0);
        for s in &self.segments[start..] {
            if s.t_start >= t1 {
                break;
            }
            let lo = s.t_start.max(t0);
            let hi = s.t_end.min(t1);
            if hi > lo {
                acc += s.intensity * (hi - lo);
            }
        }
        acc
    }

    /// Mean intensity over `[t0, t1]`.
    pub fn mean_over(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        self.integral(t0, t1) / (t1 - t0)
    }

    /// Total time spent strictly above `threshold`.
    pub fn time_above(&self, threshold: f64) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.intensity > threshold)
            .map(WaveSegment::duration)
            .sum()
    }

    /// Largest segment intensity, zero for an empty waveform.
    pub fn peak(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.intensity)
            .fold(0.0, f64::max)
    }

    /// Applies `f` to every segment intensity.
    pub fn map_intensity<F: Fn(f64) -> f64>(&self, f: F) -> Waveform {
        Waveform::from_runs(self.segments.iter().map(|s| (f(s.intensity), s.duration())))
    }

    /// Pointwise maximum of two waveforms. The result spans the longer of the
    /// two; one LED cannot exceed its ON brightness, so simultaneous sources
    /// saturate rather than add.
    pub fn combine_max(a: &Waveform, b: &Waveform) -> Waveform {
        let mut cuts: Vec<f64> = Vec::with_capacity(a.segments.len() + b.segments.len() + 2);
        cuts.push(0.0);
        for s in a.segments.iter().chain(b.segments.iter()) {
            cuts.push(s.t_start);
            cuts.push(s.t_end);
        }
        cuts.push(a.duration.max(b.duration));
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        Waveform::from_runs(cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (a.value_at(mid).max(b.value_at(mid)), w[1] - w[0])
        }))
    }
}

/// Renders a schedule into the light it emits: each read glows at the LED
/// amplitude for its calibrated on-time, each sleep is dark.
pub fn waveform_from_schedule(
    schedule: &OpSchedule,
    calib: &LedCalibration,
) -> Result<Waveform, CalibrationRangeError> {
    let mut runs = Vec::with_capacity(schedule.ops.len());
    for op in &schedule.ops {
        match *op {
            Op::Read { size, .. } => runs.push((calib.amplitude, calib.t_on_of(size)?)),
            Op::Sleep { duration } => runs.push((0.0, duration)),
        }
    }
    Ok(Waveform::from_runs(runs))
}

/// Timeline straight to light: schedule compilation plus waveform synthesis.
pub fn waveform_from_timeline(
    timeline: &SymbolTimeline,
    calib: &LedCalibration,
) -> Result<Waveform, CalibrationRangeError> {
    waveform_from_schedule(&schedule_from_timeline(timeline, calib)?, calib)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::bits::BitStream;
    use crate::linecode::{modulate, ModulationScheme};

    fn red() -> LedCalibration {
        LedCalibration::for_color(LedColor::Red)
    }

    #[test]
    fn table_points_are_exact() {
        let c = red();
        assert_eq!(c.t_on_of(512_000).unwrap(), 2.0e-3);
        assert_eq!(c.t_on_of(60_000_000).unwrap(), 630.0e-3);
        assert_eq!(c.t_on_of(4096).unwrap(), 0.18e-3);
        assert_eq!(c.t_on_of(1).unwrap(), 0.18e-3);
        assert_eq!(c.t_on_of(256_000).unwrap(), 1.2e-3);
        assert_eq!(c.t_on_of(15_120_000).unwrap(), 250.0e-3);
    }

    #[test]
    fn above_table_maximum_errors() {
        assert!(matches!(
            red().t_on_of(60_000_001),
            Err(CalibrationRangeError::SizeAboveTable { .. })
        ));
    }

    #[test]
    fn interpolation_is_strictly_monotone() {
        let c = red();
        let mut prev = 0.0;
        let mut s = BLOCK_SIZE;
        while s <= 60_000_000 {
            let t = c.t_on_of(s).unwrap();
            if s > BLOCK_SIZE {
                assert!(t > prev, "not monotone at {s}: {t} <= {prev}");
            }
            prev = t;
            s += 97_531;
        }
    }

    #[test]
    fn inverse_recovers_table_sizes_exactly() {
        let c = red();
        for p in c.anchors() {
            assert_eq!(c.inverse_s_of(p.on_time).unwrap(), p.read_size, "at {p:?}");
        }
        assert_eq!(c.inverse_s_of(2.0e-3).unwrap(), 512_000);
        assert_eq!(c.inverse_s_of(c.min_pulse).unwrap(), BLOCK_SIZE);
    }

    #[test]
    fn inverse_interpolates_between_rows() {
        let c = red();
        let s = c.inverse_s_of(1.6e-3).unwrap();
        assert!(s > 256_000 && s < 512_000, "s = {s}");
        let forward = c.t_on_of(s).unwrap();
        assert!(
            (forward - 1.6e-3).abs() / 1.6e-3 < 0.05,
            "forward {forward} too far from 1.6 ms"
        );
    }

    #[test]
    fn inverse_rejects_out_of_range_times() {
        let c = red();
        assert!(c.inverse_s_of(0.05e-3).is_err());
        assert!(c.inverse_s_of(0.7).is_err());
    }

    #[test]
    fn color_profiles() {
        assert_eq!(LedCalibration::for_color(LedColor::Blue).min_pulse, 0.12e-3);
        assert_eq!(
            LedCalibration::for_color(LedColor::White).min_pulse,
            0.10e-3
        );
        assert_eq!(LedCalibration::for_color(LedColor::Blue).amplitude, 0.71);
        assert_eq!("RED".parse::<LedColor>().unwrap(), LedColor::Red);
        assert!("green".parse::<LedColor>().is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let c = red();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("read_size_bytes,on_time_seconds\n"));
        let back = LedCalibration::from_csv(&buf[..], LedColor::Red).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_rejects_non_monotone_tables() {
        let text = "read_size_bytes,on_time_seconds\n512000,0.002\n256000,0.0012\n";
        assert!(matches!(
            LedCalibration::from_csv(text.as_bytes(), LedColor::Red),
            Err(CalibrationError::NotMonotone(..))
        ));
    }

    #[test]
    fn schedule_maps_on_to_read_and_off_to_sleep() {
        let tl = SymbolTimeline::from_segments([(Level::On, 2.0e-3), (Level::Off, 2.0e-3)]);
        let sch = schedule_from_timeline(&tl, &red()).unwrap();
        assert_eq!(
            sch.ops,
            vec![
                Op::Read {
                    size: 512_000,
                    offset: 0
                },
                Op::Sleep { duration: 2.0e-3 }
            ]
        );
    }

    #[test]
    fn consecutive_sleeps_merge() {
        let tl = SymbolTimeline::from_segments([(Level::Off, 1.0e-3), (Level::Off, 1.0e-3)]);
        let sch = schedule_from_timeline(&tl, &red()).unwrap();
        assert_eq!(sch.ops, vec![Op::Sleep { duration: 2.0e-3 }]);
    }

    #[test]
    fn read_offsets_strictly_increase_over_random_bitstreams() {
        let calib = red();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let bits = BitStream::random(64, &mut rng);
            if bits.iter().all(|b| !b) {
                continue;
            }
            let tl = modulate(&bits, &ModulationScheme::Ook { slot: 2.0e-3 }, &calib).unwrap();
            let sch = schedule_from_timeline(&tl, &calib).unwrap();
            let mut last_end: Option<u64> = None;
            for op in &sch.ops {
                if let Op::Read { size, offset } = *op {
                    if let Some(end) = last_end {
                        assert!(offset >= end, "offset {offset} overlaps previous end {end}");
                    }
                    last_end = Some(offset + size.max(BLOCK_SIZE).div_ceil(BLOCK_SIZE));
                }
            }
        }
    }

    #[test]
    fn waveform_square_wave_per_color() {
        for (color, width, amp) in [
            (LedColor::Red, 0.18e-3, 5.3),
            (LedColor::Blue, 0.12e-3, 0.71),
            (LedColor::White, 0.10e-3, 0.18),
        ] {
            let calib = LedCalibration::for_color(color);
            let mut ops = Vec::new();
            for _ in 0..4 {
                ops.push(Op::Read {
                    size: 4096,
                    offset: 0,
                });
                ops.push(Op::Sleep { duration: width });
            }
            let w = waveform_from_schedule(&OpSchedule { ops }, &calib).unwrap();
            assert_eq!(w.segments().len(), 8);
            for (i, s) in w.segments().iter().enumerate() {
                let want = if i % 2 == 0 { amp } else { 0.0 };
                assert_eq!(s.intensity, want);
                assert!((s.duration() - width).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_schedule_gives_zero_duration_waveform() {
        let w = waveform_from_schedule(&OpSchedule::default(), &red()).unwrap();
        assert!(w.is_empty());
        assert_eq!(w.duration(), 0.0);
    }

    #[test]
    fn waveform_duration_equals_schedule_time() {
        let calib = red();
        let tl = SymbolTimeline::from_segments([
            (Level::On, 2.0e-3),
            (Level::Off, 1.0e-3),
            (Level::On, 1.2e-3),
            (Level::Off, 3.0e-3),
        ]);
        let sch = schedule_from_timeline(&tl, &calib).unwrap();
        let w = waveform_from_schedule(&sch, &calib).unwrap();
        let expect: f64 = sch
            .ops
            .iter()
            .map(|op| match *op {
                Op::Read { size, .. } => calib.t_on_of(size).unwrap(),
                Op::Sleep { duration } => duration,
            })
            .sum();
        assert!((w.duration() - expect).abs() < 1e-12);
    }

    #[test]
    fn value_at_and_integral() {
        let w = Waveform::from_runs([(5.0, 1.0), (0.0, 1.0), (5.0, 2.0)]);
        assert_eq!(w.value_at(0.5), 5.0);
        assert_eq!(w.value_at(1.5), 0.0);
        assert_eq!(w.value_at(3.9), 5.0);
        assert_eq!(w.value_at(-0.1), 0.0);
        assert_eq!(w.value_at(4.1), 0.0);
        assert!((w.integral(0.0, 4.0) - 15.0).abs() < 1e-12);
        assert!((w.mean_over(0.0, 2.0) - 2.5).abs() < 1e-12);
        assert!((w.time_above(1.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn combine_max_saturates() {
        let a = Waveform::from_runs([(5.0, 1.0), (0.0, 2.0)]);
        let b = Waveform::from_runs([(0.0, 0.5), (3.0, 1.0), (0.0, 2.5)]);
        let m = Waveform::combine_max(&a, &b);
        assert_eq!(m.value_at(0.25), 5.0);
        assert_eq!(m.value_at(0.75), 5.0);
        assert_eq!(m.value_at(1.25), 3.0);
        assert_eq!(m.value_at(2.0), 0.0);
        assert_eq!(m.duration(), 4.0);
    }

    #[test]
    fn adjacent_equal_intensities_merge_in_synthesis() {
        let w = Waveform::from_runs([(5.0, 1.0), (5.0, 1.0), (0.0, 1.0)]);
        assert_eq!(w.segments().len(), 2);
        assert_eq!(w.segments()[0].t_end, 2.0);
    }
}
