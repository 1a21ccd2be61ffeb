//! Bit recovery from sampled traces: adaptive thresholding, preamble-based
//! clock recovery and frame synchronization, slot slicing, frame parsing.

use thiserror::Error;

use crate::bits::BitStream;
use crate::framing::{
    parse_frame, FramingError, FramingScheme, CRC_BITS, PREAMBLE, SIZE_FIELD_BITS,
};
use crate::linecode::{
    modulate, symbols_to_bits, Level, ModulationScheme, Slot, INTERFRAME_GAP_BITS,
};
use crate::rxmodel::SampledTrace;
use crate::txmodel::LedCalibration;

/// Recovered timing and position of a frame in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncEstimate {
    /// Recovered seconds per logical bit.
    pub bit_period: f64,
    /// Sample index where the preamble begins.
    pub frame_start: usize,
    /// Decision threshold used, volts.
    pub threshold: f64,
    /// Normalized preamble correlation, 0..1.
    pub confidence: f64,
}

/// Link-level decode statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkReport {
    /// Sync hits that led to a parse attempt.
    pub frames_detected: usize,
    pub frames_ok: usize,
    pub frames_crc_failed: usize,
    /// Scan windows where no preamble was found.
    pub sync_failures: usize,
    /// Bit error rate against the supplied ground truth, when given.
    pub ber: Option<f64>,
    /// Accepted payload bits per second of trace.
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemodError {
    #[error("trace carries no separable signal levels")]
    DegenerateTrace,
    #[error("no frame synchronization found")]
    SyncNotFound,
}

const MIN_CONFIDENCE: f64 = 0.6;
const PERIOD_TOLERANCE: f64 = 0.2;
const PERIOD_GRID_POINTS: usize = 51;

/// Rounding dust tolerance for sample-index arithmetic, in samples. Slot
/// boundaries are sums of products like `k * slot * rate`; one part in a
/// million of a sample absorbs their accumulated error without ever moving a
/// genuinely fractional boundary.
const SAMPLE_EPS: f64 = 1e-6;

fn ceil_idx(x: f64) -> usize {
    (x - SAMPLE_EPS).ceil().max(0.0) as usize
}

/// Decision threshold between robust low and high levels: the midpoint of the
/// 5th and 95th sample percentiles.
///
/// Fails with [`DemodError::DegenerateTrace`] when the level spread is under
/// four times the estimated per-sample noise, i.e. no signal is present.
pub fn estimate_threshold(trace: &SampledTrace) -> Result<f64, DemodError> {
    if trace.len() < 2 {
        return Err(DemodError::DegenerateTrace);
    }
    let mut buf = trace.samples.clone();
    let n = buf.len();
    let mut pct = |q: f64| {
        let idx = (q * (n - 1) as f64).round() as usize;
        let (_, v, _) = buf.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).unwrap());
        *v
    };
    let low = pct(0.05);
    let high = pct(0.95);

    // Noise from successive differences: within-level diffs cluster at zero,
    // so a low percentile of |diff| tracks the noise floor and not the
    // modulation. The 10th percentile survives even Manchester at one sample
    // per slot, where only a quarter of the diffs stay within a level.
    // 0.1777 = sqrt(2) * quantile(|N(0,1)|, 0.10) makes it unbiased on
    // Gaussian noise.
    let mut diffs: Vec<f64> = trace
        .samples
        .windows(2)
        .map(|p| (p[1] - p[0]).abs())
        .collect();
    let k = ((diffs.len() - 1) as f64 * 0.10).round() as usize;
    let (_, p10, _) = diffs.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).unwrap());
    let noise = *p10 / 0.1777;

    if high - low < (4.0 * noise).max(1e-12) {
        return Err(DemodError::DegenerateTrace);
    }
    Ok(0.5 * (low + high))
}

/// Trace views shared by sync search and slicing: raw running sums for slot
/// means, thresholded running sums for correlation and edge finding.
struct DecodeContext<'a> {
    samples: &'a [f64],
    rate: f64,
    threshold: f64,
    raw_prefix: Vec<f64>,
    ones_prefix: Vec<u32>,
}

impl<'a> DecodeContext<'a> {
    fn new(trace: &'a SampledTrace, threshold: f64) -> Self {
        let n = trace.samples.len();
        let mut raw_prefix = Vec::with_capacity(n + 1);
        let mut ones_prefix = Vec::with_capacity(n + 1);
        raw_prefix.push(0.0);
        ones_prefix.push(0u32);
        let mut acc = 0.0;
        let mut ones = 0u32;
        for &v in &trace.samples {
            acc += v;
            ones += (v > threshold) as u32;
            raw_prefix.push(acc);
            ones_prefix.push(ones);
        }
        Self {
            samples: &trace.samples,
            rate: trace.rate,
            threshold,
            raw_prefix,
            ones_prefix,
        }
    }

    fn len(&self) -> usize {
        self.samples.len()
    }

    fn above(&self, k: usize) -> bool {
        self.samples[k] > self.threshold
    }

    /// Count of above-threshold samples in `[a, b)`.
    fn ones(&self, a: usize, b: usize) -> u32 {
        self.ones_prefix[b] - self.ones_prefix[a]
    }

    /// Mean of the raw samples in `[a, b)`.
    fn mean(&self, a: usize, b: usize) -> f64 {
        (self.raw_prefix[b] - self.raw_prefix[a]) / (b - a) as f64
    }
}

/// The preamble rendered as level runs, in nominal seconds.
struct PreambleTemplate {
    /// `(is_on, cumulative end time)` per run, from t = 0.
    runs: Vec<(bool, f64)>,
    nominal_span: f64,
    nominal_bit: f64,
}

fn preamble_template(
    scheme: &ModulationScheme,
    calib: &LedCalibration,
) -> Result<PreambleTemplate, DemodError> {
    let bits: BitStream = PREAMBLE.iter().copied().collect();
    let tl = modulate(&bits, scheme, calib).map_err(|_| DemodError::SyncNotFound)?;
    let mut runs = Vec::with_capacity(tl.segments.len());
    let mut t = 0.0;
    for seg in &tl.segments {
        t += seg.duration;
        runs.push((seg.level == Level::On, t));
    }
    let nominal_bit = scheme
        .bit_duration(calib)
        .map_err(|_| DemodError::SyncNotFound)?;
    Ok(PreambleTemplate {
        runs,
        nominal_span: t,
        nominal_bit,
    })
}

/// Fraction of samples matching the template at `(offset, scale)`.
///
/// Sample `k` holds the intensity at `k/rate`, so run `[t0, t1)` owns samples
/// `ceil(t0·rate) .. ceil(t1·rate)`; at the true alignment of a clean trace
/// every sample matches.
fn template_score(ctx: &DecodeContext, tpl: &PreambleTemplate, offset: usize, scale: f64) -> f64 {
    let mut matched = 0u32;
    let mut total = 0u32;
    let mut start = offset;
    for &(on, end_t) in &tpl.runs {
        let end = ceil_idx(offset as f64 + scale * end_t * ctx.rate).min(ctx.len());
        if end <= start {
            continue;
        }
        let n = (end - start) as u32;
        let ones = ctx.ones(start, end);
        matched += if on { ones } else { n - ones };
        total += n;
        start = end;
    }
    if total == 0 {
        return 0.0;
    }
    matched as f64 / total as f64
}

struct SyncHit {
    offset: usize,
    scale: f64,
    confidence: f64,
}

/// Best preamble alignment over `[from, to)` offsets, scanning a scale grid
/// around nominal and refining the winning scale parabolically.
fn search_sync(
    ctx: &DecodeContext,
    tpl: &PreambleTemplate,
    from: usize,
    to: usize,
) -> Option<SyncHit> {
    let step = 2.0 * PERIOD_TOLERANCE / (PERIOD_GRID_POINTS - 1) as f64;
    let scales: Vec<f64> = (0..PERIOD_GRID_POINTS)
        .map(|i| 1.0 - PERIOD_TOLERANCE + i as f64 * step)
        .collect();
    // Scan scales nearest nominal first so plateau ties settle on it.
    let mut order: Vec<usize> = (0..scales.len()).collect();
    order.sort_by(|&a, &b| {
        (scales[a] - 1.0)
            .abs()
            .partial_cmp(&(scales[b] - 1.0).abs())
            .unwrap()
    });

    let mut per_scale_best = vec![(0usize, f64::NEG_INFINITY); scales.len()];
    let mut best: Option<(usize, usize)> = None; // (scale idx, offset)
    let mut best_acc = f64::NEG_INFINITY;
    for &si in &order {
        let scale = scales[si];
        let span = (scale * tpl.nominal_span * ctx.rate).ceil() as usize + 1;
        if span >= ctx.len() {
            continue;
        }
        let hi = to.min(ctx.len() - span);
        for offset in from..=hi {
            let acc = template_score(ctx, tpl, offset, scale);
            if acc > per_scale_best[si].1 {
                per_scale_best[si] = (offset, acc);
            }
            if acc > best_acc {
                best_acc = acc;
                best = Some((si, offset));
            }
        }
    }
    let (si, offset) = best?;
    let mut scale = scales[si];
    let mut acc = best_acc;

    // Parabolic vertex through the winning scale and its grid neighbors;
    // adopted only when it strictly improves the score, so an exact nominal
    // clock is never nudged off.
    if si > 0 && si + 1 < scales.len() {
        let (_, y0) = per_scale_best[si - 1];
        let (_, y2) = per_scale_best[si + 1];
        let denom = y0 - 2.0 * acc + y2;
        if denom.abs() > 1e-15 && y0.is_finite() && y2.is_finite() {
            let delta = 0.5 * (y0 - y2) / denom;
            if delta.abs() < 1.0 {
                let cand = scale + delta * step;
                for off in offset.saturating_sub(2)..=(offset + 2).min(ctx.len() - 1) {
                    let a = template_score(ctx, tpl, off, cand);
                    if a > acc + 1e-12 {
                        acc = a;
                        scale = cand;
                    }
                }
            }
        }
    }

    Some(SyncHit {
        offset,
        scale,
        confidence: (2.0 * acc - 1.0).clamp(0.0, 1.0),
    })
}

/// Locates the first frame in a trace.
///
/// Correlates the thresholded trace against the modulated preamble over a
/// ±20% bit-period grid; needs at least one full preamble near the scheme's
/// nominal rate.
pub fn find_sync(
    trace: &SampledTrace,
    scheme: &ModulationScheme,
    calib: &LedCalibration,
) -> Result<SyncEstimate, DemodError> {
    let threshold = estimate_threshold(trace).map_err(|_| DemodError::SyncNotFound)?;
    let ctx = DecodeContext::new(trace, threshold);
    let tpl = preamble_template(scheme, calib)?;
    let hit = search_sync(&ctx, &tpl, 0, ctx.len()).ok_or(DemodError::SyncNotFound)?;
    if hit.confidence < MIN_CONFIDENCE {
        return Err(DemodError::SyncNotFound);
    }
    Ok(SyncEstimate {
        bit_period: hit.scale * tpl.nominal_bit,
        frame_start: hit.offset,
        threshold,
        confidence: hit.confidence,
    })
}

/// Mean-over-central-60% slot decision. Slots too small for two central
/// samples fall back to every sample they contain, then to the single sample
/// nearest their center.
fn slot_level(ctx: &DecodeContext, s0: f64, s1: f64) -> Level {
    let w = s1 - s0;
    let pick = |lo: f64, hi: f64| -> (usize, usize) {
        let a = ceil_idx(lo);
        let b = ceil_idx(hi).min(ctx.len());
        (a, b.max(a))
    };
    let (mut a, mut b) = pick(s0 + 0.2 * w, s1 - 0.2 * w);
    if b - a < 2 {
        let (fa, fb) = pick(s0, s1);
        if fb > fa {
            (a, b) = (fa, fb);
        } else {
            let k = (0.5 * (s0 + s1)).round().clamp(0.0, (ctx.len() - 1) as f64) as usize;
            (a, b) = (k, k + 1);
        }
    }
    if ctx.mean(a, b) > ctx.threshold {
        Level::On
    } else {
        Level::Off
    }
}

/// Nearest thresholded transition to expected position `e`, within `±room`.
fn nearest_edge(ctx: &DecodeContext, e: f64, room: f64) -> Option<f64> {
    let lo = ((e - room).ceil().max(1.0)) as usize;
    let hi = ((e + room).floor() as usize).min(ctx.len() - 1);
    let mut best: Option<f64> = None;
    for k in lo..=hi {
        if ctx.above(k) != ctx.above(k - 1) {
            let pos = k as f64;
            if best.is_none_or(|b| (pos - e).abs() < (b - e).abs()) {
                best = Some(pos);
            }
        }
    }
    best
}

/// Slices `count` logical bits starting at `start` samples and returns their
/// slot decisions.
///
/// OOK counts slots from the sync anchor. Manchester re-estimates phase from
/// its mid-bit transitions every eight bits to track drift.
fn slice_bits(
    ctx: &DecodeContext,
    scheme: &ModulationScheme,
    start: f64,
    scale: f64,
    count: usize,
) -> (Vec<Slot>, f64) {
    let mut slots = Vec::new();
    match *scheme {
        ModulationScheme::Ook { slot } => {
            let spp = scale * slot * ctx.rate;
            for j in 0..count {
                let s0 = start + j as f64 * spp;
                slots.push(Slot {
                    level: slot_level(ctx, s0, s0 + spp),
                    duration: slot,
                });
            }
            (slots, start + count as f64 * spp)
        }
        ModulationScheme::Manchester { slot } => {
            let spp = scale * slot * ctx.rate;
            let mut origin = start;
            let mut err_acc = 0.0;
            let mut err_n = 0usize;
            for j in 0..count {
                for half in 0..2 {
                    let s0 = origin + half as f64 * spp;
                    slots.push(Slot {
                        level: slot_level(ctx, s0, s0 + spp),
                        duration: slot,
                    });
                }
                if let Some(edge) = nearest_edge(ctx, origin + spp, 0.4 * spp) {
                    err_acc += edge - (origin + spp);
                    err_n += 1;
                }
                origin += 2.0 * spp;
                if (j + 1) % 8 == 0 && err_n > 0 {
                    origin += 0.5 * err_acc / err_n as f64;
                    err_acc = 0.0;
                    err_n = 0;
                }
            }
            (slots, origin)
        }
        ModulationScheme::Bfsk { .. } => unreachable!("B-FSK uses run-length slicing"),
    }
}

/// Reads `count` B-FSK bits as alternating ON/OFF runs from `start`.
/// Durations are de-skewed by the recovered scale so the caller can classify
/// them against the nominal calibrated pulse widths.
fn slice_bfsk_runs(
    ctx: &DecodeContext,
    start: usize,
    scale: f64,
    count: usize,
) -> (Vec<Slot>, f64) {
    let mut slots = Vec::new();
    let mut k = start.min(ctx.len());
    let mut pulses = 0usize;
    while pulses < count && k < ctx.len() {
        let level = ctx.above(k);
        let run_start = k;
        while k < ctx.len() && ctx.above(k) == level {
            k += 1;
        }
        let duration = (k - run_start) as f64 / ctx.rate / scale;
        if level {
            pulses += 1;
            slots.push(Slot {
                level: Level::On,
                duration,
            });
        } else if !slots.is_empty() {
            slots.push(Slot {
                level: Level::Off,
                duration,
            });
        }
    }
    (slots, k as f64)
}

enum FrameOutcome {
    Ok {
        payload: BitStream,
        start: usize,
        end: f64,
    },
    CrcFailed {
        end: f64,
    },
    /// Preamble or size field unusable; resume scanning one bit later.
    Reject,
}

fn decode_frame_at(
    ctx: &DecodeContext,
    scheme: &ModulationScheme,
    calib: &LedCalibration,
    framing: FramingScheme,
    hit: &SyncHit,
) -> FrameOutcome {
    let header_bits = PREAMBLE.len()
        + match framing {
            FramingScheme::Fixed => 0,
            FramingScheme::Variable => SIZE_FIELD_BITS as usize,
        };

    let take = |from: f64, n: usize| -> (Vec<Slot>, f64) {
        match scheme {
            ModulationScheme::Bfsk { .. } => {
                slice_bfsk_runs(ctx, from.round() as usize, hit.scale, n)
            }
            _ => slice_bits(ctx, scheme, from, hit.scale, n),
        }
    };

    let start_f = hit.offset as f64;
    let (head_slots, head_end) = take(start_f, header_bits);
    let head_bits = match symbols_to_bits(&head_slots, scheme, calib) {
        Ok(b) if b.len() == header_bits => b,
        _ => return FrameOutcome::Reject,
    };
    if PREAMBLE.iter().enumerate().any(|(i, &p)| head_bits[i] != p) {
        return FrameOutcome::Reject;
    }

    let body_bits = match framing {
        FramingScheme::Fixed => crate::framing::FIXED_PAYLOAD_BITS + CRC_BITS as usize,
        FramingScheme::Variable => {
            let n = head_bits.uint_at(PREAMBLE.len(), SIZE_FIELD_BITS).unwrap() as usize;
            let remaining_samples = ctx.len() as f64 - head_end;
            let needed = (n + CRC_BITS as usize) as f64
                * hit.scale
                * min_bit_samples(scheme, calib, ctx.rate);
            if n == 0 || needed > remaining_samples {
                return FrameOutcome::Reject; // implausible size: truncated frame
            }
            n + CRC_BITS as usize
        }
    };

    let (body_slots, end) = take(head_end, body_bits);
    let body = match symbols_to_bits(&body_slots, scheme, calib) {
        Ok(b) if b.len() == body_bits => b,
        _ => return FrameOutcome::CrcFailed { end },
    };
    let mut frame = head_bits;
    frame.extend(&body);
    match parse_frame(&frame, framing) {
        Ok(parsed) => FrameOutcome::Ok {
            payload: parsed.payload,
            start: hit.offset,
            end,
        },
        Err(FramingError::CrcMismatch { .. }) => FrameOutcome::CrcFailed { end },
        Err(_) => FrameOutcome::Reject,
    }
}

fn min_bit_samples(scheme: &ModulationScheme, calib: &LedCalibration, rate: f64) -> f64 {
    let seconds = match *scheme {
        ModulationScheme::Ook { slot } => slot,
        ModulationScheme::Manchester { slot } => 2.0 * slot,
        ModulationScheme::Bfsk { guard, .. } => match scheme.bfsk_times(calib) {
            Ok((t1, t0)) => t1.min(t0) + guard,
            Err(_) => guard,
        },
    };
    seconds * rate
}

/// Decodes every frame in a trace.
///
/// Repeatedly synchronizes on preambles, slices slots at the recovered
/// period, and parses frames; failures are counted in the report rather than
/// raised. When `truth` is supplied the report carries a bit error rate in
/// which every unrecovered payload bit counts as an error.
pub fn decode_link(
    trace: &SampledTrace,
    scheme: &ModulationScheme,
    calib: &LedCalibration,
    framing: FramingScheme,
    truth: Option<&BitStream>,
) -> (Vec<BitStream>, LinkReport) {
    let mut report = LinkReport::default();
    let mut payloads: Vec<BitStream> = Vec::new();
    let mut starts: Vec<usize> = Vec::new();

    let decoded = (|| -> Option<()> {
        let threshold = estimate_threshold(trace).ok()?;
        let ctx = DecodeContext::new(trace, threshold);
        let tpl = preamble_template(scheme, calib).ok()?;
        let bit_samples = tpl.nominal_bit * ctx.rate;
        let preamble_samples = tpl.nominal_span * ctx.rate;
        let gap_samples = INTERFRAME_GAP_BITS * bit_samples;

        // A window long enough to cover one inter-frame gap plus a preamble
        // with search slack, but too short to span two preambles.
        let window = ((gap_samples + preamble_samples + 8.0 * bit_samples) * 1.25) as usize + 16;
        let overlap = (1.25 * preamble_samples) as usize + 4;
        let min_tail = preamble_samples * 0.8;

        let mut pos = 0usize;
        while (pos as f64) + min_tail < ctx.len() as f64 {
            let end = (pos + window).min(ctx.len());
            let hit = match search_sync(&ctx, &tpl, pos, end) {
                Some(h) if h.confidence >= MIN_CONFIDENCE => h,
                _ => {
                    report.sync_failures += 1;
                    if end >= ctx.len() {
                        break;
                    }
                    pos = end.saturating_sub(overlap).max(pos + 1);
                    continue;
                }
            };
            report.frames_detected += 1;
            match decode_frame_at(&ctx, scheme, calib, framing, &hit) {
                FrameOutcome::Ok {
                    payload,
                    start,
                    end,
                } => {
                    report.frames_ok += 1;
                    payloads.push(payload);
                    starts.push(start);
                    pos = (end + 0.25 * gap_samples) as usize;
                }
                FrameOutcome::CrcFailed { end } => {
                    report.frames_crc_failed += 1;
                    pos = (end + 0.25 * gap_samples) as usize;
                }
                FrameOutcome::Reject => {
                    pos = hit.offset + bit_samples.max(1.0) as usize;
                }
            }
        }
        Some(())
    })();
    if decoded.is_none() {
        report.sync_failures += 1;
    }

    let accepted_bits: usize = payloads.iter().map(BitStream::len).sum();
    if trace.duration() > 0.0 {
        report.throughput = accepted_bits as f64 / trace.duration();
    }
    if let Some(truth) = truth {
        report.ber = Some(bit_error_rate(
            truth, &payloads, &starts, scheme, calib, framing, trace.rate,
        ));
    }
    (payloads, report)
}

/// BER against ground truth. For fixed frames under slot-sliced schemes the
/// decoded frames are matched to truth frames by their position in the trace
/// (transmission starts at t = 0 with four-bit inter-frame gaps); otherwise
/// payloads are compared in decode order. Lost bits count as errors.
fn bit_error_rate(
    truth: &BitStream,
    payloads: &[BitStream],
    starts: &[usize],
    scheme: &ModulationScheme,
    calib: &LedCalibration,
    framing: FramingScheme,
    rate: f64,
) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let positional = framing == FramingScheme::Fixed
        && truth
            .len()
            .is_multiple_of(crate::framing::FIXED_PAYLOAD_BITS)
        && !matches!(scheme, ModulationScheme::Bfsk { .. });
    let errors = if positional {
        let p = crate::framing::FIXED_PAYLOAD_BITS;
        let bit = scheme.bit_duration(calib).unwrap_or(1.0);
        let spacing = (crate::framing::FIXED_FRAME_BITS as f64 + INTERFRAME_GAP_BITS) * bit * rate;
        let n_frames = truth.len() / p;
        let mut got: Vec<Option<&BitStream>> = vec![None; n_frames];
        for (payload, &start) in payloads.iter().zip(starts) {
            let idx = (start as f64 / spacing).round() as usize;
            if idx < n_frames && got[idx].is_none() {
                got[idx] = Some(payload);
            }
        }
        (0..n_frames)
            .map(|i| match got[i] {
                Some(payload) => truth.slice(i * p, p).unwrap().distance(payload),
                None => p,
            })
            .sum::<usize>()
    } else {
        let mut joined = BitStream::with_capacity(truth.len());
        for p in payloads {
            joined.extend(p);
        }
        joined.distance(truth)
    };
    (errors as f64 / truth.len() as f64).min(1.0)
}
