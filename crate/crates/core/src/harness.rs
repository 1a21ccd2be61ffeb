//! Experiment runner: declarative configs, end-to-end link simulation, and
//! parameter sweeps with CSV reporting.

use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitStream;
use crate::demod::{decode_link, LinkReport};
use crate::framing::{encode_frame, FramingScheme, FIXED_PAYLOAD_BITS};
use crate::linecode::{modulate_frames, ModulationScheme};
use crate::rxmodel::{apply_channel, ChannelConfig, JammerConfig, ReceiverModel, SampledTrace};
use crate::txmodel::{waveform_from_timeline, LedCalibration, LedColor};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("unknown sweep axis `{0}`")]
    InvalidAxis(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<String> for HarnessError {
    fn from(msg: String) -> Self {
        HarnessError::Config(msg)
    }
}

fn cfg_err<T, S: Into<String>>(msg: S) -> Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

/// Where the transmitted payload comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub struct PayloadConfig {
    /// `random`, `hex`, or `file`.
    pub source: String,
    /// Payload length in bits (`random`).
    #[serde(default)]
    pub bits: usize,
    /// Payload generator seed (`random`).
    #[serde(default)]
    pub seed: u64,
    /// Inline hex digits (`hex`).
    #[serde(default)]
    pub hex: String,
    /// Path to a byte file (`file`).
    #[serde(default)]
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramingConfig {
    /// `fixed` or `variable`.
    pub scheme: String,
    /// Payload bits per variable frame; the last frame takes the remainder.
    #[serde(default = "default_chunk_bits")]
    pub chunk_bits: usize,
}

fn default_chunk_bits() -> usize {
    FIXED_PAYLOAD_BITS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationConfig {
    /// `ook`, `manchester`, or `bfsk`.
    pub scheme: String,
    /// Slot duration for ook/manchester, seconds.
    #[serde(default)]
    pub slot_seconds: f64,
    #[serde(default = "default_bfsk_s1")]
    pub bfsk_s1_bytes: u64,
    #[serde(default = "default_bfsk_s0")]
    pub bfsk_s0_bytes: u64,
    #[serde(default = "default_bfsk_guard")]
    pub bfsk_guard_seconds: f64,
}

fn default_bfsk_s1() -> u64 {
    256_000
}

fn default_bfsk_s0() -> u64 {
    512_000
}

fn default_bfsk_guard() -> f64 {
    1.2e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedConfig {
    pub color: LedColor,
    /// Optional `read_size_bytes,on_time_seconds` table replacing the
    /// built-in calibration.
    #[serde(default)]
    pub calibration_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "one")]
    pub distance_m: f64,
    #[serde(default = "one")]
    pub attenuation_ref_m: f64,
    #[serde(default)]
    pub ambient_volts: f64,
    #[serde(default)]
    pub edge_jitter_sigma_seconds: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jammer: Option<JammerSection>,
}

fn one() -> f64 {
    1.0
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            distance_m: 1.0,
            attenuation_ref_m: 1.0,
            ambient_volts: 0.0,
            edge_jitter_sigma_seconds: 0.0,
            seed: 0,
            jammer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerSection {
    pub duty: f64,
    pub mean_pulse_seconds: f64,
    pub amplitude_volts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    /// `photodiode` or `camera`.
    pub kind: String,
    #[serde(default)]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub fps: f64,
    #[serde(default = "default_exposure")]
    pub exposure_fraction: f64,
    /// Sampling phase offset between the transmitter and frame clock, as a
    /// fraction of the frame period.
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub noise_sigma_volts: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_exposure() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_reps")]
    pub repetitions: usize,
}

fn default_reps() -> usize {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        Self { repetitions: 1 }
    }
}

/// A fully described experiment: payload, framing, modulation, LED, channel,
/// and receiver. Two runs from the same config produce identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub payload: PayloadConfig,
    pub framing: FramingConfig,
    pub modulation: ModulationConfig,
    pub led: LedConfig,
    #[serde(default)]
    pub channel: ChannelSection,
    pub receiver: ReceiverSection,
    #[serde(default)]
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self, HarnessError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn framing_scheme(&self) -> Result<FramingScheme, HarnessError> {
        match self.framing.scheme.to_ascii_lowercase().as_str() {
            "fixed" => Ok(FramingScheme::Fixed),
            "variable" => Ok(FramingScheme::Variable),
            other => cfg_err(format!("unknown framing scheme `{other}`")),
        }
    }

    pub fn modulation_scheme(&self) -> Result<ModulationScheme, HarnessError> {
        let m = &self.modulation;
        let scheme = match m.scheme.to_ascii_lowercase().as_str() {
            "ook" => ModulationScheme::Ook {
                slot: m.slot_seconds,
            },
            "manchester" => ModulationScheme::Manchester {
                slot: m.slot_seconds,
            },
            "bfsk" => ModulationScheme::Bfsk {
                s1: m.bfsk_s1_bytes,
                s0: m.bfsk_s0_bytes,
                guard: m.bfsk_guard_seconds,
            },
            other => return cfg_err(format!("unknown modulation scheme `{other}`")),
        };
        scheme
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(scheme)
    }

    pub fn calibration(&self) -> Result<LedCalibration, HarnessError> {
        if self.led.calibration_csv.is_empty() {
            Ok(LedCalibration::for_color(self.led.color))
        } else {
            let file = fs::File::open(&self.led.calibration_csv)?;
            LedCalibration::from_csv(file, self.led.color)
                .map_err(|e| HarnessError::Config(e.to_string()))
        }
    }

    pub fn channel_config(&self) -> ChannelConfig {
        let c = &self.channel;
        ChannelConfig {
            distance: c.distance_m,
            attenuation_ref: c.attenuation_ref_m,
            ambient: c.ambient_volts,
            edge_jitter_sigma: c.edge_jitter_sigma_seconds,
            jammer: c.jammer.as_ref().map(|j| JammerConfig {
                duty: j.duty,
                mean_pulse: j.mean_pulse_seconds,
                amplitude: j.amplitude_volts,
            }),
            rng_seed: c.seed,
        }
    }

    pub fn receiver_model(&self) -> Result<ReceiverModel, HarnessError> {
        let r = &self.receiver;
        let model = match r.kind.to_ascii_lowercase().as_str() {
            "photodiode" => ReceiverModel::Photodiode {
                sample_rate: r.sample_rate_hz,
                noise_sigma: r.noise_sigma_volts,
            },
            "camera" => ReceiverModel::Camera {
                fps: r.fps,
                exposure_fraction: r.exposure_fraction,
                phase: r.phase,
                noise_sigma: r.noise_sigma_volts,
            },
            other => return cfg_err(format!("unknown receiver kind `{other}`")),
        };
        model.validate().map_err(HarnessError::Config)?;
        Ok(model)
    }

    /// The full payload bit stream this experiment transmits.
    pub fn payload_bits(&self) -> Result<BitStream, HarnessError> {
        let p = &self.payload;
        let bits = match p.source.to_ascii_lowercase().as_str() {
            "random" => {
                if p.bits == 0 {
                    return cfg_err("payload.bits must be positive for a random payload");
                }
                let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
                BitStream::random(p.bits, &mut rng)
            }
            "hex" => BitStream::from_hex_str(&p.hex)
                .ok_or_else(|| HarnessError::Config(format!("invalid payload hex `{}`", p.hex)))?,
            "file" => BitStream::from_bytes(&fs::read(&p.file)?),
            other => return cfg_err(format!("unknown payload source `{other}`")),
        };
        if bits.is_empty() {
            return cfg_err("payload is empty");
        }
        Ok(bits)
    }

    /// Payload split into per-frame chunks under the configured framing.
    pub fn payload_frames(&self) -> Result<Vec<BitStream>, HarnessError> {
        let bits = self.payload_bits()?;
        match self.framing_scheme()? {
            FramingScheme::Fixed => {
                if bits.len() % FIXED_PAYLOAD_BITS != 0 {
                    return cfg_err(format!(
                        "fixed framing needs a payload that is a multiple of {FIXED_PAYLOAD_BITS} bits, got {}",
                        bits.len()
                    ));
                }
                Ok((0..bits.len() / FIXED_PAYLOAD_BITS)
                    .map(|i| {
                        bits.slice(i * FIXED_PAYLOAD_BITS, FIXED_PAYLOAD_BITS)
                            .unwrap()
                    })
                    .collect())
            }
            FramingScheme::Variable => {
                let chunk = self.framing.chunk_bits;
                if chunk == 0 || chunk > 0xFFFF {
                    return cfg_err(format!("framing.chunk_bits {chunk} must be in 1..=65535"));
                }
                let mut frames = Vec::new();
                let mut at = 0;
                while at < bits.len() {
                    let take = chunk.min(bits.len() - at);
                    frames.push(bits.slice(at, take).unwrap());
                    at += take;
                }
                Ok(frames)
            }
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        self.framing_scheme()?;
        let scheme = self.modulation_scheme()?;
        self.receiver_model()?;
        if self.run.repetitions == 0 {
            return cfg_err("run.repetitions must be at least 1");
        }
        if let Some(j) = &self.channel.jammer {
            if !(0.0..=1.0).contains(&j.duty) {
                return cfg_err(format!("jammer duty {} must be in 0..1", j.duty));
            }
            if j.mean_pulse_seconds <= 0.0 {
                return cfg_err("jammer mean_pulse_seconds must be positive");
            }
        }
        // B-FSK pulse widths must stay separable under the configured jitter.
        if let ModulationScheme::Bfsk { .. } = scheme {
            let calib = self.calibration()?;
            let (t1, t0) = scheme
                .bfsk_times(&calib)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let sigma = self.channel.edge_jitter_sigma_seconds;
            if sigma > 0.0 && (t1 - t0).abs() < 2.0 * sigma {
                return cfg_err(format!(
                    "bfsk on-times {t1} s and {t0} s are closer than twice the edge jitter {sigma} s"
                ));
            }
        }
        Ok(())
    }
}

/// Everything one simulated link run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub report: LinkReport,
    pub frames_sent: usize,
    pub payload_bits: usize,
    /// Emitted signal duration, seconds.
    pub channel_seconds: f64,
    /// All transmitted frame bits (headers included) over the air time.
    pub gross_rate_bps: f64,
    /// Frame error rate: the share of sent frames not accepted.
    pub fer: f64,
    /// Trace of the last repetition, for export.
    pub trace: SampledTrace,
    pub payloads: Vec<BitStream>,
}

/// Runs the full pipeline for one config: frame, modulate, schedule, light,
/// channel, receiver, decode. Repetitions re-run the noisy stages with
/// per-repetition seeds and average the metrics.
pub fn run_link(cfg: &ExperimentConfig) -> Result<LinkOutcome, HarnessError> {
    let frames = cfg.payload_frames()?;
    let truth = cfg.payload_bits()?;
    let scheme = cfg.modulation_scheme()?;
    let framing = cfg.framing_scheme()?;
    let calib = cfg.calibration()?;
    let receiver = cfg.receiver_model()?;

    let encoded: Vec<BitStream> = frames
        .iter()
        .map(|p| encode_frame(p, framing))
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let frame_bits_total: usize = encoded.iter().map(BitStream::len).sum();
    let timeline = modulate_frames(&encoded, &scheme, &calib)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let emitted = waveform_from_timeline(&timeline, &calib)
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let reps = cfg.run.repetitions;
    let mut agg = LinkReport::default();
    let mut ber_sum = 0.0;
    let mut throughput_sum = 0.0;
    let mut last: Option<(SampledTrace, Vec<BitStream>)> = None;
    for rep in 0..reps as u64 {
        let mut channel = cfg.channel_config();
        channel.rng_seed = channel.rng_seed.wrapping_add(rep.wrapping_mul(0x9E37_79B9));
        let received = apply_channel(&emitted, &channel);
        let rx_seed = cfg
            .receiver
            .seed
            .wrapping_add(rep.wrapping_mul(0x85EB_CA6B));
        let trace = receiver.sample(&received, rx_seed);
        let (payloads, report) = decode_link(&trace, &scheme, &calib, framing, Some(&truth));
        agg.frames_detected += report.frames_detected;
        agg.frames_ok += report.frames_ok;
        agg.frames_crc_failed += report.frames_crc_failed;
        agg.sync_failures += report.sync_failures;
        ber_sum += report.ber.unwrap_or(1.0);
        throughput_sum += report.throughput;
        last = Some((trace, payloads));
    }
    agg.ber = Some(ber_sum / reps as f64);
    agg.throughput = throughput_sum / reps as f64;

    let frames_sent = frames.len() * reps;
    let (trace, payloads) = last.expect("at least one repetition");
    let channel_seconds = emitted.duration();
    Ok(LinkOutcome {
        fer: 1.0 - agg.frames_ok as f64 / frames_sent as f64,
        frames_sent,
        payload_bits: truth.len(),
        channel_seconds,
        gross_rate_bps: if channel_seconds > 0.0 {
            frame_bits_total as f64 / channel_seconds
        } else {
            0.0
        },
        report: agg,
        trace,
        payloads,
    })
}

/// A numeric config field a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    BitRateBps,
    SlotSeconds,
    DistanceM,
    NoiseSigmaVolts,
    JammerDuty,
    EdgeJitterSigmaSeconds,
    AmbientVolts,
}

impl FromStr for SweepAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "bit_rate_bps" => Ok(SweepAxis::BitRateBps),
            "slot_seconds" => Ok(SweepAxis::SlotSeconds),
            "distance_m" => Ok(SweepAxis::DistanceM),
            "noise_sigma_volts" => Ok(SweepAxis::NoiseSigmaVolts),
            "jammer_duty" => Ok(SweepAxis::JammerDuty),
            "edge_jitter_sigma_seconds" => Ok(SweepAxis::EdgeJitterSigmaSeconds),
            "ambient_volts" => Ok(SweepAxis::AmbientVolts),
            other => Err(HarnessError::InvalidAxis(other.to_string())),
        }
    }
}

impl SweepAxis {
    /// Applies an axis value to a copy of the config.
    pub fn apply(
        &self,
        cfg: &ExperimentConfig,
        value: f64,
    ) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = cfg.clone();
        match self {
            SweepAxis::BitRateBps => {
                if value <= 0.0 {
                    return cfg_err("bit_rate_bps must be positive");
                }
                match cfg.modulation.scheme.to_ascii_lowercase().as_str() {
                    "ook" => cfg.modulation.slot_seconds = 1.0 / value,
                    "manchester" => cfg.modulation.slot_seconds = 1.0 / (2.0 * value),
                    _ => return cfg_err("bit_rate_bps applies to ook or manchester modulation"),
                }
            }
            SweepAxis::SlotSeconds => cfg.modulation.slot_seconds = value,
            SweepAxis::DistanceM => cfg.channel.distance_m = value,
            SweepAxis::NoiseSigmaVolts => cfg.receiver.noise_sigma_volts = value,
            SweepAxis::JammerDuty => match cfg.channel.jammer.as_mut() {
                Some(j) => j.duty = value,
                None => return cfg_err("jammer_duty sweep needs a [channel.jammer] section"),
            },
            SweepAxis::EdgeJitterSigmaSeconds => cfg.channel.edge_jitter_sigma_seconds = value,
            SweepAxis::AmbientVolts => cfg.channel.ambient_volts = value,
        }
        Ok(cfg)
    }
}

/// One sweep result row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub ber: f64,
    pub fer: f64,
    pub throughput_bps: f64,
    pub sync_failures: usize,
}

/// Runs `run_link` once per axis value, in parallel, rows ordered by input
/// value order. All runs share the template's seeds, so only the swept
/// parameter varies.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepRow>, HarnessError> {
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| axis.apply(cfg, v))
        .collect::<Result<_, _>>()?;
    configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(cfg, &value)| {
            let out = run_link(cfg)?;
            Ok(SweepRow {
                axis_value: value,
                ber: out.report.ber.unwrap_or(1.0),
                fer: out.fer,
                throughput_bps: out.report.throughput,
                sync_failures: out.report.sync_failures,
            })
        })
        .collect()
}

/// Writes sweep rows as `axis_value,ber,fer,throughput_bps,sync_failures`.
pub fn write_sweep_csv<W: io::Write>(rows: &[SweepRow], writer: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "axis_value",
        "ber",
        "fer",
        "throughput_bps",
        "sync_failures",
    ])?;
    for r in rows {
        w.write_record([
            r.axis_value.to_string(),
            r.ber.to_string(),
            r.fer.to_string(),
            r.throughput_bps.to_string(),
            r.sync_failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one self-describing report row: every config value echoed next to
/// the measured metrics, so results are auditable without the config file.
pub fn write_report_csv<W: io::Write>(
    cfg: &ExperimentConfig,
    out: &LinkOutcome,
    writer: W,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "payload_source",
        "payload_bits",
        "payload_seed",
        "framing",
        "chunk_bits",
        "modulation",
        "slot_seconds",
        "bfsk_s1_bytes",
        "bfsk_s0_bytes",
        "bfsk_guard_seconds",
        "led_color",
        "distance_m",
        "attenuation_ref_m",
        "ambient_volts",
        "edge_jitter_sigma_seconds",
        "jammer_duty",
        "jammer_mean_pulse_seconds",
        "jammer_amplitude_volts",
        "channel_seed",
        "receiver",
        "sample_rate_hz",
        "fps",
        "exposure_fraction",
        "phase",
        "noise_sigma_volts",
        "receiver_seed",
        "repetitions",
        "frames_sent",
        "frames_detected",
        "frames_ok",
        "frames_crc_failed",
        "sync_failures",
        "ber",
        "fer",
        "throughput_bps",
        "gross_rate_bps",
        "channel_seconds",
    ])?;
    let j = cfg.channel.jammer.as_ref();
    w.write_record([
        cfg.payload.source.clone(),
        out.payload_bits.to_string(),
        cfg.payload.seed.to_string(),
        cfg.framing.scheme.clone(),
        cfg.framing.chunk_bits.to_string(),
        cfg.modulation.scheme.clone(),
        cfg.modulation.slot_seconds.to_string(),
        cfg.modulation.bfsk_s1_bytes.to_string(),
        cfg.modulation.bfsk_s0_bytes.to_string(),
        cfg.modulation.bfsk_guard_seconds.to_string(),
        cfg.led.color.name().to_string(),
        cfg.channel.distance_m.to_string(),
        cfg.channel.attenuation_ref_m.to_string(),
        cfg.channel.ambient_volts.to_string(),
        cfg.channel.edge_jitter_sigma_seconds.to_string(),
        j.map_or(String::new(), |j| j.duty.to_string()),
        j.map_or(String::new(), |j| j.mean_pulse_seconds.to_string()),
        j.map_or(String::new(), |j| j.amplitude_volts.to_string()),
        cfg.channel.seed.to_string(),
        cfg.receiver.kind.clone(),
        cfg.receiver.sample_rate_hz.to_string(),
        cfg.receiver.fps.to_string(),
        cfg.receiver.exposure_fraction.to_string(),
        cfg.receiver.phase.to_string(),
        cfg.receiver.noise_sigma_volts.to_string(),
        cfg.receiver.seed.to_string(),
        cfg.run.repetitions.to_string(),
        out.frames_sent.to_string(),
        out.report.frames_detected.to_string(),
        out.report.frames_ok.to_string(),
        out.report.frames_crc_failed.to_string(),
        out.report.sync_failures.to_string(),
        out.report.ber.unwrap_or(1.0).to_string(),
        out.fer.to_string(),
        out.report.throughput.to_string(),
        out.gross_rate_bps.to_string(),
        out.channel_seconds.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}
