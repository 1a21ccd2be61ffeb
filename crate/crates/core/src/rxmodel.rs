//! Channel and receiver simulation: distance attenuation, ambient light,
//! edge jitter, a software jammer, and the camera/photodiode sampling models.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::txmodel::Waveform;

/// A benign-looking process issuing random disk I/O whose LED activity masks
/// the covert signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammerConfig {
    /// Long-run fraction of time the jammer holds the LED on, 0..1.
    pub duty: f64,
    /// Mean jammer pulse length, seconds.
    pub mean_pulse: f64,
    /// Jammer pulse intensity before channel attenuation, volts.
    pub amplitude: f64,
}

/// Propagation model between the LED and the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Receiver distance from the LED, meters.
    pub distance: f64,
    /// Distance at which gain is one; intensity falls with the inverse
    /// square beyond it and is clamped to one inside it.
    pub attenuation_ref: f64,
    /// Ambient light floor added to every sample, volts.
    pub ambient: f64,
    /// Gaussian perturbation applied to segment boundaries, seconds.
    pub edge_jitter_sigma: f64,
    pub jammer: Option<JammerConfig>,
    /// All channel randomness derives from this seed.
    pub rng_seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            distance: 1.0,
            attenuation_ref: 1.0,
            ambient: 0.0,
            edge_jitter_sigma: 0.0,
            jammer: None,
            rng_seed: 0,
        }
    }
}

impl ChannelConfig {
    /// Intensity gain at the configured distance.
    pub fn gain(&self) -> f64 {
        let d = self.distance.max(self.attenuation_ref);
        (self.attenuation_ref / d).powi(2)
    }
}

/// Applies the channel to an emitted waveform: attenuation, boundary jitter,
/// jammer superposition, then the ambient floor.
///
/// The jammer shares the LED and the light path, so it is attenuated by the
/// same gain and combined by pointwise maximum; one LED cannot exceed its ON
/// brightness. Deterministic for a given config.
pub fn apply_channel(w: &Waveform, cfg: &ChannelConfig) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let gain = cfg.gain();

    let mut out = w.map_intensity(|v| v * gain);
    if cfg.edge_jitter_sigma > 0.0 {
        out = jitter_boundaries(&out, cfg.edge_jitter_sigma, &mut rng);
    }
    if let Some(j) = cfg.jammer {
        if j.duty > 0.0 && j.amplitude > 0.0 {
            let pulses = jammer_pulses(&j, out.duration(), &mut rng).map_intensity(|v| v * gain);
            out = Waveform::combine_max(&out, &pulses);
        }
    }
    if cfg.ambient != 0.0 {
        out = out.map_intensity(|v| v + cfg.ambient);
    }
    out
}

/// Shifts every interior segment boundary by `N(0, sigma)`, clamped to keep
/// durations positive and ordering intact. Endpoints stay fixed, so the
/// total length is conserved.
fn jitter_boundaries(w: &Waveform, sigma: f64, rng: &mut ChaCha8Rng) -> Waveform {
    let segs = w.segments();
    if segs.len() < 2 {
        return w.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked positive");
    let mut boundaries: Vec<f64> = Vec::with_capacity(segs.len() + 1);
    boundaries.push(0.0);
    for s in segs {
        boundaries.push(s.t_end);
    }
    for i in 1..boundaries.len() - 1 {
        let room = 0.49 * (segs[i - 1].duration()).min(segs[i].duration());
        let shift = normal.sample(rng).clamp(-room, room);
        boundaries[i] += shift;
    }
    Waveform::from_runs(
        segs.iter()
            .enumerate()
            .map(|(i, s)| (s.intensity, boundaries[i + 1] - boundaries[i])),
    )
}

/// Jammer pulse train over `[0, duration]`: exponentially distributed pulses
/// separated by exponential gaps whose mean is chosen so the long-run ON
/// fraction equals `duty`.
fn jammer_pulses(j: &JammerConfig, duration: f64, rng: &mut ChaCha8Rng) -> Waveform {
    if duration <= 0.0 {
        return Waveform::default();
    }
    let duty = j.duty.clamp(0.0, 1.0);
    let pulse = Exp::new(1.0 / j.mean_pulse).expect("mean_pulse must be positive");
    let mean_gap = j.mean_pulse * (1.0 - duty) / duty;
    let mut runs = Vec::new();
    let mut t = 0.0;
    let mut on = false;
    while t < duration {
        // The gap draw is scaled from a unit exponential so that sweeping the
        // duty with a fixed seed only compresses the gaps of one pulse train.
        let d = if on {
            pulse.sample(rng)
        } else if duty >= 1.0 {
            0.0
        } else {
            mean_gap * rng.sample::<f64, _>(rand_distr::Exp1)
        };
        runs.push((if on { j.amplitude } else { 0.0 }, d.min(duration - t)));
        t += d;
        on = !on;
    }
    Waveform::from_runs(runs)
}

/// A simulated light receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReceiverModel {
    /// Instantaneous sampling at a high, uniform rate.
    Photodiode {
        /// Samples per second.
        sample_rate: f64,
        /// Additive Gaussian noise per sample, volts.
        noise_sigma: f64,
    },
    /// One sample per video frame, integrating over the exposure window.
    Camera {
        /// Frames per second.
        fps: f64,
        /// Fraction of the frame period the shutter is open, 0..1.
        exposure_fraction: f64,
        /// Sampling phase offset between the transmitter clock and the frame
        /// clock, as a fraction of the frame period. Zero means frame k opens
        /// exactly at k/fps.
        #[serde(default)]
        phase: f64,
        /// Additive Gaussian noise per frame sample, volts.
        noise_sigma: f64,
    },
}

impl ReceiverModel {
    /// Output sample rate: the ADC rate or the frame rate.
    pub fn sample_rate(&self) -> f64 {
        match *self {
            ReceiverModel::Photodiode { sample_rate, .. } => sample_rate,
            ReceiverModel::Camera { fps, .. } => fps,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            ReceiverModel::Photodiode {
                sample_rate,
                noise_sigma,
            } => {
                if !(sample_rate.is_finite() && sample_rate > 0.0) {
                    return Err(format!(
                        "photodiode sample_rate {sample_rate} must be positive"
                    ));
                }
                if noise_sigma < 0.0 {
                    return Err("noise_sigma must be non-negative".into());
                }
            }
            ReceiverModel::Camera {
                fps,
                exposure_fraction,
                noise_sigma,
                ..
            } => {
                if !(fps.is_finite() && fps > 0.0) {
                    return Err(format!("camera fps {fps} must be positive"));
                }
                if !(0.0..=1.0).contains(&exposure_fraction) {
                    return Err(format!(
                        "exposure_fraction {exposure_fraction} must be in 0..1"
                    ));
                }
                if noise_sigma < 0.0 {
                    return Err("noise_sigma must be non-negative".into());
                }
            }
        }
        Ok(())
    }

    /// Samples a received waveform with this receiver.
    pub fn sample(&self, w: &Waveform, seed: u64) -> SampledTrace {
        match *self {
            ReceiverModel::Photodiode {
                sample_rate,
                noise_sigma,
            } => sample_photodiode(w, sample_rate, noise_sigma, seed),
            ReceiverModel::Camera {
                fps,
                exposure_fraction,
                phase,
                noise_sigma,
            } => sample_camera(w, fps, exposure_fraction, phase, noise_sigma, seed),
        }
    }
}

/// Photodiode sampling: sample k is the instantaneous intensity at `k/rate`
/// plus Gaussian noise. Deterministic for a given seed.
pub fn sample_photodiode(
    w: &Waveform,
    sample_rate: f64,
    noise_sigma: f64,
    seed: u64,
) -> SampledTrace {
    let n = (w.duration() * sample_rate).ceil() as usize;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        samples.push(w.value_at(k as f64 / sample_rate));
    }
    add_noise(&mut samples, noise_sigma, seed);
    SampledTrace {
        rate: sample_rate,
        samples,
        t0: 0.0,
    }
}

/// Camera sampling: frame k integrates the waveform over its exposure window
/// `[(k+phase)/fps, (k+phase)/fps + exposure_fraction/fps]` and reports the
/// mean, plus per-frame noise. The trace rate is the frame rate.
pub fn sample_camera(
    w: &Waveform,
    fps: f64,
    exposure_fraction: f64,
    phase: f64,
    noise_sigma: f64,
    seed: u64,
) -> SampledTrace {
    let n = (w.duration() * fps).ceil() as usize;
    let period = 1.0 / fps;
    let exposure = (exposure_fraction * period).max(f64::MIN_POSITIVE);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t0 = (k as f64 + phase) * period;
        samples.push(w.integral(t0, t0 + exposure) / exposure);
    }
    add_noise(&mut samples, noise_sigma, seed);
    SampledTrace {
        rate: fps,
        samples,
        t0: 0.0,
    }
}

fn add_noise(samples: &mut [f64], sigma: f64, seed: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma checked positive");
    for s in samples {
        *s += normal.sample(&mut rng);
    }
}

#[derive(Debug, Error)]
pub enum TraceCsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("trace has fewer than two samples")]
    TooShort,
    #[error("trace is not uniformly sampled: step {got} s at row {row}, expected {expected} s")]
    NonUniform { row: usize, got: f64, expected: f64 },
}

/// Uniform-rate intensity samples: the receiver's output and the decoder's
/// input.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace {
    /// Samples per second.
    pub rate: f64,
    pub samples: Vec<f64>,
    /// Time of the first sample, seconds.
    pub t0: f64,
}

impl SampledTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    /// Time of sample `k`.
    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.rate
    }

    /// Writes the trace as `t_seconds,intensity_volts` rows.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), TraceCsvError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_seconds", "intensity_volts"])?;
        for (k, v) in self.samples.iter().enumerate() {
            w.write_record([self.time_of(k).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `t_seconds,intensity_volts` trace, inferring the rate from the
    /// timestamps and checking they are uniform. This is the boundary for
    /// decoding measurements captured outside the simulator.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self, TraceCsvError> {
        #[derive(Deserialize)]
        struct Row {
            t_seconds: f64,
            intensity_volts: f64,
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = row?;
            times.push(row.t_seconds);
            samples.push(row.intensity_volts);
        }
        if times.len() < 2 {
            return Err(TraceCsvError::TooShort);
        }
        let span = times[times.len() - 1] - times[0];
        let step = span / (times.len() - 1) as f64;
        if !(step.is_finite() && step > 0.0) {
            return Err(TraceCsvError::NonUniform {
                row: times.len() - 1,
                got: step,
                expected: step,
            });
        }
        let tol = step * 1e-3;
        for (i, pair) in times.windows(2).enumerate() {
            let got = pair[1] - pair[0];
            if (got - step).abs() > tol {
                return Err(TraceCsvError::NonUniform {
                    row: i + 1,
                    got,
                    expected: step,
                });
            }
        }
        Ok(Self {
            rate: 1.0 / step,
            samples,
            t0: times[0],
        })
    }
}
