//! Software simulation of a covert optical data link carried over a
//! disk-activity LED.
//!
//! The pipeline runs entirely in simulation: payload bits are framed with a
//! preamble and CRC ([`framing`]), line-coded onto LED on/off timelines
//! ([`linecode`]), compiled into the read/sleep operation schedules that
//! would drive the LED and rendered as light ([`txmodel`]), passed through a
//! channel and receiver model ([`rxmodel`]), and demodulated back to bits
//! ([`demod`]). The [`harness`] module runs end-to-end experiments and
//! parameter sweeps from declarative configs.

pub mod bits;
pub mod demod;
pub mod framing;
pub mod harness;
pub mod linecode;
pub mod rxmodel;
pub mod txmodel;

pub use bits::BitStream;
pub use demod::{decode_link, estimate_threshold, find_sync, LinkReport, SyncEstimate};
pub use framing::{crc16, encode_frame, parse_frame, FramingScheme};
pub use harness::{run_link, sweep, ExperimentConfig};
pub use linecode::{modulate, modulate_frames, symbols_to_bits, ModulationScheme, SymbolTimeline};
pub use rxmodel::{apply_channel, ChannelConfig, ReceiverModel, SampledTrace};
pub use txmodel::{
    schedule_from_timeline, waveform_from_schedule, waveform_from_timeline, LedCalibration,
    LedColor, OpSchedule, Waveform,
};
