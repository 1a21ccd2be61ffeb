//! C ABI for the link simulator: opaque calibration handles, bit-array
//! framing helpers, and whole-pipeline entry points driven by TOML configs.
//!
//! Conventions: every function returns a [`LedlinkStatus`]; results come back
//! through out-parameters. Bit arrays are byte buffers holding one bit per
//! byte (values 0 or 1). Strings are NUL-terminated UTF-8. Anything returned
//! as an allocated pointer has a matching `*_free` function.

use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::ptr;

use ledlink::bits::BitStream;
use ledlink::demod::decode_link;
use ledlink::framing::{crc16, encode_frame, parse_frame, FramingError, FramingScheme};
use ledlink::harness::{run_link, ExperimentConfig};
use ledlink::rxmodel::SampledTrace;
use ledlink::txmodel::{LedCalibration, LedColor};

/// Result of every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedlinkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    BufferTooSmall = 4,
    PreambleMismatch = 5,
    CrcMismatch = 6,
    TruncatedFrame = 7,
    ConfigError = 8,
    IoError = 9,
    DecodeFailed = 10,
}

/// LED color profile selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedlinkColor {
    Red = 0,
    Blue = 1,
    White = 2,
}

impl From<LedlinkColor> for LedColor {
    fn from(c: LedlinkColor) -> LedColor {
        match c {
            LedlinkColor::Red => LedColor::Red,
            LedlinkColor::Blue => LedColor::Blue,
            LedlinkColor::White => LedColor::White,
        }
    }
}

/// Frame layout selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedlinkFraming {
    Fixed = 0,
    Variable = 1,
}

impl From<LedlinkFraming> for FramingScheme {
    fn from(f: LedlinkFraming) -> FramingScheme {
        match f {
            LedlinkFraming::Fixed => FramingScheme::Fixed,
            LedlinkFraming::Variable => FramingScheme::Variable,
        }
    }
}

/// Opaque handle to a read-size calibration table.
pub struct LedlinkCalibration(LedCalibration);

/// Link statistics produced by a simulated run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedlinkLinkReport {
    pub frames_sent: u64,
    pub frames_detected: u64,
    pub frames_ok: u64,
    pub frames_crc_failed: u64,
    pub sync_failures: u64,
    /// Bit error rate against the transmitted payload, 0..1.
    pub ber: f64,
    /// Frame error rate, 0..1.
    pub fer: f64,
    /// Accepted payload bits per second of trace.
    pub throughput_bps: f64,
    /// Transmitted frame bits (headers included) per second of air time.
    pub gross_rate_bps: f64,
    /// Emitted signal duration in seconds.
    pub channel_seconds: f64,
}

unsafe fn cstr<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        return None;
    }
    CStr::from_ptr(p).to_str().ok()
}

unsafe fn bits_from_raw(bits: *const u8, len: usize) -> Option<BitStream> {
    if bits.is_null() {
        return None;
    }
    let slice = std::slice::from_raw_parts(bits, len);
    if slice.iter().any(|&b| b > 1) {
        return None;
    }
    Some(slice.iter().map(|&b| b == 1).collect())
}

unsafe fn bits_to_raw(
    src: &BitStream,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> LedlinkStatus {
    if out_len.is_null() {
        return LedlinkStatus::NullArgument;
    }
    *out_len = src.len();
    if src.len() > cap {
        return LedlinkStatus::BufferTooSmall;
    }
    if out.is_null() {
        return LedlinkStatus::NullArgument;
    }
    for (i, bit) in src.iter().enumerate() {
        *out.add(i) = bit as u8;
    }
    LedlinkStatus::Ok
}

/// Creates the built-in calibration for a color. The handle must be released
/// with `ledlink_calibration_free`.
///
/// # Safety
/// `out` must be a valid pointer to pointer storage.
#[no_mangle]
pub unsafe extern "C" fn ledlink_calibration_default(
    color: LedlinkColor,
    out: *mut *mut LedlinkCalibration,
) -> LedlinkStatus {
    if out.is_null() {
        return LedlinkStatus::NullArgument;
    }
    let calib = LedCalibration::for_color(color.into());
    *out = Box::into_raw(Box::new(LedlinkCalibration(calib)));
    LedlinkStatus::Ok
}

/// Loads a `read_size_bytes,on_time_seconds` CSV table.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid pointer storage.
#[no_mangle]
pub unsafe extern "C" fn ledlink_calibration_from_csv(
    path: *const c_char,
    color: LedlinkColor,
    out: *mut *mut LedlinkCalibration,
) -> LedlinkStatus {
    if out.is_null() {
        return LedlinkStatus::NullArgument;
    }
    let Some(path) = cstr(path) else {
        return LedlinkStatus::NullArgument;
    };
    let Ok(file) = File::open(path) else {
        return LedlinkStatus::IoError;
    };
    match LedCalibration::from_csv(file, color.into()) {
        Ok(calib) => {
            *out = Box::into_raw(Box::new(LedlinkCalibration(calib)));
            LedlinkStatus::Ok
        }
        Err(_) => LedlinkStatus::InvalidArgument,
    }
}

/// Releases a calibration handle. A null pointer is a no-op.
///
/// # Safety
/// `calib` must have come from a `ledlink_calibration_*` constructor and not
/// have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ledlink_calibration_free(calib: *mut LedlinkCalibration) {
    if !calib.is_null() {
        drop(Box::from_raw(calib));
    }
}

/// LED-ON time in seconds produced by reading `read_size_bytes`.
///
/// # Safety
/// `calib` must be a live handle; `out_seconds` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ledlink_calibration_on_time(
    calib: *const LedlinkCalibration,
    read_size_bytes: u64,
    out_seconds: *mut f64,
) -> LedlinkStatus {
    if calib.is_null() || out_seconds.is_null() {
        return LedlinkStatus::NullArgument;
    }
    match (*calib).0.t_on_of(read_size_bytes) {
        Ok(t) => {
            *out_seconds = t;
            LedlinkStatus::Ok
        }
        Err(_) => LedlinkStatus::OutOfRange,
    }
}

/// Read size in bytes whose LED-ON time best matches `on_time_seconds`.
///
/// # Safety
/// `calib` must be a live handle; `out_bytes` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ledlink_calibration_read_size(
    calib: *const LedlinkCalibration,
    on_time_seconds: f64,
    out_bytes: *mut u64,
) -> LedlinkStatus {
    if calib.is_null() || out_bytes.is_null() {
        return LedlinkStatus::NullArgument;
    }
    match (*calib).0.inverse_s_of(on_time_seconds) {
        Ok(s) => {
            *out_bytes = s;
            LedlinkStatus::Ok
        }
        Err(_) => LedlinkStatus::OutOfRange,
    }
}

/// CRC-16/CCITT-FALSE over a bit array (one bit per byte, values 0 or 1).
///
/// # Safety
/// `bits` must point to `len` readable bytes; `out_crc` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ledlink_crc16(
    bits: *const u8,
    len: usize,
    out_crc: *mut u16,
) -> LedlinkStatus {
    if out_crc.is_null() {
        return LedlinkStatus::NullArgument;
    }
    if bits.is_null() && len > 0 {
        return LedlinkStatus::NullArgument;
    }
    let stream = if len == 0 {
        BitStream::new()
    } else {
        match bits_from_raw(bits, len) {
            Some(s) => s,
            None => return LedlinkStatus::InvalidArgument,
        }
    };
    *out_crc = crc16(&stream);
    LedlinkStatus::Ok
}

/// Encodes a payload into one frame: preamble, optional size field, payload,
/// CRC. On `BUFFER_TOO_SMALL`, `out_len` carries the required capacity.
///
/// # Safety
/// `payload` must point to `payload_len` readable bytes; `out_bits` must be
/// writable for `out_cap` bytes; `out_len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ledlink_frame_encode(
    payload: *const u8,
    payload_len: usize,
    framing: LedlinkFraming,
    out_bits: *mut u8,
    out_cap: usize,
    out_len: *mut usize,
) -> LedlinkStatus {
    let Some(bits) = bits_from_raw(payload, payload_len) else {
        return if payload.is_null() {
            LedlinkStatus::NullArgument
        } else {
            LedlinkStatus::InvalidArgument
        };
    };
    match encode_frame(&bits, framing.into()) {
        Ok(frame) => bits_to_raw(&frame, out_bits, out_cap, out_len),
        Err(_) => LedlinkStatus::InvalidArgument,
    }
}

/// Parses one frame from the start of a bit array, returning its payload and
/// how many bits the frame consumed.
///
/// # Safety
/// `bits` must point to `len` readable bytes; `out_payload` must be writable
/// for `out_cap` bytes; `out_len` and `out_consumed` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ledlink_frame_parse(
    bits: *const u8,
    len: usize,
    framing: LedlinkFraming,
    out_payload: *mut u8,
    out_cap: usize,
    out_len: *mut usize,
    out_consumed: *mut usize,
) -> LedlinkStatus {
    let Some(stream) = bits_from_raw(bits, len) else {
        return if bits.is_null() {
            LedlinkStatus::NullArgument
        } else {
            LedlinkStatus::InvalidArgument
        };
    };
    if out_consumed.is_null() {
        return LedlinkStatus::NullArgument;
    }
    match parse_frame(&stream, framing.into()) {
        Ok(parsed) => {
            *out_consumed = parsed.consumed;
            bits_to_raw(&parsed.payload, out_payload, out_cap, out_len)
        }
        Err(FramingError::PreambleMismatch) => LedlinkStatus::PreambleMismatch,
        Err(FramingError::CrcMismatch { .. }) => LedlinkStatus::CrcMismatch,
        Err(FramingError::TruncatedFrame { .. }) => LedlinkStatus::TruncatedFrame,
        Err(FramingError::PayloadSize { .. }) => LedlinkStatus::InvalidArgument,
    }
}

/// Runs a full simulated link described by a TOML experiment config.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out_report` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ledlink_run_link(
    config_toml: *const c_char,
    out_report: *mut LedlinkLinkReport,
) -> LedlinkStatus {
    if out_report.is_null() {
        return LedlinkStatus::NullArgument;
    }
    let Some(text) = cstr(config_toml) else {
        return LedlinkStatus::NullArgument;
    };
    let cfg = match ExperimentConfig::from_toml_str(text) {
        Ok(cfg) => cfg,
        Err(_) => return LedlinkStatus::ConfigError,
    };
    let out = match run_link(&cfg) {
        Ok(out) => out,
        Err(_) => return LedlinkStatus::ConfigError,
    };
    *out_report = LedlinkLinkReport {
        frames_sent: out.frames_sent as u64,
        frames_detected: out.report.frames_detected as u64,
        frames_ok: out.report.frames_ok as u64,
        frames_crc_failed: out.report.frames_crc_failed as u64,
        sync_failures: out.report.sync_failures as u64,
        ber: out.report.ber.unwrap_or(1.0),
        fer: out.fer,
        throughput_bps: out.report.throughput,
        gross_rate_bps: out.gross_rate_bps,
        channel_seconds: out.channel_seconds,
    };
    LedlinkStatus::Ok
}

/// Decodes a `t_seconds,intensity_volts` trace CSV using the modulation,
/// framing, and LED sections of a TOML config. On success `out_payloads`
/// receives a newline-separated list of binary payload strings; free it with
/// `ledlink_string_free`. Returns `DECODE_FAILED` when no frame is
/// recovered.
///
/// # Safety
/// `trace_path` and `config_toml` must be NUL-terminated strings;
/// `out_payloads` must be valid pointer storage.
#[no_mangle]
pub unsafe extern "C" fn ledlink_decode_trace_csv(
    trace_path: *const c_char,
    config_toml: *const c_char,
    out_payloads: *mut *mut c_char,
) -> LedlinkStatus {
    if out_payloads.is_null() {
        return LedlinkStatus::NullArgument;
    }
    *out_payloads = ptr::null_mut();
    let (Some(path), Some(text)) = (cstr(trace_path), cstr(config_toml)) else {
        return LedlinkStatus::NullArgument;
    };
    let cfg = match ExperimentConfig::from_toml_str(text) {
        Ok(cfg) => cfg,
        Err(_) => return LedlinkStatus::ConfigError,
    };
    let (Ok(scheme), Ok(framing), Ok(calib)) = (
        cfg.modulation_scheme(),
        cfg.framing_scheme(),
        cfg.calibration(),
    ) else {
        return LedlinkStatus::ConfigError;
    };
    let Ok(file) = File::open(path) else {
        return LedlinkStatus::IoError;
    };
    let trace = match SampledTrace::read_csv(file) {
        Ok(t) => t,
        Err(_) => return LedlinkStatus::InvalidArgument,
    };
    let (payloads, _report) = decode_link(&trace, &scheme, &calib, framing, None);
    if payloads.is_empty() {
        return LedlinkStatus::DecodeFailed;
    }
    let joined = payloads
        .iter()
        .map(|p| p.to_binary_string())
        .collect::<Vec<_>>()
        .join("\n");
    match CString::new(joined) {
        Ok(s) => {
            *out_payloads = s.into_raw();
            LedlinkStatus::Ok
        }
        Err(_) => LedlinkStatus::InvalidArgument,
    }
}

/// Frees a string returned by this library. A null pointer is a no-op.
///
/// # Safety
/// `s` must have been returned by a `ledlink_*` function and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ledlink_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn ledlink_status_message(status: LedlinkStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        LedlinkStatus::Ok => b"ok\0",
        LedlinkStatus::NullArgument => b"null argument\0",
        LedlinkStatus::InvalidArgument => b"invalid argument\0",
        LedlinkStatus::OutOfRange => b"value outside calibrated range\0",
        LedlinkStatus::BufferTooSmall => b"buffer too small\0",
        LedlinkStatus::PreambleMismatch => b"preamble mismatch\0",
        LedlinkStatus::CrcMismatch => b"crc mismatch\0",
        LedlinkStatus::TruncatedFrame => b"truncated frame\0",
        LedlinkStatus::ConfigError => b"config error\0",
        LedlinkStatus::IoError => b"io error\0",
        LedlinkStatus::DecodeFailed => b"no frames recovered\0",
    };
    msg.as_ptr() as *const c_char
}
