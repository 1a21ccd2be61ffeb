//! Exercises the C ABI the way a foreign caller would: raw pointers, status
//! codes, and out-parameters.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use ledlink_ffi::*;

const CONFIG: &str = r#"
[payload]
source = "random"
bits = 512
seed = 5

[framing]
scheme = "fixed"

[modulation]
scheme = "ook"
slot_seconds = 0.0005

[led]
color = "red"

[receiver]
kind = "photodiode"
sample_rate_hz = 40000.0
"#;

#[test]
fn calibration_handles_roundtrip() {
    unsafe {
        let mut cal: *mut LedlinkCalibration = ptr::null_mut();
        assert_eq!(
            ledlink_calibration_default(LedlinkColor::Red, &mut cal),
            LedlinkStatus::Ok
        );
        assert!(!cal.is_null());

        let mut t = 0.0f64;
        assert_eq!(
            ledlink_calibration_on_time(cal, 512_000, &mut t),
            LedlinkStatus::Ok
        );
        assert_eq!(t, 2.0e-3);

        let mut s = 0u64;
        assert_eq!(
            ledlink_calibration_read_size(cal, 2.0e-3, &mut s),
            LedlinkStatus::Ok
        );
        assert_eq!(s, 512_000);

        assert_eq!(
            ledlink_calibration_on_time(cal, u64::MAX, &mut t),
            LedlinkStatus::OutOfRange
        );
        ledlink_calibration_free(cal);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert_eq!(
            ledlink_calibration_default(LedlinkColor::Blue, ptr::null_mut()),
            LedlinkStatus::NullArgument
        );
        let mut crc = 0u16;
        assert_eq!(
            ledlink_crc16(ptr::null(), 8, &mut crc),
            LedlinkStatus::NullArgument
        );
        ledlink_calibration_free(ptr::null_mut());
        ledlink_string_free(ptr::null_mut());
    }
}

#[test]
fn crc_matches_the_check_value() {
    // ASCII "123456789", bits MSB-first.
    let mut bits = Vec::new();
    for byte in b"123456789" {
        for i in (0..8).rev() {
            bits.push((byte >> i) & 1);
        }
    }
    unsafe {
        let mut crc = 0u16;
        assert_eq!(
            ledlink_crc16(bits.as_ptr(), bits.len(), &mut crc),
            LedlinkStatus::Ok
        );
        assert_eq!(crc, 0x29B1);
        // Empty payload is the CRC init value.
        assert_eq!(ledlink_crc16(ptr::null(), 0, &mut crc), LedlinkStatus::Ok);
        assert_eq!(crc, 0xFFFF);
        // Bit bytes must be 0 or 1.
        let bad = [2u8; 4];
        assert_eq!(
            ledlink_crc16(bad.as_ptr(), bad.len(), &mut crc),
            LedlinkStatus::InvalidArgument
        );
    }
}

#[test]
fn frames_encode_and_parse_across_the_boundary() {
    let payload: Vec<u8> = (0..256).map(|i| (i % 3 == 0) as u8).collect();
    unsafe {
        let mut frame = vec![0u8; 16];
        let mut frame_len = 0usize;
        // Undersized buffer reports the required length.
        assert_eq!(
            ledlink_frame_encode(
                payload.as_ptr(),
                payload.len(),
                LedlinkFraming::Fixed,
                frame.as_mut_ptr(),
                frame.len(),
                &mut frame_len,
            ),
            LedlinkStatus::BufferTooSmall
        );
        assert_eq!(frame_len, 280);

        let mut frame = vec![0u8; frame_len];
        assert_eq!(
            ledlink_frame_encode(
                payload.as_ptr(),
                payload.len(),
                LedlinkFraming::Fixed,
                frame.as_mut_ptr(),
                frame.len(),
                &mut frame_len,
            ),
            LedlinkStatus::Ok
        );
        assert_eq!(&frame[..8], &[1, 0, 1, 0, 1, 0, 1, 0]);

        let mut back = vec![0u8; 256];
        let mut back_len = 0usize;
        let mut consumed = 0usize;
        assert_eq!(
            ledlink_frame_parse(
                frame.as_ptr(),
                frame.len(),
                LedlinkFraming::Fixed,
                back.as_mut_ptr(),
                back.len(),
                &mut back_len,
                &mut consumed,
            ),
            LedlinkStatus::Ok
        );
        assert_eq!(back_len, 256);
        assert_eq!(consumed, 280);
        assert_eq!(back, payload);

        frame[100] ^= 1;
        assert_eq!(
            ledlink_frame_parse(
                frame.as_ptr(),
                frame.len(),
                LedlinkFraming::Fixed,
                back.as_mut_ptr(),
                back.len(),
                &mut back_len,
                &mut consumed,
            ),
            LedlinkStatus::CrcMismatch
        );
    }
}

#[test]
fn run_link_reports_a_clean_simulated_channel() {
    let config = CString::new(CONFIG).unwrap();
    let mut report = LedlinkLinkReport {
        frames_sent: 0,
        frames_detected: 0,
        frames_ok: 0,
        frames_crc_failed: 0,
        sync_failures: 0,
        ber: 1.0,
        fer: 1.0,
        throughput_bps: 0.0,
        gross_rate_bps: 0.0,
        channel_seconds: 0.0,
    };
    unsafe {
        assert_eq!(
            ledlink_run_link(config.as_ptr(), &mut report),
            LedlinkStatus::Ok
        );
    }
    assert_eq!(report.frames_sent, 2);
    assert_eq!(report.frames_ok, 2);
    assert_eq!(report.ber, 0.0);
    assert!(report.throughput_bps > 0.0);

    let bad = CString::new("this is not toml").unwrap();
    unsafe {
        assert_eq!(
            ledlink_run_link(bad.as_ptr(), &mut report),
            LedlinkStatus::ConfigError
        );
    }
}

#[test]
fn trace_csv_decodes_through_the_c_api() {
    // Synthesize a trace with the Rust API, then hand it over as a file.
    let cfg = ledlink::harness::ExperimentConfig::from_toml_str(CONFIG).unwrap();
    let out = ledlink::harness::run_link(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    out.trace
        .write_csv(std::fs::File::create(&path).unwrap())
        .unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let c_cfg = CString::new(CONFIG).unwrap();
    let mut text: *mut std::ffi::c_char = ptr::null_mut();
    unsafe {
        assert_eq!(
            ledlink_decode_trace_csv(c_path.as_ptr(), c_cfg.as_ptr(), &mut text),
            LedlinkStatus::Ok
        );
        let decoded = CStr::from_ptr(text).to_str().unwrap().to_string();
        ledlink_string_free(text);
        let want = cfg.payload_bits().unwrap().to_binary_string();
        assert_eq!(decoded.replace('\n', ""), want);
    }
}

#[test]
fn status_messages_are_static_strings() {
    for status in [
        LedlinkStatus::Ok,
        LedlinkStatus::OutOfRange,
        LedlinkStatus::CrcMismatch,
        LedlinkStatus::DecodeFailed,
    ] {
        let p = ledlink_status_message(status);
        assert!(!p.is_null());
        let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap();
        assert!(!s.is_empty());
    }
}

#[test]
fn header_is_generated() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ledlink.h");
    let text = std::fs::read_to_string(header).expect("cbindgen header exists");
    assert!(text.contains("ledlink_run_link"));
    assert!(text.contains("LedlinkCalibration"));
    assert!(text.contains("LEDLINK_H"));
}
