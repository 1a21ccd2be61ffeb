//! End-to-end checks of the `ledlink` binary: subcommands, file outputs,
//! and exit codes (0 success, 2 config error, 3 decode failure).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn ledlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ledlink"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn simulate_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let trace_path = dir.path().join("trace.csv");
    let cfg = fixture("peak_rate_photodiode.toml");
    let output = ledlink(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--trace-out",
        trace_path.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(report.starts_with("payload_source,payload_bits,"));
    assert!(report.contains("photodiode"));
    let trace = fs::read_to_string(&trace_path).unwrap();
    assert!(trace.starts_with("t_seconds,intensity_volts\n"));
}

#[test]
fn decode_recovers_what_simulate_transmitted() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("trace.csv");
    let cfg = fixture("peak_rate_photodiode.toml");
    let sim = ledlink(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--trace-out",
        trace_path.to_str().unwrap(),
    ]);
    assert!(sim.status.success());

    let decode = ledlink(&[
        "decode",
        "--config",
        cfg.to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert!(
        decode.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&decode.stderr)
    );
    let stdout = String::from_utf8(decode.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 16, "4096 bits = 16 fixed frames");
    assert!(lines.iter().all(|l| l.len() == 256));

    // The decoded bits are the seeded payload the config describes.
    let cfg = ledlink::harness::ExperimentConfig::from_path(&cfg).unwrap();
    let want = cfg.payload_bits().unwrap().to_binary_string();
    assert_eq!(lines.join(""), want);
}

#[test]
fn decode_of_dead_air_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("flat.csv");
    let mut csv = String::from("t_seconds,intensity_volts\n");
    for k in 0..5000 {
        csv.push_str(&format!("{},0.0\n", k as f64 / 10_000.0));
    }
    fs::write(&trace_path, csv).unwrap();
    let cfg = fixture("peak_rate_photodiode.toml");
    let output = ledlink(&[
        "decode",
        "--config",
        cfg.to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[payload]\nsource = \"random\"\nbits = 256\nnot_a_key = 1\n",
    )
    .unwrap();
    let output = ledlink(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_2() {
    let output = ledlink(&["simulate", "--config", "/does/not/exist.toml"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unknown_sweep_axis_exits_2() {
    let cfg = fixture("peak_rate_photodiode.toml");
    let output = ledlink(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "warp_factor",
        "--values",
        "1,2",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sweep_emits_the_pinned_csv_header() {
    let cfg = fixture("camera_ceiling.toml");
    let output = ledlink(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "bit_rate_bps",
        "--values",
        "15,30",
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next(),
        Some("axis_value,ber,fer,throughput_bps,sync_failures")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn encode_prints_frame_bits() {
    let cfg = fixture("peak_rate_photodiode.toml");
    let output = ledlink(&["encode", "--config", cfg.to_str().unwrap()]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 16);
    for line in lines {
        assert_eq!(line.len(), 280);
        assert!(line.starts_with("10101010"));
    }
}

#[test]
fn modulate_writes_schedule_and_waveform() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("bfsk_photodiode.toml");
    let output = ledlink(&[
        "modulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let schedule = fs::read_to_string(dir.path().join("schedule.csv")).unwrap();
    assert!(schedule.starts_with("op,size_bytes,offset_blocks,duration_seconds\n"));
    assert!(schedule.contains("read,"));
    assert!(schedule.contains("sleep,"));
    let waveform = fs::read_to_string(dir.path().join("waveform.csv")).unwrap();
    assert!(waveform.starts_with("t_start_seconds,t_end_seconds,intensity_volts\n"));
}
