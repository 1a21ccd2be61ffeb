//! Command-line front end: encode payloads, render schedules and waveforms,
//! simulate full links, decode captured traces, and run parameter sweeps.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ledlink::demod::decode_link;
use ledlink::framing::encode_frame;
use ledlink::harness::{
    run_link, sweep, write_report_csv, write_sweep_csv, ExperimentConfig, HarnessError, SweepAxis,
};
use ledlink::linecode::modulate_frames;
use ledlink::rxmodel::SampledTrace;
use ledlink::txmodel::{schedule_from_timeline, waveform_from_schedule, Op};

const EXIT_CONFIG: u8 = 2;
const EXIT_DECODE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ledlink",
    about = "Optical covert-channel link simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the channel and receiver seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode the configured payload into frame bit strings.
    Encode {
        #[command(flatten)]
        common: Common,
    },
    /// Modulate the configured payload into a read/sleep schedule and a
    /// waveform CSV.
    Modulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full encode -> channel -> decode pipeline and report.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the received trace CSV here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Decode a received trace CSV into payloads.
    Decode {
        #[command(flatten)]
        common: Common,
        /// Trace CSV (`t_seconds,intensity_volts`) to decode.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run one link per axis value and emit a sweep CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Config field to vary, e.g. `bit_rate_bps` or `distance_m`.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config_error = err.chain().any(|c| {
                matches!(
                    c.downcast_ref::<HarnessError>(),
                    Some(
                        HarnessError::Config(_)
                            | HarnessError::Toml(_)
                            | HarnessError::InvalidAxis(_)
                    )
                )
            });
            if config_error {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    // An unreadable config file is a config error (exit 2), like a bad one.
    let mut cfg = ExperimentConfig::from_path(&common.config)
        .map_err(|e| HarnessError::Config(format!("loading {}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        cfg.channel.seed = seed;
        cfg.receiver.seed = seed.wrapping_add(1);
    }
    Ok(cfg)
}

fn out_writer(out: &Option<PathBuf>, name: &str) -> Result<Box<dyn Write>> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            Ok(Box::new(
                File::create(&path).with_context(|| format!("creating {}", path.display()))?,
            ))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Encode { common } => {
            let cfg = load_config(&common)?;
            let framing = cfg.framing_scheme()?;
            let frames = cfg.payload_frames()?;
            let mut w = out_writer(&common.out, "frames.txt")?;
            for payload in &frames {
                let frame = encode_frame(payload, framing)?;
                writeln!(w, "{frame}")?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Modulate { common } => {
            let cfg = load_config(&common)?;
            let framing = cfg.framing_scheme()?;
            let scheme = cfg.modulation_scheme()?;
            let calib = cfg.calibration()?;
            let frames = cfg.payload_frames()?;
            let encoded: Vec<_> = frames
                .iter()
                .map(|p| encode_frame(p, framing))
                .collect::<Result<_, _>>()?;
            let timeline = modulate_frames(&encoded, &scheme, &calib).map_err(to_harness)?;
            let schedule = schedule_from_timeline(&timeline, &calib).map_err(to_harness)?;
            let waveform = waveform_from_schedule(&schedule, &calib).map_err(to_harness)?;

            let mut w = out_writer(&common.out, "schedule.csv")?;
            writeln!(w, "op,size_bytes,offset_blocks,duration_seconds")?;
            for op in &schedule.ops {
                match *op {
                    Op::Read { size, offset } => writeln!(
                        w,
                        "read,{size},{offset},{}",
                        calib.t_on_of(size).map_err(to_harness)?
                    )?,
                    Op::Sleep { duration } => writeln!(w, "sleep,,,{duration}")?,
                }
            }
            let mut w = out_writer(&common.out, "waveform.csv")?;
            writeln!(w, "t_start_seconds,t_end_seconds,intensity_volts")?;
            for seg in waveform.segments() {
                writeln!(w, "{},{},{}", seg.t_start, seg.t_end, seg.intensity)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { common, trace_out } => {
            let cfg = load_config(&common)?;
            let out = run_link(&cfg)?;
            if let Some(path) = trace_out {
                write_trace(&out.trace, &path)?;
            }
            let mut w = out_writer(&common.out, "report.csv")?;
            write_report_csv(&cfg, &out, &mut w)?;
            drop(w);
            eprintln!(
                "frames {}/{} ok, ber {:.3e}, throughput {:.1} bit/s, gross {:.1} bit/s, air time {:.3} s",
                out.report.frames_ok,
                out.frames_sent,
                out.report.ber.unwrap_or(1.0),
                out.report.throughput,
                out.gross_rate_bps,
                out.channel_seconds,
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Decode { common, trace } => {
            let cfg = load_config(&common)?;
            let scheme = cfg.modulation_scheme()?;
            let framing = cfg.framing_scheme()?;
            let calib = cfg.calibration()?;
            let file =
                File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let trace = SampledTrace::read_csv(file)?;
            let (payloads, report) = decode_link(&trace, &scheme, &calib, framing, None);
            let mut w = out_writer(&common.out, "payloads.txt")?;
            for p in &payloads {
                writeln!(w, "{p}")?;
            }
            drop(w);
            eprintln!(
                "frames ok {}, crc failed {}, sync failures {}",
                report.frames_ok, report.frames_crc_failed, report.sync_failures
            );
            if payloads.is_empty() {
                eprintln!("decode failed: no frames recovered");
                return Ok(ExitCode::from(EXIT_DECODE));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let cfg = load_config(&common)?;
            let axis: SweepAxis = axis.parse()?;
            if values.is_empty() {
                return Err(HarnessError::Config("sweep needs at least one value".into()).into());
            }
            let rows = sweep(&cfg, axis, &values)?;
            let mut w = out_writer(&common.out, "sweep.csv")?;
            write_sweep_csv(&rows, &mut w)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn write_trace(trace: &SampledTrace, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_csv(file)?;
    Ok(())
}

fn to_harness<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Config(e.to_string())
}
