//! Command-line front end: simulate misaligned scans, calibrate them, track
//! frame drift, and export point clouds and cost surfaces.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 calibration
//! failed or (under --strict) degenerate.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memscal::config::{parse_config, parse_scene, RunConfig};
use memscal::io::{
    write_cost_surface, write_point_cloud, write_range_stream, CloudFormat,
};
use memscal::{
    calibrate_frame, reconstruct_point_cloud, simulate_frames, track_offsets, Error as CoreError,
    RangeStream, Scene,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CALIBRATION: u8 = 3;

#[derive(Parser)]
#[command(name = "memscal", version, about = "MEMS LiDAR scan simulation and time-synchronization self-calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a misaligned range stream and write it with a ground-truth sidecar.
    Simulate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Override the config's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's frame count.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Recover (m, k) for one frame; write the cost surface and the corrected cloud.
    Calibrate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Range-stream CSV to calibrate.
        #[arg(long)]
        stream: PathBuf,
        /// Frame index to calibrate.
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// Point-cloud output format.
        #[arg(long, default_value = "xyz")]
        format: String,
        /// Treat a degenerate (ambiguous) result as a failure.
        #[arg(long)]
        strict: bool,
    },
    /// Track the per-frame offset and estimate the frame drift T_e.
    Track {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        stream: PathBuf,
    },
    /// Reconstruct a point cloud under an explicit (m, k) hypothesis.
    Reconstruct {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "xyz")]
        format: String,
    },
    /// Dump the full (m, k) cost surface for one frame.
    Surface {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::CalibrationFailed | CoreError::DriftEstimationFailed { .. }) => {
            EXIT_CALIBRATION
        }
        _ => EXIT_DATA,
    }
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let config = parse_config(&text)?;
    Ok(config)
}

fn load_scene(config: &RunConfig, config_path: &Path) -> anyhow::Result<Scene> {
    let scene_path = config.scene_path(config_path);
    let text = fs::read_to_string(&scene_path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", scene_path.display()))?;
    Ok(parse_scene(&text)?)
}

fn output_dir(config: &RunConfig, flag: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
    let dir = flag.clone().unwrap_or_else(|| config.output.clone());
    fs::create_dir_all(&dir).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
    Ok(dir)
}

fn read_stream(path: &Path) -> anyhow::Result<RangeStream> {
    Ok(memscal::io::read_range_stream(path)?)
}

fn pick_frame(stream: &RangeStream, frame: usize) -> anyhow::Result<&[Option<f64>]> {
    stream
        .frames
        .get(frame)
        .map(Vec::as_slice)
        .ok_or_else(|| {
            anyhow::anyhow!(
                "frame {frame} out of range: stream has {} frames",
                stream.n_frames()
            )
        })
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Simulate {
            common,
            seed,
            frames,
        } => {
            let config = load_config(&common.config)?;
            let scene = load_scene(&config, &common.config)?;
            let pattern = config.scan_pattern()?;
            let spec = config.misalignment_spec()?;
            let mut noise = config.noise_spec()?;
            if let Some(seed) = seed {
                noise.rng_seed = seed;
            }
            let n_frames = frames.unwrap_or(config.n_frames);
            let out = output_dir(&config, &common.out)?;

            let stream = simulate_frames(&scene, &pattern, &spec, &noise, n_frames)?;
            let stream_path = out.join("stream.csv");
            write_range_stream(&stream, &stream_path)?;

            // Sidecar lets a harness score `calibrate` without peeking at the
            // simulation inputs.
            let sidecar = format!(
                "m_start = {}\ndrift_pulses_per_frame = {}\nk_true = {}\nrng_seed = {}\n",
                spec.m_start, spec.drift_pulses_per_frame, spec.k_true, noise.rng_seed
            );
            fs::write(out.join("ground_truth.toml"), sidecar)
                .map_err(|e| anyhow::anyhow!("{}: {e}", out.display()))?;

            println!(
                "simulated {n_frames} frame(s) x {} pulses -> {}",
                stream.pulses_per_frame,
                stream_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibrate {
            common,
            stream,
            frame,
            format,
            strict,
        } => {
            let config = load_config(&common.config)?;
            let pattern = config.scan_pattern()?;
            let search = config.search_spec()?;
            let out = output_dir(&config, &common.out)?;
            let format: CloudFormat = format.parse()?;

            let data = read_stream(&stream)?;
            let frame_data = pick_frame(&data, frame)?;
            let result = calibrate_frame(frame_data, &search, &pattern)?;

            write_cost_surface(&result.cost_surface, &out.join("cost_surface.csv"))?;
            let cloud =
                reconstruct_point_cloud(frame_data, result.m_star, result.k_star, &pattern)?;
            let cloud_path = out.join(match format {
                CloudFormat::Xyz => "cloud_calibrated.xyz",
                CloudFormat::PlyAscii => "cloud_calibrated.ply",
            });
            write_point_cloud(&cloud, &cloud_path, format)?;

            let mut report = String::new();
            let _ = writeln!(report, "m_star = {}", result.m_star);
            let _ = writeln!(report, "k_star = {}", result.k_star);
            let _ = writeln!(report, "t_s_seconds = {:e}", result.t_s);
            let _ = writeln!(report, "degenerate = {}", result.degenerate);
            fs::write(out.join("calibration.txt"), &report)
                .map_err(|e| anyhow::anyhow!("{}: {e}", out.display()))?;
            print!("{report}");

            if strict && result.degenerate {
                eprintln!("error: calibration is degenerate (ambiguous cost surface)");
                return Ok(ExitCode::from(EXIT_CALIBRATION));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Track { common, stream } => {
            let config = load_config(&common.config)?;
            let pattern = config.scan_pattern()?;
            let search = config.search_spec()?;
            let out = output_dir(&config, &common.out)?;

            let data = read_stream(&stream)?;
            let drift = track_offsets(&data, &search, &pattern)?;

            let mut report = String::new();
            let _ = writeln!(report, "t_e_seconds = {:e}", drift.t_e);
            let _ = writeln!(report, "signed_slope_seconds_per_frame = {:e}", drift.signed_slope);
            let _ = writeln!(report, "k_star = {}", drift.k_star);
            let track: Vec<String> = drift
                .m_track
                .iter()
                .map(|m| m.map_or("-".to_string(), |m| m.to_string()))
                .collect();
            let _ = writeln!(report, "m_track = {}", track.join(" "));
            fs::write(out.join("drift_report.txt"), &report)
                .map_err(|e| anyhow::anyhow!("{}: {e}", out.display()))?;
            print!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Reconstruct {
            common,
            stream,
            frame,
            m,
            k,
            format,
        } => {
            let config = load_config(&common.config)?;
            let pattern = config.scan_pattern()?;
            let out = output_dir(&config, &common.out)?;
            let format: CloudFormat = format.parse()?;

            let data = read_stream(&stream)?;
            let frame_data = pick_frame(&data, frame)?;
            let cloud = reconstruct_point_cloud(frame_data, m, k, &pattern)?;
            let cloud_path = out.join(match format {
                CloudFormat::Xyz => "cloud.xyz",
                CloudFormat::PlyAscii => "cloud.ply",
            });
            write_point_cloud(&cloud, &cloud_path, format)?;
            println!("{} points -> {}", cloud.len(), cloud_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Surface {
            common,
            stream,
            frame,
        } => {
            let config = load_config(&common.config)?;
            let pattern = config.scan_pattern()?;
            let search = config.search_spec()?;
            let out = output_dir(&config, &common.out)?;

            let data = read_stream(&stream)?;
            let frame_data = pick_frame(&data, frame)?;
            let result = calibrate_frame(frame_data, &search, &pattern)?;
            let path = out.join("cost_surface.csv");
            write_cost_surface(&result.cost_surface, &path)?;
            println!(
                "{}x{} surface -> {}",
                result.cost_surface.m_values().len(),
                result.cost_surface.k_values().len(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
