//! `hdcnet` command line.
//!
//! Every option can also come from a JSON or TOML config file (`--config` or
//! `HDCNET_CONFIG`) using the option's long name with `_` for `-`; flags win.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{self, Calibration, AUTO_LEVELS, AUTO_RANGE_DEG, DEFAULT_SWEEP_DURATION};
use crate::error::{Error, Result};
use crate::io::{self, OxtsLayout, ProfileKind, SyntheticProfile};
use crate::kernel::{build_kernel, TuningCurve, WeightKernel, DEFAULT_GAMMA, DEFAULT_LAMBDA, DEFAULT_N};
use crate::network::RingModel;
use crate::neuron::{NeuronParams, DEFAULT_DT};
use crate::tracker::{self, TrajectoryRecord};

/// Raspberry Pi 3 per-frame timing reported for the original implementation.
pub const PI3_REFERENCE: &str = "Raspberry Pi 3 reference: mean 7.70 ms, median 7.43 ms, max 85.66 ms, 4.79% of frames over 10 ms";

#[derive(Debug, Parser)]
#[command(name = "hdcnet", version, about = "Head-direction-cell ring attractor for angular path integration")]
pub struct Cli {
    /// JSON or TOML file with default option values.
    #[arg(long, global = true, env = "HDCNET_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the weight kernels and write them to a file.
    Synthesize(SynthesizeArgs),
    /// Sweep the left turning stimulus and fit the stimulus gain.
    Calibrate(CalibrateArgs),
    /// Replay a trajectory through the network and report heading errors.
    Track(TrackArgs),
    /// Time the per-frame update on a trajectory.
    Bench(BenchArgs),
    /// Write a synthetic trajectory with exact ground truth.
    Generate(GenerateArgs),
}

#[derive(Debug, Default, Clone, Args)]
pub struct ModelArgs {
    /// Neurons per ring.
    #[arg(long)]
    pub n: Option<usize>,
    /// Ridge regularization of the kernel synthesis.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Shift-kernel gain.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Tuning-curve baseline A (Hz).
    #[arg(long)]
    pub curve_a: Option<f64>,
    /// Tuning-curve concentration M.
    #[arg(long)]
    pub curve_m: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub h0: Option<f64>,
    /// Euler step, seconds.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Kernel file to write.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Calibration file to write.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Stimulus levels, comma separated. Chosen automatically when absent.
    #[arg(long, value_delimiter = ',')]
    pub stimuli: Option<Vec<f64>>,
    /// Seconds simulated per level.
    #[arg(long)]
    pub sweep_duration: Option<f64>,
    /// CSV file for the stimulus/velocity table.
    #[arg(long)]
    pub sweep_csv: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct InputArgs {
    /// Trajectory CSV (`t,omega[,truth]`).
    #[arg(long, conflicts_with = "oxts")]
    pub input: Option<PathBuf>,
    /// KITTI oxts directory (`timestamps.txt` plus `data/*.txt`).
    #[arg(long)]
    pub oxts: Option<PathBuf>,
    #[arg(long)]
    pub yaw_column: Option<usize>,
    #[arg(long)]
    pub yaw_rate_column: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Starting heading in degrees. Defaults to the first truth value, else 0.
    #[arg(long)]
    pub initial_heading_deg: Option<f64>,
    /// Report JSON to write.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-sample CSV to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Network state JSON written after the last frame.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Length of the default synthetic trajectory (20 deg/s at 100 Hz), seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Timing JSON to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// constant_rotation, balanced_maze or noisy.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub omega_max_deg: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub frame_dt: Option<f64>,
    /// Gyro noise, rad/s.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Option defaults read from a config file.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub curve_a: Option<f64>,
    pub curve_m: Option<f64>,
    pub tau: Option<f64>,
    pub r_max: Option<f64>,
    pub beta: Option<f64>,
    pub h0: Option<f64>,
    pub dt: Option<f64>,
    pub kernel: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub stimuli: Option<Vec<f64>>,
    pub sweep_duration: Option<f64>,
    pub sweep_csv: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub oxts: Option<PathBuf>,
    pub yaw_column: Option<usize>,
    pub yaw_rate_column: Option<usize>,
    pub initial_heading_deg: Option<f64>,
    pub report: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub repetitions: Option<usize>,
    pub duration: Option<f64>,
    pub kind: Option<String>,
    pub omega_max_deg: Option<f64>,
    pub frame_dt: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })
        }
    }
}

fn pick<T: Clone>(flag: &Option<T>, config: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| config.clone())
}

fn require(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| Error::InvalidParameter(format!("missing --{what} (flag or config)")))
}

/// Neuron, kernel and model parameters after merging flags over config.
#[derive(Debug, Clone, Copy)]
struct ModelSettings {
    neuron: NeuronParams,
    n: usize,
    lambda: f64,
    gamma: f64,
    curve_a: f64,
    curve_m: f64,
    dt: f64,
}

impl ModelSettings {
    fn resolve(flags: &ModelArgs, cfg: &RunConfig) -> Result<Self> {
        let d = NeuronParams::default();
        let neuron = NeuronParams::new(
            pick(&flags.tau, &cfg.tau).unwrap_or(d.tau),
            pick(&flags.r_max, &cfg.r_max).unwrap_or(d.r_max),
            pick(&flags.beta, &cfg.beta).unwrap_or(d.beta),
            pick(&flags.h0, &cfg.h0).unwrap_or(d.h0),
        )?;
        Ok(Self {
            neuron,
            n: pick(&flags.n, &cfg.n).unwrap_or(DEFAULT_N),
            lambda: pick(&flags.lambda, &cfg.lambda).unwrap_or(DEFAULT_LAMBDA),
            gamma: pick(&flags.gamma, &cfg.gamma).unwrap_or(DEFAULT_GAMMA),
            curve_a: pick(&flags.curve_a, &cfg.curve_a).unwrap_or(TuningCurve::DEFAULT_A),
            curve_m: pick(&flags.curve_m, &cfg.curve_m).unwrap_or(TuningCurve::DEFAULT_M),
            dt: pick(&flags.dt, &cfg.dt).unwrap_or(DEFAULT_DT),
        })
    }

    fn build(&self) -> Result<WeightKernel> {
        let curve = TuningCurve::pinned(self.curve_a, self.curve_m, self.n, &self.neuron)?;
        build_kernel(&curve, &self.neuron, self.lambda, self.gamma)
    }

    fn model(&self, kernel: WeightKernel) -> Result<Arc<RingModel>> {
        RingModel::new(Arc::new(kernel), self.neuron, self.dt)
    }
}

/// Loads the kernel and a calibration that must belong to it.
fn load_calibrated(
    model: &ModelArgs,
    kernel: &Option<PathBuf>,
    calibration: &Option<PathBuf>,
    cfg: &RunConfig,
) -> Result<(Arc<RingModel>, Calibration)> {
    let settings = ModelSettings::resolve(model, cfg)?;
    let kernel = WeightKernel::load(require(pick(kernel, &cfg.kernel), "kernel")?)?;
    let cal = Calibration::load(require(pick(calibration, &cfg.calibration), "calibration")?)?;
    cal.check_kernel(&kernel.content_hash())?;
    Ok((settings.model(kernel)?, cal))
}

fn load_input(input: &InputArgs, cfg: &RunConfig) -> Result<Option<Vec<TrajectoryRecord>>> {
    if let Some(dir) = pick(&input.oxts, &cfg.oxts) {
        let d = OxtsLayout::default();
        let layout = OxtsLayout {
            yaw_column: pick(&input.yaw_column, &cfg.yaw_column).unwrap_or(d.yaw_column),
            yaw_rate_column: pick(&input.yaw_rate_column, &cfg.yaw_rate_column).unwrap_or(d.yaw_rate_column),
            ..d
        };
        return io::read_oxts(dir, &layout).map(Some);
    }
    pick(&input.input, &cfg.input).map(io::read_csv).transpose()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn synthesize(args: &SynthesizeArgs, cfg: &RunConfig) -> Result<()> {
    let settings = ModelSettings::resolve(&args.model, cfg)?;
    let out = require(pick(&args.kernel, &cfg.kernel), "kernel")?;
    let kernel = settings.build()?;
    let report = kernel.symmetry_report();
    println!(
        "kernel n={} lambda={} gamma={} curve A={} B={:.9} M={}",
        kernel.n(),
        kernel.lambda,
        kernel.gamma,
        kernel.curve.a,
        kernel.curve.b,
        kernel.curve.m
    );
    println!(
        "symmetry residuals: recurrent even {:.3e}, shift odd {:.3e}, half amplitude {:.3e}, left/right {:.3e}, shift sum {:.3e}",
        report.recurrent_even, report.shift_odd, report.half_amplitude, report.left_right, report.shift_sum
    );
    kernel.validate()?;
    kernel.save(&out)?;
    println!("wrote {} (sha256 {})", out.display(), kernel.content_hash());
    Ok(())
}

fn calibrate(args: &CalibrateArgs, cfg: &RunConfig) -> Result<()> {
    let settings = ModelSettings::resolve(&args.model, cfg)?;
    let kernel = WeightKernel::load(require(pick(&args.kernel, &cfg.kernel), "kernel")?)?;
    let out = require(pick(&args.calibration, &cfg.calibration), "calibration")?;
    let duration = pick(&args.sweep_duration, &cfg.sweep_duration).unwrap_or(DEFAULT_SWEEP_DURATION);
    let model = settings.model(kernel)?;
    let stimuli = match pick(&args.stimuli, &cfg.stimuli) {
        Some(levels) => levels,
        None => calibration::auto_stimuli(
            &model,
            AUTO_RANGE_DEG.0.to_radians(),
            AUTO_RANGE_DEG.1.to_radians(),
            AUTO_LEVELS,
            duration,
        )?,
    };
    let table = calibration::sweep(&model, &stimuli, duration, calibration::ShiftSide::Left)?;
    if let Some(csv) = pick(&args.sweep_csv, &cfg.sweep_csv) {
        write_text(&csv, &calibration::sweep_csv(&table))?;
    }
    for s in &table {
        match s.velocity {
            Some(v) => println!("stimulus {:.6} -> {:.4} deg/s", s.stimulus, v.to_degrees()),
            None => println!("stimulus {:.6} -> degenerate (excluded)", s.stimulus),
        }
    }
    let usable: Vec<(f64, f64)> = table.iter().filter_map(|s| s.velocity.map(|v| (s.stimulus, v))).collect();
    let cal = Calibration::new(calibration::fit_gain(&usable)?, &model);
    println!(
        "alpha {:.6} per rad/s, r^2 {:.6}, linear up to {:.2} deg/s",
        cal.alpha,
        cal.fit_r2,
        cal.max_velocity.to_degrees()
    );
    cal.save(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn track(args: &TrackArgs, cfg: &RunConfig) -> Result<()> {
    let (model, cal) = load_calibrated(&args.model, &args.kernel, &args.calibration, cfg)?;
    let records = load_input(&args.input, cfg)?
        .ok_or_else(|| Error::InvalidParameter("missing --input or --oxts (flag or config)".into()))?;
    let initial = match pick(&args.initial_heading_deg, &cfg.initial_heading_deg) {
        Some(deg) => deg.to_radians(),
        None => records[0].truth_heading.unwrap_or(0.0),
    };
    let (report, state) = tracker::track_with_state(&records, &model, &cal.gain(), initial)?;
    if let Some(e) = report.error {
        println!(
            "network error: mean {:.3} deg, max {:.3} deg, min {:.3} deg",
            e.mean_deg, e.max_deg, e.min_deg
        );
    }
    if let Some(e) = report.baseline_error {
        println!(
            "trapezoid error: mean {:.3} deg, max {:.3} deg, min {:.3} deg",
            e.mean_deg, e.max_deg, e.min_deg
        );
    }
    if report.error.is_none() {
        println!("no truth column; decoded headings only");
    }
    if report.out_of_range_samples > 0 {
        println!(
            "{} samples exceeded the calibrated range of {:.2} deg/s",
            report.out_of_range_samples,
            cal.max_velocity.to_degrees()
        );
    }
    print_timing(&report.timing);
    if let Some(path) = pick(&args.report, &cfg.report) {
        write_text(&path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    }
    if let Some(path) = pick(&args.output, &cfg.output) {
        write_text(&path, &report.to_csv())?;
    }
    if let Some(path) = pick(&args.snapshot, &cfg.snapshot) {
        write_text(&path, &(state.to_json() + "\n"))?;
    }
    Ok(())
}

fn print_timing(t: &tracker::TimingStats) {
    println!(
        "per-frame time over {} frames: mean {:.3} ms, median {:.3} ms, max {:.3} ms, {:.2}% over 10 ms",
        t.frames, t.mean_ms, t.median_ms, t.max_ms, t.pct_over_10ms
    );
}

fn bench(args: &BenchArgs, cfg: &RunConfig) -> Result<()> {
    let (model, cal) = load_calibrated(&args.model, &args.kernel, &args.calibration, cfg)?;
    let records = match load_input(&args.input, cfg)? {
        Some(r) => r,
        None => io::generate(&SyntheticProfile {
            kind: ProfileKind::ConstantRotation,
            omega_max: 20f64.to_radians(),
            duration: pick(&args.duration, &cfg.duration).unwrap_or(60.0),
            frame_dt: 0.01,
            noise_sigma: 0.0,
            seed: 0,
        })?,
    };
    let reps = pick(&args.repetitions, &cfg.repetitions).unwrap_or(1);
    let stats = tracker::benchmark(&records, &model, &cal.gain(), reps)?;
    print_timing(&stats);
    println!("{PI3_REFERENCE}");
    if let Some(path) = pick(&args.output, &cfg.output) {
        write_text(&path, &(serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n"))?;
    }
    Ok(())
}

fn generate(args: &GenerateArgs, cfg: &RunConfig) -> Result<()> {
    let kind: ProfileKind = pick(&args.kind, &cfg.kind)
        .unwrap_or_else(|| "balanced_maze".into())
        .parse()?;
    let profile = SyntheticProfile {
        kind,
        omega_max: pick(&args.omega_max_deg, &cfg.omega_max_deg).unwrap_or(40.0).to_radians(),
        duration: pick(&args.duration, &cfg.duration).unwrap_or(match kind {
            ProfileKind::ConstantRotation => 18.0,
            _ => 0.0,
        }),
        frame_dt: pick(&args.frame_dt, &cfg.frame_dt).unwrap_or(0.01),
        noise_sigma: pick(&args.noise_sigma, &cfg.noise_sigma).unwrap_or(match kind {
            ProfileKind::Noisy => 0.05,
            _ => 0.0,
        }),
        seed: pick(&args.seed, &cfg.seed).unwrap_or(0),
    };
    let out = require(pick(&args.output, &cfg.output), "output")?;
    let records = io::generate(&profile)?;
    io::write_csv(&out, &records)?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Synthesize(a) => synthesize(a, &cfg),
        Command::Calibrate(a) => calibrate(a, &cfg),
        Command::Track(a) => track(a, &cfg),
        Command::Bench(a) => bench(a, &cfg),
        Command::Generate(a) => generate(a, &cfg),
    }
}

/// Exit status for a failure: 2 for filesystem errors, 1 for everything else.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        2
    } else {
        1
    }
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
