//! Command-line front end: `run`, `metrics` and `synth`.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 input data or
//! geometry, 5 file system, 6 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{curves, mssim_per_frame, sig6, support};
use crate::pgm::{read_frames, read_sequence, write_sequence};
use crate::pipeline::{run, PipelineConfig, PipelineResult, PriorSource};
use crate::synth::{generate, passes, SynthSpec};
use crate::video::{FrameGeometry, VideoSequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INPUT: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "inwlr",
    version,
    about = "Incremental weighted low-rank video background estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate background and foreground of a directory of PGM frames.
    Run(RunArgs),
    /// Score recovered frames against ground truth.
    Metrics(MetricsArgs),
    /// Write a synthetic sequence with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Raw,
    Background,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Directory of `.pgm` frames, read in file-name order.
    pub input: PathBuf,
    /// Output directory (created if missing).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Number of batches `p`.
    #[arg(short = 'p', long)]
    pub batches: Option<usize>,
    /// Maximum number of prior frames per batch.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Rank headroom: `r = k + ir`.
    #[arg(long)]
    pub ir: Option<usize>,
    /// Lower bound of the prior weights.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Upper bound of the prior weights.
    #[arg(long)]
    pub beta: Option<f64>,
    /// SVT threshold relative to the first batch's top singular value.
    #[arg(long)]
    pub tau_rel: Option<f64>,
    /// Relative objective change that stops the solver.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Standard deviations above the mean for the foreground floor.
    #[arg(long)]
    pub sigma_mult: Option<f64>,
    /// Take prior frames from the raw previous batch or its background.
    #[arg(long, value_enum)]
    pub prior: Option<PriorArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl RunArgs {
    pub fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig {
            seed: self.seed,
            ..PipelineConfig::default()
        };
        let set = |dst: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        let setf = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut cfg.batches, self.batches);
        set(&mut cfg.selection.k_max, self.kmax);
        set(&mut cfg.selection.i_r, self.ir);
        set(&mut cfg.wlr.max_iters, self.max_iters);
        setf(&mut cfg.alpha, self.alpha);
        setf(&mut cfg.beta, self.beta);
        setf(&mut cfg.tau_rel, self.tau_rel);
        setf(&mut cfg.wlr.epsilon, self.epsilon);
        setf(&mut cfg.selection.sigma_mult, self.sigma_mult);
        if let Some(p) = self.prior {
            cfg.prior_source = match p {
                PriorArg::Raw => PriorSource::RawFrames,
                PriorArg::Background => PriorSource::Background,
            };
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricsMode {
    /// Predicted foreground magnitudes against binary truth masks.
    Foreground,
    /// Predicted backgrounds against true backgrounds (MSSIM only).
    Background,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Directory of predicted frames.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth frames (masks: > 127 is foreground).
    #[arg(long)]
    pub truth: PathBuf,
    /// CSV destination: the ROC/PR curve, or per-frame MSSIM in background mode.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricsMode::Foreground)]
    pub mode: MetricsMode,
    /// Per-frame MSSIM CSV in foreground mode [default: mssim.csv next to --output].
    #[arg(long)]
    pub mssim_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; gets `frames/`, `background/`, `masks/`, `spec.json`.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    #[arg(long, default_value_t = 2)]
    pub bg_rank: usize,
    /// Side length of the square object.
    #[arg(long, default_value_t = 12)]
    pub object_size: usize,
    #[arg(long, default_value_t = 0.5)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Hold the object still for the last N frames.
    #[arg(long, default_value_t = 0)]
    pub static_tail: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

impl SynthArgs {
    pub fn spec(&self) -> Result<SynthSpec> {
        let geometry = FrameGeometry::new(self.rows, self.cols)?;
        let object_size = (self.object_size, self.object_size);
        if self.object_size == 0 || self.object_size > self.rows.min(self.cols) {
            return Err(Error::Config(format!(
                "object size {} does not fit a {}x{} frame",
                self.object_size, self.rows, self.cols
            )));
        }
        let spec = SynthSpec {
            geometry,
            n_frames: self.frames,
            bg_rank: self.bg_rank,
            object_size,
            trajectory: passes(geometry, object_size, self.frames, 10, 10),
            fg_amplitude: self.amplitude,
            noise_sigma: self.noise,
            seed: self.seed,
        };
        Ok(if self.static_tail > 0 {
            spec.with_static_tail(self.static_tail)
        } else {
            spec
        })
    }
}

/// Map an error to its process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Batch { source, .. } => exit_code(source),
        Error::Config(_) | Error::InvalidRank { .. } => EXIT_CONFIG,
        Error::Geometry(_)
        | Error::DimensionMismatch { .. }
        | Error::PixelOutOfRange { .. }
        | Error::Empty(_)
        | Error::Pgm { .. } => EXIT_INPUT,
        Error::Io { .. } => EXIT_IO,
        Error::NumericalFailure { .. } | Error::NonFinite(_) | Error::DegeneratePrior { .. } => EXIT_NUMERICAL,
    }
}

/// Parse `args` (including the program name) and execute; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|s| println!("{s}")),
        Command::Metrics(a) => cmd_metrics(a).map(|s| println!("{s}")),
        Command::Synth(a) => cmd_synth(a).map(|s| println!("{s}")),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

#[derive(Debug, Serialize)]
struct BatchReport {
    index: usize,
    first_frame: usize,
    frames: usize,
    /// Absolute frame indices of the prior block.
    prior_frames: Vec<usize>,
    k: usize,
    r: usize,
    selection_eps1: f64,
    eps1: f64,
    iterations: usize,
    converged: bool,
    objective_trace: Vec<f64>,
    flops: u64,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    input: &'a Path,
    frames: usize,
    rows: usize,
    cols: usize,
    config: &'a PipelineConfig,
    parallel: bool,
    initial_degenerate: bool,
    batches: Vec<BatchReport>,
    flops: u64,
    seconds: f64,
}

fn run_report<'a>(
    args: &'a RunArgs,
    cfg: &'a PipelineConfig,
    video: &VideoSequence,
    res: &PipelineResult,
) -> RunReport<'a> {
    let mut prev_start = res.batches.first().map_or(0, |b| b.columns.start);
    let batches = res
        .batches
        .iter()
        .map(|b| {
            let report = BatchReport {
                index: b.index,
                first_frame: b.columns.start,
                frames: b.columns.len(),
                prior_frames: b.prior_indices.iter().map(|i| prev_start + i).collect(),
                k: b.k_used.0,
                r: b.r_used.0,
                selection_eps1: b.selection_eps1,
                eps1: b.eps1,
                iterations: b.iterations,
                converged: b.converged,
                objective_trace: b.objective_trace.clone(),
                flops: b.flops,
                seconds: b.elapsed.as_secs_f64(),
            };
            prev_start = b.columns.start;
            report
        })
        .collect();
    RunReport {
        input: &args.input,
        frames: video.frames(),
        rows: video.geometry().rows(),
        cols: video.geometry().cols(),
        config: cfg,
        parallel: crate::par::is_parallel(),
        initial_degenerate: res.initial_degenerate,
        batches,
        flops: res.flops,
        seconds: res.elapsed.as_secs_f64(),
    }
}

/// `inwlr run`: writes `background/`, `foreground/` (|F| after cleanup),
/// `mask/` (0 or 255) and `report.json`.
pub fn cmd_run(args: &RunArgs) -> Result<String> {
    let cfg = args.config();
    cfg.validate()?;
    let video = read_sequence(&args.input)?;
    let res = run(&video, &cfg)?;
    let geometry = video.geometry();

    fs::create_dir_all(&args.output).map_err(io_err(&args.output))?;
    let cleaned = res.cleaned_foreground();
    write_sequence(&args.output.join("background"), &res.background_full, geometry)?;
    write_sequence(&args.output.join("foreground"), &cleaned.map(f64::abs), geometry)?;
    let mask = support(&cleaned).map(|v| if v { 1.0 } else { 0.0 });
    write_sequence(&args.output.join("mask"), &mask, geometry)?;
    write_json(&args.output.join("report.json"), &run_report(args, &cfg, &video, &res))?;

    Ok(format!(
        "{} frames in {} batches, {:.3} s; wrote {}",
        video.frames(),
        res.batches.len(),
        res.elapsed.as_secs_f64(),
        args.output.display()
    ))
}

fn frames_matrix(dir: &Path) -> Result<(DMatrix<f64>, FrameGeometry)> {
    let (frames, geometry) = read_frames(dir)?;
    let m = geometry.pixels();
    let data = DMatrix::from_fn(m, frames.len(), |i, j| f64::from(frames[j][i]) / 255.0);
    Ok((data, geometry))
}

fn mssim_csv(values: &[f64]) -> String {
    let mut out = String::from("frame,mssim\n");
    for (j, v) in values.iter().enumerate() {
        out += &format!("{j},{}\n", sig6(*v));
    }
    out
}

/// `inwlr metrics`.
pub fn cmd_metrics(args: &MetricsArgs) -> Result<String> {
    let (pred, pg) = frames_matrix(&args.pred)?;
    let (truth, tg) = frames_matrix(&args.truth)?;
    if pg != tg {
        return Err(Error::Geometry(format!(
            "predicted frames are {}x{}, truth frames {}x{}",
            pg.rows(),
            pg.cols(),
            tg.rows(),
            tg.cols()
        )));
    }
    if pred.ncols() != truth.ncols() {
        return Err(Error::Geometry(format!(
            "{} predicted frames but {} truth frames",
            pred.ncols(),
            truth.ncols()
        )));
    }
    let ssim = mssim_per_frame(&pred, &truth, pg)?;
    let mean = ssim.iter().sum::<f64>() / ssim.len() as f64;
    match args.mode {
        MetricsMode::Background => {
            fs::write(&args.output, mssim_csv(&ssim)).map_err(io_err(&args.output))?;
            Ok(format!("mean MSSIM {}", sig6(mean)))
        }
        MetricsMode::Foreground => {
            let masks = truth.map(|v| v > 127.0 / 255.0);
            let curve = curves(&pred, &masks)?;
            fs::write(&args.output, curve.to_csv()).map_err(io_err(&args.output))?;
            let mssim_path = args
                .mssim_output
                .clone()
                .unwrap_or_else(|| args.output.parent().unwrap_or_else(|| Path::new(".")).join("mssim.csv"));
            fs::write(&mssim_path, mssim_csv(&ssim)).map_err(io_err(&mssim_path))?;
            Ok(format!("AUC {} mean MSSIM {}", sig6(curve.auc()), sig6(mean)))
        }
    }
}

/// `inwlr synth`.
pub fn cmd_synth(args: &SynthArgs) -> Result<String> {
    let spec = args.spec()?;
    let out = generate(&spec)?;
    let g = spec.geometry;
    fs::create_dir_all(&args.output).map_err(io_err(&args.output))?;
    write_sequence(&args.output.join("frames"), out.video.data(), g)?;
    write_sequence(&args.output.join("background"), &out.background, g)?;
    let masks = out.masks.map(|v| if v { 1.0 } else { 0.0 });
    write_sequence(&args.output.join("masks"), &masks, g)?;
    write_json(&args.output.join("spec.json"), &spec)?;
    Ok(format!("{} frames written to {}", spec.n_frames, args.output.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "inwlr", "run", "in", "-o", "out", "--kmax", "5", "--ir", "1", "--seed", "9",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run")
        };
        let cfg = args.config();
        assert_eq!(cfg.selection.k_max, 5);
        assert_eq!(cfg.selection.i_r, 1);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.batches, PipelineConfig::default().batches);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Geometry("x".into())), EXIT_INPUT);
        let nested = Error::Batch {
            index: 1,
            source: Box::new(Error::NumericalFailure {
                stage: "x1",
                iteration: 3,
            }),
        };
        assert_eq!(exit_code(&nested), EXIT_NUMERICAL);
        assert_eq!(run_from(["inwlr", "frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn synth_defaults_match_spec_default() {
        let cli = Cli::try_parse_from(["inwlr", "synth", "-o", "x"]).unwrap();
        let Command::Synth(args) = cli.command else {
            panic!("expected synth")
        };
        assert_eq!(args.spec().unwrap(), SynthSpec::default());
    }
}
