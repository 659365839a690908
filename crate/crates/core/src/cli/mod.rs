//! Batch command-line front end. Each subcommand is one pipeline stage; stages exchange
//! data only through files.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::conditioning::Variant;
use crate::metrics::MetricMode;

pub use config::{RunConfig, TargetSpec};

#[derive(Debug, Parser)]
#[command(name = "boxpose", version, about = "3D box conditioning, masks, crops and pose metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render conditioning maps for each target.
    Render,
    /// Write hull and occlusion-aware inpainting masks for each target.
    Mask,
    /// Cut square object crops out of the frame images.
    Crop,
    /// Apply the instance filters and list the surviving instances.
    Filter,
    /// Generate placement instructions from drivable regions.
    Place,
    /// Score detections against instructions.
    Eval,
    /// Fréchet distance between two feature files.
    /// Files may also come from `--fid` or the config file.
    Fid {
        a: Option<PathBuf>,
        b: Option<PathBuf>,
    },
}

/// Flags shared by all subcommands. Unset flags fall back to the config file, then to
/// built-in defaults.
#[derive(Debug, Default, Args)]
pub struct Flags {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub annotations: Option<PathBuf>,
    #[arg(long, global = true)]
    pub detections: Option<PathBuf>,
    #[arg(long, global = true)]
    pub drivable: Option<PathBuf>,
    #[arg(long, global = true)]
    pub instructions: Option<PathBuf>,
    /// Comma-separated instance tokens, or a JSON file written by `filter`.
    #[arg(long, global = true)]
    pub instances: Option<String>,
    /// Directory of per-instance masks named `<instance_token>.png`.
    #[arg(long, global = true)]
    pub occluder_masks: Option<PathBuf>,
    /// Root for frame image paths; defaults to the annotation file's directory.
    #[arg(long, global = true)]
    pub images: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub variant: Option<Variant>,
    /// Output size `WxH`. Cropped outputs use `W` as the square edge.
    #[arg(long, global = true, value_parser = parse_size)]
    pub size: Option<(u32, u32)>,
    #[arg(long, global = true)]
    pub crop_factor: Option<f64>,
    #[arg(long, global = true)]
    pub cropped: bool,
    /// Edit applied to instance targets: replace, flip, rotate:<rad>, enlarge:<f>[,<f>,<f>].
    #[arg(long, global = true)]
    pub edit: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every logical CPU.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub metric_mode: Option<MetricMode>,
    /// Two feature files whose Fréchet distance is appended to the report.
    #[arg(long, global = true, num_args = 2, value_names = ["A", "B"])]
    pub fid: Option<Vec<PathBuf>>,
}

pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|e| format!("bad width in {s:?}: {e}"))?;
    let h: u32 = h.trim().parse().map_err(|e| format!("bad height in {s:?}: {e}"))?;
    if w == 0 || h == 0 {
        return Err(format!("size must be positive, got {s:?}"));
    }
    Ok((w, h))
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some targets were skipped or degraded.
    Partial,
}

pub fn run_with(cli: Cli) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    pool.install(|| commands::dispatch(&cli.command, &cfg))
}

/// Parses the process arguments and runs; exit code 0 on success, 2 on partial success
/// and 1 on error.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match run_with(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
