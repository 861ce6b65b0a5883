//! Command-line driver: dataset generation, training, evaluation, ablation,
//! condition assessment, visualization and parameter accounting.

mod commands;
mod rundir;

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::parameter_report;
pub use rundir::{create_run_dir, timestamp};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "aecif", version, about = "Bridge element and corrosion segmentation")]
pub struct Cli {
    /// train.cfg file overlaid on the preset
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root under which run directories are created
    #[arg(long, global = true, value_name = "DIR", default_value = "runs")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Config override, applied after the config file (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Base configuration before the file and overrides
    #[arg(long, global = true, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    /// Suppress progress and report output on stdout
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Full,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset
    GenData(GenDataArgs),
    /// Train a model and keep the best-validation checkpoint
    Train(DataArgs),
    /// Metrics report for a checkpoint or a directory of predicted masks
    Eval(EvalArgs),
    /// Train and compare the six ablation variants
    Ablate(DataArgs),
    /// Per-element corrosion condition reports
    Assess(AssessArgs),
    /// Export feature maps, attention masks and predictions as images
    Viz(VizArgs),
    /// Trainable parameters per module
    CountParams,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output dataset directory
    #[arg(long, value_name = "DIR")]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub count: usize,
    /// Image size, `N` or `HxW`
    #[arg(long, default_value = "64")]
    pub size: String,
    /// Test split size (default: a tenth of the samples, at least one)
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory (overrides `data_dir` from the config)
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR", conflicts_with = "predictions")]
    pub checkpoint: Option<PathBuf>,
    /// Directory with masks_element/ and masks_defect/ holding predicted masks
    #[arg(long, value_name = "DIR")]
    pub predictions: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long, value_name = "DIR", required_unless_present = "ground_truth")]
    pub checkpoint: Option<PathBuf>,
    /// Grade the annotated masks instead of model predictions
    #[arg(long)]
    pub ground_truth: bool,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Smallest graded region in pixels (default: 16 desk, 64 full)
    #[arg(long)]
    pub min_area: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Sample id (default: first id of the split)
    #[arg(long)]
    pub id: Option<u32>,
    /// Feature channel to render
    #[arg(long, default_value_t = 1)]
    pub channel: usize,
}

static QUIET: AtomicBool = AtomicBool::new(false);

fn quiet() -> bool {
    QUIET.load(Ordering::Relaxed)
}

/// `println!` unless `--quiet` was given.
macro_rules! say {
    ($($arg:tt)*) => {
        if !$crate::quiet() {
            println!($($arg)*);
        }
    };
}
pub(crate) use say;

/// Errors that map to an exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(aecif::Error),
}

impl From<aecif::Error> for CliError {
    fn from(e: aecif::Error) -> Self {
        CliError::Run(e)
    }
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit status: 0 success, 1 usage error, 2 data or config error.
pub fn dispatch<S: AsRef<str>>(args: &[S]) -> i32 {
    let args: Vec<&str> = args.iter().map(AsRef::as_ref).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    QUIET.store(cli.quiet, Ordering::Relaxed);
    match commands::run(&cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `aecif --help` for usage");
            EXIT_USAGE
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}
