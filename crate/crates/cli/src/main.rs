//! `mcstain`: command-line driver for the virtual staining pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 data or format, 3 numerical failure.

mod commands;
mod config;
mod sidecar;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::BackendKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] mcstain::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use mcstain::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::Parameter(_)) => 1,
            CliError::Core(E::Numerical(_) | E::Degenerate(_) | E::Fit(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mcstain", version, about = "Multi-channel feature learning and virtual staining")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic phantom: cube, truth planes, stain and label map.
    Simulate(SimulateArgs),
    /// Conventional channels (NR532, NR266, R266) from a cube.
    Extract(ExtractArgs),
    /// Learn K time-domain features from a cube.
    Learn(LearnArgs),
    /// Append feature images to a channel stack.
    Features(FeaturesArgs),
    /// Sweep K and pick the best feature count.
    Kstudy(KStudyArgs),
    /// Train and rank every channel combination.
    Cstudy(CStudyArgs),
    /// Train a colorizer on the training region.
    Train(TrainArgs),
    /// Virtually stain a channel stack with a trained linear model.
    Stain(StainArgs),
    /// Score a stained image against the truth.
    Evaluate(EvaluateArgs),
    /// Print the best / moderate / worst rows of a C-study table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    ShapeCoded,
    ThreeShape,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Phantom spec as TOML; defaults to the preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "shape-coded")]
    pub preset: Preset,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Output directory (default: paths.out_dir, else the current one).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the effective spec as TOML and exit.
    #[arg(long)]
    pub dump_spec: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub cube: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub clip: Option<f64>,
    /// Also write the Scatter plane.
    #[arg(long)]
    pub with_scatter: bool,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(long)]
    pub cube: Option<PathBuf>,
    #[arg(long, short)]
    pub k: Option<usize>,
    /// Fraction of nonzero traces to learn from.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Seeds both the trace subset and the clustering.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub cube: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Stack to extend; the result holds only the features when omitted.
    #[arg(long)]
    pub stack: Option<PathBuf>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyInputs {
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Control points (src_x,src_y,dst_x,dst_y) registering the truth image.
    #[arg(long)]
    pub control_points: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct KStudyArgs {
    #[arg(long)]
    pub cube: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: StudyInputs,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CStudyArgs {
    #[arg(long)]
    pub stack: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: StudyInputs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub stack: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: StudyInputs,
    /// Channels to train on, e.g. "NR532+R266+m_f1" (default: all).
    #[arg(long)]
    pub combination: Option<String>,
    /// Linear: the PLCM model. Adversarial: the loss-curve CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also stain the whole stack with the trained model.
    #[arg(long)]
    pub stain_out: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StainArgs {
    #[arg(long)]
    pub stack: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Region {
    All,
    /// The held-out columns right of the training split.
    Test,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub control_points: Option<PathBuf>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "all")]
    pub region: Region,
    /// Append the scores to this CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row label for --out (default: the prediction's file name).
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// C-study CSV written by `cstudy`.
    pub table: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcstain: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::RunConfig::load(cli.global.config.as_deref())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(a, cfg),
        Command::Extract(a) => commands::extract(a, cfg),
        Command::Learn(a) => commands::learn(a, cfg),
        Command::Features(a) => commands::features(a, cfg),
        Command::Kstudy(a) => commands::kstudy(a, cfg),
        Command::Cstudy(a) => commands::cstudy(a, cfg),
        Command::Train(a) => commands::train(a, cfg),
        Command::Stain(a) => commands::stain(a, cfg),
        Command::Evaluate(a) => commands::evaluate(a, cfg),
        Command::Report(a) => commands::report(a, cfg),
    })
}
