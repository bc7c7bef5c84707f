//! `surfreg`: batch entry points for model preparation, synthetic scenario
//! generation, registration and evaluation.

mod commands;
mod failure;
mod files;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::{CliResult, EXIT_INPUT};

#[derive(Debug, Parser)]
#[command(name = "surfreg", version, about = "Markerless surface registration toolkit")]
struct Cli {
    /// Log per-iteration ICP objectives and stage details to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    /// Record wall-clock timings in outputs and manifests (breaks
    /// byte-identical reruns).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a model point cloud from a PLY/OBJ mesh.
    PrepareModel(PrepareModelArgs),
    /// Generate a synthetic capture from a scenario TOML file.
    Simulate(SimulateArgs),
    /// Register a model cloud to a depth capture.
    Register(RegisterArgs),
    /// Compute per-trial error metrics, or compare two error lists.
    Evaluate(EvaluateArgs),
    /// Compare relative-distance maps of two tracings of the same anatomy.
    TraceEval(TraceEvalArgs),
}

#[derive(Debug, Args)]
pub struct PrepareModelArgs {
    /// Input mesh (.ply or .obj), mm.
    pub mesh: PathBuf,
    /// Output PLY point cloud.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = surfreg::sampling::DEFAULT_VOXEL_MM)]
    pub voxel_mm: f64,
    #[arg(long, default_value_t = surfreg::sampling::DEFAULT_TARGET_POINTS)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario TOML file.
    pub spec: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Depth capture (PLY, or x,y,z CSV), depth-sensor frame.
    #[arg(long)]
    pub scene: PathBuf,
    /// Prepared model cloud, CT frame.
    #[arg(long)]
    pub model: PathBuf,
    /// Initial pose World ← ModelCt: a file or 16 row-major numbers.
    #[arg(long)]
    pub init_pose: String,
    /// World ← DepthSensor pose; identity when omitted.
    #[arg(long)]
    pub world_from_sensor: Option<String>,
    /// Stylus samples (x,y,z CSV, depth-sensor frame) for bias correction.
    #[arg(long, conflicts_with = "skip_bias")]
    pub stylus: Option<PathBuf>,
    /// Do not correct depth bias.
    #[arg(long)]
    pub skip_bias: bool,
    /// ROI center `x,y,z` in the depth-sensor frame; defaults to the model
    /// centroid under the initial pose.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub roi_center: Option<[f64; 3]>,
    #[arg(long)]
    pub roi_radius: Option<f64>,
    /// Registration config TOML.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Stop after coarse alignment.
    #[arg(long)]
    pub coarse_only: bool,
    /// Ground truth DepthSensor ← ModelCt; adds a `pose_error` entry.
    #[arg(long)]
    pub truth: Option<String>,
    /// Output JSON.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Traced overlay points, one file per trial.
    #[arg(long, required_unless_present = "compare")]
    pub traced: Vec<PathBuf>,
    /// Reference skin tracing, one file per trial.
    #[arg(long)]
    pub reference: Vec<PathBuf>,
    /// Trial labels; file stems when omitted.
    #[arg(long)]
    pub trial: Vec<String>,
    /// Disjoint pools per trial for the metric ranges.
    #[arg(long, default_value_t = 1)]
    pub pools: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = surfreg::metrics::DEFAULT_COVERAGE_THRESHOLD_MM)]
    pub threshold_mm: f64,
    #[arg(long, default_value_t = surfreg::metrics::DEFAULT_EMD_DIRECTIONS)]
    pub emd_directions: usize,
    /// Compare two error lists (one value per CSV row) with a permutation
    /// test on medians instead.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with_all = ["traced", "reference", "trial", "csv"])]
    pub compare: Option<Vec<PathBuf>>,
    #[arg(long, default_value_t = 600)]
    pub n_sub: usize,
    #[arg(long, default_value_t = surfreg::metrics::DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    /// Table CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON output.
    #[arg(long, required_unless_present = "csv")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceEvalArgs {
    /// AR-traced skin (PLY or CSV), world frame.
    #[arg(long)]
    pub ar_surface: PathBuf,
    #[arg(long)]
    pub ar_internal: PathBuf,
    /// CT skin (PLY or CSV), CT frame.
    #[arg(long)]
    pub ct_surface: PathBuf,
    #[arg(long)]
    pub ct_internal: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

fn parse_point(text: &str) -> Result<[f64; 3], String> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("invalid number '{v}'")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(values).map_err(|v| format!("expected x,y,z, got {} values", v.len()))
}

fn run(cli: Cli) -> CliResult<()> {
    let flags = commands::Flags { verbose: cli.verbose, timings: cli.timings };
    match cli.command {
        Command::PrepareModel(a) => commands::prepare_model(&a, flags),
        Command::Simulate(a) => commands::simulate(&a, flags),
        Command::Register(a) => commands::register(&a, flags),
        Command::Evaluate(a) => commands::evaluate(&a, flags),
        Command::TraceEval(a) => commands::trace_eval(&a, flags),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
