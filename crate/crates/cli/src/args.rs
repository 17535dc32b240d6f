use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "skillrecall", version, about = "Fit and evaluate student learning-and-forgetting models")]
pub struct Cli {
    /// Seed for every source of randomness in this invocation.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Load a raw log, clean it and write the dataset as JSON.
    Prepare(PrepareArgs),
    /// Print summary statistics of a dataset.
    Stats(StatsArgs),
    /// Encode a dataset into sparse rows for one model family.
    Encode(EncodeArgs),
    /// Fit a model on an encoded design matrix.
    Train(TrainArgs),
    /// Student-level cross-validation over model families and dimensions.
    Cv(CvArgs),
    /// Paired comparisons isolating time windows, per-skill weights and item vs skill counters.
    Ablate(AblateArgs),
    /// Read-outs of fitted models.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Compare practice policies on simulated students.
    ScheduleSim(ScheduleSimArgs),
    /// Write a synthetic log drawn from a forgetful learner population.
    Generate(GenerateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Dataset JSON written by `prepare`, or a raw log.
    #[arg(long = "in")]
    pub input: PathBuf,

    /// Format of a raw log: assist12, kddcup, generic or generic-ms.
    #[arg(long, default_value = "generic")]
    pub format: String,
}

#[derive(Debug, Args, Serialize)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 10)]
    pub min_interactions: usize,

    /// `item,skill` file replacing the log's skill column.
    #[arg(long)]
    pub qmatrix: Option<PathBuf>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct WindowArgs {
    /// Window widths in days, increasing, ending with inf.
    #[arg(long, default_value = "0.0416667,1,7,30,inf")]
    pub windows: String,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Model family, e.g. irt, pfa, dash-items, das3h.
    #[arg(long, default_value = "das3h")]
    pub model: String,

    #[arg(long, default_value_t = 0)]
    pub dim: usize,

    #[command(flatten)]
    pub windows: WindowArgs,

    /// Sparse text output; the layout sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// L2 strength for d = 0 models.
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,

    /// Gibbs iterations for d > 0 models.
    #[arg(long, default_value_t = 300)]
    pub iters: usize,

    /// Predict with the probit of the chain-mean score instead of the
    /// chain-mean probability.
    #[arg(long)]
    pub point_estimate: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Sparse file written by `encode`, with its `.json` sidecar.
    #[arg(long)]
    pub encoded: PathBuf,

    /// Embedding dimension; defaults to the one used at encoding time.
    #[arg(long)]
    pub dim: Option<usize>,

    #[command(flatten)]
    pub fit: FitArgs,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, value_delimiter = ',', default_value = "irt,pfa,dash-items,das3h")]
    pub models: Vec<String>,

    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub dims: Vec<usize>,

    #[arg(long, default_value_t = 5)]
    pub folds: usize,

    #[command(flatten)]
    pub windows: WindowArgs,

    #[command(flatten)]
    pub fit: FitArgs,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Dataset name written in the CSV.
    #[arg(long)]
    pub name: Option<String>,

    #[arg(long, default_value_t = 5)]
    pub folds: usize,

    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,

    #[command(flatten)]
    pub windows: WindowArgs,

    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum AnalyzeCommand {
    /// Per-skill forgetting-curve slopes from the fold models of `cv`.
    Slopes(SlopesArgs),
    /// Probability of answering correctly over given skills at a given day.
    Recall(RecallArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SlopesArgs {
    /// Output directory of `cv`, or a directory of model files.
    #[arg(long)]
    pub model_dir: PathBuf,

    /// adjacent or all-pairs.
    #[arg(long, default_value = "adjacent")]
    pub pairing: String,

    /// CSV output, or JSON when the name ends in `.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RecallArgs {
    #[arg(long)]
    pub model: PathBuf,

    /// CSV with columns `item,day,correct`.
    #[arg(long)]
    pub history: Option<PathBuf>,

    /// Skill ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub skills: Vec<String>,

    #[arg(long)]
    pub at_day: f64,

    /// Student id known to the model; omitted means no student effect.
    #[arg(long)]
    pub student: Option<String>,

    /// Item id; omitted means the mean over items tagged with the skills.
    #[arg(long)]
    pub item: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScheduleSimArgs {
    /// Fitted or generator DAS3H model answering for the students.
    #[arg(long)]
    pub model: PathBuf,

    /// threshold, random or both.
    #[arg(long, default_value = "both")]
    pub policy: String,

    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,

    /// Days.
    #[arg(long, default_value_t = 60.0)]
    pub horizon: f64,

    #[arg(long, default_value_t = 100)]
    pub seeds: u64,

    /// Students per seed.
    #[arg(long, default_value_t = 20)]
    pub students: usize,

    /// Days between sessions.
    #[arg(long, default_value_t = 2.0)]
    pub session_interval: f64,

    #[arg(long, default_value_t = 5)]
    pub items_per_session: usize,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Use the bundled 3-skill, 20-student, 200-interaction configuration.
    #[arg(long)]
    pub fixture: bool,

    #[arg(long, default_value_t = 500)]
    pub students: usize,

    #[arg(long, default_value_t = 8)]
    pub skills: usize,

    #[arg(long, default_value_t = 10)]
    pub items_per_skill: usize,

    #[arg(long, default_value_t = 10)]
    pub multi_skill_items: usize,

    #[arg(long, default_value_t = 100)]
    pub interactions: usize,

    /// Give weight to the unbounded window only.
    #[arg(long)]
    pub no_forgetting: bool,

    /// Also write the generating parameters as a model file.
    #[arg(long)]
    pub generator_out: Option<PathBuf>,

    /// Generic CSV output (timestamps in seconds).
    #[arg(long)]
    pub out: PathBuf,
}
