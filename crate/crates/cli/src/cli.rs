use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "feedlab", version, about = "Run and analyze misinformation-intervention experiments")]
pub struct Cli {
    /// Experiment directory.
    #[arg(short = 'w', long, global = true, env = "FEEDLAB_WORKSPACE", default_value = ".")]
    pub workspace: PathBuf,

    /// More logging (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create feedlab.toml, logs/ and reports/.
    Init(InitArgs),
    /// Validate a claims file and copy it into the workspace.
    Ingest(IngestArgs),
    /// Pregenerate LLM explanations for every claim.
    Generate(GenerateArgs),
    /// Serve the participant HTTP API.
    Serve(ServeArgs),
    /// Play simulated participants against the engine.
    Simulate(SimulateArgs),
    /// Accuracy, interaction and helpfulness report from a log.
    Analyze(AnalyzeArgs),
    /// Linguistic metrics of explanation texts.
    #[command(subcommand)]
    Lingua(LinguaCommand),
    /// Write every report artifact.
    Report(ReportArgs),
    /// Set unparsable log lines aside.
    Recover(RecoverArgs),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Directory to initialize; defaults to --workspace.
    pub dir: Option<PathBuf>,
    /// Also write synthetic claims and a synthetic reference table.
    #[arg(long)]
    pub demo: bool,
    /// Experiment seed written to the config.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub input: PathBuf,
    /// Defaults to the file extension.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Only print the summary.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Use an offline stand-in that writes explanations of this many words.
    #[arg(long, value_name = "WORDS")]
    pub mock: Option<usize>,
    /// Attribute set for personalized explanations, e.g. "conservative, uneducated, male".
    /// Repeatable. Defaults to the reference table's groups.
    #[arg(long = "attrs", value_name = "ATTRS")]
    pub attrs: Vec<String>,
    /// Skip personalized explanations.
    #[arg(long)]
    pub zero_shot_only: bool,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Log directory; defaults to <workspace>/logs.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Offline explanations of this many words instead of pregenerated ones.
    #[arg(long, value_name = "WORDS")]
    pub mock: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub agents: usize,
    /// JSON agent policy, either a single policy or {"default": ..., "per_arm": {...}}.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Drive a running service instead of an embedded engine.
    #[arg(long)]
    pub url: Option<String>,
    /// Log directory for the embedded engine; defaults to <workspace>/logs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Agent seed; defaults to the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    #[arg(long, value_name = "WORDS")]
    pub mock: Option<usize>,
    /// Agents play as <prefix>000000, <prefix>000001, ...
    #[arg(long, default_value = "u")]
    pub user_prefix: String,
    /// Add sessions to a log that already has data.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BeforeArg {
    All,
    Revealed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UncertainArg {
    Incorrect,
    Exclude,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisOpts {
    /// Log directory; defaults to <workspace>/logs.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Restrict to claims matching key=value (topic=medical, veracity=false).
    #[arg(long)]
    pub subset: Option<String>,
    /// Which pre-phase judgments count toward "before" accuracy.
    #[arg(long, value_enum, default_value_t = BeforeArg::All)]
    pub before: BeforeArg,
    /// Overrides analysis.uncertain from the config.
    #[arg(long, value_enum)]
    pub uncertain: Option<UncertainArg>,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides analysis.bootstrap_resamples from the config.
    #[arg(long)]
    pub resamples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub opts: AnalysisOpts,
    /// Only this arm.
    #[arg(long)]
    pub arm: Option<String>,
    /// With --arm, print only this phase's accuracy.
    #[arg(long, value_enum)]
    pub phase: Option<PhaseArg>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
}

#[derive(Debug, Subcommand)]
pub enum LinguaCommand {
    /// Compare length, readability and formality across groups of texts.
    Compare(LinguaCompareArgs),
}

#[derive(Debug, Args)]
pub struct LinguaCompareArgs {
    /// JSON lines of {"group": ..., "text": ...}.
    #[arg(long)]
    pub input: PathBuf,
    /// Groups in display order; the first is the reference. Ranges like g1..g6 expand.
    #[arg(long)]
    pub groups: Option<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
    /// External formality scorer: reads text on stdin, prints 0-100.
    #[arg(long, value_name = "CMD")]
    pub scorer_cmd: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub opts: AnalysisOpts,
    /// Output directory; defaults to <workspace>/reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Log directory; defaults to <workspace>/logs.
    #[arg(long)]
    pub log: Option<PathBuf>,
}
