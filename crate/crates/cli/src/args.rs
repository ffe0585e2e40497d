use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use surprisal_split::noisy_channel::{DistanceMode, NoiseParams};
use surprisal_split::ReportFormat;

/// Split word surprisal into heuristic surprise (A) and discrepancy signal
/// (B) under a noisy-channel model of the input.
#[derive(Debug, Parser)]
#[command(name = "surprisal-split", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose the target surprisal of every stimulus at one lambda
    Decompose(DecomposeArgs),
    /// Condition means of A and B over a grid of lambda values
    Sweep(SweepArgs),
    /// Mean differences to Control per condition at one lambda
    Effects(EffectsArgs),
    /// Mean model surprisal beside mean human cloze per condition
    Compare(CompareArgs),
    /// Regress ERP amplitudes on A, B and S (OLS, not LMM)
    Fit(FitArgs),
    /// Generate seeded synthetic amplitudes from a decomposition report
    SynthAmplitudes(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerChoice {
    /// Smoothed n-gram model trained on --corpus
    Ngram,
    /// HTTP model service at --endpoint
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceChoice {
    /// Edit distance divided by the longer word length
    Normalized,
    /// Edit operation count
    Raw,
}

impl From<DistanceChoice> for DistanceMode {
    fn from(c: DistanceChoice) -> Self {
        match c {
            DistanceChoice::Normalized => DistanceMode::Normalized,
            DistanceChoice::Raw => DistanceMode::Raw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatChoice {
    Csv,
    Json,
}

impl From<FormatChoice> for ReportFormat {
    fn from(c: FormatChoice) -> Self {
        match c {
            FormatChoice::Csv => ReportFormat::Csv,
            FormatChoice::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Scorer")]
pub struct ScorerArgs {
    /// Language model backend
    #[arg(long, value_enum, default_value_t = ScorerChoice::Ngram)]
    pub scorer: ScorerChoice,
    /// Training corpus for the n-gram scorer, one sentence per line
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// N-gram order
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Additive smoothing constant of the n-gram scorer
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Base URL of the model service
    #[arg(long, value_name = "URL", env = "SURPRISAL_SPLIT_LM_URL", hide_env_values = true)]
    pub endpoint: Option<String>,
    /// Maximum concurrent requests to the model service
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    /// Per-request timeout for the model service, in seconds
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    /// Top-k depth used to find the prior of an observed word outside the candidate list
    #[arg(long, default_value_t = 1000)]
    pub veridical_search_k: usize,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Noise model")]
pub struct NoiseArgs {
    /// Number of masked-LM candidates per target
    #[arg(long, default_value_t = 100)]
    pub top_k: usize,
    /// Distance used by the noise likelihood
    #[arg(long, value_enum, default_value_t = DistanceChoice::Normalized)]
    pub distance_mode: DistanceChoice,
    /// Do not add the observed word to the candidate set when it misses the top-k
    #[arg(long)]
    pub no_force_veridical: bool,
}

impl NoiseArgs {
    pub fn params(&self, lambda: f64) -> NoiseParams {
        NoiseParams {
            lambda,
            distance_mode: self.distance_mode.into(),
            top_k: self.top_k,
            force_include_veridical: !self.no_force_veridical,
        }
    }
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Output")]
pub struct OutputArgs {
    /// Report path; standard output when omitted
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Report format; defaults to the --output extension, else csv
    #[arg(long, value_enum)]
    pub format: Option<FormatChoice>,
}

impl OutputArgs {
    pub fn format(&self) -> ReportFormat {
        match (self.format, &self.output) {
            (Some(f), _) => f.into(),
            (None, Some(path)) => ReportFormat::from_path(path),
            (None, None) => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Stimuli CSV (item_id,condition,sentence,target_index[,human_cloze])
    #[arg(long, value_name = "PATH")]
    pub stimuli: PathBuf,
    /// Noise rate, >= 0
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Worker threads for item evaluation
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Stimuli CSV (item_id,condition,sentence,target_index[,human_cloze])
    #[arg(long, value_name = "PATH")]
    pub stimuli: PathBuf,
    /// Comma-separated lambda grid
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub lambdas: Vec<f64>,
    /// Add lambda = 0 and lambda = 1e6 to the grid
    #[arg(long)]
    pub with_endpoints: bool,
    /// Largest tolerated step against the expected trend, in nats
    #[arg(long, default_value_t = 0.1)]
    pub trend_tolerance: f64,
    /// Number of tolerated steps against the expected trend
    #[arg(long, default_value_t = 1)]
    pub max_reversals: usize,
    /// Worker threads for item evaluation
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EffectsArgs {
    /// Stimuli CSV (item_id,condition,sentence,target_index[,human_cloze])
    #[arg(long, value_name = "PATH")]
    pub stimuli: PathBuf,
    /// Noise rate, >= 0
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Worker threads for item evaluation
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Stimuli CSV (item_id,condition,sentence,target_index[,human_cloze])
    #[arg(long, value_name = "PATH")]
    pub stimuli: PathBuf,
    /// Worker threads for item evaluation
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Decomposition report written by `decompose` (CSV or JSON)
    #[arg(long, value_name = "PATH")]
    pub decompositions: PathBuf,
    /// Amplitudes CSV (item_id,subject_id,condition,n400_amp,p600_amp)
    #[arg(long, value_name = "PATH")]
    pub amplitudes: PathBuf,
    /// Fit on raw scales instead of z-scored variables
    #[arg(long)]
    pub no_standardize: bool,
    /// Average amplitudes per item and condition before fitting
    #[arg(long)]
    pub item_means: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Decomposition report written by `decompose` (CSV or JSON)
    #[arg(long, value_name = "PATH")]
    pub decompositions: PathBuf,
    /// Number of synthetic subjects
    #[arg(long, default_value_t = 20)]
    pub subjects: usize,
    /// N400 change per nat of A
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    pub n400_slope: f64,
    /// N400 intercept
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub n400_intercept: f64,
    /// P600 change per nat of B
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub p600_slope: f64,
    /// P600 intercept
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub p600_intercept: f64,
    /// Standard deviation of the Gaussian trial noise
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub noise_sd: f64,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Amplitudes CSV path; standard output when omitted
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}
