use surprisal_split::analysis::AnalysisError;
use surprisal_split::experiment::ExperimentError;
use surprisal_split::report::ReportError;
use surprisal_split::ScorerError;

/// A failed run, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Scorer(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Scorer(_) => 4,
            CliError::Data(_) => 1,
        }
    }
}

impl From<ScorerError> for CliError {
    fn from(e: ScorerError) -> Self {
        let message = e.to_string();
        match e {
            ScorerError::Io { .. } => CliError::Io(message),
            ScorerError::InvalidArgument(_) => CliError::Config(message),
            ScorerError::EmptyCorpus => CliError::Data(message),
            ScorerError::Unavailable(_) | ScorerError::Protocol(_) => CliError::Scorer(message),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        let message = e.to_string();
        match e {
            ReportError::Write { .. } | ReportError::Read { .. } => CliError::Io(message),
            ReportError::Malformed(_) => CliError::Data(message),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        if e.is_scorer_failure() {
            return CliError::Scorer(e.to_string());
        }
        let message = e.to_string();
        match e {
            ExperimentError::Io { .. } => CliError::Io(message),
            ExperimentError::InvalidLambdas(_) | ExperimentError::Params(_) => CliError::Config(message),
            ExperimentError::Report(inner) => inner.into(),
            _ => CliError::Data(message),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let message = e.to_string();
        match e {
            AnalysisError::Io { .. } => CliError::Io(message),
            AnalysisError::InvalidSpec(_) => CliError::Config(message),
            AnalysisError::Report(inner) => inner.into(),
            _ => CliError::Data(message),
        }
    }
}
