use jnrf_bench::BenchError;
use jnrf_core::CoreError;
use jnrf_corpus::CorpusError;
use jnrf_eval::EvalError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("runtime: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    /// The message on one line.
    pub fn line(&self) -> String {
        self.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Synth(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) => CliError::Config(e.to_string()),
            CoreError::Corpus(_)
            | CoreError::Embedding { .. }
            | CoreError::ParamShape { .. }
            | CoreError::Checkpoint(_)
            | CoreError::TokenId { .. }
            | CoreError::EmptyCorpus
            | CoreError::Io { .. } => CliError::Data(e.to_string()),
            CoreError::Tensor(_) | CoreError::NonFinite(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Core(c) => c.into(),
            BenchError::TooFewTrials(_) | BenchError::Lengths => CliError::Config(e.to_string()),
            BenchError::Incomparable => CliError::Runtime(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
