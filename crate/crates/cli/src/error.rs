use std::path::PathBuf;

use swift_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable class of the failure.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Checkpoint(_) => "checkpoint",
            CliError::Io { .. } => "io",
            CliError::Core(e) => match e {
                CoreError::Config(_)
                | CoreError::ConfigMismatch(_)
                | CoreError::UnsupportedWavelet(_)
                | CoreError::KernelTooLarge { .. }
                | CoreError::InvalidParams(_) => "config",
                CoreError::Ingestion { .. }
                | CoreError::InsufficientLength { .. }
                | CoreError::RangeTooShort { .. }
                | CoreError::EmptySplit(_)
                | CoreError::InvalidData(_) => "data",
                CoreError::Io { .. } => "io",
                CoreError::Divergence { .. }
                | CoreError::NonFiniteGrad(_)
                | CoreError::NonFiniteParam(_)
                | CoreError::StepOutOfRange { .. } => "train",
                CoreError::ZeroNorm | CoreError::SingularFit(_) => "analysis",
                _ => "model",
            },
        }
    }

    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" | "config" => 2,
            "data" => 3,
            "checkpoint" => 4,
            "io" => 5,
            "train" => 6,
            "analysis" => 7,
            _ => 8,
        }
    }

    /// One line: `swift: error[kind]: message`.
    pub fn render(&self) -> String {
        let mut msg = self.to_string();
        let mut src = std::error::Error::source(self);
        // transparent variants already print their source
        if matches!(self, CliError::Core(_)) {
            src = src.and_then(std::error::Error::source);
        }
        while let Some(s) = src {
            let text = s.to_string();
            if !msg.contains(&text) {
                msg.push_str(": ");
                msg.push_str(&text);
            }
            src = s.source();
        }
        let line = msg.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("swift: error[{}]: {line}", self.kind())
    }
}
