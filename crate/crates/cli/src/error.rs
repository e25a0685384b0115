use std::path::Path;

use meanfield_eval::EvalError;
use meanfield_stats::StatsError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt archive at byte {offset}: {reason}")]
    CorruptArchive { offset: u64, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] meanfield::Error),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error(transparent)]
    Stats(#[from] StatsError),

    #[error("self-test failed: {0}")]
    SelfTest(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::UnsupportedFormat(_) => "unsupported_format",
            CliError::CorruptArchive { .. } => "corrupt_archive",
            CliError::InvalidInput(_) => "invalid_input",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Core(_) | CliError::Eval(_) | CliError::Stats(_) if self.is_numerical() => "numerical",
            CliError::Core(_) | CliError::Eval(_) | CliError::Stats(_) => "data",
            CliError::SelfTest(_) => "self_test",
        }
    }

    fn is_numerical(&self) -> bool {
        match self {
            CliError::Core(e) | CliError::Eval(EvalError::Core(e)) => e.is_numerical(),
            CliError::SelfTest(_) => true,
            _ => false,
        }
    }

    /// 1 for usage errors, 3 for numerical failures, 2 for anything wrong
    /// with the data or files.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ if self.is_numerical() => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        });
        if let CliError::CorruptArchive { offset, .. } = self {
            v["error"]["offset"] = json!(offset);
        }
        v
    }
}
