use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: qhd::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output: {0}")]
    Output(String),

    #[error("replay: {0}")]
    Replay(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn core(module: &'static str) -> impl FnOnce(qhd::Error) -> Self {
        move |source| CliError::Core { module, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core { source, .. } => match source {
                qhd::Error::CapacityExceeded { .. } | qhd::Error::TooManySites { .. } => {
                    "capacity-exceeded"
                }
                qhd::Error::DenseCapExceeded { .. } => "dense-cap-exceeded",
                qhd::Error::NonConvergence { .. } => "non-convergence",
                qhd::Error::UnrealizablePattern(_) => "unrealizable-pattern",
                _ => "computation",
            },
            CliError::Io { .. } => "io",
            CliError::Output(_) => "output",
            CliError::Replay(_) => "replay",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" | "replay" | "unrealizable-pattern" => 2,
            "capacity-exceeded" => 3,
            "dense-cap-exceeded" => 4,
            "non-convergence" => 5,
            "io" | "output" => 6,
            _ => 1,
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            CliError::Core { module, .. } => module,
            _ => "experiments-cli",
        }
    }

    pub fn record(&self) -> serde_json::Value {
        json!({
            "status": "error",
            "kind": self.kind(),
            "module": self.module(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
