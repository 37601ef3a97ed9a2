use std::io;

use branchruin_core::flows::FlowError;
use branchruin_core::percolation::PercolationError;
use branchruin_core::ruin::RuinError;
use branchruin_core::tree::TreeError;
use branchruin_core::walker::WalkError;
use branchruin_core::weights::WeightError;

use crate::format::FormatError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    File { path: std::path::PathBuf, source: FormatError },
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Tree(#[from] TreeError),
    #[error("{0}")]
    Weights(#[from] WeightError),
    #[error("{0}")]
    Ruin(#[from] RuinError),
    #[error("{0}")]
    Walk(#[from] WalkError),
    #[error("{0}")]
    Percolation(#[from] PercolationError),
    #[error("{0}")]
    Flow(#[from] FlowError),
    /// A computation finished but a numerical diagnostic failed.
    #[error("diagnostic failed: {0}")]
    Diagnostic(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Diagnostic(_) | Self::Ruin(RuinError::Inconsistent { .. }) => 4,
            _ => 3,
        }
    }
}
