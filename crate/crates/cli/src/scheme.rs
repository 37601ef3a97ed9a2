use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use branchruin_core::weights::WeightScheme;

use crate::error::CliError;
use crate::format::read_tree_file;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Unit,
    Orrw,
    Biased,
    File,
}

/// Weight scheme flags shared by every subcommand that needs one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    #[arg(long = "scheme", value_enum, default_value = "orrw")]
    pub kind: SchemeKind,
    /// Reinforced weight for orrw, reinforcement ratio for biased.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Tree file whose weight columns give the scheme (defaults to the
    /// tree file itself).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights_file: Option<std::path::PathBuf>,
}

impl SchemeConfig {
    pub fn orrw(delta: f64) -> Self {
        Self { kind: SchemeKind::Orrw, delta, beta: 2.0, weights_file: None }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }

    /// Builds the scheme; `from_tree` supplies the tree file's own weight
    /// columns when `--scheme file` is given without `--weights-file`.
    pub fn resolve(&self, from_tree: Option<WeightScheme>) -> Result<WeightScheme, CliError> {
        Ok(match self.kind {
            SchemeKind::Unit => WeightScheme::Unit,
            SchemeKind::Orrw => WeightScheme::orrw(self.delta)?,
            SchemeKind::Biased => WeightScheme::biased(self.beta, self.delta)?,
            SchemeKind::File => match &self.weights_file {
                Some(p) => read_tree_file(p)?
                    .scheme()
                    .ok_or_else(|| CliError::Usage(format!("{} has no weight columns", p.display())))?,
                None => from_tree.ok_or_else(|| CliError::Usage("--scheme file needs weight columns".into()))?,
            },
        })
    }
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self::orrw(1.0)
    }
}
