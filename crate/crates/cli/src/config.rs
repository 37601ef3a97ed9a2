use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::scheme::SchemeConfig;
use crate::source::TreeSource;
use crate::sweep::PhaseSweepParams;

/// Everything a sweep run depends on. A run is a pure function of this
/// value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tree: TreeSource,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: PhaseSweepParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::SchemeKind;

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig {
            tree: "zd:4".parse().unwrap(),
            scheme: SchemeConfig::orrw(1.0),
            seed: 7,
            sweep: PhaseSweepParams { deltas: vec![0.5, 8.0], ..PhaseSweepParams::default() },
            output: None,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        let minimal = ExperimentConfig::from_json(r#"{"tree": "zd:2", "sweep": {"deltas": [1.0]}}"#).unwrap();
        assert_eq!(minimal.sweep.rt_depth, PhaseSweepParams::default().rt_depth);
        assert!(ExperimentConfig::from_json(r#"{"tree": "zd:2", "bogus": 1}"#).is_err());
        let partial =
            ExperimentConfig::from_json(r#"{"tree": "zd:2", "scheme": {"kind": "biased", "delta": 3}}"#).unwrap();
        assert_eq!((partial.scheme.kind, partial.scheme.delta, partial.scheme.beta), (SchemeKind::Biased, 3.0, 2.0));
    }
}
