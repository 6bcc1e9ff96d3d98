use std::path::Path;

use serde::{Deserialize, Serialize};
use vibspeech::cohort::CohortSpec;
use vibspeech::radar::ChirpConfig;
use vibspeech::transform::TransformConfig;

/// Bad flags, bad config files, or parameters outside their valid range.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Settings shared by all commands, loadable from `--config`.
///
/// Every section is optional in the file; flags given on the command line
/// override what the file says.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub cohort: CohortSpec,
    pub radar: RadarOverrides,
    pub transform: TransformConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarOverrides {
    pub snr_db: Option<f64>,
    pub range_m: Option<f64>,
    pub chirp: Option<ChirpConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub loess_span: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { loess_span: 0.3 }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }
}
