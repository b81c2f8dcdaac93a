//! TOML run configuration. Every key is optional; command-line flags take
//! precedence over file values, which take precedence over built-in defaults.

use std::path::Path;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub labeled_frac: Option<f64>,
    pub grid: Option<usize>,
    pub length_scale: Option<f64>,
    pub forcing: Option<f64>,
    pub label_point: Option<f64>,
    pub train_size: Option<usize>,
    pub val_size: Option<usize>,
    pub test_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub profile: Option<String>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub hidden: Option<usize>,
    pub lr: Option<f64>,
    pub lambda_sc: Option<f64>,
    pub lambda_uc: Option<f64>,
    pub lambda_ur: Option<f64>,
    pub step: Option<f64>,
    pub unlabeled_batch: Option<usize>,
    pub anchors: Option<usize>,
    pub budget: Option<usize>,
    pub anchor_mode: Option<String>,
    pub eval_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub fractions: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}
