use serde::{Deserialize, Serialize};

use super::{CollocationCounts, LossWeights, PdeProblem, PinnError, ProblemId, TrainConfig};

/// Problem file: every field except `problem` is optional and falls back
/// to the benchmark default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub problem: ProblemId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reynolds: Option<f64>,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub counts: CollocationCounts,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ProblemConfig {
    pub fn new(problem: ProblemId) -> Self {
        Self {
            problem,
            domain: None,
            nu: None,
            k: None,
            sigma: None,
            reynolds: None,
            weights: LossWeights::default(),
            counts: CollocationCounts::default(),
            train: TrainConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PinnError> {
        toml::from_str(text).map_err(|e| PinnError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem config serializes")
    }

    /// Resolved, validated problem.
    pub fn to_problem(&self) -> Result<PdeProblem, PinnError> {
        let mut p = PdeProblem::new(self.problem);
        if let Some(d) = &self.domain {
            p.domain = d.clone();
        }
        p.nu = self.nu.unwrap_or(p.nu);
        p.k = self.k.unwrap_or(p.k);
        p.sigma = self.sigma.unwrap_or(p.sigma);
        p.reynolds = self.reynolds.unwrap_or(p.reynolds);
        p.weights = self.weights;
        p.validate()?;
        Ok(p)
    }
}
