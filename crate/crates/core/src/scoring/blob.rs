use serde::{Deserialize, Serialize};

use super::features::{extract_features, HOT_THRESHOLD};
use super::{sigmoid, Scorer, ScorerDescriptor, ScoringError};
use crate::clipper::ClipWindow;

/// `score = σ(alpha · new_component_area + beta · max(hot_area_growth, 0) + bias)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobConfig {
    pub alpha: f64,
    pub beta: f64,
    pub bias: f64,
    pub hot_threshold: f32,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            alpha: 400.0,
            beta: 200.0,
            bias: -6.0,
            hot_threshold: HOT_THRESHOLD,
        }
    }
}

/// Rule-based scorer: a warm region that appears within the clip and was not
/// present in its first frame.
#[derive(Debug, Clone, Default)]
pub struct BlobScorer {
    pub config: BlobConfig,
}

impl BlobScorer {
    pub fn new(config: BlobConfig) -> Self {
        Self { config }
    }
}

impl Scorer for BlobScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        ScorerDescriptor::new("blob", "1")
    }

    fn score(&self, clip: &ClipWindow) -> Result<f64, ScoringError> {
        let c = &self.config;
        let fv = extract_features(clip, c.hot_threshold);
        let z = c.alpha * fv.new_component_area + c.beta * fv.hot_area_growth.max(0.0) + c.bias;
        Ok(sigmoid(z))
    }
}
