//! Clip scorers: `ClipWindow → [0, 1]`.
//!
//! Three implementations share the [`Scorer`] contract:
//!
//! - [`BlobScorer`], a fixed rule on the emergence of new hot regions;
//! - [`LogisticScorer`], logistic regression over [`FeatureVector`]s, trained
//!   with the class-weighted binary cross-entropy in [`weighted_bce`];
//! - [`ExternalScorer`], a file-exchange adapter for out-of-process models.

mod blob;
mod external;
mod features;
mod logistic;

pub use blob::{BlobConfig, BlobScorer};
pub use external::{read_scores, write_exchange, ExternalScorer, CLIPS_CSV, CLIPS_DIR, SCORES_CSV};
pub use features::{extract_features, largest_component, FeatureVector, FEATURE_COUNT, HOT_THRESHOLD};
pub use logistic::{
    dataset_features, loss_and_gradient, train_logistic, train_on_features, LogisticParams, LogisticScorer,
    TrainConfig, TrainError, TrainReport,
};

use std::fmt;
use std::io;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clipper::ClipWindow;

/// Probability clamp used inside logarithms.
pub const EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerDescriptor {
    pub name: String,
    pub version: String,
}

impl ScorerDescriptor {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: version.into(),
        }
    }
}

impl fmt::Display for ScorerDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.version)
    }
}

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("external scorer returned no score for {}", format_gaps(.missing))]
    MissingScores { missing: Vec<(usize, f64)> },
    #[error("external scorer returned score {score} for clip {clip_id}, outside [0, 1]")]
    ContractViolation { clip_id: usize, score: f64 },
    #[error("external scorer returned clip {clip_id} at t = {got}, expected t = {expected}")]
    TimestampMismatch { clip_id: usize, expected: f64, got: f64 },
    #[error("external scorer `{command}` failed: {status}")]
    Process { command: String, status: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: malformed score file: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

fn format_gaps(missing: &[(usize, f64)]) -> String {
    let list: Vec<String> = missing.iter().map(|(id, t)| format!("clip {id} (t = {t})")).collect();
    list.join(", ")
}

/// `φ_θ`: maps a clip to a birth score in `[0, 1]`.
pub trait Scorer: Send + Sync {
    fn descriptor(&self) -> ScorerDescriptor;

    fn score(&self, clip: &ClipWindow) -> Result<f64, ScoringError>;

    /// Score many clips. Built-in scorers run in parallel; the order of the
    /// output matches the input.
    fn score_batch(&self, clips: &[ClipWindow]) -> Result<Vec<f64>, ScoringError> {
        clips.par_iter().map(|c| self.score(c)).collect()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Class-weighted binary cross-entropy for one sample,
/// `−[w1·y·log ŷ + w0·(1−y)·log(1−ŷ)]`, with `ŷ` clamped to `[ε, 1−ε]`.
pub fn weighted_bce(y: f64, y_hat: f64, w0: f64, w1: f64) -> f64 {
    let p = y_hat.clamp(EPSILON, 1.0 - EPSILON);
    -(w1 * y * p.ln() + w0 * (1.0 - y) * (1.0 - p).ln())
}
