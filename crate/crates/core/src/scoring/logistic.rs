//! Logistic regression over [`FeatureVector`]s.

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::features::{extract_features, FeatureVector, FEATURE_COUNT, HOT_THRESHOLD};
use super::{sigmoid, weighted_bce, Scorer, ScorerDescriptor, ScoringError, EPSILON};
use crate::clipper::{augment, center_crop, clip_at, AugmentPolicy, ClipError, DatasetManifest, Label};
use crate::video::NormalizedVideo;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    Empty,
    #[error("training set has a single class ({nb} no-birth, {tob} birth clips)")]
    SingleClass { nb: usize, tob: usize },
    #[error("manifest references unknown video `{0}`")]
    UnknownVideo(String),
    #[error("video `{video}` at t = {t}: {source}")]
    Clip {
        video: String,
        t: f64,
        #[source]
        source: ClipError,
    },
    #[error("features and labels differ in length ({features} vs {labels})")]
    Length { features: usize, labels: usize },
}

/// Weights act on standardized features `(x − feature_mean) / feature_std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub feature_mean: [f64; FEATURE_COUNT],
    pub feature_std: [f64; FEATURE_COUNT],
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            weights: [0.0; FEATURE_COUNT],
            bias: 0.0,
            feature_mean: [0.0; FEATURE_COUNT],
            feature_std: [1.0; FEATURE_COUNT],
        }
    }
}

impl LogisticParams {
    pub fn standardize(&self, x: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|j| (x[j] - self.feature_mean[j]) / self.feature_std[j])
    }

    pub fn predict(&self, fv: &FeatureVector) -> f64 {
        let z = self.standardize(&fv.to_array());
        sigmoid(dot(&self.weights, &z) + self.bias)
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.feature_mean)
            .chain(&self.feature_std)
            .chain(std::iter::once(&self.bias))
            .all(|v| v.is_finite())
    }
}

fn dot(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct LogisticScorer {
    pub params: LogisticParams,
}

impl LogisticScorer {
    pub fn new(params: LogisticParams) -> Self {
        Self { params }
    }
}

impl Scorer for LogisticScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        ScorerDescriptor::new("logistic", "1")
    }

    fn score(&self, clip: &crate::clipper::ClipWindow) -> Result<f64, ScoringError> {
        Ok(self.params.predict(&extract_features(clip, HOT_THRESHOLD)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Random augmentation per clip; `None` takes the centered crop.
    pub augment: Option<AugmentPolicy>,
    /// Frames kept per training clip.
    pub crop: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr: 0.5,
            seed: 0,
            augment: None,
            crop: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_loss: f64,
    /// Training precision at a 0.5 cut; `None` with no positive predictions.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub epochs: usize,
}

/// Mean weighted BCE over standardized features `xs` and its gradient with
/// respect to `(weights, bias)`. Clamped predictions contribute no gradient.
pub fn loss_and_gradient(
    weights: &[f64; FEATURE_COUNT],
    bias: f64,
    xs: &[[f64; FEATURE_COUNT]],
    ys: &[f64],
    w0: f64,
    w1: f64,
) -> (f64, [f64; FEATURE_COUNT], f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut gw = [0.0; FEATURE_COUNT];
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let p = sigmoid(dot(weights, x) + bias);
        loss += weighted_bce(y, p, w0, w1);
        if p > EPSILON && p < 1.0 - EPSILON {
            let g = -w1 * y * (1.0 - p) + w0 * (1.0 - y) * p;
            for j in 0..FEATURE_COUNT {
                gw[j] += g * x[j];
            }
            gb += g;
        }
    }
    for g in gw.iter_mut() {
        *g /= n;
    }
    (loss / n, gw, gb / n)
}

/// Full-batch gradient descent from zero initialization with inverted class
/// weights.
pub fn train_on_features(
    features: &[FeatureVector],
    labels: &[Label],
    epochs: usize,
    lr: f64,
) -> Result<(LogisticParams, TrainReport), TrainError> {
    if features.len() != labels.len() {
        return Err(TrainError::Length {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(TrainError::Empty);
    }
    let tob = labels.iter().filter(|&&l| l == Label::Birth).count();
    let nb = labels.len() - tob;
    if tob == 0 || nb == 0 {
        return Err(TrainError::SingleClass { nb, tob });
    }
    let total = labels.len() as f64;
    let (w0, w1) = (total / (2.0 * nb as f64), total / (2.0 * tob as f64));

    let raw: Vec<[f64; FEATURE_COUNT]> = features.iter().map(|f| f.to_array()).collect();
    let mut params = LogisticParams::default();
    for j in 0..FEATURE_COUNT {
        let mean = raw.iter().map(|x| x[j]).sum::<f64>() / total;
        let var = raw.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / total;
        params.feature_mean[j] = mean;
        params.feature_std[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }
    let xs: Vec<[f64; FEATURE_COUNT]> = raw.iter().map(|x| params.standardize(x)).collect();
    let ys: Vec<f64> = labels.iter().map(|&l| l.as_u8() as f64).collect();

    for _ in 0..epochs {
        let (_, gw, gb) = loss_and_gradient(&params.weights, params.bias, &xs, &ys, w0, w1);
        for j in 0..FEATURE_COUNT {
            params.weights[j] -= lr * gw[j];
        }
        params.bias -= lr * gb;
    }
    let (final_loss, _, _) = loss_and_gradient(&params.weights, params.bias, &xs, &ys, w0, w1);

    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (x, &y) in xs.iter().zip(&ys) {
        let pred = sigmoid(dot(&params.weights, x) + params.bias) >= 0.5;
        match (pred, y == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    let report = TrainReport {
        final_loss,
        precision: ratio(tp, fp),
        recall: ratio(tp, fneg),
        epochs,
    };
    Ok((params, report))
}

/// Features and labels for every manifest entry, in manifest order.
/// `videos` are matched to entries by source id.
pub fn dataset_features(
    manifest: &DatasetManifest,
    videos: &[NormalizedVideo],
    config: &TrainConfig,
) -> Result<(Vec<FeatureVector>, Vec<Label>), TrainError> {
    let by_id: HashMap<&str, &NormalizedVideo> = videos.iter().map(|v| (v.source_id(), v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let f = manifest.config.f;
    let mut feats = Vec::with_capacity(manifest.entries.len());
    let mut labels = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let clip_seed = rng.next_u64();
        let video = by_id
            .get(e.video_id.as_str())
            .ok_or_else(|| TrainError::UnknownVideo(e.video_id.clone()))?;
        let wrap = |source| TrainError::Clip {
            video: e.video_id.clone(),
            t: e.t,
            source,
        };
        let fr = video.frame_rate();
        let n = (fr.frame_at(e.t).unwrap_or(0) as usize).min(video.frame_count().saturating_sub(1));
        let clip = clip_at(video, n, f).map_err(wrap)?;
        let crop = config.crop.min(f);
        let clip = match &config.augment {
            Some(policy) => augment(&clip, &AugmentPolicy { crop, ..*policy }, clip_seed),
            None => center_crop(&clip, crop),
        }
        .map_err(wrap)?;
        feats.push(extract_features(&clip, HOT_THRESHOLD));
        labels.push(e.label);
    }
    Ok((feats, labels))
}

/// Extract features for `manifest` and train.
pub fn train_logistic(
    manifest: &DatasetManifest,
    videos: &[NormalizedVideo],
    config: &TrainConfig,
) -> Result<(LogisticParams, TrainReport), TrainError> {
    if manifest.entries.is_empty() {
        return Err(TrainError::Empty);
    }
    if manifest.counts.nb == 0 || manifest.counts.tob == 0 {
        return Err(TrainError::SingleClass {
            nb: manifest.counts.nb,
            tob: manifest.counts.tob,
        });
    }
    let (feats, labels) = dataset_features(manifest, videos, config)?;
    train_on_features(&feats, &labels, config.epochs, config.lr)
}
