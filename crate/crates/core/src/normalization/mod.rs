//! Adaptive GMM normalization.
//!
//! Temperatures sampled from the whole video are modeled with three Gaussian
//! components (background, bedding/clothing, skin). The warmest plausible
//! component mean anchors a clipping range `[μ̂ − below, μ̂ + above]`, and every
//! pixel is clamped to that range and rescaled to `[0, 1]`.

mod gmm;

pub use gmm::{fit_gmm3, EmConfig, GmmError, GmmFit, COMPONENTS, MIN_SAMPLES, VARIANCE_FLOOR};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::video::{NormalizedVideo, ThermalVideo};

/// Plausibility window and clipping offsets around the selected mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangeConfig {
    pub plausible_min: f64,
    pub plausible_max: f64,
    /// μ̂ used when no component mean is plausible or the fit is degenerate.
    pub default_mu: f64,
    /// `lo = μ̂ − below`
    pub below: f64,
    /// `hi = μ̂ + above`
    pub above: f64,
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self {
            plausible_min: 28.0,
            plausible_max: 42.0,
            default_mu: 34.0,
            below: 8.0,
            above: 4.0,
        }
    }
}

/// Where μ̂ came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum RangeSource {
    /// Index into the ascending-mean component list.
    Component(usize),
    /// The configured default; no component qualified or the fit failed.
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mu_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub source: RangeSource,
}

impl NormalizationParams {
    pub fn from_mu_hat(mu_hat: f64, range: RangeConfig) -> Self {
        Self {
            mu_hat,
            lo: mu_hat - range.below,
            hi: mu_hat + range.above,
            source: RangeSource::Default,
        }
    }

    /// True unless μ̂ is the highest component mean.
    pub fn fallback_used(&self) -> bool {
        self.source != RangeSource::Component(COMPONENTS - 1)
    }

    /// Clamp to `[lo, hi]` and rescale to `[0, 1]`.
    #[inline]
    pub fn map(&self, celsius: f64) -> f64 {
        (celsius.clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    /// Sampling period in seconds for the GMM input frames.
    pub period_s: f64,
    pub seed: u64,
    pub em: EmConfig,
    pub range: RangeConfig,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            period_s: 30.0,
            seed: 0,
            em: EmConfig::default(),
            range: RangeConfig::default(),
        }
    }
}

/// Summary written next to a normalized video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub mu_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub fallback_used: bool,
    pub gmm: Option<GmmFit>,
    pub range: RangeConfig,
}

/// Pixels of the frames at `t = 0, period, 2·period, …` in °C, concatenated.
///
/// # Panics
/// If `period_s` is not positive.
pub fn sample_intensities(video: &ThermalVideo, period_s: f64) -> Vec<f64> {
    assert!(period_s > 0.0, "sampling period must be positive");
    let n_frames = video.frame_count() as u64;
    let fr = video.frame_rate();
    let mut out = Vec::new();
    for k in 0.. {
        let t = k as f64 * period_s;
        match fr.frame_at(t) {
            Some(n) if n < n_frames => {
                let frame = video.frame(n as usize).expect("index checked");
                out.extend(frame.iter().map(|&r| video.celsius(r)));
            }
            _ => break,
        }
    }
    out
}

/// Pick μ̂: the highest component mean inside the plausibility window, then
/// the next lower one, and finally the configured default.
pub fn select_range(fit: &GmmFit, range: RangeConfig) -> NormalizationParams {
    let chosen = (0..COMPONENTS)
        .rev()
        .find(|&k| (range.plausible_min..=range.plausible_max).contains(&fit.means[k]));
    match chosen {
        Some(k) => NormalizationParams {
            source: RangeSource::Component(k),
            ..NormalizationParams::from_mu_hat(fit.means[k], range)
        },
        None => NormalizationParams::from_mu_hat(range.default_mu, range),
    }
}

/// Apply `params` to every pixel.
pub fn apply(video: &ThermalVideo, params: &NormalizationParams) -> NormalizedVideo {
    // One entry per possible raw value.
    let lut: Vec<f32> = (0..=u16::MAX)
        .map(|r| params.map(video.celsius(r)) as f32)
        .collect();
    let mut pixels = vec![0f32; video.pixels().len()];
    pixels
        .par_chunks_mut(video.frame_len())
        .zip(video.pixels().par_chunks(video.frame_len()))
        .for_each(|(dst, src)| {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = lut[s as usize];
            }
        });
    NormalizedVideo::new(
        video.width(),
        video.height(),
        video.frame_rate(),
        *params,
        video.source_id().to_string(),
        pixels,
    )
}

/// Full normalization: sample, fit, select, apply. Degenerate videos fall
/// back to the default μ̂ instead of failing.
pub fn normalize(video: &ThermalVideo, config: &NormalizationConfig) -> (NormalizedVideo, NormalizationReport) {
    let samples = sample_intensities(video, config.period_s);
    let (params, gmm) = match fit_gmm3(&samples, config.seed, &config.em) {
        Ok(fit) => (select_range(&fit, config.range), Some(fit)),
        Err(e) => {
            log::warn!("{}: {e}", video.source_id());
            (NormalizationParams::from_mu_hat(config.range.default_mu, config.range), None)
        }
    };
    let report = NormalizationReport {
        mu_hat: params.mu_hat,
        lo: params.lo,
        hi: params.hi,
        fallback_used: params.fallback_used(),
        gmm,
        range: config.range,
    };
    (apply(video, &params), report)
}
