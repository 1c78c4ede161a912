//! Score smoothing and first-crossing time-of-birth inference.
//!
//! ```text
//! ŷ_h(t) = (1/K) Σ_{k=0}^{K−1} ŷ(t − kτ)
//! T̂     = min { t : ŷ_h(t) ≥ γ }
//! ```
//!
//! The first `K − 1` grid points lack full history. [`StartupPolicy`] picks
//! between averaging whatever history exists and forcing those points to 0.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clipper::{clip_for_slot, clip_schedule, format_t, ClipError};
use crate::normalization::{normalize, NormalizationConfig, NormalizationReport};
use crate::scoring::{Scorer, ScorerDescriptor, ScoringError};
use crate::video::{NormalizedVideo, ThermalVideo};

/// Clips scored per batch in [`detect`].
const CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("filter length K must be at least 1")]
    FilterTaps,
    #[error("threshold γ must lie in (0, 1], got {0}")]
    Gamma(f64),
    #[error("series has no filtered scores")]
    Unfiltered,
    #[error("clipping stage: {0}")]
    Clip(#[from] ClipError),
    #[error("scoring stage: {0}")]
    Score(#[from] ScoringError),
    #[error("scoring stage: score {score} at t = {t} is outside [0, 1]")]
    Range { t: f64, score: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartupPolicy {
    /// Average over the samples available so far.
    #[default]
    AverageAvailable,
    /// Set the first `K − 1` filtered points to 0.
    Skip,
}

/// Scores on the grid `t_start + i · stride`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub t_start: f64,
    pub stride: f64,
    pub raw: Vec<f64>,
    pub filtered: Option<Vec<f64>>,
    pub scorer: ScorerDescriptor,
}

impl ScoreSeries {
    pub fn new(t_start: f64, stride: f64, raw: Vec<f64>, scorer: ScorerDescriptor) -> Self {
        Self {
            t_start,
            stride,
            raw,
            filtered: None,
            scorer,
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn t_at(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.stride
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.t_at(i))
    }

    /// Write `t,raw,filtered`; `filtered` is empty when absent.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,raw,filtered")?;
        for (i, r) in self.raw.iter().enumerate() {
            let f = self.filtered.as_ref().map(|f| f[i].to_string()).unwrap_or_default();
            writeln!(out, "{},{r},{f}", format_t(self.t_at(i)))?;
        }
        Ok(())
    }

    /// Parse the output of [`ScoreSeries::write_csv`]. The grid must be
    /// evenly spaced; a single-row series gets stride 1.
    pub fn read_csv<R: io::Read>(source: R, scorer: ScorerDescriptor) -> io::Result<Self> {
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut r = csv::Reader::from_reader(source);
        let (mut ts, mut raw, mut filtered) = (Vec::new(), Vec::new(), Vec::new());
        let mut has_filtered = true;
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(io::Error::other)?;
            let field = |j: usize| rec.get(j).unwrap_or("");
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", i + 1)));
            ts.push(num(field(0))?);
            raw.push(num(field(1))?);
            match field(2) {
                "" => has_filtered = false,
                s => filtered.push(num(s)?),
            }
        }
        let t_start = ts.first().copied().unwrap_or(0.0);
        let stride = if ts.len() > 1 { ts[1] - ts[0] } else { 1.0 };
        if !(stride > 0.0) {
            return Err(bad(format!("non-increasing timestamps (stride {stride})")));
        }
        for (i, &t) in ts.iter().enumerate() {
            if (t - (t_start + i as f64 * stride)).abs() > 1e-6 {
                return Err(bad(format!("row {}: t = {t} is off the grid", i + 1)));
            }
        }
        Ok(Self {
            t_start,
            stride,
            raw,
            filtered: (has_filtered && !ts.is_empty()).then_some(filtered),
            scorer,
        })
    }
}

/// Length-`k` moving average of `series.raw` into `filtered`.
pub fn fir_smooth(series: &ScoreSeries, k: usize, policy: StartupPolicy) -> Result<ScoreSeries, DetectError> {
    if k == 0 {
        return Err(DetectError::FilterTaps);
    }
    let raw = &series.raw;
    let mut filtered = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        let lo = (i + 1).saturating_sub(k);
        let avail = i + 1 - lo;
        let v = if avail < k && policy == StartupPolicy::Skip {
            0.0
        } else {
            raw[lo..=i].iter().sum::<f64>() / avail as f64
        };
        filtered.push(v);
    }
    Ok(ScoreSeries {
        filtered: Some(filtered),
        ..series.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToBEstimate {
    /// `None` when no filtered score reaches `gamma`.
    pub t_hat: Option<f64>,
    pub gamma: f64,
    pub filter_k: usize,
}

impl ToBEstimate {
    /// `{"t_hat": …, "gamma": …, "K": …, "scorer": …}`; integral `t_hat`
    /// values are written as integers.
    pub fn to_json(&self, scorer: &ScorerDescriptor) -> String {
        let t_hat = match self.t_hat {
            None => serde_json::Value::Null,
            Some(t) if t.fract() == 0.0 && t.abs() < 1e15 => (t as i64).into(),
            Some(t) => t.into(),
        };
        let v = serde_json::json!({
            "t_hat": t_hat,
            "gamma": self.gamma,
            "K": self.filter_k,
            "scorer": scorer.to_string(),
        });
        serde_json::to_string_pretty(&v).expect("estimate serializes")
    }
}

/// First grid point whose filtered score is at least `gamma`.
pub fn estimate_tob(series: &ScoreSeries, gamma: f64, filter_k: usize) -> Result<ToBEstimate, DetectError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(DetectError::Gamma(gamma));
    }
    let filtered = series.filtered.as_ref().ok_or(DetectError::Unfiltered)?;
    Ok(ToBEstimate {
        t_hat: filtered.iter().position(|&v| v >= gamma).map(|i| series.t_at(i)),
        gamma,
        filter_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    /// Frames per clip.
    pub f: usize,
    /// Grid stride, seconds.
    pub tau: f64,
    pub k: usize,
    pub gamma: f64,
    pub startup: StartupPolicy,
    pub normalization: NormalizationConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            f: 25,
            tau: 1.0,
            k: 3,
            gamma: 0.9,
            startup: StartupPolicy::AverageAvailable,
            normalization: NormalizationConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub estimate: ToBEstimate,
    pub series: ScoreSeries,
    pub normalization: NormalizationReport,
}

/// Raw scores for every clip on the `(F, τ)` grid of an already
/// normalized video.
pub fn score_video(
    video: &NormalizedVideo,
    scorer: &dyn Scorer,
    f: usize,
    tau: f64,
) -> Result<ScoreSeries, DetectError> {
    let slots = clip_schedule(video.frame_count(), video.frame_rate(), f, tau)?;
    let t_start = slots.first().map_or(0.0, |s| s.t);
    let mut raw = Vec::with_capacity(slots.len());
    for chunk in slots.chunks(CHUNK) {
        let clips = chunk
            .iter()
            .map(|&s| clip_for_slot(video, s, f))
            .collect::<Result<Vec<_>, _>>()?;
        let scores = scorer.score_batch(&clips)?;
        for (clip, &s) in clips.iter().zip(&scores) {
            if !(0.0..=1.0).contains(&s) {
                return Err(DetectError::Range { t: clip.t, score: s });
            }
        }
        raw.extend(scores);
    }
    Ok(ScoreSeries::new(t_start, tau, raw, scorer.descriptor()))
}

/// Normalize, clip, score, smooth and threshold one video.
pub fn detect(video: &ThermalVideo, scorer: &dyn Scorer, config: &DetectConfig) -> Result<Detection, DetectError> {
    if config.k == 0 {
        return Err(DetectError::FilterTaps);
    }
    if !(config.gamma > 0.0 && config.gamma <= 1.0) {
        return Err(DetectError::Gamma(config.gamma));
    }
    let (normalized, report) = normalize(video, &config.normalization);
    detect_normalized(&normalized, report, scorer, config)
}

/// [`detect`] after normalization.
pub fn detect_normalized(
    video: &NormalizedVideo,
    report: NormalizationReport,
    scorer: &dyn Scorer,
    config: &DetectConfig,
) -> Result<Detection, DetectError> {
    let series = score_video(video, scorer, config.f, config.tau)?;
    let series = fir_smooth(&series, config.k, config.startup)?;
    let estimate = estimate_tob(&series, config.gamma, config.k)?;
    Ok(Detection {
        estimate,
        series,
        normalization: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(raw: Vec<f64>) -> ScoreSeries {
        ScoreSeries::new(3.0, 1.0, raw, ScorerDescriptor::new("test", "0"))
    }

    fn brute_force(raw: &[f64], k: usize) -> Vec<f64> {
        (0..raw.len())
            .map(|i| {
                let mut sum = 0.0;
                let mut n = 0;
                for j in 0..k {
                    if i >= j {
                        sum += raw[i - j];
                        n += 1;
                    }
                }
                sum / n as f64
            })
            .collect()
    }

    #[test]
    fn identity_filter() {
        let s = series(vec![0.1, 0.7, 0.3, 0.95]);
        let f = fir_smooth(&s, 1, StartupPolicy::AverageAvailable).unwrap();
        assert_eq!(f.filtered.unwrap(), s.raw);
        let f = fir_smooth(&s, 1, StartupPolicy::Skip).unwrap();
        assert_eq!(f.filtered.unwrap(), s.raw);
    }

    #[test]
    fn moving_average_arithmetic() {
        let s = series(vec![0.0, 0.0, 0.9, 0.9, 0.9]);
        let f = fir_smooth(&s, 3, StartupPolicy::AverageAvailable).unwrap().filtered.unwrap();
        let want = [0.0, 0.0, 0.3, 0.6, 0.9];
        for (a, b) in f.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn startup_policies() {
        let s = series(vec![0.9, 0.6, 0.3, 0.0]);
        let avg = fir_smooth(&s, 3, StartupPolicy::AverageAvailable).unwrap().filtered.unwrap();
        assert_eq!(avg[0], 0.9);
        assert!((avg[1] - 0.75).abs() < 1e-12);
        let skip = fir_smooth(&s, 3, StartupPolicy::Skip).unwrap().filtered.unwrap();
        assert_eq!(&skip[..2], &[0.0, 0.0]);
        assert_eq!(skip[2..], avg[2..]);
        assert!(matches!(fir_smooth(&s, 0, StartupPolicy::Skip), Err(DetectError::FilterTaps)));
    }

    #[test]
    fn first_crossing() {
        let mut raw = vec![0.0; 300];
        raw[92] = 0.95;
        raw[197] = 0.99;
        let s = fir_smooth(&series(raw), 1, StartupPolicy::AverageAvailable).unwrap();
        assert_eq!(estimate_tob(&s, 0.9, 1).unwrap().t_hat, Some(95.0));
        assert_eq!(estimate_tob(&s, 0.97, 1).unwrap().t_hat, Some(200.0));
        assert_eq!(estimate_tob(&s, 1.0, 1).unwrap().t_hat, None);
        assert!(matches!(estimate_tob(&s, 0.0, 1), Err(DetectError::Gamma(_))));
        assert!(matches!(estimate_tob(&series(vec![0.5]), 0.5, 1), Err(DetectError::Unfiltered)));
    }

    #[test]
    fn estimate_json() {
        let d = ScorerDescriptor::new("blob", "1");
        let e = ToBEstimate {
            t_hat: Some(61.0),
            gamma: 0.9,
            filter_k: 3,
        };
        let v: serde_json::Value = serde_json::from_str(&e.to_json(&d)).unwrap();
        assert_eq!(v["t_hat"], serde_json::json!(61));
        assert_eq!(v["K"], serde_json::json!(3));
        assert_eq!(v["scorer"], serde_json::json!("blob/1"));
        let missing = ToBEstimate { t_hat: None, ..e };
        let v: serde_json::Value = serde_json::from_str(&missing.to_json(&d)).unwrap();
        assert!(v["t_hat"].is_null());
    }

    #[test]
    fn score_csv() {
        let s = fir_smooth(&series(vec![0.0, 0.5]), 2, StartupPolicy::AverageAvailable).unwrap();
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "t,raw,filtered\n3,0,0\n4,0.5,0.25\n");
        let back = ScoreSeries::read_csv(out.as_slice(), s.scorer.clone()).unwrap();
        assert_eq!(back, s);
        let raw_only = "t,raw,filtered\n3,0.1,\n4,0.2,\n";
        assert_eq!(ScoreSeries::read_csv(raw_only.as_bytes(), s.scorer.clone()).unwrap().filtered, None);
        let gap = "t,raw,filtered\n3,0.1,\n4,0.2,\n6,0.2,\n";
        assert!(ScoreSeries::read_csv(gap.as_bytes(), s.scorer.clone()).is_err());
    }

    proptest! {
        #[test]
        fn matches_direct_sum(raw in prop::collection::vec(0.0f64..=1.0, 0..80), k in 1usize..8) {
            let f = fir_smooth(&series(raw.clone()), k, StartupPolicy::AverageAvailable).unwrap().filtered.unwrap();
            for (a, b) in f.iter().zip(brute_force(&raw, k)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn convex_combination(raw in prop::collection::vec(0.0f64..=1.0, 1..80), k in 1usize..8) {
            let f = fir_smooth(&series(raw.clone()), k, StartupPolicy::AverageAvailable).unwrap().filtered.unwrap();
            let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in f {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn monotone_in_gamma(raw in prop::collection::vec(0.0f64..=1.0, 1..80), g1 in 0.01f64..=1.0, g2 in 0.01f64..=1.0) {
            let (g1, g2) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let s = fir_smooth(&series(raw), 3, StartupPolicy::AverageAvailable).unwrap();
            let key = |e: ToBEstimate| e.t_hat.unwrap_or(f64::INFINITY);
            prop_assert!(key(estimate_tob(&s, g1, 3).unwrap()) <= key(estimate_tob(&s, g2, 3).unwrap()));
        }

        #[test]
        fn k1_equals_raw_threshold(raw in prop::collection::vec(0.0f64..=1.0, 1..80), g in 0.01f64..=1.0) {
            let s = fir_smooth(&series(raw.clone()), 1, StartupPolicy::AverageAvailable).unwrap();
            let direct = raw.iter().position(|&v| v >= g).map(|i| s.t_at(i));
            prop_assert_eq!(estimate_tob(&s, g, 1).unwrap().t_hat, direct);
        }
    }
}
