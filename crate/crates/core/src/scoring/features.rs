//! Hand-crafted spatiotemporal clip features.

use serde::{Deserialize, Serialize};

use crate::clipper::ClipWindow;

pub const FEATURE_COUNT: usize = 6;
/// Normalized intensity above which a pixel counts as hot.
pub const HOT_THRESHOLD: f32 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Fraction of hot pixels in the last frame.
    pub hot_area_frac: f64,
    /// Hot fraction of the last frame minus that of the first.
    pub hot_area_growth: f64,
    /// Area fraction of the largest 4-connected region hot in the last frame
    /// but not in the first.
    pub new_component_area: f64,
    /// Mean absolute difference between consecutive frames.
    pub frame_diff_energy: f64,
    pub mean_intensity: f64,
    pub max_intensity: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.hot_area_frac,
            self.hot_area_growth,
            self.new_component_area,
            self.frame_diff_energy,
            self.mean_intensity,
            self.max_intensity,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        Self {
            hot_area_frac: a[0],
            hot_area_growth: a[1],
            new_component_area: a[2],
            frame_diff_energy: a[3],
            mean_intensity: a[4],
            max_intensity: a[5],
        }
    }
}

/// Size of the largest 4-connected `true` region of a `w × h` mask.
pub fn largest_component(mask: &[bool], w: usize, h: usize) -> usize {
    debug_assert_eq!(mask.len(), w * h);
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut best = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        best = best.max(size);
    }
    best
}

pub fn extract_features(clip: &ClipWindow, hot_threshold: f32) -> FeatureVector {
    let len = clip.frame_len();
    if len == 0 || clip.frame_count == 0 {
        return FeatureVector::default();
    }
    let area = len as f64;
    let first = clip.first_frame();
    let last = clip.last_frame();

    let hot_last = last.iter().filter(|&&v| v > hot_threshold).count() as f64 / area;
    let hot_first = first.iter().filter(|&&v| v > hot_threshold).count() as f64 / area;
    let new_mask: Vec<bool> = first
        .iter()
        .zip(last)
        .map(|(&a, &b)| b > hot_threshold && a <= hot_threshold)
        .collect();
    let new_area = largest_component(&new_mask, clip.width, clip.height) as f64 / area;

    let diff_energy = if clip.frame_count > 1 {
        let total: f64 = (1..clip.frame_count)
            .map(|i| {
                clip.frame(i)
                    .iter()
                    .zip(clip.frame(i - 1))
                    .map(|(a, b)| (a - b).abs() as f64)
                    .sum::<f64>()
            })
            .sum();
        total / ((clip.frame_count - 1) as f64 * area)
    } else {
        0.0
    };

    let mean = clip.frames.iter().map(|&v| v as f64).sum::<f64>() / clip.frames.len() as f64;
    let max = clip.frames.iter().cloned().fold(0.0f32, f32::max) as f64;

    FeatureVector {
        hot_area_frac: hot_last,
        hot_area_growth: hot_last - hot_first,
        new_component_area: new_area,
        frame_diff_energy: diff_energy,
        mean_intensity: mean,
        max_intensity: max,
    }
}
