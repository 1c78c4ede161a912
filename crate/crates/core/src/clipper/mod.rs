//! Clip windows over a normalized video.
//!
//! The clip at frame `n` is the `F` frames ending at `n`. Timestamps run on
//! the grid `t = t0, t0 + τ, …, ⌊N / f_r⌋` with `t0 = ⌊F / f_r⌋`; each maps to
//! frame `⌊f_r · t⌋`, clamped to the last frame.

mod augment;
mod dataset;

pub use augment::{augment, center_crop, AugmentPolicy};
pub use dataset::{
    build_dataset, read_dataset, write_dataset, ClassCounts, ClassWeights, DatasetConfig, DatasetEntry,
    DatasetManifest, DatasetVideo, CSV_NAME, HEADER_NAME,
};

pub(crate) use dataset::format_t;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::video::{FrameRate, NormalizedVideo};

#[derive(Debug, Error, PartialEq)]
pub enum ClipError {
    #[error("frame {n} has fewer than F-1 = {} preceding frames", .f - 1)]
    Boundary { n: usize, f: usize },
    #[error("frame {n} out of range for a video with {frames} frames")]
    Index { n: usize, frames: usize },
    #[error("stride must be positive, got {0}")]
    Stride(f64),
    #[error("clip has {have} frames, need at least {need}")]
    TooShort { have: usize, need: usize },
    #[error("video {video}: annotated birth at {t_birth} s lies outside 0..={duration} s")]
    Annotation { video: String, t_birth: u32, duration: f64 },
    #[error("frame count F must be at least 1")]
    ZeroFrames,
}

/// Clip class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NoBirth = 0,
    Birth = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::NoBirth),
            1 => Some(Label::Birth),
            _ => None,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {v}")))
    }
}

/// `F` consecutive normalized frames ending at timestamp `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipWindow {
    pub frames: Vec<f32>,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub frame_rate: FrameRate,
    pub t: f64,
    pub label: Option<Label>,
}

impl ClipWindow {
    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let len = self.frame_len();
        &self.frames[i * len..(i + 1) * len]
    }

    pub fn first_frame(&self) -> &[f32] {
        self.frame(0)
    }

    pub fn last_frame(&self) -> &[f32] {
        self.frame(self.frame_count - 1)
    }
}

/// One grid point of the sampling schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipSlot {
    pub t: f64,
    /// Index of the clip's last frame.
    pub n: usize,
}

/// First valid timestamp `⌊F / f_r⌋`.
pub fn first_timestamp(frame_rate: FrameRate, f: usize) -> u64 {
    frame_rate.floor_seconds(f as u64)
}

/// Timestamps and end frames for `t = t0 + k·τ` up to `⌊N / f_r⌋`. Slots
/// whose end frame has fewer than `F − 1` predecessors are dropped.
pub fn clip_schedule(n_frames: usize, frame_rate: FrameRate, f: usize, tau: f64) -> Result<Vec<ClipSlot>, ClipError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(ClipError::Stride(tau));
    }
    if f == 0 {
        return Err(ClipError::ZeroFrames);
    }
    if n_frames < f {
        log::warn!("video has {n_frames} frames, fewer than F = {f}; no clips");
        return Ok(Vec::new());
    }
    let t0 = first_timestamp(frame_rate, f) as f64;
    let t_end = frame_rate.floor_seconds(n_frames as u64) as f64;
    let steps = ((t_end - t0) / tau + 1e-9).floor() as i64;
    let mut out = Vec::with_capacity(steps.max(0) as usize + 1);
    for k in 0..=steps {
        let t = t0 + k as f64 * tau;
        let n = (frame_rate.frame_at(t).expect("t >= 0") as usize).min(n_frames - 1);
        if n + 1 >= f {
            out.push(ClipSlot { t, n });
        }
    }
    Ok(out)
}

/// The clip of `f` frames ending at frame `n`.
pub fn clip_at(video: &NormalizedVideo, n: usize, f: usize) -> Result<ClipWindow, ClipError> {
    if f == 0 {
        return Err(ClipError::ZeroFrames);
    }
    let frames = video.frame_count();
    if n >= frames {
        return Err(ClipError::Index { n, frames });
    }
    if n + 1 < f {
        return Err(ClipError::Boundary { n, f });
    }
    Ok(ClipWindow {
        frames: video.frame_range(n + 1 - f, n + 1).to_vec(),
        frame_count: f,
        width: video.width() as usize,
        height: video.height() as usize,
        frame_rate: video.frame_rate(),
        t: video.frame_rate().time_of(n as u64),
        label: None,
    })
}

/// Clip for a schedule slot, stamped with the slot's timestamp.
pub fn clip_for_slot(video: &NormalizedVideo, slot: ClipSlot, f: usize) -> Result<ClipWindow, ClipError> {
    let mut clip = clip_at(video, slot.n, f)?;
    clip.t = slot.t;
    Ok(clip)
}

/// All clips on the `τ` grid, in time order.
pub fn sample_clips(video: &NormalizedVideo, f: usize, tau: f64) -> Result<Vec<ClipWindow>, ClipError> {
    clip_schedule(video.frame_count(), video.frame_rate(), f, tau)?
        .into_iter()
        .map(|slot| clip_for_slot(video, slot, f))
        .collect()
}
