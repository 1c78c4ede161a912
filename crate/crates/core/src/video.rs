//! Thermal video domain types.
//!
//! A [`ThermalVideo`] holds raw sensor counts together with the linear
//! calibration that maps them to degrees Celsius. A [`NormalizedVideo`] is the
//! output of the normalization stage: the same geometry, with every pixel in
//! `[0, 1]`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalization::NormalizationParams;

#[derive(Debug, Error, PartialEq)]
pub enum VideoError {
    #[error("video has no frames")]
    Empty,
    #[error("frame geometry must be non-zero, got {width}x{height}")]
    ZeroGeometry { width: u32, height: u32 },
    #[error("frame {index} has {actual} pixels, expected {expected}")]
    FrameSize {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("temp_scale must be positive and finite, got {0}")]
    TempScale(f64),
    #[error("temp_offset must be finite, got {0}")]
    TempOffset(f64),
    #[error("frame rate {num}/{den} is invalid")]
    FrameRate { num: u32, den: u32 },
    #[error("frame index {index} out of range for a video with {frames} frames")]
    FrameIndex { index: usize, frames: usize },
}

/// Frame rate as an exact rational `num / den` frames per second.
///
/// The clinical camera runs at 8.33 fps which is `25/3`; keeping the ratio
/// exact means timestamp-to-index conversion does not drift over long videos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub const THERMAL_8_33: FrameRate = FrameRate { num: 25, den: 3 };

    pub fn new(num: u32, den: u32) -> Result<Self, VideoError> {
        if num == 0 || den == 0 {
            return Err(VideoError::FrameRate { num, den });
        }
        Ok(Self { num, den })
    }

    pub fn fps(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `⌊f_r · t⌋`, the index of the frame shown at time `t`. Negative times
    /// map to `None`.
    ///
    /// `t · num` is exact for the dyadic strides used throughout the
    /// pipeline and IEEE division is correctly rounded, so integral quotients
    /// never fall just below the integer.
    pub fn frame_at(&self, t: f64) -> Option<u64> {
        if !(t >= 0.0) {
            return None;
        }
        Some(((t * self.num as f64) / self.den as f64).floor() as u64)
    }

    /// Time of frame `n` in seconds.
    pub fn time_of(&self, n: u64) -> f64 {
        (n as f64 * self.den as f64) / self.num as f64
    }

    /// `⌊frames / f_r⌋` in exact integer arithmetic.
    pub fn floor_seconds(&self, frames: u64) -> u64 {
        frames * self.den as u64 / self.num as u64
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Raw single-channel thermal video, frames stored contiguously row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalVideo {
    width: u32,
    height: u32,
    frame_rate: FrameRate,
    temp_scale: f64,
    temp_offset: f64,
    source_id: String,
    pixels: Vec<u16>,
}

impl ThermalVideo {
    /// Build a video from individual frames, validating the geometry and
    /// calibration invariants.
    pub fn from_frames(
        width: u32,
        height: u32,
        frame_rate: FrameRate,
        temp_scale: f64,
        temp_offset: f64,
        frames: Vec<Vec<u16>>,
    ) -> Result<Self, VideoError> {
        let frame_len = check_geometry(width, height)?;
        if frames.is_empty() {
            return Err(VideoError::Empty);
        }
        for (index, frame) in frames.iter().enumerate() {
            if frame.len() != frame_len {
                return Err(VideoError::FrameSize {
                    index,
                    expected: frame_len,
                    actual: frame.len(),
                });
            }
        }
        let pixels = frames.concat();
        Self::from_pixels(width, height, frame_rate, temp_scale, temp_offset, pixels)
    }

    /// Build a video from a flat pixel buffer holding a whole number of frames.
    pub fn from_pixels(
        width: u32,
        height: u32,
        frame_rate: FrameRate,
        temp_scale: f64,
        temp_offset: f64,
        pixels: Vec<u16>,
    ) -> Result<Self, VideoError> {
        let frame_len = check_geometry(width, height)?;
        FrameRate::new(frame_rate.num, frame_rate.den)?;
        check_calibration(temp_scale, temp_offset)?;
        if pixels.is_empty() {
            return Err(VideoError::Empty);
        }
        if !pixels.len().is_multiple_of(frame_len) {
            return Err(VideoError::FrameSize {
                index: pixels.len() / frame_len,
                expected: frame_len,
                actual: pixels.len() % frame_len,
            });
        }
        Ok(Self {
            width,
            height,
            frame_rate,
            temp_scale,
            temp_offset,
            source_id: String::new(),
            pixels,
        })
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn frame_rate(&self) -> FrameRate {
        self.frame_rate
    }

    pub fn temp_scale(&self) -> f64 {
        self.temp_scale
    }

    pub fn temp_offset(&self) -> f64 {
        self.temp_offset
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn frame_count(&self) -> usize {
        self.pixels.len() / self.frame_len()
    }

    /// Duration `N / f_r` in seconds.
    pub fn duration(&self) -> f64 {
        self.frame_rate.time_of(self.frame_count() as u64)
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn frame(&self, n: usize) -> Result<&[u16], VideoError> {
        let frames = self.frame_count();
        if n >= frames {
            return Err(VideoError::FrameIndex { index: n, frames });
        }
        let len = self.frame_len();
        Ok(&self.pixels[n * len..(n + 1) * len])
    }

    pub fn frames(&self) -> impl Iterator<Item = &[u16]> {
        self.pixels.chunks_exact(self.frame_len())
    }

    #[inline]
    pub fn celsius(&self, raw: u16) -> f64 {
        raw as f64 * self.temp_scale + self.temp_offset
    }

    /// Frame `n` converted to degrees Celsius.
    pub fn celsius_frame(&self, n: usize) -> Result<Vec<f64>, VideoError> {
        Ok(self.frame(n)?.iter().map(|&r| self.celsius(r)).collect())
    }
}

fn check_geometry(width: u32, height: u32) -> Result<usize, VideoError> {
    if width == 0 || height == 0 {
        return Err(VideoError::ZeroGeometry { width, height });
    }
    Ok(width as usize * height as usize)
}

pub(crate) fn check_calibration(temp_scale: f64, temp_offset: f64) -> Result<(), VideoError> {
    if !(temp_scale > 0.0) || !temp_scale.is_finite() {
        return Err(VideoError::TempScale(temp_scale));
    }
    if !temp_offset.is_finite() {
        return Err(VideoError::TempOffset(temp_offset));
    }
    Ok(())
}

/// Video after normalization: same geometry as the source, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedVideo {
    width: u32,
    height: u32,
    frame_rate: FrameRate,
    params: NormalizationParams,
    source_id: String,
    pixels: Vec<f32>,
}

impl NormalizedVideo {
    pub(crate) fn new(
        width: u32,
        height: u32,
        frame_rate: FrameRate,
        params: NormalizationParams,
        source_id: String,
        pixels: Vec<f32>,
    ) -> Self {
        debug_assert!(pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            frame_rate,
            params,
            source_id,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn frame_rate(&self) -> FrameRate {
        self.frame_rate
    }

    pub fn params(&self) -> &NormalizationParams {
        &self.params
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn frame_count(&self) -> usize {
        self.pixels.len() / self.frame_len()
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn frame(&self, n: usize) -> Result<&[f32], VideoError> {
        let frames = self.frame_count();
        if n >= frames {
            return Err(VideoError::FrameIndex { index: n, frames });
        }
        let len = self.frame_len();
        Ok(&self.pixels[n * len..(n + 1) * len])
    }

    /// Contiguous frames `start..end` as one flat slice.
    pub fn frame_range(&self, start: usize, end: usize) -> &[f32] {
        let len = self.frame_len();
        &self.pixels[start * len..end * len]
    }

    /// Quantize to the TRV1 normalized variant: `round(v · 65535)` with
    /// `temp_scale = 1/65535` and `temp_offset = 0`.
    pub fn to_quantized(&self) -> ThermalVideo {
        let pixels = self
            .pixels
            .iter()
            .map(|&v| (v as f64 * 65535.0).round() as u16)
            .collect();
        ThermalVideo::from_pixels(
            self.width,
            self.height,
            self.frame_rate,
            1.0 / 65535.0,
            0.0,
            pixels,
        )
        .expect("normalized video has valid geometry")
        .with_source_id(self.source_id.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaternalPosition {
    Supine,
    SideLying,
    HandsAndKnees,
    #[default]
    Unknown,
}

/// Ground-truth (or predicted) time of birth for one video, stored in a JSON
/// sidecar next to the container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Annotation {
    /// Seconds from video start; `None` when the video holds no birth.
    pub t_birth: Option<u32>,
    pub maternal_position: MaternalPosition,
}

impl Annotation {
    pub fn validate(&self, duration_s: f64) -> Result<(), String> {
        match self.t_birth {
            Some(t) if t as f64 > duration_s => Err(format!(
                "t_birth {t} s lies beyond the video duration {duration_s:.3} s"
            )),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("annotation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
