//! Clip-level augmentation.
//!
//! Training mode applies brightness (additive), contrast (scaled about 0.5),
//! a random left-right flip and a random contiguous temporal crop, then
//! clamps to `[0, 1]`. Evaluation mode is the centered crop alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClipError, ClipWindow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    /// Brightness offset drawn from `[-brightness, brightness]`.
    pub brightness: f32,
    /// Contrast factor drawn from `[contrast.0, contrast.1]`.
    pub contrast: (f32, f32),
    pub flip_p: f64,
    /// Output frame count.
    pub crop: usize,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            brightness: 0.1,
            contrast: (0.8, 1.2),
            flip_p: 0.5,
            crop: 25,
        }
    }
}

impl AugmentPolicy {
    /// No photometric change, no flip.
    pub fn identity(crop: usize) -> Self {
        Self {
            brightness: 0.0,
            contrast: (1.0, 1.0),
            flip_p: 0.0,
            crop,
        }
    }
}

fn crop_frames(clip: &ClipWindow, start: usize, len: usize) -> ClipWindow {
    let fl = clip.frame_len();
    ClipWindow {
        frames: clip.frames[start * fl..(start + len) * fl].to_vec(),
        frame_count: len,
        ..clip.clone()
    }
}

/// Training-time augmentation, deterministic for a given `seed`.
pub fn augment(clip: &ClipWindow, policy: &AugmentPolicy, seed: u64) -> Result<ClipWindow, ClipError> {
    if clip.frame_count < policy.crop {
        return Err(ClipError::TooShort {
            have: clip.frame_count,
            need: policy.crop,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = if policy.brightness > 0.0 {
        rng.random_range(-policy.brightness..=policy.brightness)
    } else {
        0.0
    };
    let (c_lo, c_hi) = policy.contrast;
    let scale = if c_hi > c_lo { rng.random_range(c_lo..=c_hi) } else { c_lo };
    let flip = rng.random_bool(policy.flip_p.clamp(0.0, 1.0));
    let start = rng.random_range(0..=clip.frame_count - policy.crop);

    let mut out = crop_frames(clip, start, policy.crop);
    let w = out.width;
    if delta != 0.0 || scale != 1.0 {
        for v in out.frames.iter_mut() {
            *v = ((*v + delta - 0.5) * scale + 0.5).clamp(0.0, 1.0);
        }
    }
    if flip {
        for row in out.frames.chunks_exact_mut(w) {
            row.reverse();
        }
    }
    Ok(out)
}

/// Evaluation crop: the `len` frames centered in the clip.
pub fn center_crop(clip: &ClipWindow, len: usize) -> Result<ClipWindow, ClipError> {
    if clip.frame_count < len {
        return Err(ClipError::TooShort {
            have: clip.frame_count,
            need: len,
        });
    }
    Ok(crop_frames(clip, (clip.frame_count - len) / 2, len))
}
