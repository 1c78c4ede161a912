//! Time-of-birth detection for single-channel thermal video.
//!
//! Pipeline stages, in order:
//!
//! 1. [`normalization`] fits a three-component GMM to sampled temperatures and
//!    clips + rescales the video to `[0, 1]` around the skin component.
//! 2. [`clipper`] cuts the normalized video into `F`-frame windows ending at
//!    each timestamp of a fixed-stride grid.
//! 3. [`scoring`] maps each window to a birth score in `[0, 1]`.
//! 4. [`detection`] smooths the score series with a length-`K` moving average
//!    and reports the first grid point whose smoothed score reaches `γ`.
//! 5. [`evaluation`] computes clip metrics, error quartiles, birth-found rate
//!    and false-positive sweeps.
//!
//! [`simulator`] generates synthetic thermal scenes with known birth times for
//! end-to-end testing; [`trv`] is the on-disk video container.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clipper;
pub mod detection;
pub mod evaluation;
pub mod normalization;
pub mod scoring;
pub mod simulator;
pub mod trv;
pub mod video;

pub use video::{Annotation, FrameRate, MaternalPosition, NormalizedVideo, ThermalVideo, VideoError};
