//! Synthetic thermal delivery-room scenes with a known time of birth.
//!
//! A scene is a static layout (room floor, bed, the mother's exposed skin)
//! plus drifting adult actors and, for birth scenes, a newborn blob whose
//! area ramps linearly from zero to its full ellipse. Every pixel gets
//! additive Gaussian noise before being quantized to raw sensor counts.
//!
//! Temperatures are chosen so that the three regions the normalizer models
//! (background, bedding, skin) are well separated, with the newborn warmer
//! than adult skin.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trv::{self, TrvError};
use crate::video::{Annotation, FrameRate, MaternalPosition, ThermalVideo};

/// Raw counts per °C is `1 / RAW_SCALE`.
pub const RAW_SCALE: f64 = 0.01;
pub const RAW_OFFSET: f64 = 0.0;
/// Adult random-walk step, px per frame.
pub const ACTOR_STEP_STD: f64 = 0.5;
/// Fraction of the newborn hidden in occlusion mode.
pub const OCCLUDED_FRACTION: f64 = 0.7;
const OCCLUDER_PERIOD: usize = 10;
const NOISE_SALT: u64 = 0x6e6f_6973_655f_7472;

#[derive(Debug, Error, PartialEq)]
#[error("invalid scene spec field `{field}`: {reason}")]
pub struct SpecError {
    pub field: &'static str,
    pub reason: String,
}

fn spec_err(field: &'static str, reason: impl Into<String>) -> SpecError {
    SpecError {
        field,
        reason: reason.into(),
    }
}

/// How the annotated birth time relates to the emergence ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirthAnchor {
    /// The ramp starts at `t_birth`; nothing is visible before it.
    #[default]
    Onset,
    /// The ramp ends at `t_birth`: the newborn is fully visible at the
    /// annotated time.
    FullVisibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    pub frame_rate: FrameRate,
    pub background_temp: f64,
    pub mid_temp: f64,
    pub skin_temp: f64,
    pub newborn_temp: f64,
    pub t_birth: Option<f64>,
    pub newborn_emergence_s: f64,
    pub birth_anchor: BirthAnchor,
    pub actor_count: u32,
    pub noise_sigma: f64,
    pub rng_seed: u64,
    pub occluded: bool,
    pub maternal_position: MaternalPosition,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            duration_s: 150.0,
            width: 84,
            height: 63,
            frame_rate: FrameRate::THERMAL_8_33,
            background_temp: 22.0,
            mid_temp: 29.0,
            skin_temp: 34.0,
            newborn_temp: 38.0,
            t_birth: None,
            newborn_emergence_s: 3.0,
            birth_anchor: BirthAnchor::Onset,
            actor_count: 2,
            noise_sigma: 0.2,
            rng_seed: 0,
            occluded: false,
            maternal_position: MaternalPosition::Supine,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(spec_err("duration_s", "must be positive"));
        }
        if self.width < 8 || self.height < 8 {
            return Err(spec_err("resolution", "must be at least 8x8"));
        }
        if self.frame_rate.num == 0 || self.frame_rate.den == 0 {
            return Err(spec_err("frame_rate", "numerator and denominator must be non-zero"));
        }
        if !(self.background_temp < self.mid_temp) {
            return Err(spec_err("mid_temp", "must exceed background_temp"));
        }
        if !(self.mid_temp < self.skin_temp) {
            return Err(spec_err("skin_temp", "must exceed mid_temp"));
        }
        if !(self.skin_temp <= self.newborn_temp) {
            return Err(spec_err("newborn_temp", "must be at least skin_temp"));
        }
        if self.newborn_temp / RAW_SCALE > u16::MAX as f64 || self.background_temp < RAW_OFFSET {
            return Err(spec_err("newborn_temp", "temperatures must fit the raw sensor range"));
        }
        if let Some(t) = self.t_birth {
            if !(t > 0.0 && t < self.duration_s) {
                return Err(spec_err("t_birth", format!("{t} not inside (0, {})", self.duration_s)));
            }
        }
        if !(self.newborn_emergence_s >= 0.0) {
            return Err(spec_err("newborn_emergence_s", "must be non-negative"));
        }
        if self.actor_count < 1 {
            return Err(spec_err("actor_count", "must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(spec_err("noise_sigma", "must be non-negative"));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.frame_rate.frame_at(self.duration_s).unwrap_or(0).max(1) as usize
    }

    pub fn annotation(&self) -> Annotation {
        Annotation {
            t_birth: self.t_birth.map(|t| t.floor() as u32),
            maternal_position: self.maternal_position,
        }
    }

    /// Newborn area fraction (0 to 1) at time `t`.
    pub fn emergence(&self, t: f64) -> f64 {
        let Some(tb) = self.t_birth else { return 0.0 };
        let onset = match self.birth_anchor {
            BirthAnchor::Onset => tb,
            BirthAnchor::FullVisibility => tb - self.newborn_emergence_s,
        };
        if t < onset {
            0.0
        } else if self.newborn_emergence_s <= 0.0 {
            1.0
        } else {
            ((t - onset) / self.newborn_emergence_s).min(1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Background,
    Mid,
    Skin,
    Actor,
    Newborn,
    Occluder,
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        if self.rx <= 0.0 || self.ry <= 0.0 {
            return false;
        }
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }

    fn scaled(&self, s: f64) -> Ellipse {
        Ellipse {
            rx: self.rx * s,
            ry: self.ry * s,
            ..*self
        }
    }

    fn bbox(&self, w: usize, h: usize) -> (usize, usize, usize, usize) {
        let x0 = (self.cx - self.rx).floor().max(0.0) as usize;
        let y0 = (self.cy - self.ry).floor().max(0.0) as usize;
        let x1 = ((self.cx + self.rx).ceil() as usize + 1).min(w);
        let y1 = ((self.cy + self.ry).ceil() as usize + 1).min(h);
        (x0, y0, x1.max(x0), y1.max(y0))
    }
}

/// Deterministic scene geometry: static layout plus actor trajectories.
pub struct Scene {
    spec: SceneSpec,
    frames: usize,
    layout: Vec<Region>,
    newborn: Ellipse,
    actor_shape: (f64, f64),
    /// `trajectories[actor][frame] = (cx, cy)`
    trajectories: Vec<Vec<(f64, f64)>>,
}

impl Scene {
    pub fn new(spec: &SceneSpec) -> Result<Self, SpecError> {
        spec.validate()?;
        let w = spec.width as usize;
        let h = spec.height as usize;
        let wf = w as f64;
        let hf = h as f64;

        let mut layout = vec![Region::Background; w * h];
        let bed = (0.2 * wf, 0.08 * hf, 0.8 * wf, 0.97 * hf);
        let head = Ellipse {
            cx: 0.5 * wf,
            cy: 0.2 * hf,
            rx: 0.07 * wf,
            ry: 0.09 * hf,
        };
        let (newborn, thighs) = match spec.maternal_position {
            MaternalPosition::SideLying => (
                Ellipse {
                    cx: 0.56 * wf,
                    cy: 0.7 * hf,
                    rx: 0.095 * wf,
                    ry: 0.167 * hf,
                },
                [(0.38, 0.6, 0.1, 0.08), (0.38, 0.8, 0.1, 0.08)],
            ),
            _ => (
                Ellipse {
                    cx: 0.5 * wf,
                    cy: 0.74 * hf,
                    rx: 0.125 * wf,
                    ry: 0.127 * hf,
                },
                [(0.33, 0.6, 0.055, 0.13), (0.67, 0.6, 0.055, 0.13)],
            ),
        };
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut r = Region::Background;
                if px >= bed.0 && px < bed.2 && py >= bed.1 && py < bed.3 {
                    r = Region::Mid;
                }
                if head.contains(px, py) {
                    r = Region::Skin;
                }
                for &(cx, cy, rx, ry) in &thighs {
                    let e = Ellipse {
                        cx: cx * wf,
                        cy: cy * hf,
                        rx: rx * wf,
                        ry: ry * hf,
                    };
                    if e.contains(px, py) {
                        r = Region::Skin;
                    }
                }
                layout[y * w + x] = r;
            }
        }

        let frames = spec.frame_count();
        let actor_shape = (0.08 * wf, 0.1 * hf);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let step = Normal::new(0.0, ACTOR_STEP_STD).expect("valid std");
        let start = rand_distr::Uniform::new(0.0f64, 1.0).expect("valid range");
        let (xmin, xmax) = (actor_shape.0, wf - actor_shape.0);
        let (ymin, ymax) = (actor_shape.1, hf - actor_shape.1);
        let trajectories = (0..spec.actor_count)
            .map(|i| {
                // Alternate sides of the bed.
                let side = if i % 2 == 0 { 0.1 } else { 0.9 };
                let mut x = side * wf + (start.sample(&mut rng) - 0.5) * 0.1 * wf;
                let mut y = (0.25 + 0.5 * start.sample(&mut rng)) * hf;
                let mut path = Vec::with_capacity(frames);
                for _ in 0..frames {
                    path.push((x, y));
                    x = reflect(x + step.sample(&mut rng), xmin, xmax);
                    y = reflect(y + step.sample(&mut rng), ymin, ymax);
                }
                path
            })
            .collect();

        Ok(Self {
            spec: spec.clone(),
            frames,
            layout,
            newborn,
            actor_shape,
            trajectories,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn frame_count(&self) -> usize {
        self.frames
    }

    fn occluded_at(&self, x: usize) -> bool {
        let left = (self.newborn.cx - self.newborn.rx).floor().max(0.0) as usize;
        let visible = ((1.0 - OCCLUDED_FRACTION) * OCCLUDER_PERIOD as f64).round() as usize;
        // Visible stripes are centered within each period.
        let phase = (x.saturating_sub(left)) % OCCLUDER_PERIOD;
        let start = (OCCLUDER_PERIOD - visible) / 2;
        !(phase >= start && phase < start + visible)
    }

    /// Region of every pixel in frame `n`.
    pub fn region_map(&self, n: usize) -> Vec<Region> {
        let w = self.spec.width as usize;
        let h = self.spec.height as usize;
        let mut map = self.layout.clone();
        for path in &self.trajectories {
            let (cx, cy) = path[n.min(self.frames - 1)];
            let e = Ellipse {
                cx,
                cy,
                rx: self.actor_shape.0,
                ry: self.actor_shape.1,
            };
            paint(&mut map, w, h, &e, |_| Some(Region::Actor));
        }
        let t = self.spec.frame_rate.time_of(n as u64);
        let frac = self.spec.emergence(t);
        if frac > 0.0 {
            let e = self.newborn.scaled(frac.sqrt());
            let occluded = self.spec.occluded;
            paint(&mut map, w, h, &e, |x| {
                Some(if occluded && self.occluded_at(x) {
                    Region::Occluder
                } else {
                    Region::Newborn
                })
            });
        }
        map
    }

    /// Full-size newborn ellipse mask (independent of time and occlusion).
    pub fn newborn_mask(&self) -> Vec<bool> {
        let w = self.spec.width as usize;
        let h = self.spec.height as usize;
        let mut mask = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                mask[y * w + x] = self.newborn.contains(x as f64 + 0.5, y as f64 + 0.5);
            }
        }
        mask
    }

    pub fn region_temp(&self, r: Region) -> f64 {
        match r {
            Region::Background => self.spec.background_temp,
            Region::Mid => self.spec.mid_temp,
            Region::Skin | Region::Actor | Region::Occluder => self.spec.skin_temp,
            Region::Newborn => self.spec.newborn_temp,
        }
    }

    /// Noise-free temperature map of frame `n` in °C.
    pub fn temperature_map(&self, n: usize) -> Vec<f64> {
        self.region_map(n).into_iter().map(|r| self.region_temp(r)).collect()
    }

    /// Raw sensor counts for frame `n`, noise included.
    pub fn render_raw(&self, n: usize) -> Vec<u16> {
        let temps = self.temperature_map(n);
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.rng_seed ^ NOISE_SALT);
        rng.set_stream(n as u64);
        let noise = (self.spec.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, self.spec.noise_sigma).expect("validated sigma"));
        temps
            .into_iter()
            .map(|t| {
                let t = match &noise {
                    Some(d) => t + d.sample(&mut rng),
                    None => t,
                };
                ((t - RAW_OFFSET) / RAW_SCALE).round().clamp(0.0, u16::MAX as f64) as u16
            })
            .collect()
    }
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        (2.0 * lo - v).min(hi)
    } else if v > hi {
        (2.0 * hi - v).max(lo)
    } else {
        v
    }
}

fn paint(map: &mut [Region], w: usize, h: usize, e: &Ellipse, region: impl Fn(usize) -> Option<Region>) {
    let (x0, y0, x1, y1) = e.bbox(w, h);
    for y in y0..y1 {
        for x in x0..x1 {
            if e.contains(x as f64 + 0.5, y as f64 + 0.5) {
                if let Some(r) = region(x) {
                    map[y * w + x] = r;
                }
            }
        }
    }
}

/// Generate the video and its ground-truth annotation.
pub fn simulate(spec: &SceneSpec) -> Result<(ThermalVideo, Annotation), SpecError> {
    let scene = Scene::new(spec)?;
    let frame_len = spec.width as usize * spec.height as usize;
    let mut pixels = vec![0u16; scene.frame_count() * frame_len];
    pixels
        .par_chunks_mut(frame_len)
        .enumerate()
        .for_each(|(n, dst)| dst.copy_from_slice(&scene.render_raw(n)));
    let video = ThermalVideo::from_pixels(
        spec.width,
        spec.height,
        spec.frame_rate,
        RAW_SCALE,
        RAW_OFFSET,
        pixels,
    )
    .map_err(|e| spec_err("resolution", e.to_string()))?;
    Ok((video, spec.annotation()))
}

/// One row of a batch manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub annotation: String,
    pub seed: u64,
    pub t_birth: Option<u32>,
}

impl ManifestEntry {
    /// Video id: the file name without extension.
    pub fn video_id(&self) -> &str {
        self.file.strip_suffix(".trv").unwrap_or(&self.file)
    }
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("spec {index}: {source}")]
    Spec {
        index: usize,
        #[source]
        source: SpecError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Trv {
        path: PathBuf,
        #[source]
        source: TrvError,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Write one TRV1 file and one annotation sidecar per spec, plus
/// `manifest.json`. Returns the manifest path.
pub fn simulate_batch(specs: &[SceneSpec], out_dir: &Path) -> Result<PathBuf, BatchError> {
    fs::create_dir_all(out_dir).map_err(|source| BatchError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let entries = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let (video, ann) = simulate(spec).map_err(|source| BatchError::Spec { index: i, source })?;
            let stem = format!("video_{i:03}");
            let entry = ManifestEntry {
                file: format!("{stem}.trv"),
                annotation: format!("{stem}.json"),
                seed: spec.rng_seed,
                t_birth: ann.t_birth,
            };
            let path = out_dir.join(&entry.file);
            trv::write_trv_file(&video, &path).map_err(|source| BatchError::Trv { path, source })?;
            let path = out_dir.join(&entry.annotation);
            fs::write(&path, ann.to_json()).map_err(|source| BatchError::Io { path, source })?;
            Ok(entry)
        })
        .collect::<Result<Vec<_>, BatchError>>()?;
    let path = out_dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&entries).expect("manifest serializes");
    fs::write(&path, text).map_err(|source| BatchError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, BatchError> {
    let text = fs::read_to_string(path).map_err(|source| BatchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| BatchError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_annotation(path: &Path) -> Result<Annotation, BatchError> {
    let text = fs::read_to_string(path).map_err(|source| BatchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Annotation::from_json(&text).map_err(|source| BatchError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// The fixed 20-video end-to-end batch: 15 births spread over supine,
/// side-lying and low-noise scenes, 3 without a birth, and 2 occluded
/// hands-and-knees births.
///
/// Birth times are annotated at full newborn visibility.
pub fn acceptance_batch() -> Vec<SceneSpec> {
    let base = SceneSpec {
        birth_anchor: BirthAnchor::FullVisibility,
        ..SceneSpec::default()
    };
    let supine = SceneSpec {
        maternal_position: MaternalPosition::Supine,
        actor_count: 2,
        noise_sigma: 0.2,
        ..base.clone()
    };
    let side = SceneSpec {
        maternal_position: MaternalPosition::SideLying,
        actor_count: 3,
        noise_sigma: 0.25,
        ..base.clone()
    };
    let low_noise = SceneSpec {
        maternal_position: MaternalPosition::Supine,
        actor_count: 1,
        noise_sigma: 0.05,
        ..base.clone()
    };
    let mut specs = Vec::with_capacity(20);
    for i in 0..15u64 {
        let template = match i % 3 {
            0 => &supine,
            1 => &side,
            _ => &low_noise,
        };
        specs.push(SceneSpec {
            t_birth: Some(40.0 + 5.37 * i as f64),
            rng_seed: 1000 + i,
            ..template.clone()
        });
    }
    for (i, template) in [&supine, &side, &low_noise].into_iter().enumerate() {
        specs.push(SceneSpec {
            t_birth: None,
            rng_seed: 2000 + i as u64,
            ..template.clone()
        });
    }
    for (i, tb) in [70.4, 95.8].into_iter().enumerate() {
        specs.push(SceneSpec {
            t_birth: Some(tb),
            rng_seed: 3000 + i as u64,
            occluded: true,
            maternal_position: MaternalPosition::HandsAndKnees,
            actor_count: 2,
            ..base.clone()
        });
    }
    specs
}
