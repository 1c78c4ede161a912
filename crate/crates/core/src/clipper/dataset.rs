//! Labeled clip manifests for training.
//!
//! Birth windows are taken at a fine stride wherever the annotated birth sits
//! inside the window with a guard margin on both sides. No-birth windows are
//! taken once per `nb_period` seconds, away from any birth.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{clip_schedule, first_timestamp, ClipError, Label};
use crate::video::{Annotation, FrameRate};

pub const CSV_NAME: &str = "manifest.csv";
pub const HEADER_NAME: &str = "dataset.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Window length in frames.
    pub f: usize,
    /// Stride of birth windows, seconds.
    pub tau_tob: f64,
    /// One no-birth window every this many seconds.
    pub nb_period: f64,
    /// Minimum distance of the birth from either window edge, seconds.
    pub guard: f64,
    /// No-birth windows stay this far from the birth, seconds.
    pub nb_exclusion: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            f: 37,
            tau_tob: 0.5,
            nb_period: 30.0,
            guard: 1.0,
            nb_exclusion: 30.0,
        }
    }
}

/// Metadata needed to place windows in one video.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetVideo {
    pub id: String,
    pub frame_count: usize,
    pub frame_rate: FrameRate,
    pub annotation: Annotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub video_id: String,
    pub t: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub nb: usize,
    pub tob: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.nb + self.tob
    }
}

/// Inverted class weights `w_c = (n0 + n1) / (2 n_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w0: f64,
    pub w1: f64,
}

impl ClassWeights {
    /// `None` unless both classes are present.
    pub fn inverted(counts: ClassCounts) -> Option<Self> {
        if counts.nb == 0 || counts.tob == 0 {
            return None;
        }
        let total = counts.total() as f64;
        Some(Self {
            w0: total / (2.0 * counts.nb as f64),
            w1: total / (2.0 * counts.tob as f64),
        })
    }

    pub fn for_label(&self, label: Label) -> f64 {
        match label {
            Label::NoBirth => self.w0,
            Label::Birth => self.w1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(skip)]
    pub entries: Vec<DatasetEntry>,
    pub counts: ClassCounts,
    pub class_weights: Option<ClassWeights>,
    pub config: DatasetConfig,
}

impl DatasetManifest {
    pub fn from_entries(entries: Vec<DatasetEntry>, config: DatasetConfig) -> Self {
        let tob = entries.iter().filter(|e| e.label == Label::Birth).count();
        let counts = ClassCounts {
            nb: entries.len() - tob,
            tob,
        };
        Self {
            class_weights: ClassWeights::inverted(counts),
            entries,
            counts,
            config,
        }
    }

    /// Window span `F / f_r` in seconds.
    pub fn span(&self, frame_rate: FrameRate) -> f64 {
        self.config.f as f64 / frame_rate.fps()
    }
}

/// Birth window predicate: `[t − span, t]` holds `t_birth` at least `guard`
/// seconds from both edges.
pub(crate) fn contains_birth(t: f64, span: f64, t_birth: f64, guard: f64) -> bool {
    t - span + guard <= t_birth && t_birth <= t - guard
}

fn windows_for(video: &DatasetVideo, config: &DatasetConfig) -> Result<Vec<DatasetEntry>, ClipError> {
    let fr = video.frame_rate;
    let duration = fr.time_of(video.frame_count as u64);
    let span = config.f as f64 / fr.fps();
    let t_birth = video.annotation.t_birth;
    if let Some(tb) = t_birth {
        if tb as f64 > duration {
            return Err(ClipError::Annotation {
                video: video.id.clone(),
                t_birth: tb,
                duration,
            });
        }
    }
    let mut out = Vec::new();

    if let Some(tb) = t_birth {
        let tb = tb as f64;
        for slot in clip_schedule(video.frame_count, fr, config.f, config.tau_tob)? {
            if contains_birth(slot.t, span, tb, config.guard) {
                out.push(DatasetEntry {
                    video_id: video.id.clone(),
                    t: slot.t,
                    label: Label::Birth,
                });
            }
        }
    }

    if !(config.nb_period > 0.0) {
        return Err(ClipError::Stride(config.nb_period));
    }
    let t0 = first_timestamp(fr, config.f) as f64;
    let t_end = fr.floor_seconds(video.frame_count as u64) as f64;
    let last = video.frame_count.saturating_sub(1);
    let mut k = 0u64;
    loop {
        let t = k as f64 * config.nb_period;
        k += 1;
        if t > t_end + 1e-9 {
            break;
        }
        if t < t0 {
            continue;
        }
        let n = (fr.frame_at(t).expect("t >= 0") as usize).min(last);
        if n + 1 < config.f {
            continue;
        }
        let clear = match t_birth {
            None => true,
            Some(tb) => {
                let tb = tb as f64;
                t < tb - config.nb_exclusion || t - span > tb + config.nb_exclusion
            }
        };
        if clear {
            out.push(DatasetEntry {
                video_id: video.id.clone(),
                t,
                label: Label::NoBirth,
            });
        }
    }
    Ok(out)
}

/// Build the labeled manifest over all videos, in input order.
pub fn build_dataset(videos: &[DatasetVideo], config: &DatasetConfig) -> Result<DatasetManifest, ClipError> {
    if config.f == 0 {
        return Err(ClipError::ZeroFrames);
    }
    let mut entries = Vec::new();
    for v in videos {
        entries.extend(windows_for(v, config)?);
    }
    Ok(DatasetManifest::from_entries(entries, *config))
}

#[derive(Serialize, Deserialize)]
struct Header {
    csv: String,
    #[serde(flatten)]
    manifest: DatasetManifest,
}

/// Write `manifest.csv` and its `dataset.json` header into `dir`.
pub fn write_dataset(manifest: &DatasetManifest, dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(CSV_NAME))?;
    w.write_record(["video_id", "t", "label"])?;
    for e in &manifest.entries {
        w.write_record([e.video_id.clone(), format_t(e.t), e.label.as_u8().to_string()])?;
    }
    w.flush()?;
    let header = Header {
        csv: CSV_NAME.to_string(),
        manifest: manifest.clone(),
    };
    let path = dir.join(HEADER_NAME);
    fs::write(&path, serde_json::to_string_pretty(&header).map_err(io::Error::other)?)?;
    Ok(path)
}

/// Read a dataset back from its `dataset.json` header.
pub fn read_dataset(header_path: &Path) -> io::Result<DatasetManifest> {
    let header: Header =
        serde_json::from_str(&fs::read_to_string(header_path)?).map_err(io::Error::other)?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let mut r = csv::ReaderBuilder::new()
        .from_path(dir.join(&header.csv))
        .map_err(io::Error::other)?;
    let mut entries = Vec::new();
    for rec in r.deserialize() {
        let e: DatasetEntry = rec.map_err(io::Error::other)?;
        entries.push(e);
    }
    let mut manifest = header.manifest;
    if manifest.counts != DatasetManifest::from_entries(entries.clone(), manifest.config).counts {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "dataset header counts do not match manifest.csv",
        ));
    }
    manifest.entries = entries;
    Ok(manifest)
}

pub(crate) fn format_t(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}
