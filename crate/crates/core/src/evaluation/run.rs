use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classify_metrics, default_gammas, err_stats, sweep_thresholds, ClipMetrics, ConfusionCounts, ErrStats, EvalError, FprRow};
use crate::clipper::{center_crop, clip_at, format_t, DatasetManifest, Label};
use crate::detection::{detect_normalized, DetectConfig, ScoreSeries};
use crate::normalization::normalize;
use crate::scoring::Scorer;
use crate::simulator::{read_annotation, read_manifest};
use crate::trv::read_trv_file;
use crate::video::MaternalPosition;

pub const REPORT_JSON: &str = "report.json";
pub const PER_VIDEO_CSV: &str = "per_video.csv";
pub const FPR_CSV: &str = "fpr.csv";
pub const SCORES_DIR: &str = "scores";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub detect: DetectConfig,
    /// Half-width of the window around the birth excluded from FPR negatives.
    pub fpr_window: f64,
    pub gammas: Vec<f64>,
    /// Clip-level decision threshold for the optional confusion matrix.
    pub clip_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            detect: DetectConfig::default(),
            fpr_window: 10.0,
            gammas: default_gammas(),
            clip_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoResult {
    pub video_id: String,
    pub t_birth: Option<u32>,
    pub t_hat: Option<f64>,
    /// `t_hat − t_birth` when both exist.
    pub err: Option<f64>,
    pub maternal_position: MaternalPosition,
    pub mu_hat: f64,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFailure {
    pub video_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FprReport {
    /// Always `"grid_point"`: one negative per grid point outside the window.
    pub denominator: String,
    pub window_s: f64,
    pub rows: Vec<FprRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    pub counts: ConfusionCounts,
    pub metrics: ClipMetrics,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scorer: String,
    pub videos: usize,
    /// Over videos with an annotated birth; `None` if there are none.
    pub err_stats: Option<ErrStats>,
    /// No-birth videos with a detection.
    pub false_births: usize,
    pub no_birth_videos: usize,
    pub fpr: FprReport,
    pub clip: Option<ClipReport>,
    pub per_video: Vec<VideoResult>,
    pub failures: Vec<VideoFailure>,
    pub config: EvalConfig,
}

impl EvalReport {
    pub fn partial_failure(&self) -> bool {
        !self.failures.is_empty()
    }
}

struct VideoOutcome {
    result: VideoResult,
    series: ScoreSeries,
    clip_counts: ConfusionCounts,
}

fn evaluate_video(
    dir: &Path,
    file: &str,
    annotation: &str,
    video_id: &str,
    scorer: &dyn Scorer,
    config: &EvalConfig,
    clips: Option<&DatasetManifest>,
) -> Result<VideoOutcome, String> {
    let video = read_trv_file(&dir.join(file)).map_err(|e| format!("read: {e}"))?;
    let ann = read_annotation(&dir.join(annotation)).map_err(|e| format!("annotation: {e}"))?;
    ann.validate(video.duration()).map_err(|e| format!("annotation: {e}"))?;
    let (normalized, report) = normalize(&video, &config.detect.normalization);
    let mu_hat = report.mu_hat;
    let fallback_used = report.fallback_used;
    let det = detect_normalized(&normalized, report, scorer, &config.detect).map_err(|e| e.to_string())?;

    let mut clip_counts = ConfusionCounts::default();
    if let Some(m) = clips {
        let fr = normalized.frame_rate();
        let last = normalized.frame_count() - 1;
        for e in m.entries.iter().filter(|e| e.video_id == video_id) {
            let n = (fr.frame_at(e.t).unwrap_or(0) as usize).min(last);
            let clip = clip_at(&normalized, n, m.config.f).map_err(|err| format!("clip at t = {}: {err}", e.t))?;
            let clip = if clip.frame_count > config.detect.f {
                center_crop(&clip, config.detect.f).map_err(|err| err.to_string())?
            } else {
                clip
            };
            let s = scorer.score(&clip).map_err(|err| err.to_string())?;
            let pred = if s >= config.clip_threshold { Label::Birth } else { Label::NoBirth };
            clip_counts.record(e.label, pred);
        }
    }

    let t_hat = det.estimate.t_hat;
    Ok(VideoOutcome {
        result: VideoResult {
            video_id: video_id.to_string(),
            t_birth: ann.t_birth,
            t_hat,
            err: t_hat.zip(ann.t_birth).map(|(t, tb)| t - tb as f64),
            maternal_position: ann.maternal_position,
            mu_hat,
            fallback_used,
        },
        series: det.series,
        clip_counts,
    })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<(), EvalError> {
    fs::write(&path, bytes).map_err(io_err(&path))
}

fn opt(v: Option<f64>) -> String {
    v.map(format_t).unwrap_or_default()
}

/// Detect on every video of a batch manifest and write `report.json`,
/// `per_video.csv`, `fpr.csv` and `scores/<video>.csv` under `out_dir`.
/// Videos that fail are listed in the report; the rest are still evaluated.
pub fn eval_run(
    manifest_path: &Path,
    config: &EvalConfig,
    scorer: &dyn Scorer,
    clips: Option<&DatasetManifest>,
    out_dir: &Path,
) -> Result<EvalReport, EvalError> {
    let entries = read_manifest(manifest_path)?;
    if entries.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let outcomes: Vec<(String, Result<VideoOutcome, String>)> = entries
        .par_iter()
        .map(|e| {
            let id = e.video_id().to_string();
            let r = evaluate_video(dir, &e.file, &e.annotation, &id, scorer, config, clips);
            (id, r)
        })
        .collect();

    let scores_dir = out_dir.join(SCORES_DIR);
    fs::create_dir_all(&scores_dir).map_err(io_err(&scores_dir))?;

    let mut per_video = Vec::new();
    let mut failures = Vec::new();
    let mut series = Vec::new();
    let mut clip_counts = ConfusionCounts::default();
    for (id, r) in outcomes {
        match r {
            Ok(o) => {
                let mut buf = Vec::new();
                o.series.write_csv(&mut buf).expect("write to Vec");
                write_file(scores_dir.join(format!("{id}.csv")), &buf)?;
                clip_counts.tp += o.clip_counts.tp;
                clip_counts.fp += o.clip_counts.fp;
                clip_counts.tn += o.clip_counts.tn;
                clip_counts.fn_ += o.clip_counts.fn_;
                series.push((o.series, o.result.t_birth.map(f64::from)));
                per_video.push(o.result);
            }
            Err(error) => {
                log::error!("{id}: {error}");
                failures.push(VideoFailure { video_id: id, error });
            }
        }
    }

    let pairs: Vec<(Option<f64>, f64)> = per_video
        .iter()
        .filter_map(|v| v.t_birth.map(|tb| (v.t_hat, tb as f64)))
        .collect();
    let stats = if pairs.is_empty() { None } else { Some(err_stats(&pairs)?) };
    let no_birth: Vec<&VideoResult> = per_video.iter().filter(|v| v.t_birth.is_none()).collect();
    let false_births = no_birth.iter().filter(|v| v.t_hat.is_some()).count();

    let refs: Vec<(&ScoreSeries, Option<f64>)> = series.iter().map(|(s, tb)| (s, *tb)).collect();
    let rows = sweep_thresholds(&refs, &config.gammas, config.fpr_window)?;

    let report = EvalReport {
        scorer: scorer.descriptor().to_string(),
        videos: entries.len(),
        err_stats: stats,
        false_births,
        no_birth_videos: no_birth.len(),
        fpr: FprReport {
            denominator: "grid_point".into(),
            window_s: config.fpr_window,
            rows,
        },
        clip: clips.map(|_| ClipReport {
            counts: clip_counts,
            metrics: classify_metrics(&clip_counts),
            threshold: config.clip_threshold,
        }),
        per_video,
        failures,
        config: config.clone(),
    };
    write_outputs(&report, out_dir)?;
    Ok(report)
}

fn write_outputs(report: &EvalReport, out_dir: &Path) -> Result<(), EvalError> {
    let mut csv = Vec::new();
    writeln!(csv, "video_id,t_birth,t_hat,err").expect("write to Vec");
    for v in &report.per_video {
        writeln!(
            csv,
            "{},{},{},{}",
            v.video_id,
            v.t_birth.map(|t| t.to_string()).unwrap_or_default(),
            opt(v.t_hat),
            opt(v.err)
        )
        .expect("write to Vec");
    }
    write_file(out_dir.join(PER_VIDEO_CSV), &csv)?;

    let mut csv = Vec::new();
    writeln!(csv, "gamma,fpr").expect("write to Vec");
    for r in &report.fpr.rows {
        writeln!(csv, "{},{}", r.gamma, r.fpr.map(|f| f.to_string()).unwrap_or_default()).expect("write to Vec");
    }
    write_file(out_dir.join(FPR_CSV), &csv)?;

    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_file(out_dir.join(REPORT_JSON), json.as_bytes())
}
