//! File-exchange adapter for out-of-process scorers.
//!
//! Exchange directory layout:
//!
//! ```text
//! clips/part-<k>.trv   clip k, quantized normalized TRV1
//! clips.csv            clip_id,t
//! scores.csv           clip_id,t,score   (written by the external process)
//! ```
//!
//! The command is run with the exchange directory appended as its last
//! argument.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Deserialize;

use super::{Scorer, ScorerDescriptor, ScoringError};
use crate::clipper::ClipWindow;
use crate::trv::write_trv_file;
use crate::video::ThermalVideo;

pub const CLIPS_DIR: &str = "clips";
pub const CLIPS_CSV: &str = "clips.csv";
pub const SCORES_CSV: &str = "scores.csv";

const T_TOLERANCE: f64 = 1e-6;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScoringError + '_ {
    move |source| ScoringError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn quantize(clip: &ClipWindow) -> ThermalVideo {
    let pixels = clip.frames.iter().map(|&v| (v as f64 * 65535.0).round() as u16).collect();
    ThermalVideo::from_pixels(
        clip.width as u32,
        clip.height as u32,
        clip.frame_rate,
        1.0 / 65535.0,
        0.0,
        pixels,
    )
    .expect("clip has valid geometry")
}

/// Write `clips` into `dir` in the exchange layout.
pub fn write_exchange(clips: &[ClipWindow], dir: &Path) -> Result<(), ScoringError> {
    let clips_dir = dir.join(CLIPS_DIR);
    fs::create_dir_all(&clips_dir).map_err(io_err(&clips_dir))?;
    let csv_path = dir.join(CLIPS_CSV);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| format_err(&csv_path, e))?;
    w.write_record(["clip_id", "t"]).map_err(|e| format_err(&csv_path, e))?;
    for (k, clip) in clips.iter().enumerate() {
        let path = clips_dir.join(format!("part-{k}.trv"));
        write_trv_file(&quantize(clip), &path).map_err(|e| ScoringError::Format {
            path: path.clone(),
            message: e.to_string(),
        })?;
        w.write_record([k.to_string(), crate::clipper::format_t(clip.t)])
            .map_err(|e| format_err(&csv_path, e))?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    Ok(())
}

fn format_err(path: &Path, e: impl std::fmt::Display) -> ScoringError {
    ScoringError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Deserialize)]
struct ScoreRow {
    clip_id: usize,
    t: f64,
    score: f64,
}

/// Read `scores.csv` from `dir` and check it against the expected clip
/// timestamps: every clip present once, matching `t`, score in `[0, 1]`.
pub fn read_scores(dir: &Path, expected_t: &[f64]) -> Result<Vec<f64>, ScoringError> {
    let path = dir.join(SCORES_CSV);
    let mut r = csv::Reader::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => ScoringError::Io {
            path: path.clone(),
            source,
        },
        other => format_err(&path, format!("{other:?}")),
    })?;
    let mut scores: Vec<Option<f64>> = vec![None; expected_t.len()];
    for row in r.deserialize() {
        let row: ScoreRow = row.map_err(|e| format_err(&path, e))?;
        let Some(&expected) = expected_t.get(row.clip_id) else {
            return Err(format_err(&path, format!("unknown clip_id {}", row.clip_id)));
        };
        if (row.t - expected).abs() > T_TOLERANCE {
            return Err(ScoringError::TimestampMismatch {
                clip_id: row.clip_id,
                expected,
                got: row.t,
            });
        }
        if !(0.0..=1.0).contains(&row.score) {
            return Err(ScoringError::ContractViolation {
                clip_id: row.clip_id,
                score: row.score,
            });
        }
        if scores[row.clip_id].replace(row.score).is_some() {
            return Err(format_err(&path, format!("duplicate clip_id {}", row.clip_id)));
        }
    }
    let missing: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_none())
        .map(|(k, _)| (k, expected_t[k]))
        .collect();
    if !missing.is_empty() {
        return Err(ScoringError::MissingScores { missing });
    }
    Ok(scores.into_iter().map(|s| s.expect("checked")).collect())
}

/// Runs an external command over an exchange directory per batch.
#[derive(Debug, Clone)]
pub struct ExternalScorer {
    /// Program followed by its leading arguments.
    pub command: Vec<String>,
    pub name: String,
    /// Parent of the per-batch exchange directories; the system temp dir when
    /// `None`.
    pub work_dir: Option<PathBuf>,
}

static BATCH_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ExternalScorer {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            name: "external".into(),
            work_dir: None,
        }
    }

    fn exchange_dir(&self) -> PathBuf {
        let parent = self.work_dir.clone().unwrap_or_else(std::env::temp_dir);
        let k = BATCH_COUNTER.fetch_add(1, Ordering::Relaxed);
        parent.join(format!("thermotob-exchange-{}-{k}", std::process::id()))
    }

    fn run(&self, clips: &[ClipWindow], dir: &Path) -> Result<Vec<f64>, ScoringError> {
        write_exchange(clips, dir)?;
        let (program, args) = self.command.split_first().ok_or_else(|| ScoringError::Process {
            command: String::new(),
            status: "empty command".into(),
        })?;
        let shown = self.command.join(" ");
        let out = Command::new(program)
            .args(args)
            .arg(dir)
            .output()
            .map_err(|e| ScoringError::Process {
                command: shown.clone(),
                status: e.to_string(),
            })?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(ScoringError::Process {
                command: shown,
                status: format!("{} {}", out.status, stderr.trim()),
            });
        }
        let ts: Vec<f64> = clips.iter().map(|c| c.t).collect();
        read_scores(dir, &ts)
    }
}

impl Scorer for ExternalScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        ScorerDescriptor::new(self.name.clone(), "1")
    }

    fn score(&self, clip: &ClipWindow) -> Result<f64, ScoringError> {
        Ok(self.score_batch(std::slice::from_ref(clip))?[0])
    }

    fn score_batch(&self, clips: &[ClipWindow]) -> Result<Vec<f64>, ScoringError> {
        if clips.is_empty() {
            return Ok(Vec::new());
        }
        let dir = self.exchange_dir();
        let result = self.run(clips, &dir);
        if let Err(e) = fs::remove_dir_all(&dir) {
            log::warn!("could not remove {}: {e}", dir.display());
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trv::read_trv_file;
    use crate::video::FrameRate;

    fn clips(n: usize) -> Vec<ClipWindow> {
        (0..n)
            .map(|k| ClipWindow {
                frames: (0..2 * 6).map(|i| ((i + k) % 7) as f32 / 6.0).collect(),
                frame_count: 2,
                width: 3,
                height: 2,
                frame_rate: FrameRate::THERMAL_8_33,
                t: 3.0 + k as f64 * 0.5,
                label: None,
            })
            .collect()
    }

    fn sh(script: &str) -> ExternalScorer {
        ExternalScorer::new(vec!["sh".into(), "-c".into(), script.into(), "sh".into()])
    }

    #[test]
    fn exchange_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cs = clips(3);
        write_exchange(&cs, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join(CLIPS_CSV)).unwrap();
        assert_eq!(csv, "clip_id,t\n0,3\n1,3.5\n2,4\n");
        let v = read_trv_file(&dir.path().join("clips/part-1.trv")).unwrap();
        assert_eq!(v.frame_count(), 2);
        assert_eq!((v.width(), v.height()), (3, 2));
        for (q, &x) in v.pixels().iter().zip(&cs[1].frames) {
            assert!((v.celsius(*q) - x as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn echo_script_gives_constant_scores() {
        let s = sh(r#"awk -F, 'NR==1{print "clip_id,t,score"; next}{print $1","$2",0.5"}' "$1/clips.csv" > "$1/scores.csv""#);
        assert_eq!(s.score_batch(&clips(5)).unwrap(), vec![0.5; 5]);
    }

    #[test]
    fn missing_row_is_named() {
        let s = sh(r#"awk -F, 'NR==1{print "clip_id,t,score"; next} $1!=2{print $1","$2",0.5"}' "$1/clips.csv" > "$1/scores.csv""#);
        match s.score_batch(&clips(4)).unwrap_err() {
            ScoringError::MissingScores { missing } => assert_eq!(missing, vec![(2, 4.0)]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn out_of_range_is_contract_violation() {
        let s = sh(r#"awk -F, 'NR==1{print "clip_id,t,score"; next}{print $1","$2",1.5"}' "$1/clips.csv" > "$1/scores.csv""#);
        assert!(matches!(
            s.score_batch(&clips(2)).unwrap_err(),
            ScoringError::ContractViolation { clip_id: 0, .. }
        ));
    }

    #[test]
    fn failing_command_is_reported() {
        let s = sh("exit 3");
        assert!(matches!(s.score_batch(&clips(1)).unwrap_err(), ScoringError::Process { .. }));
    }

    #[test]
    fn shifted_timestamp_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(SCORES_CSV), "clip_id,t,score\n0,3,0.1\n1,9,0.2\n").unwrap();
        assert!(matches!(
            read_scores(dir.path(), &[3.0, 3.5]).unwrap_err(),
            ScoringError::TimestampMismatch { clip_id: 1, .. }
        ));
    }
}
