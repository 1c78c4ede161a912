//! Effective run configuration: defaults, then `--config`, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use thermotob::clipper::DatasetConfig;
use thermotob::detection::DetectConfig;
use thermotob::evaluation::{default_gammas, EvalConfig};
use thermotob::scoring::{BlobConfig, TrainConfig};

pub const RUN_CONFIG: &str = "run_config.json";
pub const RUN_LOG: &str = "run.log";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    Blob,
    Logistic,
    External,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    pub blob: BlobConfig,
    /// Logistic parameters JSON.
    pub params: Option<PathBuf>,
    /// External scorer program and arguments.
    pub command: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalKnobs {
    pub fpr_window: f64,
    pub gammas: Vec<f64>,
    pub clip_threshold: f64,
}

impl Default for EvalKnobs {
    fn default() -> Self {
        Self {
            fpr_window: 10.0,
            gammas: default_gammas(),
            clip_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub detect: DetectConfig,
    pub eval: EvalKnobs,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub scorer: ScorerConfig,
    /// Input and output paths of the run, by role.
    pub paths: BTreeMap<String, PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Propagate the global seed to every stochastic stage.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.detect.normalization.seed = seed;
        self.train.seed = seed;
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            detect: self.detect,
            fpr_window: self.eval.fpr_window,
            gammas: self.eval.gammas.clone(),
            clip_threshold: self.eval.clip_threshold,
        }
    }

    pub fn set_path(&mut self, role: &str, path: &Path) {
        self.paths.insert(role.to_string(), path.to_path_buf());
    }
}

/// Collects the deterministic `run.log` lines and writes the run record.
pub struct RunRecord {
    lines: Vec<String>,
}

impl RunRecord {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let mut r = Self { lines: Vec::new() };
        r.line(format!("thermotob {}", env!("CARGO_PKG_VERSION")));
        r.line(format!("command: {command}"));
        r.line(format!("seed: {}", config.seed));
        r.line(format!(
            "threads: {}",
            config.threads.map_or("default".to_string(), |n| n.to_string())
        ));
        r
    }

    pub fn line(&mut self, s: impl Into<String>) {
        let s = s.into();
        log::info!("{s}");
        self.lines.push(s);
    }

    pub fn finish(&self, config: &RunConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let json = serde_json::to_string_pretty(config)?;
        fs::write(dir.join(RUN_CONFIG), json + "\n")?;
        fs::write(dir.join(RUN_LOG), self.lines.join("\n") + "\n")?;
        Ok(())
    }
}
