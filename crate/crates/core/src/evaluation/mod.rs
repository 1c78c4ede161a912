//! Clip metrics, birth-time error statistics, false-positive sweeps and
//! batch evaluation runs.

mod errstats;
mod metrics;
mod run;
mod sweep;

pub use errstats::{err_stats, quantile, ErrStats};
pub use metrics::{classify_metrics, ClipMetrics, ConfusionCounts};
pub use run::{
    eval_run, ClipReport, EvalConfig, EvalReport, FprReport, VideoFailure, VideoResult, FPR_CSV, PER_VIDEO_CSV,
    REPORT_JSON, SCORES_DIR,
};
pub use sweep::{default_gammas, sweep_thresholds, FprRow};

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::simulator::BatchError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no inputs to evaluate")]
    EmptyInput,
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("threshold {0} is not finite")]
    Gamma(f64),
    #[error("score series has no filtered scores")]
    Unfiltered,
    #[error(transparent)]
    Manifest(#[from] BatchError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}
