mod config;
mod plot;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use thermotob::clipper::{build_dataset, read_dataset, write_dataset, DatasetVideo};
use thermotob::detection::{detect, estimate_tob, fir_smooth, score_video, ScoreSeries};
use thermotob::evaluation::{eval_run, sweep_thresholds, FPR_CSV};
use thermotob::normalization::normalize;
use thermotob::scoring::{
    train_logistic, BlobScorer, ExternalScorer, LogisticParams, LogisticScorer, Scorer, ScorerDescriptor,
};
use thermotob::simulator::{acceptance_batch, read_annotation, read_manifest, simulate_batch, BirthAnchor, SceneSpec};
use thermotob::trv::{read_header, read_trv_file, write_trv_file};
use thermotob::MaternalPosition;

use config::{RunConfig, RunRecord, ScorerKind};

#[derive(Parser)]
#[command(name = "thermotob", version, about = "Time-of-birth detection in thermal video")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration JSON; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic thermal videos with annotations.
    Simulate(SimulateArgs),
    /// Normalize one video to [0, 1] and write it as quantized TRV1.
    Normalize(NormalizeArgs),
    /// Build a labeled clip manifest from a batch of annotated videos.
    BuildDataset(BuildDatasetArgs),
    /// Train the logistic scorer on a clip manifest.
    Train(TrainArgs),
    /// Score every clip of one video.
    Score(ScoreArgs),
    /// Estimate the time of birth in one video.
    Detect(DetectArgs),
    /// Detect over a batch and report error statistics and FPR.
    Eval(EvalArgs),
    /// Recompute FPR and estimates over a threshold grid from saved scores.
    Sweep(SweepArgs),
    /// Render score traces and per-video errors as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ScorerArgs {
    /// Clip scorer; blob when unset.
    #[arg(long, value_enum)]
    scorer: Option<ScorerKind>,
    /// Logistic parameters JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    /// External scorer command, split on whitespace; the exchange directory
    /// is appended as the last argument.
    #[arg(long)]
    command: Option<String>,
}

#[derive(Args)]
struct GridArgs {
    /// Frames per clip.
    #[arg(long = "F")]
    f: Option<usize>,
    /// Grid stride in seconds.
    #[arg(long)]
    tau: Option<f64>,
    /// FIR filter length.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Detection threshold.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in batch.
    #[arg(long, value_parser = ["acceptance"], conflicts_with = "batch")]
    preset: Option<String>,
    /// JSON array of scene specs.
    #[arg(long)]
    batch: Option<PathBuf>,
    /// Birth time of a single scene, seconds.
    #[arg(long)]
    t_birth: Option<f64>,
    /// Scene length, seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Hide most of the newborn behind occluder stripes.
    #[arg(long)]
    occluded: bool,
    /// Annotate the birth at full visibility instead of onset.
    #[arg(long)]
    full_visibility: bool,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct NormalizeArgs {
    input: PathBuf,
    /// Output TRV1 path; the report is written next to it as JSON.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildDatasetArgs {
    /// Batch manifest.json.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Frames per training clip.
    #[arg(long = "F")]
    f: Option<usize>,
    /// Grid stride around the birth for ToB clips, seconds.
    #[arg(long)]
    tau_tob: Option<f64>,
    /// Spacing of no-birth clips, seconds.
    #[arg(long)]
    nb_period: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// dataset.json written by build-dataset.
    #[arg(long)]
    dataset: PathBuf,
    /// Batch manifest locating the videos.
    #[arg(long)]
    manifest: PathBuf,
    /// Output parameters JSON.
    #[arg(long, short)]
    out: PathBuf,
    /// Gradient-descent epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Random photometric, flip and crop augmentation.
    #[arg(long)]
    augment: bool,
}

#[derive(Args)]
struct ScoreArgs {
    input: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Frames per clip.
    #[arg(long = "F")]
    f: Option<usize>,
    /// Grid stride in seconds.
    #[arg(long)]
    tau: Option<f64>,
    /// Output score CSV.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    input: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Batch manifest.json.
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// dataset.json for clip-level metrics.
    #[arg(long)]
    clips: Option<PathBuf>,
    /// Grid points within this many seconds of the birth are not counted as negatives.
    #[arg(long)]
    fpr_window: Option<f64>,
    /// Comma-separated threshold grid.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Directory of `<video>.csv` score files.
    #[arg(long)]
    scores: PathBuf,
    /// Batch manifest.json.
    #[arg(long)]
    manifest: PathBuf,
    /// FIR filter length used to re-filter raw scores.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Grid points within this many seconds of the birth are not counted as negatives.
    #[arg(long)]
    fpr_window: Option<f64>,
    /// Comma-separated threshold grid.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// A score CSV or a directory of them.
    #[arg(long)]
    scores: PathBuf,
    /// per_video.csv from eval, for birth marks and the error chart.
    #[arg(long)]
    per_video: Option<PathBuf>,
    /// Threshold line drawn on traces.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(1)
        }
    }
}

/// Causes joined by ": ", skipping any already quoted by its parent.
fn error_chain(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if parts.last().is_none_or(|prev| !prev.contains(&msg)) {
            parts.push(msg);
        }
    }
    parts.join(": ")
}

/// `Ok(false)` signals partial failure.
fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    if let Some(n) = cli.threads {
        cfg.threads = Some(n);
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Simulate(a) => simulate_cmd(cfg, a, cli.seed),
        Command::Normalize(a) => normalize_cmd(cfg, a),
        Command::BuildDataset(a) => build_dataset_cmd(cfg, a),
        Command::Train(a) => train_cmd(cfg, a),
        Command::Score(a) => score_cmd(cfg, a),
        Command::Detect(a) => detect_cmd(cfg, a),
        Command::Eval(a) => eval_cmd(cfg, a),
        Command::Sweep(a) => sweep_cmd(cfg, a),
        Command::Plot(a) => plot_cmd(cfg, a),
    }
}

fn apply_scorer_args(cfg: &mut RunConfig, a: &ScorerArgs) {
    if let Some(k) = a.scorer {
        cfg.scorer.kind = k;
    }
    if let Some(p) = &a.params {
        cfg.scorer.params = Some(p.clone());
    }
    if let Some(c) = &a.command {
        cfg.scorer.command = c.split_whitespace().map(String::from).collect();
    }
}

fn apply_grid_args(cfg: &mut RunConfig, a: &GridArgs) {
    if let Some(f) = a.f {
        cfg.detect.f = f;
    }
    if let Some(t) = a.tau {
        cfg.detect.tau = t;
    }
    if let Some(k) = a.k {
        cfg.detect.k = k;
    }
    if let Some(g) = a.gamma {
        cfg.detect.gamma = g;
    }
}

fn build_scorer(cfg: &RunConfig) -> Result<Box<dyn Scorer>> {
    Ok(match cfg.scorer.kind {
        ScorerKind::Blob => Box::new(BlobScorer::new(cfg.scorer.blob)),
        ScorerKind::Logistic => {
            let path = cfg
                .scorer
                .params
                .as_ref()
                .ok_or_else(|| anyhow!("--scorer logistic needs --params"))?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let params: LogisticParams =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if !params.is_finite() {
                bail!("{}: parameters are not finite", path.display());
            }
            Box::new(LogisticScorer::new(params))
        }
        ScorerKind::External => {
            if cfg.scorer.command.is_empty() {
                bail!("--scorer external needs --command");
            }
            Box::new(ExternalScorer::new(cfg.scorer.command.clone()))
        }
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
        }
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn video_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn simulate_cmd(mut cfg: RunConfig, a: SimulateArgs, seed: Option<u64>) -> Result<bool> {
    let specs: Vec<SceneSpec> = if a.preset.is_some() {
        let offset = seed.unwrap_or(0);
        acceptance_batch()
            .into_iter()
            .map(|s| SceneSpec {
                rng_seed: s.rng_seed.wrapping_add(offset),
                ..s
            })
            .collect()
    } else if let Some(p) = &a.batch {
        cfg.set_path("batch", p);
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
    } else {
        let mut s = SceneSpec {
            t_birth: a.t_birth,
            occluded: a.occluded,
            rng_seed: cfg.seed,
            ..SceneSpec::default()
        };
        if let Some(d) = a.duration {
            s.duration_s = d;
        }
        if a.full_visibility {
            s.birth_anchor = BirthAnchor::FullVisibility;
        }
        if a.occluded {
            s.maternal_position = MaternalPosition::HandsAndKnees;
        }
        vec![s]
    };
    cfg.set_path("out", &a.out);
    let mut rec = RunRecord::new("simulate", &cfg);
    let manifest = simulate_batch(&specs, &a.out)?;
    write(&a.out.join("specs.json"), serde_json::to_string_pretty(&specs)? + "\n")?;
    rec.line(format!("videos: {}", specs.len()));
    rec.line(format!("manifest: {}", manifest.display()));
    rec.finish(&cfg, &a.out)?;
    println!("{}", manifest.display());
    Ok(true)
}

fn normalize_cmd(mut cfg: RunConfig, a: NormalizeArgs) -> Result<bool> {
    cfg.set_path("input", &a.input);
    cfg.set_path("out", &a.out);
    let video = read_trv_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let (normalized, report) = normalize(&video, &cfg.detect.normalization);
    let mut rec = RunRecord::new("normalize", &cfg);
    let dir = parent_dir(&a.out);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_trv_file(&normalized.to_quantized(), &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write(&a.out.with_extension("json"), serde_json::to_string_pretty(&report)? + "\n")?;
    rec.line(format!(
        "mu_hat: {} lo: {} hi: {} fallback: {}",
        report.mu_hat, report.lo, report.hi, report.fallback_used
    ));
    rec.finish(&cfg, &dir)?;
    Ok(true)
}

fn build_dataset_cmd(mut cfg: RunConfig, a: BuildDatasetArgs) -> Result<bool> {
    if let Some(f) = a.f {
        cfg.dataset.f = f;
    }
    if let Some(t) = a.tau_tob {
        cfg.dataset.tau_tob = t;
    }
    if let Some(p) = a.nb_period {
        cfg.dataset.nb_period = p;
    }
    cfg.set_path("manifest", &a.manifest);
    cfg.set_path("out", &a.out);
    let dir = parent_dir(&a.manifest);
    let mut videos = Vec::new();
    for e in read_manifest(&a.manifest)? {
        let path = dir.join(&e.file);
        let mut f = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let h = read_header(&mut f).with_context(|| format!("reading {}", path.display()))?;
        videos.push(DatasetVideo {
            id: e.video_id().to_string(),
            frame_count: h.frame_count as usize,
            frame_rate: h.frame_rate,
            annotation: read_annotation(&dir.join(&e.annotation))?,
        });
    }
    let manifest = build_dataset(&videos, &cfg.dataset)?;
    let mut rec = RunRecord::new("build-dataset", &cfg);
    let header = write_dataset(&manifest, &a.out)?;
    rec.line(format!(
        "clips: {} (nb {}, tob {})",
        manifest.counts.total(),
        manifest.counts.nb,
        manifest.counts.tob
    ));
    if let Some(w) = manifest.class_weights {
        rec.line(format!("class weights: w0 {} w1 {}", w.w0, w.w1));
    }
    rec.line(format!("header: {}", header.display()));
    rec.finish(&cfg, &a.out)?;
    Ok(true)
}

fn train_cmd(mut cfg: RunConfig, a: TrainArgs) -> Result<bool> {
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if a.augment {
        cfg.train.augment = Some(Default::default());
    }
    cfg.set_path("dataset", &a.dataset);
    cfg.set_path("manifest", &a.manifest);
    cfg.set_path("out", &a.out);
    let dataset = read_dataset(&a.dataset).with_context(|| format!("reading {}", a.dataset.display()))?;
    let dir = parent_dir(&a.manifest);
    let files: HashMap<String, PathBuf> = read_manifest(&a.manifest)?
        .into_iter()
        .map(|e| (e.video_id().to_string(), dir.join(&e.file)))
        .collect();
    let mut needed: Vec<&str> = dataset.entries.iter().map(|e| e.video_id.as_str()).collect();
    needed.sort_unstable();
    needed.dedup();
    let videos = needed
        .par_iter()
        .map(|id| {
            let path = files
                .get(*id)
                .ok_or_else(|| anyhow!("video {id} is not in {}", a.manifest.display()))?;
            let v = read_trv_file(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(normalize(&v, &cfg.detect.normalization).0)
        })
        .collect::<Result<Vec<_>>>()?;
    let (params, report) = train_logistic(&dataset, &videos, &cfg.train)?;
    let mut rec = RunRecord::new("train", &cfg);
    write(&a.out, serde_json::to_string_pretty(&params)? + "\n")?;
    rec.line(format!("clips: {}", dataset.entries.len()));
    rec.line(format!("final loss: {}", report.final_loss));
    rec.line(format!("precision: {:?} recall: {:?}", report.precision, report.recall));
    rec.finish(&cfg, &parent_dir(&a.out))?;
    Ok(true)
}

fn score_cmd(mut cfg: RunConfig, a: ScoreArgs) -> Result<bool> {
    apply_scorer_args(&mut cfg, &a.scorer);
    if let Some(f) = a.f {
        cfg.detect.f = f;
    }
    if let Some(t) = a.tau {
        cfg.detect.tau = t;
    }
    cfg.set_path("input", &a.input);
    cfg.set_path("out", &a.out);
    let scorer = build_scorer(&cfg)?;
    let video = read_trv_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let (normalized, _) = normalize(&video, &cfg.detect.normalization);
    let series = score_video(&normalized, scorer.as_ref(), cfg.detect.f, cfg.detect.tau)?;
    let mut rec = RunRecord::new("score", &cfg);
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    write(&a.out, buf)?;
    rec.line(format!("scorer: {}", scorer.descriptor()));
    rec.line(format!("clips: {}", series.len()));
    rec.finish(&cfg, &parent_dir(&a.out))?;
    Ok(true)
}

fn detect_cmd(mut cfg: RunConfig, a: DetectArgs) -> Result<bool> {
    apply_scorer_args(&mut cfg, &a.scorer);
    apply_grid_args(&mut cfg, &a.grid);
    cfg.set_path("input", &a.input);
    cfg.set_path("out", &a.out);
    let scorer = build_scorer(&cfg)?;
    let video = read_trv_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let det = detect(&video, scorer.as_ref(), &cfg.detect)?;
    let id = video_id(&a.input);
    let mut rec = RunRecord::new("detect", &cfg);
    let mut buf = Vec::new();
    det.series.write_csv(&mut buf)?;
    write(&a.out.join(format!("{id}.csv")), buf)?;
    let json = det.estimate.to_json(&scorer.descriptor());
    write(&a.out.join(format!("{id}.json")), json.clone() + "\n")?;
    rec.line(format!("scorer: {}", scorer.descriptor()));
    rec.line(format!("mu_hat: {}", det.normalization.mu_hat));
    rec.line(format!(
        "t_hat: {}",
        det.estimate.t_hat.map_or("Missing".to_string(), |t| t.to_string())
    ));
    rec.finish(&cfg, &a.out)?;
    println!("{json}");
    Ok(true)
}

fn eval_cmd(mut cfg: RunConfig, a: EvalArgs) -> Result<bool> {
    apply_scorer_args(&mut cfg, &a.scorer);
    apply_grid_args(&mut cfg, &a.grid);
    if let Some(w) = a.fpr_window {
        cfg.eval.fpr_window = w;
    }
    if let Some(g) = &a.gammas {
        cfg.eval.gammas = g.clone();
    }
    cfg.set_path("manifest", &a.manifest);
    cfg.set_path("out", &a.out);
    let clips = match &a.clips {
        Some(p) => {
            cfg.set_path("clips", p);
            Some(read_dataset(p).with_context(|| format!("reading {}", p.display()))?)
        }
        None => None,
    };
    let scorer = build_scorer(&cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let report = eval_run(&a.manifest, &cfg.eval_config(), scorer.as_ref(), clips.as_ref(), &a.out)?;
    let mut rec = RunRecord::new("eval", &cfg);
    rec.line(format!("scorer: {}", report.scorer));
    rec.line(format!("videos: {} failed: {}", report.videos, report.failures.len()));
    if let Some(s) = &report.err_stats {
        rec.line(format!("Q1 | Q2 | Q3 | mean | B.F.: {}", s.table_row()));
    }
    rec.line(format!(
        "false births: {} of {} no-birth videos",
        report.false_births, report.no_birth_videos
    ));
    for f in &report.failures {
        rec.line(format!("failed {}: {}", f.video_id, f.error));
    }
    rec.finish(&cfg, &a.out)?;
    if let Some(s) = &report.err_stats {
        println!("{}", s.table_row());
    }
    Ok(!report.partial_failure())
}

fn sweep_cmd(mut cfg: RunConfig, a: SweepArgs) -> Result<bool> {
    if let Some(k) = a.k {
        cfg.detect.k = k;
    }
    if let Some(w) = a.fpr_window {
        cfg.eval.fpr_window = w;
    }
    if let Some(g) = &a.gammas {
        cfg.eval.gammas = g.clone();
    }
    cfg.set_path("scores", &a.scores);
    cfg.set_path("manifest", &a.manifest);
    cfg.set_path("out", &a.out);
    let dir = parent_dir(&a.manifest);
    let mut items = Vec::new();
    for e in read_manifest(&a.manifest)? {
        let id = e.video_id().to_string();
        let path = a.scores.join(format!("{id}.csv"));
        let f = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let raw = ScoreSeries::read_csv(f, ScorerDescriptor::new("saved", "0"))
            .with_context(|| format!("reading {}", path.display()))?;
        let series = fir_smooth(&raw, cfg.detect.k, cfg.detect.startup)?;
        let ann = read_annotation(&dir.join(&e.annotation))?;
        items.push((id, series, ann.t_birth.map(f64::from)));
    }
    let refs: Vec<(&ScoreSeries, Option<f64>)> = items.iter().map(|(_, s, tb)| (s, *tb)).collect();
    let rows = sweep_thresholds(&refs, &cfg.eval.gammas, cfg.eval.fpr_window)?;
    let mut rec = RunRecord::new("sweep", &cfg);
    let mut fpr = String::from("gamma,fpr\n");
    for r in &rows {
        fpr += &format!("{},{}\n", r.gamma, r.fpr.map(|v| v.to_string()).unwrap_or_default());
    }
    write(&a.out.join(FPR_CSV), fpr)?;
    let mut est = String::from("video_id,gamma,t_hat\n");
    for (id, s, _) in &items {
        for &g in cfg.eval.gammas.iter().filter(|&&g| g > 0.0 && g <= 1.0) {
            let t = estimate_tob(s, g, cfg.detect.k)?.t_hat;
            est += &format!("{id},{g},{}\n", t.map(|v| v.to_string()).unwrap_or_default());
        }
    }
    write(&a.out.join("estimates.csv"), est)?;
    rec.line(format!("videos: {} thresholds: {}", items.len(), rows.len()));
    rec.finish(&cfg, &a.out)?;
    Ok(true)
}

/// `(video_id, t_birth, err)` rows of a `per_video.csv`.
type PerVideoRow = (String, Option<f64>, Option<f64>);

fn read_per_video(path: &Path) -> Result<Vec<PerVideoRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            Ok(Some(s.parse().with_context(|| format!("{}: bad number {s:?}", path.display()))?))
        }
    };
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            bail!("{}: expected 4 columns in {line:?}", path.display());
        }
        rows.push((f[0].to_string(), num(f[1])?, num(f[3])?));
    }
    Ok(rows)
}

fn plot_cmd(mut cfg: RunConfig, a: PlotArgs) -> Result<bool> {
    if let Some(g) = a.gamma {
        cfg.detect.gamma = g;
    }
    cfg.set_path("scores", &a.scores);
    cfg.set_path("out", &a.out);
    let per_video = match &a.per_video {
        Some(p) => {
            cfg.set_path("per_video", p);
            read_per_video(p)?
        }
        None => Vec::new(),
    };
    let births: HashMap<&str, Option<f64>> = per_video.iter().map(|(id, tb, _)| (id.as_str(), *tb)).collect();
    let files: Vec<PathBuf> = if a.scores.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&a.scores)
            .with_context(|| format!("listing {}", a.scores.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        v.sort();
        v
    } else {
        vec![a.scores.clone()]
    };
    let mut rec = RunRecord::new("plot", &cfg);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for path in &files {
        let id = video_id(path);
        let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let s = ScoreSeries::read_csv(f, ScorerDescriptor::new("saved", "0"))
            .with_context(|| format!("reading {}", path.display()))?;
        let t: Vec<f64> = s.times().collect();
        let tb = births.get(id.as_str()).copied().flatten();
        let svg = plot::score_trace(&id, &t, &s.raw, s.filtered.as_deref(), cfg.detect.gamma, tb);
        write(&a.out.join(format!("{id}.svg")), svg)?;
    }
    rec.line(format!("traces: {}", files.len()));
    if !per_video.is_empty() {
        let bars: Vec<(String, Option<f64>)> = per_video
            .iter()
            .filter(|(_, tb, _)| tb.is_some())
            .map(|(id, _, err)| (id.clone(), *err))
            .collect();
        write(&a.out.join("errors.svg"), plot::error_bars(&bars))?;
        rec.line("errors: errors.svg");
    }
    rec.finish(&cfg, &a.out)?;
    Ok(true)
}
