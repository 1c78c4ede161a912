//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use thermotob::clipper::{build_dataset, write_dataset, DatasetConfig, DatasetVideo};
use thermotob::detection::{estimate_tob, fir_smooth, ScoreSeries, StartupPolicy};
use thermotob::evaluation::{classify_metrics, eval_run, ConfusionCounts, EvalConfig, EvalReport};
use thermotob::normalization::{fit_gmm3, normalize, EmConfig, NormalizationConfig};
use thermotob::scoring::{loss_and_gradient, train_logistic, BlobScorer, ScorerDescriptor, TrainConfig, FEATURE_COUNT};
use thermotob::simulator::{acceptance_batch, read_annotation, read_manifest, simulate_batch, SceneSpec};
use thermotob::trv::{read_trv, read_trv_file, write_trv, TrvError, HEADER_LEN};
use thermotob::{FrameRate, ThermalVideo};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- 1. GMM

fn gmm_recovery() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a3);
    let (mut worst_mean, mut worst_weight) = (0.0f64, 0.0f64);
    let mut ll_ok = true;
    for trial in 0..50 {
        let m0 = rng.random_range(15.0..30.0);
        let m1 = m0 + rng.random_range(4.0..8.0);
        let m2 = m1 + rng.random_range(4.0..8.0);
        let means = [m0, m1, m2];
        let stds: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.3..=1.0));
        let raw_w: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..0.5));
        let total: f64 = raw_w.iter().sum();
        let weights = raw_w.map(|w| w / total);

        let mut samples = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            let u: f64 = rng.random();
            let k = if u < weights[0] {
                0
            } else if u < weights[0] + weights[1] {
                1
            } else {
                2
            };
            samples.push(Normal::new(means[k], stds[k]).unwrap().sample(&mut rng));
        }
        let fit = match fit_gmm3(&samples, trial, &EmConfig::default()) {
            Ok(f) => f,
            Err(e) => return outcome(false, format!("trial {trial}: {e}")),
        };
        for k in 0..3 {
            worst_mean = worst_mean.max((fit.means[k] - means[k]).abs());
            worst_weight = worst_weight.max((fit.weights[k] - weights[k]).abs());
        }
        for w in fit.ll_history.windows(2) {
            if w[1] < w[0] - 1e-9 * w[0].abs() {
                ll_ok = false;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_mean <= 0.3 && worst_weight <= 0.05 && ll_ok && elapsed < Duration::from_secs(30),
        format!(
            "max |Δmean| {worst_mean:.4} (≤ 0.3), max |Δweight| {worst_weight:.4} (≤ 0.05), ll non-decreasing {ll_ok}, {:.1?} (< 30 s)",
            elapsed
        ),
    )
}

// ---------------------------------------------------------------- 2. FIR

fn direct_convolution(x: &[f64], k: usize) -> Vec<f64> {
    let h = 1.0 / k as f64;
    (0..x.len())
        .map(|n| {
            if n + 1 >= k {
                (0..k).map(|j| h * x[n - j]).sum()
            } else {
                // Startup: mean of the available history.
                x[..=n].iter().sum::<f64>() / (n + 1) as f64
            }
        })
        .collect()
}

fn fir_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let k = [1, 2, 3, 5][i % 4];
        let len = rng.random_range(1..300);
        let raw: Vec<f64> = (0..len).map(|_| rng.random()).collect();
        let s = ScoreSeries::new(3.0, 1.0, raw.clone(), ScorerDescriptor::new("oracle", "0"));
        let got = fir_smooth(&s, k, StartupPolicy::AverageAvailable).unwrap().filtered.unwrap();
        for (a, b) in got.iter().zip(direct_convolution(&raw, k)) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst < 1e-12, format!("max |Δ| {worst:e} over 1000 series (< 1e-12)"))
}

// ---------------------------------------------------------------- 3. Metrics

struct Brute {
    precision: Option<f64>,
    recall: Option<f64>,
    mcc: Option<f64>,
}

fn brute_force(c: &ConfusionCounts) -> Brute {
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    for (n, l, p) in [(c.tp, 1.0, 1.0), (c.fp, 0.0, 1.0), (c.tn, 0.0, 0.0), (c.fn_, 1.0, 0.0)] {
        for _ in 0..n {
            labels.push(l);
            preds.push(p);
        }
    }
    let n = labels.len() as f64;
    let both = labels.iter().zip(&preds).filter(|(l, p)| **l == 1.0 && **p == 1.0).count() as f64;
    let pred_pos = preds.iter().filter(|&&p| p == 1.0).count() as f64;
    let label_pos = labels.iter().filter(|&&l| l == 1.0).count() as f64;
    let ml = labels.iter().sum::<f64>() / n;
    let mp = preds.iter().sum::<f64>() / n;
    let cov: f64 = labels.iter().zip(&preds).map(|(l, p)| (l - ml) * (p - mp)).sum();
    let vl: f64 = labels.iter().map(|l| (l - ml).powi(2)).sum();
    let vp: f64 = preds.iter().map(|p| (p - mp).powi(2)).sum();
    Brute {
        precision: (pred_pos > 0.0).then(|| both / pred_pos),
        recall: (label_pos > 0.0).then(|| both / label_pos),
        mcc: (vl > 0.0 && vp > 0.0).then(|| cov / (vl * vp).sqrt()),
    }
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() < 1e-9,
        _ => false,
    }
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3c);
    let mut mismatches = 0;
    let mut bounds_ok = true;
    for i in 0..1000 {
        let mut draw = |zero_p: f64| if rng.random_bool(zero_p) { 0 } else { rng.random_range(1..=10_000u64) };
        let p0 = if i % 5 == 0 { 0.4 } else { 0.0 };
        let c = ConfusionCounts {
            tp: draw(p0),
            fp: draw(p0),
            tn: draw(p0),
            fn_: draw(p0),
        };
        if c.total() == 0 {
            continue;
        }
        let m = classify_metrics(&c);
        let b = brute_force(&c);
        if !(close(m.precision, b.precision) && close(m.recall, b.recall) && close(m.mcc, b.mcc)) {
            mismatches += 1;
        }
        if let Some(v) = m.mcc {
            let perfect = c.fp == 0 && c.fn_ == 0 && c.tp > 0 && c.tn > 0;
            if !(-1.0..=1.0).contains(&v) || ((v == 1.0) != perfect) {
                bounds_ok = false;
            }
        }
    }
    let m = classify_metrics(&ConfusionCounts {
        tp: 74,
        fp: 7,
        fn_: 2,
        tn: 917,
    });
    let p = format!("{:.3}", m.precision.unwrap());
    let r = format!("{:.3}", m.recall.unwrap());
    let row_ok = p == "0.914" && r == "0.974";
    outcome(
        mismatches == 0 && bounds_ok && row_ok,
        format!("{mismatches} mismatches / 1000, MCC bounds {bounds_ok}, tp=74 fp=7 fn=2 tn=917 → ({p}, {r})"),
    )
}

// ---------------------------------------------------------------- 4. Gradient

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x96);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let xs: Vec<[f64; FEATURE_COUNT]> =
        (0..200).map(|_| std::array::from_fn(|_| normal.sample(&mut rng))).collect();
    let ys: Vec<f64> = (0..200).map(|_| rng.random_bool(0.2) as u8 as f64).collect();
    let pos = ys.iter().sum::<f64>();
    let n = ys.len() as f64;
    let (w0, w1) = (n / (2.0 * (n - pos)), n / (2.0 * pos));
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w: [f64; FEATURE_COUNT] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let b = rng.random_range(-2.0..2.0);
        let (_, gw, gb) = loss_and_gradient(&w, b, &xs, &ys, w0, w1);
        let loss = |w: &[f64; FEATURE_COUNT], b: f64| loss_and_gradient(w, b, &xs, &ys, w0, w1).0;
        let rel = |a: f64, fd: f64| (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        for j in 0..FEATURE_COUNT {
            let (mut wp, mut wm) = (w, w);
            wp[j] += h;
            wm[j] -= h;
            let fd = (loss(&wp, b) - loss(&wm, b)) / (2.0 * h);
            worst = worst.max(rel(gw[j], fd));
        }
        let fd = (loss(&w, b + h) - loss(&w, b - h)) / (2.0 * h);
        worst = worst.max(rel(gb, fd));
    }
    outcome(worst < 1e-4, format!("max relative error {worst:e} at 100 points (< 1e-4)"))
}

// ---------------------------------------------------------------- 5–7. Pipeline

struct PipelineRun {
    dir: tempfile::TempDir,
    report: EvalReport,
    elapsed: Duration,
}

fn pipeline_run(specs: &[SceneSpec]) -> PipelineRun {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let batch = dir.path().join("batch");
    let manifest = simulate_batch(specs, &batch).unwrap();
    let report = eval_run(
        &manifest,
        &EvalConfig::default(),
        &BlobScorer::default(),
        None,
        &dir.path().join("eval"),
    )
    .unwrap();
    let elapsed = start.elapsed();

    // Dataset and a seeded, augmented training run for the determinism check.
    let entries = read_manifest(&manifest).unwrap();
    let mut dataset_videos = Vec::new();
    let mut normalized = Vec::new();
    for e in &entries {
        let v = read_trv_file(&batch.join(&e.file)).unwrap();
        dataset_videos.push(DatasetVideo {
            id: e.video_id().to_string(),
            frame_count: v.frame_count(),
            frame_rate: v.frame_rate(),
            annotation: read_annotation(&batch.join(&e.annotation)).unwrap(),
        });
        normalized.push(normalize(&v, &NormalizationConfig::default()).0);
    }
    let ds = build_dataset(&dataset_videos, &DatasetConfig::default()).unwrap();
    write_dataset(&ds, &dir.path().join("dataset")).unwrap();
    let config = TrainConfig {
        epochs: 100,
        seed: 11,
        augment: Some(Default::default()),
        ..TrainConfig::default()
    };
    let (params, _) = train_logistic(&ds, &normalized, &config).unwrap();
    fs::write(dir.path().join("params.json"), serde_json::to_string_pretty(&params).unwrap()).unwrap();

    PipelineRun { dir, report, elapsed }
}

fn end_to_end(run: &PipelineRun, specs: &[SceneSpec]) -> Outcome {
    let r = &run.report;
    let mut visible_births = 0;
    let mut found = 0;
    let mut abs_err = Vec::new();
    let mut no_birth_missing = true;
    for (v, spec) in r.per_video.iter().zip(specs) {
        match (spec.t_birth, spec.occluded) {
            (Some(_), false) => {
                visible_births += 1;
                if let Some(e) = v.err {
                    found += 1;
                    abs_err.push(e.abs());
                }
            }
            (None, _) => no_birth_missing &= v.t_hat.is_none(),
            _ => {}
        }
    }
    abs_err.sort_by(f64::total_cmp);
    let median = if abs_err.is_empty() {
        f64::INFINITY
    } else {
        let n = abs_err.len();
        if n % 2 == 1 { abs_err[n / 2] } else { (abs_err[n / 2 - 1] + abs_err[n / 2]) / 2.0 }
    };
    let bf = found as f64 / visible_births as f64;
    let pass = r.failures.is_empty()
        && r.per_video.len() == 20
        && bf >= 0.9
        && median <= 2.0
        && r.false_births == 0
        && no_birth_missing
        && run.elapsed < Duration::from_secs(300);
    let table = r.err_stats.as_ref().map(|s| s.table_row()).unwrap_or_default();
    outcome(
        pass,
        format!(
            "bf_rate {bf:.2} (≥ 0.9), median |err| {median} s (≤ 2), false births {} / {}, no-birth all Missing {no_birth_missing}, {:.1?} (< 5 min); all births: {table}",
            r.false_births, r.no_birth_videos, run.elapsed
        ),
    )
}

fn read_series(path: &Path) -> ScoreSeries {
    ScoreSeries::read_csv(fs::File::open(path).unwrap(), ScorerDescriptor::new("saved", "0")).unwrap()
}

fn threshold_monotonicity(run: &PipelineRun) -> Outcome {
    let rows = &run.report.fpr.rows;
    let fpr_ok = rows.windows(2).all(|w| w[1].gamma > w[0].gamma && w[1].false_positives <= w[0].false_positives);
    let gammas: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
    let mut est_ok = true;
    for v in &run.report.per_video {
        let s = read_series(&run.dir.path().join("eval/scores").join(format!("{}.csv", v.video_id)));
        let s = fir_smooth(&s, 3, StartupPolicy::AverageAvailable).unwrap();
        let t: Vec<f64> = gammas
            .iter()
            .map(|&g| estimate_tob(&s, g, 3).unwrap().t_hat.unwrap_or(f64::INFINITY))
            .collect();
        est_ok &= t.windows(2).all(|w| w[0] <= w[1]);
    }
    let fpr_05 = rows.iter().find(|r| r.gamma == 0.5).and_then(|r| r.fpr);
    let fpr_09 = rows.iter().find(|r| r.gamma == 0.9).and_then(|r| r.fpr);
    outcome(
        fpr_ok && est_ok,
        format!(
            "FPR non-increasing over {} thresholds {fpr_ok} (FPR(0.5) {fpr_05:?}, FPR(0.9) {fpr_09:?}), per-video t_hat non-decreasing over 100 thresholds {est_ok}",
            rows.len()
        ),
    )
}

fn collect_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(a: &PipelineRun, b: &PipelineRun) -> Outcome {
    let fa = collect_files(a.dir.path());
    let fb = collect_files(b.dir.path());
    let count = |ext: &str| fa.keys().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    let differing: Vec<String> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    outcome(
        differing.is_empty() && count("trv") == 20,
        format!(
            "{} files compared ({} TRV1, {} CSV, {} JSON), {} differ {:?}",
            fa.len(),
            count("trv"),
            count("csv"),
            count("json"),
            differing.len(),
            differing.iter().take(5).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------- 8. Format

type Case = (&'static str, Vec<u8>, fn(&TrvError) -> bool);

fn random_video(rng: &mut ChaCha8Rng) -> ThermalVideo {
    let w = rng.random_range(1..=16u32);
    let h = rng.random_range(1..=16u32);
    let frames = rng.random_range(1..=6usize);
    let fr = FrameRate::new(rng.random_range(1..=120), rng.random_range(1..=10)).unwrap();
    let scale = rng.random_range(1e-4..1.0);
    let offset = rng.random_range(-300.0..300.0);
    let px = (0..frames * (w * h) as usize).map(|_| rng.random()).collect();
    ThermalVideo::from_pixels(w, h, fr, scale, offset, px).unwrap()
}

fn format_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e1);
    let mut bad_round_trips = 0;
    for _ in 0..10_000 {
        let v = random_video(&mut rng);
        let mut buf = Vec::new();
        let n = write_trv(&v, &mut buf).unwrap();
        let back = read_trv(Cursor::new(&buf)).unwrap();
        let same = n == buf.len() as u64
            && back.pixels() == v.pixels()
            && (back.width(), back.height(), back.frame_rate()) == (v.width(), v.height(), v.frame_rate())
            && back.temp_scale().to_bits() == v.temp_scale().to_bits()
            && back.temp_offset().to_bits() == v.temp_offset().to_bits();
        if !same {
            bad_round_trips += 1;
        }
    }

    let v = random_video(&mut rng);
    let mut good = Vec::new();
    write_trv(&v, &mut good).unwrap();
    let frame_bytes = (v.frame_len() * 2) as u64;
    let payload = good.len() as u64 - HEADER_LEN;
    let mut cases: Vec<Case> = Vec::new();
    let mut m = good.clone();
    m[..4].copy_from_slice(b"XXXX");
    cases.push(("bad magic", m, |e| matches!(e, TrvError::BadMagic { .. })));
    let mut m = good.clone();
    m[4..8].copy_from_slice(&2u32.to_le_bytes());
    cases.push(("unknown version", m, |e| matches!(e, TrvError::UnsupportedVersion(2))));
    let mut m = good.clone();
    m.truncate(m.len() - frame_bytes as usize);
    cases.push(("missing frame", m, |e| matches!(e, TrvError::Corrupt { .. })));
    let mut m = good.clone();
    m.truncate(m.len() - 1);
    cases.push(("truncated payload", m, |e| matches!(e, TrvError::Corrupt { .. })));
    let mut m = good.clone();
    m.push(0);
    cases.push(("trailing byte", m, |e| matches!(e, TrvError::Corrupt { .. })));
    cases.push(("truncated header", good[..20].to_vec(), |e| matches!(e, TrvError::Corrupt { .. })));
    let mut m = good.clone();
    m[32..40].copy_from_slice(&0.0f64.to_le_bytes());
    cases.push(("zero temp_scale", m, |e| matches!(e, TrvError::Invariant(_))));
    let mut m = good.clone();
    m[32..40].copy_from_slice(&(-1.0f64).to_le_bytes());
    cases.push(("negative temp_scale", m, |e| matches!(e, TrvError::Invariant(_))));
    let mut m = good.clone();
    m[40..48].copy_from_slice(&f64::NAN.to_le_bytes());
    cases.push(("NaN temp_offset", m, |e| matches!(e, TrvError::Invariant(_))));
    let mut m = good.clone();
    m[8..12].copy_from_slice(&0u32.to_le_bytes());
    cases.push(("zero width", m, |e| matches!(e, TrvError::Invariant(_) | TrvError::Corrupt { .. })));
    let mut m = good.clone();
    m[28..32].copy_from_slice(&0u32.to_le_bytes());
    cases.push(("zero fps denominator", m, |e| matches!(e, TrvError::Invariant(_))));

    let mut failed_cases = Vec::new();
    for (name, bytes, check) in &cases {
        match read_trv(Cursor::new(bytes)) {
            Err(e) if check(&e) => {}
            Err(e) => failed_cases.push(format!("{name}: wrong error {e}")),
            Ok(_) => failed_cases.push(format!("{name}: accepted")),
        }
    }
    let missing_frame_named = match read_trv(Cursor::new(&good[..good.len() - frame_bytes as usize])) {
        Err(TrvError::Corrupt { expected, actual }) => expected == payload && actual == payload - frame_bytes,
        _ => false,
    };
    outcome(
        bad_round_trips == 0 && failed_cases.is_empty() && missing_frame_named,
        format!(
            "10000 round trips, {bad_round_trips} mismatched; {} corruption cases, rejected correctly: {} {:?}",
            cases.len(),
            cases.len() - failed_cases.len(),
            failed_cases
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 GMM recovery", gmm_recovery()),
        ("2 FIR oracle", fir_oracle()),
        ("3 Metric oracle", metric_oracle()),
        ("4 Gradient check", gradient_check()),
    ];
    let specs = acceptance_batch();
    let a = pipeline_run(&specs);
    let b = pipeline_run(&specs);
    results.push(("5 End-to-end", end_to_end(&a, &specs)));
    results.push(("6 Threshold monotonicity", threshold_monotonicity(&a)));
    results.push(("7 Determinism", determinism(&a, &b)));
    results.push(("8 Format", format_checks()));

    let mut all = true;
    for (name, o) in &results {
        println!("{} [{name}] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
