//! Three-component 1-D Gaussian mixture fitted by expectation maximization.
//!
//! Initialization is greedy k-means++ seeding followed by a single Lloyd
//! refinement pass; EM then runs until the relative log-likelihood
//! improvement drops below the tolerance or the iteration cap is hit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COMPONENTS: usize = 3;
pub const MIN_SAMPLES: usize = 30;
pub const VARIANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error(
        "degenerate input: {samples} samples with {distinct} distinct values \
         (need >= {MIN_SAMPLES} samples and >= {COMPONENTS} distinct values); \
         fall back to the default range"
    )]
    Degenerate { samples: usize, distinct: usize },
    #[error("samples contain non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Relative log-likelihood improvement below which EM stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 500,
        }
    }
}

/// A fitted mixture. Components are stored with ascending means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub weights: [f64; COMPONENTS],
    pub means: [f64; COMPONENTS],
    pub variances: [f64; COMPONENTS],
    /// Total log-likelihood of the samples under the final parameters.
    pub log_likelihood: f64,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood evaluated before each M-step and once after the last.
    #[serde(skip)]
    pub ll_history: Vec<f64>,
}

impl GmmFit {
    /// Posterior component probabilities for one sample.
    pub fn responsibilities(&self, x: f64) -> [f64; COMPONENTS] {
        let mut logp = [0.0; COMPONENTS];
        for (k, lp) in logp.iter_mut().enumerate() {
            *lp = log_weighted_density(x, self.weights[k], self.means[k], self.variances[k]);
        }
        let lse = log_sum_exp(&logp);
        logp.map(|lp| (lp - lse).exp())
    }

    /// Mixture density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        (0..COMPONENTS)
            .map(|k| log_weighted_density(x, self.weights[k], self.means[k], self.variances[k]).exp())
            .sum()
    }
}

#[inline]
fn log_weighted_density(x: f64, weight: f64, mean: f64, var: f64) -> f64 {
    if weight <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let d = x - mean;
    weight.ln() - 0.5 * ((2.0 * PI * var).ln() + d * d / var)
}

#[inline]
fn log_sum_exp(v: &[f64; COMPONENTS]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn count_distinct(samples: &[f64], cap: usize) -> usize {
    let mut seen: Vec<f64> = Vec::with_capacity(cap);
    for &x in samples {
        if !seen.contains(&x) {
            seen.push(x);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

/// Greedy k-means++ seeding: each new center is the best of a few
/// D²-weighted candidates, judged by the resulting potential.
fn kmeanspp(samples: &[f64], rng: &mut ChaCha8Rng) -> [f64; COMPONENTS] {
    let n = samples.len();
    let trials = 2 + (COMPONENTS as f64).ln() as usize;
    let mut centers = [0.0; COMPONENTS];
    centers[0] = samples[rng.random_range(0..n)];
    let mut closest: Vec<f64> = samples.iter().map(|x| (x - centers[0]).powi(2)).collect();
    let mut potential: f64 = closest.iter().sum();

    for c in 1..COMPONENTS {
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let candidate = if potential > 0.0 {
                let target = rng.random::<f64>() * potential;
                let mut acc = 0.0;
                let mut pick = n - 1;
                for (i, d) in closest.iter().enumerate() {
                    acc += d;
                    if acc > target {
                        pick = i;
                        break;
                    }
                }
                samples[pick]
            } else {
                samples[rng.random_range(0..n)]
            };
            let dist: Vec<f64> = samples
                .iter()
                .zip(&closest)
                .map(|(x, d)| d.min((x - candidate).powi(2)))
                .collect();
            let pot: f64 = dist.iter().sum();
            if best.as_ref().is_none_or(|(p, _, _)| pot < *p) {
                best = Some((pot, candidate, dist));
            }
        }
        let (pot, candidate, dist) = best.expect("at least one trial");
        centers[c] = candidate;
        closest = dist;
        potential = pot;
    }
    centers
}

/// Sufficient statistics gathered in one E-step pass.
#[derive(Default)]
struct Stats {
    r: [f64; COMPONENTS],
    rx: [f64; COMPONENTS],
    rxx: [f64; COMPONENTS],
    ll: f64,
}

fn e_step(xs: &[f64], w: &[f64; COMPONENTS], mu: &[f64; COMPONENTS], var: &[f64; COMPONENTS]) -> Stats {
    let mut s = Stats::default();
    let log_norm: [f64; COMPONENTS] =
        std::array::from_fn(|k| if w[k] > 0.0 { w[k].ln() - 0.5 * (2.0 * PI * var[k]).ln() } else { f64::NEG_INFINITY });
    let inv_var: [f64; COMPONENTS] = std::array::from_fn(|k| 0.5 / var[k]);
    for &x in xs {
        let mut lp = [0.0; COMPONENTS];
        for k in 0..COMPONENTS {
            let d = x - mu[k];
            lp[k] = log_norm[k] - d * d * inv_var[k];
        }
        let lse = log_sum_exp(&lp);
        s.ll += lse;
        for k in 0..COMPONENTS {
            let r = (lp[k] - lse).exp();
            s.r[k] += r;
            s.rx[k] += r * x;
            s.rxx[k] += r * x * x;
        }
    }
    s
}

type Params = ([f64; COMPONENTS], [f64; COMPONENTS], [f64; COMPONENTS]);

fn m_step(s: &Stats, n: f64, prev: &Params) -> Params {
    let mut w = [0.0; COMPONENTS];
    let mut mu = prev.1;
    let mut var = prev.2;
    for k in 0..COMPONENTS {
        w[k] = s.r[k] / n;
        if s.r[k] > 1e-12 {
            mu[k] = s.rx[k] / s.r[k];
            var[k] = (s.rxx[k] / s.r[k] - mu[k] * mu[k]).max(VARIANCE_FLOOR);
        }
    }
    (w, mu, var)
}

/// Fit a three-component mixture to `samples`. Deterministic for a given
/// `(samples, seed)`.
pub fn fit_gmm3(samples: &[f64], seed: u64, config: &EmConfig) -> Result<GmmFit, GmmError> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(GmmError::NonFinite);
    }
    let distinct = count_distinct(samples, COMPONENTS);
    if samples.len() < MIN_SAMPLES || distinct < COMPONENTS {
        return Err(GmmError::Degenerate {
            samples: samples.len(),
            distinct,
        });
    }

    // Work on centered data to keep the second-moment sums well conditioned.
    let n = samples.len() as f64;
    let shift = samples.iter().sum::<f64>() / n;
    let xs: Vec<f64> = samples.iter().map(|x| x - shift).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeanspp(&xs, &mut rng);
    centers.sort_by(f64::total_cmp);

    // One Lloyd pass: assign to nearest center, recompute moments.
    let mut count = [0.0; COMPONENTS];
    let mut sum = [0.0; COMPONENTS];
    let mut sumsq = [0.0; COMPONENTS];
    for &x in &xs {
        let k = (0..COMPONENTS)
            .min_by(|&a, &b| (x - centers[a]).abs().total_cmp(&(x - centers[b]).abs()))
            .unwrap();
        count[k] += 1.0;
        sum[k] += x;
        sumsq[k] += x * x;
    }
    let total_var = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let mut params: Params = ([0.0; COMPONENTS], centers, [0.0; COMPONENTS]);
    for k in 0..COMPONENTS {
        if count[k] > 0.0 {
            params.0[k] = count[k] / n;
            params.1[k] = sum[k] / count[k];
            params.2[k] = (sumsq[k] / count[k] - params.1[k].powi(2)).max(VARIANCE_FLOOR);
        } else {
            params.0[k] = 1.0 / n;
            params.2[k] = total_var.max(VARIANCE_FLOOR);
        }
    }
    let wsum: f64 = params.0.iter().sum();
    params.0.iter_mut().for_each(|w| *w /= wsum);

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut prev_ll: Option<f64> = None;
    let final_ll = loop {
        let stats = e_step(&xs, &params.0, &params.1, &params.2);
        let ll = stats.ll;
        history.push(ll);
        if let Some(p) = prev_ll {
            debug_assert!(
                ll >= p - 1e-9 * p.abs().max(1.0),
                "EM log-likelihood decreased: {p} -> {ll}"
            );
            if (ll - p).abs() <= config.tolerance * p.abs() {
                converged = true;
                break ll;
            }
        }
        if iterations >= config.max_iterations {
            break ll;
        }
        params = m_step(&stats, n, &params);
        iterations += 1;
        prev_ll = Some(ll);
    };

    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| params.1[a].total_cmp(&params.1[b]));
    Ok(GmmFit {
        weights: order.map(|k| params.0[k]),
        means: order.map(|k| params.1[k] + shift),
        variances: order.map(|k| params.2[k]),
        log_likelihood: final_ll,
        iterations,
        converged,
        ll_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    /// Draw `n` points from a known mixture (the sampling oracle).
    pub(crate) fn sample_mixture(
        weights: &[f64; 3],
        means: &[f64; 3],
        stds: &[f64; 3],
        n: usize,
        seed: u64,
    ) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut counts = [0usize; 3];
        for k in 0..2 {
            counts[k] = (weights[k] * n as f64).round() as usize;
        }
        counts[2] = n - counts[0] - counts[1];
        for k in 0..3 {
            let d = Normal::new(means[k], stds[k]).unwrap();
            out.extend((0..counts[k]).map(|_| d.sample(&mut rng)));
        }
        out
    }

    #[test]
    fn recovers_separated_clusters() {
        let xs = sample_mixture(&[0.5, 0.3, 0.2], &[22.0, 30.0, 36.0], &[0.5; 3], 10_000, 1);
        let fit = fit_gmm3(&xs, 7, &EmConfig::default()).unwrap();
        for (got, want) in fit.means.iter().zip([22.0, 30.0, 36.0]) {
            assert!((got - want).abs() < 0.2, "{:?}", fit.means);
        }
        assert!(fit.converged);
        assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_weights_recovered() {
        let xs = sample_mixture(&[1.0 / 3.0; 3], &[22.0, 30.0, 36.0], &[0.5; 3], 10_000, 2);
        let fit = fit_gmm3(&xs, 3, &EmConfig::default()).unwrap();
        for w in fit.weights {
            assert!((w - 1.0 / 3.0).abs() < 0.05, "{:?}", fit.weights);
        }
    }

    #[test]
    fn constant_input_is_degenerate() {
        let xs = vec![25.0; 100];
        assert_eq!(
            fit_gmm3(&xs, 0, &EmConfig::default()),
            Err(GmmError::Degenerate {
                samples: 100,
                distinct: 1
            })
        );
        let few = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            fit_gmm3(&few, 0, &EmConfig::default()),
            Err(GmmError::Degenerate { samples: 3, .. })
        ));
    }

    #[test]
    fn three_distinct_values_fit_with_floor() {
        let mut xs = vec![20.0; 40];
        xs.extend(vec![30.0; 40]);
        xs.extend(vec![35.0; 40]);
        let fit = fit_gmm3(&xs, 0, &EmConfig::default()).unwrap();
        assert!(fit.variances.iter().all(|&v| v >= VARIANCE_FLOOR));
        assert!((fit.means[0] - 20.0).abs() < 1e-6);
        assert!((fit.means[2] - 35.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_for_seed() {
        let xs = sample_mixture(&[0.4, 0.4, 0.2], &[20.0, 27.0, 34.0], &[1.0; 3], 3_000, 9);
        let a = fit_gmm3(&xs, 11, &EmConfig::default()).unwrap();
        let b = fit_gmm3(&xs, 11, &EmConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ll_history, b.ll_history);
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let xs = sample_mixture(&[0.6, 0.3, 0.1], &[20.0, 24.0, 35.0], &[1.0, 1.5, 0.8], 5_000, 4);
        let fit = fit_gmm3(&xs, 5, &EmConfig::default()).unwrap();
        for w in fit.ll_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        assert_eq!(*fit.ll_history.last().unwrap(), fit.log_likelihood);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let xs = sample_mixture(&[0.4, 0.4, 0.2], &[20.0, 22.0, 24.0], &[1.0; 3], 2_000, 4);
        let fit = fit_gmm3(
            &xs,
            0,
            &EmConfig {
                tolerance: 0.0,
                max_iterations: 3,
            },
        )
        .unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 3);
        assert_eq!(fit.ll_history.len(), 4);
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let xs = sample_mixture(&[0.5, 0.3, 0.2], &[22.0, 30.0, 36.0], &[0.5; 3], 2_000, 8);
        let fit = fit_gmm3(&xs, 0, &EmConfig::default()).unwrap();
        for x in [-100.0, 0.0, 22.0, 26.0, 33.0, 36.0, 80.0] {
            let r = fit.responsibilities(x);
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{x}: {r:?}");
        }
    }
}
