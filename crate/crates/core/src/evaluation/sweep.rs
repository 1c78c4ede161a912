use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::detection::ScoreSeries;

/// One row of the threshold sweep. The denominator counts grid points
/// outside the tolerance window around the birth (every point of a
/// no-birth video).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FprRow {
    pub gamma: f64,
    /// `None` when the batch has no negative grid points.
    pub fpr: Option<f64>,
    pub false_positives: usize,
    pub negatives: usize,
}

/// `γ = 0.05, 0.10, …, 1.00`.
pub fn default_gammas() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}

/// False-positive rate per threshold over filtered scores. A grid point
/// farther than `window` seconds from the annotated birth is a negative; a
/// negative with `filtered ≥ γ` is a false positive.
pub fn sweep_thresholds(
    items: &[(&ScoreSeries, Option<f64>)],
    gammas: &[f64],
    window: f64,
) -> Result<Vec<FprRow>, EvalError> {
    if gammas.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if let Some(&g) = gammas.iter().find(|g| !g.is_finite()) {
        return Err(EvalError::Gamma(g));
    }
    let mut negatives: Vec<f64> = Vec::new();
    for (series, t_birth) in items {
        let filtered = series.filtered.as_ref().ok_or(EvalError::Unfiltered)?;
        for (i, &v) in filtered.iter().enumerate() {
            let t = series.t_at(i);
            let negative = match t_birth {
                None => true,
                Some(tb) => (t - tb).abs() > window,
            };
            if negative {
                negatives.push(v);
            }
        }
    }
    Ok(gammas
        .iter()
        .map(|&gamma| {
            let fp = negatives.iter().filter(|&&v| v >= gamma).count();
            FprRow {
                gamma,
                fpr: (!negatives.is_empty()).then(|| fp as f64 / negatives.len() as f64),
                false_positives: fp,
                negatives: negatives.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ScorerDescriptor;
    use proptest::prelude::*;

    fn filtered(t_start: f64, v: Vec<f64>) -> ScoreSeries {
        ScoreSeries {
            filtered: Some(v.clone()),
            ..ScoreSeries::new(t_start, 1.0, v, ScorerDescriptor::new("t", "0"))
        }
    }

    #[test]
    fn degenerate_thresholds() {
        let a = filtered(3.0, vec![0.2, 0.4, 0.95, 0.3]);
        let rows = sweep_thresholds(&[(&a, None)], &[0.0, 0.96], 10.0).unwrap();
        assert_eq!(rows[0].fpr, Some(1.0));
        assert_eq!(rows[1].fpr, Some(0.0));
    }

    #[test]
    fn window_excludes_birth_region() {
        // Grid t = 0..40, birth at 20: negatives are t < 10 and t > 30.
        let mut v = vec![0.0; 41];
        for x in &mut v[10..=30] {
            *x = 1.0;
        }
        v[5] = 0.95;
        let s = filtered(0.0, v);
        let rows = sweep_thresholds(&[(&s, Some(20.0))], &[0.9], 10.0).unwrap();
        assert_eq!(rows[0].negatives, 20);
        assert_eq!(rows[0].false_positives, 1);
        assert_eq!(rows[0].fpr, Some(0.05));
    }

    #[test]
    fn errors() {
        let s = filtered(0.0, vec![0.5]);
        assert!(matches!(sweep_thresholds(&[(&s, None)], &[], 10.0), Err(EvalError::EmptyGrid)));
        let raw_only = ScoreSeries::new(0.0, 1.0, vec![0.5], ScorerDescriptor::new("t", "0"));
        assert!(matches!(sweep_thresholds(&[(&raw_only, None)], &[0.5], 10.0), Err(EvalError::Unfiltered)));
        let rows = sweep_thresholds(&[(&s, Some(0.0))], &[0.5], 10.0).unwrap();
        assert_eq!(rows[0].fpr, None);
    }

    proptest! {
        #[test]
        fn fpr_non_increasing(v in prop::collection::vec(0.0f64..=1.0, 1..120), tb in prop::option::of(0.0f64..120.0)) {
            let s = filtered(3.0, v);
            let rows = sweep_thresholds(&[(&s, tb)], &default_gammas(), 10.0).unwrap();
            for w in rows.windows(2) {
                prop_assert!(w[1].false_positives <= w[0].false_positives);
            }
        }
    }
}
