use serde::{Deserialize, Serialize};

use super::EvalError;

/// Birth-time error summary over a set of videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrStats {
    /// Signed `t_hat − t_birth` for each found birth, in input order.
    pub errors: Vec<f64>,
    /// Quartiles and mean of `|err|`; `None` when no birth was found.
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub q3: Option<f64>,
    pub mean: Option<f64>,
    pub found: usize,
    pub total: usize,
    pub bf_rate: f64,
}

/// Linear-interpolation quantile of ascending `sorted`:
/// position `p · (n − 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(&next) if frac > 0.0 => sorted[i] + frac * (next - sorted[i]),
        _ => sorted[i],
    }
}

/// Summarize `(t_hat, t_birth)` pairs.
pub fn err_stats(pairs: &[(Option<f64>, f64)]) -> Result<ErrStats, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let errors: Vec<f64> = pairs.iter().filter_map(|&(t_hat, tb)| t_hat.map(|t| t - tb)).collect();
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let q = |p| (!abs.is_empty()).then(|| quantile(&abs, p));
    Ok(ErrStats {
        q1: q(0.25),
        q2: q(0.5),
        q3: q(0.75),
        mean: (!abs.is_empty()).then(|| abs.iter().sum::<f64>() / abs.len() as f64),
        found: errors.len(),
        total: pairs.len(),
        bf_rate: errors.len() as f64 / pairs.len() as f64,
        errors,
    })
}

fn short(v: Option<f64>) -> String {
    match v {
        None => "n/a".into(),
        Some(x) => {
            let s = format!("{x:.2}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" { "0".into() } else { s.into() }
        }
    }
}

impl ErrStats {
    /// `Q1 | Q2 | Q3 | mean | B.F.`, e.g. `1 | 1.5 | 2.25 | 2.1 | 96%`.
    pub fn table_row(&self) -> String {
        format!(
            "{} | {} | {} | {} | {}%",
            short(self.q1),
            short(self.q2),
            short(self.q3),
            short(self.mean),
            (self.bf_rate * 100.0).round() as i64
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartile_arithmetic() {
        let s = err_stats(&[(Some(61.0), 60.0), (Some(59.0), 60.0), (Some(42.0), 40.0), (Some(11.0), 10.0)]).unwrap();
        assert_eq!(s.errors, vec![1.0, -1.0, 2.0, 1.0]);
        assert_eq!(s.q1, Some(1.0));
        assert_eq!(s.q2, Some(1.0));
        assert_eq!(s.q3, Some(1.25));
        assert_eq!(s.mean, Some(1.25));
        assert_eq!(s.bf_rate, 1.0);
    }

    #[test]
    fn all_missing_and_empty() {
        let s = err_stats(&[(None, 60.0), (None, 30.0)]).unwrap();
        assert_eq!(s.bf_rate, 0.0);
        assert_eq!((s.q1, s.q2, s.q3, s.mean), (None, None, None, None));
        assert_eq!(s.table_row(), "n/a | n/a | n/a | n/a | 0%");
        assert!(matches!(err_stats(&[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn exact_hit() {
        let s = err_stats(&[(Some(60.0), 60.0)]).unwrap();
        assert_eq!((s.q2, s.errors.clone()), (Some(0.0), vec![0.0]));
    }

    #[test]
    fn row_format() {
        let s = ErrStats {
            errors: vec![],
            q1: Some(1.0),
            q2: Some(1.5),
            q3: Some(2.25),
            mean: Some(2.1),
            found: 24,
            total: 25,
            bf_rate: 0.96,
        };
        assert_eq!(s.table_row(), "1 | 1.5 | 2.25 | 2.1 | 96%");
    }

    proptest! {
        #[test]
        fn quartiles_ordered_and_median(errs in prop::collection::vec(-50.0f64..50.0, 1..60)) {
            let pairs: Vec<_> = errs.iter().map(|&e| (Some(100.0 + e), 100.0)).collect();
            let s = err_stats(&pairs).unwrap();
            let (q1, q2, q3) = (s.q1.unwrap(), s.q2.unwrap(), s.q3.unwrap());
            prop_assert!(q1 <= q2 && q2 <= q3);
            let mut abs: Vec<f64> = s.errors.iter().map(|e| e.abs()).collect();
            abs.sort_by(f64::total_cmp);
            let n = abs.len();
            let median = if n % 2 == 1 { abs[n / 2] } else { (abs[n / 2 - 1] + abs[n / 2]) / 2.0 };
            prop_assert!((q2 - median).abs() < 1e-9);
        }
    }
}
