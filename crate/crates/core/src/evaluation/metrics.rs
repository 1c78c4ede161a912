use serde::{Deserialize, Serialize};

use crate::clipper::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, label: Label, predicted: Label) {
        match (label, predicted) {
            (Label::Birth, Label::Birth) => self.tp += 1,
            (Label::NoBirth, Label::Birth) => self.fp += 1,
            (Label::NoBirth, Label::NoBirth) => self.tn += 1,
            (Label::Birth, Label::NoBirth) => self.fn_ += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Self::default();
        for (l, p) in pairs {
            c.record(l, p);
        }
        c
    }
}

/// Clip-level metrics. A zero denominator leaves the metric `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub mcc: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classify_metrics(c: &ConfusionCounts) -> ClipMetrics {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = (den > 0.0).then(|| ((tp * tn - fp * fn_) / den.sqrt()).clamp(-1.0, 1.0));
    ClipMetrics {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        mcc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_row() {
        let m = classify_metrics(&ConfusionCounts {
            tp: 74,
            fp: 7,
            tn: 917,
            fn_: 2,
        });
        assert_eq!(format!("{:.3}", m.precision.unwrap()), "0.914");
        assert_eq!(format!("{:.3}", m.recall.unwrap()), "0.974");
    }

    #[test]
    fn perfect_and_undefined() {
        let m = classify_metrics(&ConfusionCounts {
            tp: 10,
            tn: 10,
            ..Default::default()
        });
        assert_eq!((m.precision, m.recall, m.mcc), (Some(1.0), Some(1.0), Some(1.0)));
        let m = classify_metrics(&ConfusionCounts {
            tn: 5,
            ..Default::default()
        });
        assert_eq!((m.precision, m.recall, m.mcc), (None, None, None));
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"precision":null,"recall":null,"mcc":null}"#);
    }

    #[test]
    fn counts_serialize_fn_field() {
        let c = ConfusionCounts::from_pairs([(Label::Birth, Label::NoBirth), (Label::NoBirth, Label::NoBirth)]);
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"tp":0,"fp":0,"tn":1,"fn":1}"#);
    }
}
