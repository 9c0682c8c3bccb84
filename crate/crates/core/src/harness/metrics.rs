use serde::Serialize;

use crate::pheme::Label;

/// Binary classification scores with rumor as the positive class. Every
/// ratio with a zero denominator is 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n: usize,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let n = tp + fp + tn + fn_;
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        Self {
            accuracy: ratio((tp + tn) as f64, n as f64),
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
            tp,
            fp,
            tn,
            fn_,
            n,
        }
    }

    /// Scores aligned `(truth, prediction)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (truth, pred) in pairs {
            match (truth, pred) {
                (Label::Rumor, Label::Rumor) => tp += 1,
                (Label::Nonrumor, Label::Rumor) => fp += 1,
                (Label::Nonrumor, Label::Nonrumor) => tn += 1,
                (Label::Rumor, Label::Nonrumor) => fn_ += 1,
            }
        }
        Self::from_counts(tp, fp, tn, fn_)
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Self {
        Self::from_pairs(truth.iter().copied().zip(predicted.iter().copied()))
    }

    /// Sums the confusion counts of two shards.
    pub fn merge(&self, other: &Metrics) -> Self {
        Self::from_counts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn_ + other.fn_)
    }
}
