//! Confusion-based metrics, the maximum-achievable-accuracy bound and ROC
//! curves.
//!
//! Two of the reported rates are kept exactly as the detection literature
//! for this method prints them and differ from the textbook definitions:
//!
//! * `fpr_paper = ρ / (τ + δ)`, next to the standard `ρ / (ρ + δ)`;
//! * `auc_paper = ½(τ/(τ+ρ) + δ/(δ+ρ))`, next to the ROC integral.
//!
//! Here τ, δ, ρ, μ are true positives, true negatives, false positives and
//! false negatives, with malware as the positive class.

use serde::{Deserialize, Serialize};

use crate::classifiers::{ann_neighbors, Decision};
use crate::error::{Error, Result};
use crate::feature_space::{check_dims, Label, LabeledDataset};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Malware, Label::Malware) => self.tp += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
            (Label::Malware, Label::Benign) => self.fp += 1,
            (Label::Benign, Label::Malware) => self.fn_ += 1,
        }
    }
}

pub fn confusion(predicted: &[Label], actual: &[Label]) -> Result<ConfusionCounts> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        c.record(p, a);
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr_paper: f64,
    pub fpr_standard: f64,
    pub auc_paper: f64,
    /// Names of metrics whose denominator was zero and that were set to 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl MetricSet {
    /// `fpr_paper` is above 1 exactly when `ρ > τ + δ`.
    pub fn fpr_paper_exceeds_one(&self) -> bool {
        self.fpr_paper > 1.0
    }
}

pub fn compute_metrics(c: &ConfusionCounts) -> Result<MetricSet> {
    if c.total() == 0 {
        return Err(Error::Empty("confusion counts"));
    }
    let mut undefined = Vec::new();
    let mut ratio = |name: &str, num: u64, den: u64| -> f64 {
        if den == 0 {
            if !undefined.iter().any(|u| u == name) {
                undefined.push(name.to_string());
            }
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let (tp, tn, fp, fn_) = (c.tp, c.tn, c.fp, c.fn_);
    let accuracy = ratio("accuracy", tp + tn, c.total());
    let precision = ratio("precision", tp, tp + fp);
    let recall = ratio("recall", tp, tp + fn_);
    let fpr_paper = ratio("fpr_paper", fp, tp + tn);
    let fpr_standard = ratio("fpr_standard", fp, fp + tn);
    let auc_paper = 0.5 * (ratio("auc_paper", tp, tp + fp) + ratio("auc_paper", tn, tn + fp));
    let f1 = if precision + recall == 0.0 {
        if !undefined.iter().any(|u| u == "f1") {
            undefined.push("f1".to_string());
        }
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricSet {
        accuracy,
        precision,
        recall,
        f1,
        fpr_paper,
        fpr_standard,
        auc_paper,
        undefined,
    })
}

/// Best case for any detector that votes inside the ANN neighbor set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaaBounds {
    pub max_accuracy: f64,
    pub min_fpr: f64,
    pub max_auc: f64,
    /// Confusion when every attainable label is predicted correctly.
    pub best_case: ConfusionCounts,
}

/// Whether each test sample's true label occurs among its ANN neighbors.
pub fn label_attainable(test: &LabeledDataset, train: &LabeledDataset) -> Result<Vec<bool>> {
    check_dims(test.dim(), train.dim())?;
    let check = |(x, y): (&crate::SparseBinaryVector, Label)| -> Result<bool> {
        Ok(ann_neighbors(x, train)?.contains_label(y))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        test.samples()
            .par_iter()
            .zip(test.labels().par_iter().copied())
            .map(check)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        test.iter().map(check).collect()
    }
}

pub fn maa_bounds(test: &LabeledDataset, train: &LabeledDataset) -> Result<MaaBounds> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let attainable = label_attainable(test, train)?;
    let mut best = ConfusionCounts::default();
    for (&ok, &y) in attainable.iter().zip(test.labels()) {
        // unattainable labels force the opposite prediction
        let predicted = if ok { y } else { Label::from_bit(!y.is_malware()) };
        best.record(predicted, y);
    }
    let m = compute_metrics(&best)?;
    Ok(MaaBounds {
        max_accuracy: attainable.iter().filter(|&&b| b).count() as f64 / test.len() as f64,
        min_fpr: m.fpr_paper,
        max_auc: m.auc_paper,
        best_case: best,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Predict malware when the malware vote share is at least this.
    /// The first point uses `+∞` (serialized as `null`).
    #[serde(deserialize_with = "threshold_or_inf")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

fn threshold_or_inf<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Points ordered by descending threshold, from `(0, 0)` to `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Sweeps thresholds over the distinct scores plus an upper sentinel.
    pub fn from_scores(scores: &[f64], actual: &[Label]) -> Result<Self> {
        if scores.len() != actual.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: actual.len(),
            });
        }
        if scores.is_empty() {
            return Err(Error::Empty("test set"));
        }
        if let Some(s) = scores.iter().find(|s| s.is_nan()) {
            return Err(Error::param(format!("score {s} is not a number")));
        }
        let positives = actual.iter().filter(|l| l.is_malware()).count();
        let negatives = actual.len() - positives;
        let rate = |k: usize, total: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };

        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

        let mut points = vec![RocPoint {
            threshold: f64::INFINITY,
            fpr: 0.0,
            tpr: 0.0,
        }];
        let (mut tp, mut fp) = (0, 0);
        let mut i = 0;
        while i < order.len() {
            let t = scores[order[i]];
            while i < order.len() && scores[order[i]] == t {
                if actual[order[i]].is_malware() {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            points.push(RocPoint {
                threshold: t,
                fpr: rate(fp, negatives),
                tpr: rate(tp, positives),
            });
        }
        Ok(Self { points })
    }

    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }

    /// Two-column `fpr,tpr` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.fpr, p.tpr));
        }
        out
    }
}

/// ROC of a fitted model over a test set, scored by malware vote share.
pub fn roc_curve(model: &crate::model::Model<'_>, test: &LabeledDataset) -> Result<RocCurve> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let decisions = model.decide_all(test)?;
    roc_from_decisions(&decisions, test.labels())
}

pub fn roc_from_decisions(decisions: &[Decision], actual: &[Label]) -> Result<RocCurve> {
    let scores: Vec<f64> = decisions.iter().map(|d| d.malware_share).collect();
    RocCurve::from_scores(&scores, actual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::from_bit(b == 1)).collect()
    }

    #[test]
    fn confusion_basics() {
        let actual = labels(&[1, 1, 1, 1, 1, 1, 0, 0, 0, 0]);
        let c = confusion(&actual, &actual).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (6, 4, 0, 0));
        let flipped: Vec<Label> = actual.iter().map(|l| Label::from_bit(!l.is_malware())).collect();
        let c = confusion(&flipped, &actual).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion(&actual[..3], &actual).is_err());
    }

    #[test]
    fn confusion_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p: Vec<Label> = (0..1000).map(|_| Label::from_bit(rng.random_bool(0.5))).collect();
        let a: Vec<Label> = (0..1000).map(|_| Label::from_bit(rng.random_bool(0.4))).collect();
        let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
        for i in 0..1000 {
            let (pi, ai) = (p[i].as_u8(), a[i].as_u8());
            if pi == 1 && ai == 1 {
                tp += 1;
            }
            if pi == 0 && ai == 0 {
                tn += 1;
            }
            if pi == 1 && ai == 0 {
                fp += 1;
            }
            if pi == 0 && ai == 1 {
                fn_ += 1;
            }
        }
        assert_eq!(confusion(&p, &a).unwrap(), ConfusionCounts { tp, tn, fp, fn_ });
    }

    #[test]
    fn hand_derived_metrics() {
        let m = compute_metrics(&ConfusionCounts {
            tp: 5,
            tn: 3,
            fp: 1,
            fn_: 1,
        })
        .unwrap();
        assert!((m.accuracy - 0.8).abs() < 1e-12);
        assert!((m.precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((m.recall - 5.0 / 6.0).abs() < 1e-12);
        assert!((m.f1 - 5.0 / 6.0).abs() < 1e-12);
        assert!((m.fpr_paper - 0.125).abs() < 1e-12);
        assert!((m.fpr_standard - 0.25).abs() < 1e-12);
        assert!((m.auc_paper - 0.5 * (5.0 / 6.0 + 0.75)).abs() < 1e-12);
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn perfect_and_degenerate() {
        let m = compute_metrics(&ConfusionCounts {
            tp: 4,
            tn: 6,
            fp: 0,
            fn_: 0,
        })
        .unwrap();
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1, m.fpr_paper, m.fpr_standard, m.auc_paper),
            (1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0)
        );

        let m = compute_metrics(&ConfusionCounts {
            tp: 0,
            tn: 2,
            fp: 0,
            fn_: 3,
        })
        .unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert!(m.undefined.contains(&"precision".to_string()));
        assert!(m.undefined.contains(&"f1".to_string()));

        let m = compute_metrics(&ConfusionCounts {
            tp: 0,
            tn: 1,
            fp: 5,
            fn_: 0,
        })
        .unwrap();
        assert!(m.fpr_paper_exceeds_one());
        assert!(m.fpr_standard <= 1.0);
        assert!(compute_metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn toy_maa() {
        let train = toy::dataset();
        let test = LabeledDataset::new(vec![toy::query()], vec![Label::Malware], 10).unwrap();
        let b = maa_bounds(&test, &train).unwrap();
        assert_eq!(b.max_accuracy, 1.0);

        // verbatim unique copies of training rows
        let b = maa_bounds(&train, &train).unwrap();
        assert_eq!(b.max_accuracy, 1.0);
        assert_eq!(b.min_fpr, 0.0);
        assert_eq!(b.max_auc, 1.0);
    }

    #[test]
    fn roc_endpoints_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let n = 50;
            let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..5) as f64) / 4.0).collect();
            let actual: Vec<Label> = (0..n).map(|_| Label::from_bit(rng.random_bool(0.5))).collect();
            let roc = RocCurve::from_scores(&scores, &actual).unwrap();
            let first = roc.points.first().unwrap();
            let last = roc.points.last().unwrap();
            assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
            assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            for w in roc.points.windows(2) {
                assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
                assert!(w[1].threshold < w[0].threshold);
            }
            let auc = roc.auc();
            assert!((0.0..=1.0).contains(&auc));
        }
    }

    #[test]
    fn roc_perfect_and_csv() {
        let actual = labels(&[1, 1, 0, 0]);
        let roc = RocCurve::from_scores(&[1.0, 0.75, 0.25, 0.0], &actual).unwrap();
        assert_eq!(roc.auc(), 1.0);
        assert!(roc.to_csv().starts_with("fpr,tpr\n0,0\n"));
        assert!(RocCurve::from_scores(&[], &[]).is_err());
    }
}
