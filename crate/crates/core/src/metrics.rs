//! Binary classification metrics: per-class precision, recall and F1,
//! accuracy, macro and support-weighted averages, ROC curves and AUC.
//!
//! Class 1 is the positive class. A metric whose denominator is zero is
//! reported as 0 and named in `zero_division`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(y_true: &[u8], y_pred: &[u8]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::Input(format!(
                "{} labels but {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        if y_true.is_empty() {
            return Err(Error::Input("no predictions to score".into()));
        }
        let mut c = ConfusionMatrix::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (1, 0) => c.fn_ += 1,
                (0, 0) => c.tn += 1,
                _ => return Err(Error::Input("labels must be 0 or 1".into())),
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score at or above which rows are called positive; `None` for the
    /// starting point above every score.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Indexed by class label.
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub zero_division: Vec<String>,
    pub auc: Option<f64>,
    pub roc: Vec<RocPoint>,
}

fn ratio(num: u64, den: u64, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64, name: &str, flags: &mut Vec<String>) -> f64 {
    if p + r == 0.0 {
        flags.push(name.to_string());
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision, recall and F1 of the class whose hits are `tp`, false alarms
/// `fp` and misses `fn_`.
fn class_metrics(tp: u64, fp: u64, fn_: u64, class: u8, flags: &mut Vec<String>) -> ClassMetrics {
    let precision = ratio(tp, tp + fp, &format!("precision_{class}"), flags);
    let recall = ratio(tp, tp + fn_, &format!("recall_{class}"), flags);
    ClassMetrics {
        precision,
        recall,
        f1: f1(precision, recall, &format!("f1_{class}"), flags),
        support: tp + fn_,
    }
}

pub fn metrics_from_confusion(c: ConfusionMatrix) -> MetricsReport {
    let mut flags = Vec::new();
    let negative = class_metrics(c.tn, c.fn_, c.fp, 0, &mut flags);
    let positive = class_metrics(c.tp, c.fp, c.fn_, 1, &mut flags);
    let n = c.total() as f64;
    let avg = |f: fn(&ClassMetrics) -> f64| {
        let macro_ = (f(&negative) + f(&positive)) / 2.0;
        let weighted = (f(&negative) * negative.support as f64 + f(&positive) * positive.support as f64) / n;
        (macro_, weighted)
    };
    let (mp, wp) = avg(|m| m.precision);
    let (mr, wr) = avg(|m| m.recall);
    let (mf, wf) = avg(|m| m.f1);
    MetricsReport {
        per_class: vec![negative, positive],
        macro_avg: Averages {
            precision: mp,
            recall: mr,
            f1: mf,
        },
        weighted_avg: Averages {
            precision: wp,
            recall: wr,
            f1: wf,
        },
        accuracy: c.accuracy(),
        confusion: c,
        zero_division: flags,
        auc: None,
        roc: Vec::new(),
    }
}

/// Report without ROC data.
pub fn compute_metrics(y_true: &[u8], y_pred: &[u8]) -> Result<MetricsReport> {
    Ok(metrics_from_confusion(ConfusionMatrix::from_predictions(y_true, y_pred)?))
}

/// ROC points over the unique scores in descending order, starting at (0, 0),
/// and the trapezoidal area. Tied scores form a single point.
pub fn roc_and_auc(y_true: &[u8], scores: &[f64]) -> Result<(Vec<RocPoint>, f64)> {
    if y_true.len() != scores.len() {
        return Err(Error::Input(format!(
            "{} labels but {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    let pos = y_true.iter().filter(|&&l| l == 1).count() as u64;
    let neg = y_true.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    // Twice the area in units of one positive-negative pair, kept integral so
    // the result equals the pairwise (Mann-Whitney) count exactly.
    let mut doubled_area: u64 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (prev_tp, prev_fp) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if y_true[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled_area += (fp - prev_fp) * (tp + prev_tp);
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: Some(s),
        });
    }
    let auc = doubled_area as f64 / (2 * pos * neg) as f64;
    Ok((points, auc))
}

/// Scores usable for permutation importance and model selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMetric {
    Accuracy,
    Precision,
    Recall,
    F1,
    RocAuc,
}

impl std::str::FromStr for ScoreMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(ScoreMetric::Accuracy),
            "precision" => Ok(ScoreMetric::Precision),
            "recall" => Ok(ScoreMetric::Recall),
            "f1" => Ok(ScoreMetric::F1),
            "roc_auc" => Ok(ScoreMetric::RocAuc),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

impl ScoreMetric {
    /// Scores positive-class probabilities; hard labels use `p > 0.5`.
    pub fn score(self, y_true: &[u8], proba: &[f64]) -> Result<f64> {
        if self == ScoreMetric::RocAuc {
            return roc_and_auc(y_true, proba).map(|(_, auc)| auc);
        }
        let pred: Vec<u8> = proba.iter().map(|&p| (p > 0.5) as u8).collect();
        let c = ConfusionMatrix::from_predictions(y_true, &pred)?;
        let r = metrics_from_confusion(c);
        Ok(match self {
            ScoreMetric::Accuracy => r.accuracy,
            ScoreMetric::Precision => r.per_class[1].precision,
            ScoreMetric::Recall => r.per_class[1].recall,
            ScoreMetric::F1 => r.per_class[1].f1,
            ScoreMetric::RocAuc => unreachable!(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> (Vec<u8>, Vec<u8>) {
        let mut t = Vec::new();
        let mut p = Vec::new();
        for (n, a, b) in [(tp, 1, 1), (fp, 0, 1), (fn_, 1, 0), (tn, 0, 0)] {
            t.extend(std::iter::repeat_n(a, n));
            p.extend(std::iter::repeat_n(b, n));
        }
        (t, p)
    }

    #[test]
    fn worked_confusion_example() {
        let (t, p) = from_counts(9, 1, 3, 7);
        let r = compute_metrics(&t, &p).unwrap();
        let pos = r.per_class[1];
        assert_eq!(pos.precision, 0.9);
        assert_eq!(pos.recall, 0.75);
        assert!((pos.f1 - 0.818_181_818_181_818_2).abs() < 1e-15);
        assert_eq!(r.accuracy, 0.8);
    }

    #[test]
    fn perfect_predictions() {
        let (t, p) = from_counts(4, 0, 0, 6);
        let r = compute_metrics(&t, &p).unwrap();
        for m in &r.per_class {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
        assert!(r.zero_division.is_empty());
    }

    #[test]
    fn no_predicted_positives_uses_zero_rule() {
        let (t, p) = from_counts(0, 0, 3, 7);
        let r = compute_metrics(&t, &p).unwrap();
        assert_eq!(r.per_class[1].precision, 0.0);
        assert_eq!(r.accuracy, 0.7);
        assert!(r.zero_division.contains(&"precision_1".to_string()));
    }

    #[test]
    fn length_mismatch_is_an_input_error() {
        assert!(matches!(compute_metrics(&[0, 1], &[0]), Err(Error::Input(_))));
    }

    #[test]
    fn separating_scores_give_unit_auc() {
        let (roc, auc) = roc_and_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!((roc[0].fpr, roc[0].tpr), (0.0, 0.0));
        let last = roc.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn single_class_auc_is_undefined() {
        assert!(matches!(roc_and_auc(&[1, 1], &[0.2, 0.3]), Err(Error::UndefinedAuc)));
    }

    #[test]
    fn reversed_scores_complement_auc() {
        let y = [0, 1, 1, 0, 1, 0, 0, 1];
        let s = [0.3, 0.9, 0.2, 0.5, 0.7, 0.1, 0.8, 0.6];
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let (_, a) = roc_and_auc(&y, &s).unwrap();
        let (_, b) = roc_and_auc(&y, &neg).unwrap();
        assert!((a + b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_metric_name() {
        assert!(matches!("brier".parse::<ScoreMetric>(), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn identities_hold(tp in 0usize..30, fp in 0usize..30, fn_ in 0usize..30, tn in 0usize..30) {
            prop_assume!(tp + fp + fn_ + tn > 0);
            let (t, p) = from_counts(tp, fp, fn_, tn);
            let r = compute_metrics(&t, &p).unwrap();
            prop_assert_eq!(r.confusion.total() as usize, t.len());
            for m in &r.per_class {
                if m.precision + m.recall > 0.0 {
                    prop_assert_eq!(m.f1, 2.0 * m.precision * m.recall / (m.precision + m.recall));
                }
                prop_assert!((0.0..=1.0).contains(&m.precision) && (0.0..=1.0).contains(&m.recall));
            }
            prop_assert!((r.accuracy - r.weighted_avg.recall).abs() <= 1e-12);
        }

        #[test]
        fn roc_monotone_from_origin_to_corner(
            pairs in proptest::collection::vec((0u8..2, 0u8..6), 2..50),
        ) {
            let y: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let s: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 5.0).collect();
            let (roc, auc) = roc_and_auc(&y, &s).unwrap();
            prop_assert!((0.0..=1.0).contains(&auc));
            prop_assert_eq!((roc[0].fpr, roc[0].tpr), (0.0, 0.0));
            let last = roc.last().unwrap();
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            for w in roc.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
        }
    }
}
