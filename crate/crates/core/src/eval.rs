//! Hard-prediction utility and fairness metrics.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupCounts};
use crate::error::{Error, Result};
use crate::influence::FairnessNotion;
use crate::model::ModelParams;

pub const DEFAULT_REGION_TOL: f64 = 1e-4;

/// Confusion counts of one sensitive group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    pub fn positive_rate(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.fp) as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub accuracy: f64,
    /// `|TPR(a=1) - TPR(a=0)|`; absent when a group has no positives.
    pub eop_gap: Option<f64>,
    /// `|P(yhat=1 | a=1) - P(yhat=1 | a=0)|`; absent when a group is empty.
    pub dp_gap: Option<f64>,
    pub group_counts: GroupCounts,
    /// Indexed by the sensitive attribute.
    pub confusion: [Confusion; 2],
}

impl MetricReport {
    pub fn gap(&self, notion: FairnessNotion) -> Option<f64> {
        match notion {
            FairnessNotion::Eop => self.eop_gap,
            FairnessNotion::Dp => self.dp_gap,
        }
    }

    pub const CSV_HEADER: &'static str = "n,accuracy,eop_gap,dp_gap";

    /// One CSV row matching [`MetricReport::CSV_HEADER`]; undefined gaps are empty.
    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!("{},{},{},{}", self.n, self.accuracy, opt(self.eop_gap), opt(self.dp_gap))
    }
}

/// Metrics of 0/1 predictions against labels and sensitive attributes.
pub fn evaluate_predictions(pred: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<MetricReport> {
    if pred.len() != labels.len() || labels.len() != sensitive.len() {
        return Err(Error::Dimension(format!(
            "{} predictions, {} labels, {} sensitive values",
            pred.len(),
            labels.len(),
            sensitive.len()
        )));
    }
    let mut confusion = [Confusion::default(); 2];
    let mut counts = GroupCounts::default();
    for ((&p, &y), &a) in pred.iter().zip(labels).zip(sensitive) {
        let c = &mut confusion[usize::from(a)];
        match (p, y) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
        counts.0[usize::from(a)][usize::from(y)] += 1;
    }
    let n = pred.len();
    let correct: usize = confusion.iter().map(|c| c.tp + c.tn).sum();
    let accuracy = if n == 0 { 0.0 } else { correct as f64 / n as f64 };
    let diff = |f: fn(&Confusion) -> Option<f64>| Some((f(&confusion[1])? - f(&confusion[0])?).abs());
    Ok(MetricReport {
        n,
        accuracy,
        eop_gap: diff(Confusion::tpr),
        dp_gap: diff(Confusion::positive_rate),
        group_counts: counts,
        confusion,
    })
}

pub fn predict_all(model: &ModelParams, data: &Dataset) -> Vec<u8> {
    (0..data.len()).map(|i| model.predict(data.row(i))).collect()
}

pub fn evaluate(model: &ModelParams, data: &Dataset) -> Result<MetricReport> {
    if model.n_features() != data.n_features() {
        return Err(Error::Dimension(format!(
            "model expects {} features, data has {}",
            model.n_features(),
            data.n_features()
        )));
    }
    evaluate_predictions(&predict_all(model, data), data.labels(), data.sensitive())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    FairerAndAccurate,
    FairerOnly,
    AccurateOnly,
    Worse,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::FairerAndAccurate => "fairer_and_accurate",
            Region::FairerOnly => "fairer_only",
            Region::AccurateOnly => "accurate_only",
            Region::Worse => "worse",
        }
    }
}

/// Fairer means the gap shrank by more than `tol`; accurate means accuracy
/// did not drop by more than `tol`. An undefined gap is never fairer.
pub fn region(base: &MetricReport, new: &MetricReport, notion: FairnessNotion, tol: f64) -> Region {
    let fairer = match (base.gap(notion), new.gap(notion)) {
        (Some(b), Some(n)) => b - n > tol,
        _ => false,
    };
    let accurate = new.accuracy >= base.accuracy - tol;
    match (fairer, accurate) {
        (true, true) => Region::FairerAndAccurate,
        (true, false) => Region::FairerOnly,
        (false, true) => Region::AccurateOnly,
        (false, false) => Region::Worse,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(gap: f64, acc: f64) -> MetricReport {
        MetricReport {
            n: 1,
            accuracy: acc,
            eop_gap: Some(gap),
            dp_gap: Some(gap),
            group_counts: GroupCounts::default(),
            confusion: [Confusion::default(); 2],
        }
    }

    #[test]
    fn perfect_predictor() {
        let y = [1, 0, 1, 0, 1, 0];
        let a = [0, 0, 0, 1, 1, 1];
        let r = evaluate_predictions(&y, &y, &a).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.eop_gap, Some(0.0));
    }

    #[test]
    fn hand_counted_true_positive_rates() {
        // a=1 positives: both caught. a=0 positives: one of two caught.
        let y = [1, 1, 0, 0, 1, 1, 0, 0];
        let a = [1, 1, 1, 1, 0, 0, 0, 0];
        let p = [1, 1, 0, 0, 1, 0, 0, 1];
        let r = evaluate_predictions(&p, &y, &a).unwrap();
        assert_eq!(r.eop_gap, Some(0.5));
        assert_eq!(r.dp_gap, Some(0.0));
        assert_eq!(r.accuracy, 6.0 / 8.0);
    }

    #[test]
    fn constant_positive_predictor() {
        let y = [1, 0, 0, 1, 1];
        let a = [0, 0, 1, 1, 1];
        let r = evaluate_predictions(&[1; 5], &y, &a).unwrap();
        assert_eq!(r.dp_gap, Some(0.0));
        assert_eq!(r.eop_gap, Some(0.0));
        assert_eq!(r.accuracy, 3.0 / 5.0);
    }

    #[test]
    fn empty_group_gap_is_undefined() {
        let r = evaluate_predictions(&[1, 0], &[0, 0], &[1, 0]).unwrap();
        assert_eq!(r.eop_gap, None);
        assert_eq!(r.dp_gap, Some(1.0));
        assert_eq!(r.to_csv_row(), "2,0.5,,1");
    }

    #[test]
    fn region_rules() {
        let base = report(0.10, 0.848);
        assert_eq!(region(&base, &base, FairnessNotion::Eop, DEFAULT_REGION_TOL), Region::AccurateOnly);
        assert_eq!(
            region(&base, &report(0.04, 0.848), FairnessNotion::Eop, DEFAULT_REGION_TOL),
            Region::FairerAndAccurate
        );
        assert_eq!(
            region(&base, &report(0.04, 0.820), FairnessNotion::Eop, DEFAULT_REGION_TOL),
            Region::FairerOnly
        );
        assert_eq!(region(&base, &report(0.2, 0.7), FairnessNotion::Dp, DEFAULT_REGION_TOL), Region::Worse);
    }

    #[test]
    fn evaluates_a_model() {
        let data = Dataset::from_rows(
            crate::data::Role::Test,
            vec!["x".into()],
            &[vec![1.0], vec![-1.0], vec![0.0], vec![-2.0]],
            vec![1, 0, 1, 1],
            vec![1, 1, 0, 0],
        )
        .unwrap();
        let model = ModelParams {
            theta: vec![1.0, 0.0],
            l2_total: 1.0,
            feature_names: vec!["x".into()],
            converged_grad_norm: 0.0,
            iterations: 0,
        };
        // Logit 0 is predicted positive.
        let r = evaluate(&model, &data).unwrap();
        assert_eq!(r.confusion[0].tp, 1);
        assert_eq!(r.confusion[0].fn_, 1);
        assert_eq!(r.eop_gap, Some(0.5));
        assert_eq!(r.accuracy, 0.75);
    }

    proptest! {
        #[test]
        fn gaps_ignore_group_relabeling(rows in proptest::collection::vec((0u8..2, 0u8..2, 0u8..2), 1..60)) {
            let p: Vec<u8> = rows.iter().map(|r| r.0).collect();
            let y: Vec<u8> = rows.iter().map(|r| r.1).collect();
            let a: Vec<u8> = rows.iter().map(|r| r.2).collect();
            let flipped: Vec<u8> = a.iter().map(|v| 1 - v).collect();
            let r1 = evaluate_predictions(&p, &y, &a).unwrap();
            let r2 = evaluate_predictions(&p, &y, &flipped).unwrap();
            prop_assert_eq!(r1.eop_gap, r2.eop_gap);
            prop_assert_eq!(r1.dp_gap, r2.dp_gap);
            prop_assert_eq!(r1.accuracy, r2.accuracy);
        }

        #[test]
        fn accuracy_decomposes_into_rates(rows in proptest::collection::vec((0u8..2, 0u8..2, 0u8..2), 1..60)) {
            let p: Vec<u8> = rows.iter().map(|r| r.0).collect();
            let y: Vec<u8> = rows.iter().map(|r| r.1).collect();
            let a: Vec<u8> = rows.iter().map(|r| r.2).collect();
            let r = evaluate_predictions(&p, &y, &a).unwrap();
            let mut acc = 0.0;
            for c in &r.confusion {
                let pos = c.tp + c.fn_;
                let neg = c.tn + c.fp;
                if pos > 0 {
                    acc += c.tpr().unwrap() * pos as f64;
                }
                if neg > 0 {
                    acc += (c.tn as f64 / neg as f64) * neg as f64;
                }
            }
            prop_assert!((acc / r.n as f64 - r.accuracy).abs() < 1e-12);
        }
    }
}
