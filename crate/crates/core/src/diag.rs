//! Retraining studies that compare predicted influences with actual effects.
//!
//! Every "actual" value comes from a fresh deterministic retrain on the
//! training split. Work is spread over the worker budget from
//! [`crate::parallel`], and records are sorted by sample index before they
//! are reported.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::influence::{fair_loss, total_loss, FairnessNotion};
use crate::model::{train_with, ModelParams, TrainOptions, TrainWeights};
use crate::parallel;
use crate::pipeline::{base_stage, BaseStage};

/// Gradient tolerance of study retrains. Usually below the rounding floor,
/// so Newton runs until it stalls; stalls under the default tolerance count as
/// converged.
pub const STUDY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    Loo { index: usize },
    Group { id: usize, indices: Vec<usize> },
    Epsilon { index: usize, epsilon: f64 },
    Flip { index: usize },
}

impl Perturbation {
    fn sort_key(&self) -> (usize, u64) {
        match self {
            Perturbation::Loo { index } | Perturbation::Flip { index } => (*index, 0),
            Perturbation::Group { id, .. } => (*id, 0),
            Perturbation::Epsilon { index, epsilon } => (*index, epsilon.to_bits()),
        }
    }

    fn label(&self) -> (&'static str, usize, usize, Option<f64>) {
        match self {
            Perturbation::Loo { index } => ("loo", *index, 1, None),
            Perturbation::Group { id, indices } => ("group", *id, indices.len(), None),
            Perturbation::Epsilon { index, epsilon } => ("epsilon", *index, 1, Some(*epsilon)),
            Perturbation::Flip { index } => ("flip", *index, 1, None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Util,
    Fair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub perturbation: Perturbation,
    pub metric: Metric,
    pub predicted: Option<f64>,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub pearson: Option<f64>,
    pub mean_abs_error: Option<f64>,
    pub mean_abs_actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study: String,
    pub notion: FairnessNotion,
    pub seed: u64,
    pub requested: usize,
    /// Perturbations whose retrain failed to converge; excluded from records.
    pub failed: usize,
    pub util: MetricSummary,
    pub fair: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub summary: StudySummary,
    pub records: Vec<OracleRecord>,
}

impl StudyReport {
    pub const CSV_HEADER: &'static str = "perturbation,index,size,epsilon,metric,predicted,actual";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.records {
            let (kind, index, size, eps) = r.perturbation.label();
            let metric = match r.metric {
                Metric::Util => "util",
                Metric::Fair => "fair",
            };
            let eps = eps.map(|e| e.to_string()).unwrap_or_default();
            let pred = r.predicted.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!("{kind},{index},{size},{eps},{metric},{pred},{}\n", r.actual));
        }
        out
    }

    pub fn records_for(&self, metric: Metric) -> impl Iterator<Item = &OracleRecord> {
        self.records.iter().filter(move |r| r.metric == metric)
    }
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn summarize(records: &[OracleRecord], metric: Metric) -> MetricSummary {
    let rows: Vec<&OracleRecord> = records.iter().filter(|r| r.metric == metric).collect();
    let paired: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.predicted?, r.actual))).collect();
    let (pred, act): (Vec<f64>, Vec<f64>) = paired.iter().copied().unzip();
    let mae = (!paired.is_empty())
        .then(|| paired.iter().map(|(p, a)| (p - a).abs()).sum::<f64>() / paired.len() as f64);
    let mean_abs_actual = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.actual.abs()).sum::<f64>() / rows.len() as f64
    };
    MetricSummary {
        n: rows.len(),
        pearson: pearson(&pred, &act),
        mean_abs_error: mae,
        mean_abs_actual,
    }
}

fn refit(data: &Dataset, weights: &TrainWeights, start: &ModelParams) -> Result<ModelParams> {
    let opts = TrainOptions {
        tol: STUDY_TOL,
        warm_start: Some(start.theta.clone()),
        ..TrainOptions::default()
    };
    train_with(data, weights, start.l2_total, &opts)
}

/// Shared state for studies: the splits and everything derived from the
/// unweighted model.
pub struct StudyContext<'a> {
    pub train: &'a Dataset,
    pub val: &'a Dataset,
    pub base: BaseStage,
    /// Base model refit at the study tolerance; the reference for all deltas.
    reference: ModelParams,
    base_fair: f64,
    base_util: f64,
}

impl<'a> StudyContext<'a> {
    pub fn new(train: &'a Dataset, val: &'a Dataset, notion: FairnessNotion, l2_total: f64) -> Result<Self> {
        let base = base_stage(train, val, notion, l2_total)?;
        Self::from_base(train, val, base)
    }

    pub fn from_base(train: &'a Dataset, val: &'a Dataset, base: BaseStage) -> Result<Self> {
        if base.table.is_none() {
            return Err(Error::AlreadyFair);
        }
        let reference = refit(train, &TrainWeights::ones(train.len()), &base.model)?;
        let base_fair = fair_loss(val, &reference, base.notion)?;
        let base_util = total_loss(val, &reference.theta);
        Ok(StudyContext {
            train,
            val,
            base,
            reference,
            base_fair,
            base_util,
        })
    }

    pub fn notion(&self) -> FairnessNotion {
        self.base.notion
    }

    fn table(&self) -> &crate::influence::InfluenceTable {
        self.base.table.as_ref().expect("checked in from_base")
    }

    fn retrain_on(&self, data: &Dataset, weights: &TrainWeights) -> Result<ModelParams> {
        refit(data, weights, &self.reference)
    }

    /// Retrains with perturbation `w` and returns `(d_util, d_fair)` on validation.
    pub fn actual_change(&self, w: &[f64]) -> Result<(f64, f64)> {
        let m = self.retrain_on(self.train, &TrainWeights::from_perturbation(w)?)?;
        self.deltas(&m)
    }

    fn deltas(&self, m: &ModelParams) -> Result<(f64, f64)> {
        let du = total_loss(self.val, &m.theta) - self.base_util;
        let df = fair_loss(self.val, m, self.notion())? - self.base_fair;
        Ok((du, df))
    }

    fn sample_indices(&self, n: usize, seed: u64) -> Result<Vec<usize>> {
        let total = self.train.len();
        if n > total {
            return Err(Error::Config(format!("cannot sample {n} of {total} training samples")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, total, n).into_vec();
        idx.sort_unstable();
        Ok(idx)
    }

    fn finish(&self, study: &str, seed: u64, requested: usize, results: Vec<Result<Vec<OracleRecord>>>) -> Result<StudyReport> {
        let mut records = Vec::new();
        let mut failed = 0;
        for r in results {
            match r {
                Ok(mut recs) => records.append(&mut recs),
                Err(Error::NonConvergence { .. }) | Err(Error::NotPositiveDefinite) => failed += 1,
                Err(e) => return Err(e),
            }
        }
        records.sort_by(|a, b| {
            a.perturbation
                .sort_key()
                .cmp(&b.perturbation.sort_key())
                .then((a.metric as u8).cmp(&(b.metric as u8)))
        });
        let summary = StudySummary {
            study: study.to_string(),
            notion: self.notion(),
            seed,
            requested,
            failed,
            util: summarize(&records, Metric::Util),
            fair: summarize(&records, Metric::Fair),
        };
        Ok(StudyReport { summary, records })
    }

    fn pair(p: Perturbation, pred: (Option<f64>, Option<f64>), actual: (f64, f64)) -> Vec<OracleRecord> {
        vec![
            OracleRecord {
                perturbation: p.clone(),
                metric: Metric::Util,
                predicted: pred.0,
                actual: actual.0,
            },
            OracleRecord {
                perturbation: p,
                metric: Metric::Fair,
                predicted: pred.1,
                actual: actual.1,
            },
        ]
    }

    /// Removes each of `n` random samples in turn.
    pub fn loo(&self, n: usize, seed: u64) -> Result<StudyReport> {
        let idx = self.sample_indices(n, seed)?;
        let t = self.table();
        let results = parallel::install(|| {
            idx.par_iter()
                .map(|&i| {
                    let mut w = vec![0.0; self.train.len()];
                    w[i] = 1.0;
                    let actual = self.actual_change(&w)?;
                    Ok(Self::pair(Perturbation::Loo { index: i }, (Some(t.i_util[i]), Some(t.i_fair[i])), actual))
                })
                .collect()
        })?;
        self.finish("loo", seed, n, results)
    }

    /// Removes `n_groups` random groups of `group_size` samples each.
    pub fn group(&self, group_size: usize, n_groups: usize, seed: u64) -> Result<StudyReport> {
        if group_size == 0 || group_size > self.train.len() {
            return Err(Error::Config(format!(
                "group size {group_size} must be in 1..={}",
                self.train.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups: Vec<Vec<usize>> = (0..n_groups)
            .map(|_| {
                let mut g = sample(&mut rng, self.train.len(), group_size).into_vec();
                g.sort_unstable();
                g
            })
            .collect();
        let t = self.table();
        let results = parallel::install(|| {
            groups
                .par_iter()
                .enumerate()
                .map(|(id, g)| {
                    let mut w = vec![0.0; self.train.len()];
                    for &i in g {
                        w[i] = 1.0;
                    }
                    let (pf, pu) = crate::influence::influence_of(&w, t)?;
                    let actual = self.actual_change(&w)?;
                    let p = Perturbation::Group {
                        id,
                        indices: g.clone(),
                    };
                    Ok(Self::pair(p, (Some(pu), Some(pf)), actual))
                })
                .collect()
        })?;
        self.finish("group", seed, n_groups, results)
    }

    /// Downweights each sampled point by every `epsilon` and records the
    /// finite-difference estimate `(f(eps) - f(0)) / eps`.
    pub fn epsilon(&self, n: usize, epsilons: &[f64], seed: u64) -> Result<StudyReport> {
        if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::Config(format!("epsilon {e} must be in (0, 1]")));
        }
        let idx = self.sample_indices(n, seed)?;
        let jobs: Vec<(usize, f64)> = idx.iter().flat_map(|&i| epsilons.iter().map(move |&e| (i, e))).collect();
        let t = self.table();
        let results = parallel::install(|| {
            jobs.par_iter()
                .map(|&(i, eps)| {
                    let mut w = vec![0.0; self.train.len()];
                    w[i] = eps;
                    let (du, df) = self.actual_change(&w)?;
                    let p = Perturbation::Epsilon { index: i, epsilon: eps };
                    Ok(Self::pair(p, (Some(t.i_util[i]), Some(t.i_fair[i])), (du / eps, df / eps)))
                })
                .collect()
        })?;
        self.finish("epsilon", seed, jobs.len(), results)
    }

    /// For each sampled point, the change from flipping its label and the
    /// change from removing it, both by retraining.
    pub fn flip(&self, n: usize, seed: u64) -> Result<StudyReport> {
        let idx = self.sample_indices(n, seed)?;
        let t = self.table();
        let ones = TrainWeights::ones(self.train.len());
        let results = parallel::install(|| {
            idx.par_iter()
                .map(|&i| {
                    let flipped = self.train.with_label_flipped(i);
                    let m = self.retrain_on(&flipped, &ones)?;
                    let flip = self.deltas(&m)?;
                    let mut w = vec![0.0; self.train.len()];
                    w[i] = 1.0;
                    let removal = self.actual_change(&w)?;
                    let mut recs = Self::pair(Perturbation::Flip { index: i }, (None, None), flip);
                    recs.extend(Self::pair(
                        Perturbation::Loo { index: i },
                        (Some(t.i_util[i]), Some(t.i_fair[i])),
                        removal,
                    ));
                    Ok(recs)
                })
                .collect()
        })?;
        self.finish("flip", seed, n, results)
    }
}

/// Mean absolute actual change for one perturbation kind and metric.
pub fn mean_abs_actual(report: &StudyReport, kind: &str, metric: Metric) -> Option<f64> {
    let vals: Vec<f64> = report
        .records_for(metric)
        .filter(|r| r.perturbation.label().0 == kind)
        .map(|r| r.actual.abs())
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Share of sampled points whose finite-difference error shrinks as epsilon
/// decreases, for one metric.
pub fn epsilon_monotone_share(report: &StudyReport, metric: Metric) -> Option<f64> {
    let mut by_index: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = Default::default();
    for r in report.records_for(metric) {
        if let (Perturbation::Epsilon { index, epsilon }, Some(p)) = (&r.perturbation, r.predicted) {
            by_index.entry(*index).or_default().push((*epsilon, (r.actual - p).abs()));
        }
    }
    if by_index.is_empty() {
        return None;
    }
    for v in by_index.values_mut() {
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
    let good = by_index
        .values()
        .filter(|v| v.windows(2).all(|w| w[1].1 <= w[0].1))
        .count();
    Some(good as f64 / by_index.len() as f64)
}
