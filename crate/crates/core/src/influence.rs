//! Fairness surrogates on a validation split and first-order influence of
//! downweighting each training sample on them.
//!
//! Downweighting sample `i` by `w_i` moves the optimum by approximately
//! `w_i * H^{-1} grad_loss(z_i)`, so the change of a validation quantity `f` is
//! `w_i * grad_f^T H^{-1} grad_loss(z_i)`. Both left-hand vectors are solved
//! once against the factored Hessian and then dotted with every per-sample
//! gradient.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::{add_sample_grad, logit, per_sample_loss, sigmoid, Hessian, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessNotion {
    /// Equal opportunity: loss gap between groups among positives.
    Eop,
    /// Demographic parity: gap in mean predicted probability.
    Dp,
}

impl FairnessNotion {
    pub fn as_str(self) -> &'static str {
        match self {
            FairnessNotion::Eop => "eop",
            FairnessNotion::Dp => "dp",
        }
    }
}

impl fmt::Display for FairnessNotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FairnessNotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eop" => Ok(FairnessNotion::Eop),
            "dp" => Ok(FairnessNotion::Dp),
            other => Err(Error::Config(format!("unknown fairness notion '{other}'"))),
        }
    }
}

/// Indices of the privileged (`a = 1`) and unprivileged (`a = 0`) groups the
/// notion compares.
fn groups(val: &Dataset, labels: &[u8], notion: FairnessNotion) -> Result<[Vec<usize>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for (i, (&a, &y)) in val.sensitive().iter().zip(labels).enumerate() {
        if notion == FairnessNotion::Dp || y == 1 {
            out[usize::from(1 - a)].push(i);
        }
    }
    for (slot, a) in [(0, 1u8), (1, 0u8)] {
        if out[slot].is_empty() {
            let split = val.role().to_string();
            return Err(match notion {
                FairnessNotion::Eop => Error::EmptySubgroup { split, a, y: 1 },
                FairnessNotion::Dp => Error::EmptyGroup { split, a },
            });
        }
    }
    Ok(out)
}

fn surrogate(x: &[f64], y: u8, theta: &[f64], notion: FairnessNotion) -> f64 {
    match notion {
        FairnessNotion::Eop => per_sample_loss(x, y, theta),
        FairnessNotion::Dp => sigmoid(logit(x, theta)),
    }
}

fn add_surrogate_grad(x: &[f64], y: u8, theta: &[f64], notion: FairnessNotion, scale: f64, out: &mut [f64]) {
    match notion {
        FairnessNotion::Eop => add_sample_grad(x, y, theta, scale, out),
        FairnessNotion::Dp => {
            let s = sigmoid(logit(x, theta));
            let c = scale * s * (1.0 - s);
            let d = x.len();
            for (o, v) in out[..d].iter_mut().zip(x) {
                *o += c * v;
            }
            out[d] += c;
        }
    }
}

/// Signed gap `mean(group a=1) - mean(group a=0)` of the surrogate.
pub fn fair_gap(val: &Dataset, theta: &[f64], notion: FairnessNotion) -> Result<f64> {
    let labels = val.labels();
    let [g1, g0] = groups(val, labels, notion)?;
    let mean = |idx: &[usize]| {
        idx.iter()
            .map(|&i| surrogate(val.row(i), labels[i], theta, notion))
            .sum::<f64>()
            / idx.len() as f64
    };
    Ok(mean(&g1) - mean(&g0))
}

/// Absolute surrogate gap on `val`.
pub fn fair_loss(val: &Dataset, model: &ModelParams, notion: FairnessNotion) -> Result<f64> {
    Ok(fair_gap(val, &model.theta, notion)?.abs())
}

/// Gradient of [`fair_loss`] with respect to the parameters.
///
/// Returns [`Error::AlreadyFair`] when the gap is exactly zero.
pub fn fair_loss_grad(val: &Dataset, model: &ModelParams, notion: FairnessNotion) -> Result<Vec<f64>> {
    let theta = &model.theta;
    let gap = fair_gap(val, theta, notion)?;
    if gap == 0.0 {
        return Err(Error::AlreadyFair);
    }
    let labels = val.labels();
    let [g1, g0] = groups(val, labels, notion)?;
    let sign = gap.signum();
    let mut g = vec![0.0; theta.len()];
    for (idx, s) in [(&g1, sign), (&g0, -sign)] {
        let scale = s / idx.len() as f64;
        for &i in idx {
            add_surrogate_grad(val.row(i), labels[i], theta, notion, scale, &mut g);
        }
    }
    Ok(g)
}

/// Summed cross-entropy over a split, without regularization.
pub fn total_loss(data: &Dataset, theta: &[f64]) -> f64 {
    let labels = data.labels();
    (0..data.len())
        .map(|i| per_sample_loss(data.row(i), labels[i], theta))
        .sum()
}

/// Gradient of [`total_loss`].
pub fn total_loss_grad(data: &Dataset, theta: &[f64]) -> Vec<f64> {
    let labels = data.labels();
    let mut g = vec![0.0; theta.len()];
    for i in 0..data.len() {
        add_sample_grad(data.row(i), labels[i], theta, 1.0, &mut g);
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTable {
    pub i_fair: Vec<f64>,
    pub i_util: Vec<f64>,
    /// Absolute surrogate gap on the validation split at the base model.
    pub fair_gap_surrogate: f64,
    pub notion: FairnessNotion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceHeader {
    pub notion: FairnessNotion,
    pub fair_gap_surrogate: f64,
    pub n_train: usize,
}

impl InfluenceTable {
    pub fn new(i_fair: Vec<f64>, i_util: Vec<f64>, fair_gap_surrogate: f64, notion: FairnessNotion) -> Result<Self> {
        if i_fair.len() != i_util.len() {
            return Err(Error::Dimension(format!(
                "{} fairness influences vs {} utility influences",
                i_fair.len(),
                i_util.len()
            )));
        }
        if !(fair_gap_surrogate >= 0.0) {
            return Err(Error::Config(format!("fairness gap {fair_gap_surrogate} must be nonnegative")));
        }
        Ok(InfluenceTable {
            i_fair,
            i_util,
            fair_gap_surrogate,
            notion,
        })
    }

    pub fn len(&self) -> usize {
        self.i_fair.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_fair.is_empty()
    }

    pub fn header(&self) -> InfluenceHeader {
        InfluenceHeader {
            notion: self.notion,
            fair_gap_surrogate: self.fair_gap_surrogate,
            n_train: self.len(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,i_fair,i_util\n");
        for (i, (f, u)) in self.i_fair.iter().zip(&self.i_util).enumerate() {
            out.push_str(&format!("{i},{f},{u}\n"));
        }
        out
    }

    /// Writes the CSV table and its JSON header.
    pub fn write(&self, csv_path: &Path, header_path: &Path) -> Result<()> {
        write_atomic(csv_path, self.to_csv().as_bytes())?;
        let mut json = serde_json::to_string_pretty(&self.header())?;
        json.push('\n');
        write_atomic(header_path, json.as_bytes())
    }
}

/// Predicted `(fairness change, utility change)` of perturbation `w`.
pub fn influence_of(w: &[f64], table: &InfluenceTable) -> Result<(f64, f64)> {
    if w.len() != table.len() {
        return Err(Error::Dimension(format!(
            "perturbation has {} entries, table has {}",
            w.len(),
            table.len()
        )));
    }
    let dot = |v: &[f64]| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    Ok((dot(&table.i_fair), dot(&table.i_util)))
}

/// Influence of every training sample on the validation fairness surrogate
/// and on the summed validation loss.
///
/// `hessian` must be the all-ones training Hessian at `model.theta`.
pub fn influence_all(
    train: &Dataset,
    val: &Dataset,
    model: &ModelParams,
    hessian: &Hessian,
    notion: FairnessNotion,
) -> Result<InfluenceTable> {
    let dim = model.theta.len();
    if hessian.dim() != dim || train.n_features() + 1 != dim || val.n_features() + 1 != dim {
        return Err(Error::Dimension(format!(
            "model has {dim} parameters, hessian {}, train {} features, val {} features",
            hessian.dim(),
            train.n_features(),
            val.n_features()
        )));
    }
    let gap = fair_loss(val, model, notion)?;
    let v_fair = hessian.solve(&fair_loss_grad(val, model, notion)?);
    let v_util = hessian.solve(&total_loss_grad(val, &model.theta));

    let labels = train.labels();
    let theta = &model.theta;
    let (i_fair, i_util): (Vec<f64>, Vec<f64>) = (0..train.len())
        .into_par_iter()
        .map(|i| {
            let mut g = vec![0.0; dim];
            add_sample_grad(train.row(i), labels[i], theta, 1.0, &mut g);
            let f = g.iter().zip(&v_fair).map(|(a, b)| a * b).sum::<f64>();
            let u = g.iter().zip(&v_util).map(|(a, b)| a * b).sum::<f64>();
            (f, u)
        })
        .unzip();
    InfluenceTable::new(i_fair, i_util, gap, notion)
}
