//! Weighted L2-regularized logistic regression.
//!
//! The parameter vector has one entry per feature followed by the bias,
//! which behaves as a constant-1 feature and is not penalized. The training
//! objective is
//!
//! ```text
//! sum_i weight_i * loss(z_i; theta) + (l2_total / 2) * ||theta_without_bias||^2
//! ```
//!
//! and is minimized with full-batch Newton steps and a backtracking line
//! search, so results are deterministic for fixed inputs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
/// Probabilities inside the log are clamped to at least this value.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Feature coefficients followed by the bias.
    pub theta: Vec<f64>,
    pub l2_total: f64,
    #[serde(default)]
    pub feature_names: Vec<String>,
    #[serde(rename = "grad_norm")]
    pub converged_grad_norm: f64,
    #[serde(default)]
    pub iterations: usize,
}

impl ModelParams {
    pub fn n_features(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        logit(x, &self.theta)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Hard prediction; ties at probability 0.5 go to the positive class.
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.logit(x) >= 0.0)
    }
}

/// Per-sample multipliers on the loss; entry `i` equals `1 - w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainWeights(Vec<f64>);

impl TrainWeights {
    pub fn ones(n: usize) -> Self {
        TrainWeights(vec![1.0; n])
    }

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("training weight {v} outside [0, 1]")));
        }
        Ok(TrainWeights(values))
    }

    /// Weights `1 - w` for a perturbation `w` in `[0, 1]^N`.
    pub fn from_perturbation(w: &[f64]) -> Result<Self> {
        if let Some(v) = w.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("perturbation {v} outside [0, 1]")));
        }
        Ok(TrainWeights(w.iter().map(|v| 1.0 - v).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; zeros when absent.
    pub warm_start: Option<Vec<f64>>,
    /// When no step can lower the gradient norm any further, stop
    /// successfully if it is already at or below this value.
    pub stall_tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            warm_start: None,
            stall_tol: DEFAULT_TOL,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(x: &[f64], theta: &[f64]) -> f64 {
    let d = x.len();
    debug_assert_eq!(theta.len(), d + 1);
    x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[d]
}

/// Binary cross-entropy of one sample; excludes the regularizer.
pub fn per_sample_loss(x: &[f64], y: u8, theta: &[f64]) -> f64 {
    let z = logit(x, theta);
    // sigmoid(-z) == 1 - sigmoid(z) without cancellation.
    let p = sigmoid(z).max(LOG_CLAMP);
    let q = sigmoid(-z).max(LOG_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -q.ln()
    }
}

/// `(sigmoid(theta . x) - y) * [x, 1]`.
pub fn per_sample_grad(x: &[f64], y: u8, theta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len() + 1];
    add_sample_grad(x, y, theta, 1.0, &mut g);
    g
}

/// `out += scale * per_sample_grad(x, y, theta)`.
pub(crate) fn add_sample_grad(x: &[f64], y: u8, theta: &[f64], scale: f64, out: &mut [f64]) {
    let r = scale * (sigmoid(logit(x, theta)) - f64::from(y));
    let d = x.len();
    for (o, v) in out[..d].iter_mut().zip(x) {
        *o += r * v;
    }
    out[d] += r;
}

fn check_dims(data: &Dataset, weights: &TrainWeights, theta: &[f64]) -> Result<()> {
    if weights.len() != data.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} samples",
            weights.len(),
            data.len()
        )));
    }
    if theta.len() != data.n_features() + 1 {
        return Err(Error::Dimension(format!(
            "theta has {} entries, data has {} features plus bias",
            theta.len(),
            data.n_features()
        )));
    }
    Ok(())
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn penalty(theta: &[f64], l2: f64) -> f64 {
    let d = theta.len() - 1;
    0.5 * l2 * theta[..d].iter().map(|t| t * t).sum::<f64>()
}

fn objective_inner(data: &Dataset, labels: &[u8], w: &[f64], theta: &[f64], l2: f64) -> f64 {
    let mut total = 0.0;
    for (i, (&wi, &yi)) in w.iter().zip(labels).enumerate() {
        if wi != 0.0 {
            total += wi * per_sample_loss(data.row(i), yi, theta);
        }
    }
    total + penalty(theta, l2)
}

fn gradient_inner(data: &Dataset, labels: &[u8], w: &[f64], theta: &[f64], l2: f64) -> Vec<f64> {
    let d = data.n_features();
    let mut g = vec![0.0; d + 1];
    for (i, (&wi, &yi)) in w.iter().zip(labels).enumerate() {
        if wi != 0.0 {
            add_sample_grad(data.row(i), yi, theta, wi, &mut g);
        }
    }
    for (gj, tj) in g[..d].iter_mut().zip(&theta[..d]) {
        *gj += l2 * tj;
    }
    g
}

fn hessian_inner(data: &Dataset, w: &[f64], theta: &[f64], l2: f64) -> DMatrix<f64> {
    let d = data.n_features();
    let active: Vec<usize> = (0..data.len()).filter(|&i| w[i] != 0.0).collect();
    // Rows sqrt(w_i s_i (1 - s_i)) * [x_i, 1]; H = A^T A + l2 I.
    let mut a = DMatrix::<f64>::zeros(active.len(), d + 1);
    for (r, &i) in active.iter().enumerate() {
        let x = data.row(i);
        let s = sigmoid(logit(x, theta));
        let c = (w[i] * s * (1.0 - s)).sqrt();
        for (j, v) in x.iter().enumerate() {
            a[(r, j)] = c * v;
        }
        a[(r, d)] = c;
    }
    let mut h = a.tr_mul(&a);
    for j in 0..d {
        h[(j, j)] += l2;
    }
    let ht = h.transpose();
    (h + ht) * 0.5
}

/// Total weighted objective, including the regularizer.
pub fn objective(data: &Dataset, weights: &TrainWeights, theta: &[f64], l2_total: f64) -> Result<f64> {
    check_dims(data, weights, theta)?;
    Ok(objective_inner(data, data.labels(), weights.values(), theta, l2_total))
}

/// Gradient of [`objective`].
pub fn objective_gradient(
    data: &Dataset,
    weights: &TrainWeights,
    theta: &[f64],
    l2_total: f64,
) -> Result<Vec<f64>> {
    check_dims(data, weights, theta)?;
    Ok(gradient_inner(data, data.labels(), weights.values(), theta, l2_total))
}

/// Hessian of [`objective`]: `sum_i w_i s_i (1 - s_i) x_i x_i^T + l2 I` with
/// the bias coordinate left unpenalized.
pub fn hessian(
    data: &Dataset,
    weights: &TrainWeights,
    theta: &[f64],
    l2_total: f64,
) -> Result<DMatrix<f64>> {
    check_dims(data, weights, theta)?;
    Ok(hessian_inner(data, weights.values(), theta, l2_total))
}

/// A factored symmetric positive definite Hessian.
#[derive(Debug, Clone)]
pub struct Hessian {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Hessian {
    pub fn factor(matrix: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Hessian { matrix, chol })
    }

    /// Hessian of the training objective at `theta`, factored.
    pub fn at(data: &Dataset, weights: &TrainWeights, theta: &[f64], l2_total: f64) -> Result<Self> {
        Hessian::factor(hessian(data, weights, theta, l2_total)?)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Returns `H^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec()
    }
}

pub fn train(data: &Dataset, weights: &TrainWeights, l2_total: f64) -> Result<ModelParams> {
    train_with(data, weights, l2_total, &TrainOptions::default())
}

pub fn train_with(
    data: &Dataset,
    weights: &TrainWeights,
    l2_total: f64,
    opts: &TrainOptions,
) -> Result<ModelParams> {
    if !(l2_total > 0.0) {
        return Err(Error::Config(format!("l2_total must be positive, got {l2_total}")));
    }
    let d = data.n_features();
    let mut theta = match &opts.warm_start {
        Some(t) => t.clone(),
        None => vec![0.0; d + 1],
    };
    check_dims(data, weights, &theta)?;
    let labels = data.labels();
    let w = weights.values();

    let mut g = gradient_inner(data, labels, w, &theta, l2_total);
    let mut gnorm = l2_norm(&g);
    let mut f = objective_inner(data, labels, w, &theta, l2_total);
    let mut iterations = 0;
    while gnorm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                grad_norm: gnorm,
            });
        }
        iterations += 1;
        let h = Hessian::factor(hessian_inner(data, w, &theta, l2_total))?;
        let step = h.solve(&g);
        let decrease: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();

        let mut t = 1.0;
        let mut accepted = None;
        // Below this the objective cannot resolve the predicted decrease.
        let resolvable = decrease > 1e-12 * f.abs().max(1.0);
        while resolvable && t >= 1e-10 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let fc = objective_inner(data, labels, w, &cand, l2_total);
            if fc <= f - 1e-4 * t * decrease {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let (cand, fc) = match accepted {
            Some(c) => c,
            None => {
                // Near the optimum use the gradient norm as the merit function.
                let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - s).collect();
                let gc = gradient_inner(data, labels, w, &cand, l2_total);
                if l2_norm(&gc) >= gnorm {
                    if gnorm <= opts.stall_tol {
                        break;
                    }
                    return Err(Error::NonConvergence {
                        iterations,
                        grad_norm: gnorm,
                    });
                }
                let fc = objective_inner(data, labels, w, &cand, l2_total);
                (cand, fc)
            }
        };
        theta = cand;
        f = fc;
        g = gradient_inner(data, labels, w, &theta, l2_total);
        gnorm = l2_norm(&g);
    }
    Ok(ModelParams {
        theta,
        l2_total,
        feature_names: data.feature_names().to_vec(),
        converged_grad_norm: gnorm,
        iterations,
    })
}
