//! End-to-end reweighing: base model, influences, weight program, retrain,
//! evaluation, plus a validation-only hyperparameter search.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, region, MetricReport, Region, DEFAULT_REGION_TOL};
use crate::influence::{fair_loss, influence_all, FairnessNotion, InfluenceTable};
use crate::lp::{solve_budgeted, solve_relaxed, LpBranch, LpOutcome};
use crate::model::{train, train_with, Hessian, ModelParams, TrainOptions, TrainWeights};
use crate::parallel;

pub const BETA_MAX: f64 = 0.9;
pub const GAMMA_MAX: f64 = 0.4;
pub const ALPHA_MAX: f64 = 0.15;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweighConfig {
    pub notion: FairnessNotion,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub l2_total: f64,
    pub seed: u64,
}

impl ReweighConfig {
    pub fn new(notion: FairnessNotion, l2_total: f64) -> Self {
        ReweighConfig {
            notion,
            beta: 0.0,
            gamma: 0.0,
            alpha: DEFAULT_ALPHA,
            l2_total,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("beta", self.beta, 0.0, BETA_MAX, true)?;
        check_range("gamma", self.gamma, 0.0, GAMMA_MAX, true)?;
        check_range("alpha", self.alpha, 0.0, ALPHA_MAX, false)?;
        if !(self.l2_total > 0.0) || !self.l2_total.is_finite() {
            return Err(Error::Config(format!("l2 must be positive, got {}", self.l2_total)));
        }
        Ok(())
    }
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64, lo_inclusive: bool) -> Result<()> {
    let above_lo = if lo_inclusive { v >= lo } else { v > lo };
    if above_lo && v <= hi {
        Ok(())
    } else {
        let open = if lo_inclusive { '[' } else { '(' };
        Err(Error::Config(format!("{name} must be in {open}{lo}, {hi}], got {v}")))
    }
}

/// Everything that depends only on the unweighted model.
#[derive(Debug, Clone)]
pub struct BaseStage {
    pub model: ModelParams,
    pub hessian: Hessian,
    pub notion: FairnessNotion,
    /// Surrogate gap on validation at the base model.
    pub val_fair_surrogate: f64,
    /// Absent when the surrogate gap is exactly zero.
    pub table: Option<InfluenceTable>,
}

impl BaseStage {
    pub fn already_fair(&self) -> bool {
        self.table.is_none()
    }
}

pub fn base_stage(train_set: &Dataset, val: &Dataset, notion: FairnessNotion, l2_total: f64) -> Result<BaseStage> {
    let ones = TrainWeights::ones(train_set.len());
    let model = train(train_set, &ones, l2_total)?;
    let val_fair_surrogate = fair_loss(val, &model, notion)?;
    let hessian = Hessian::at(train_set, &ones, &model.theta, l2_total)?;
    let table = if val_fair_surrogate == 0.0 {
        None
    } else {
        Some(influence_all(train_set, val, &model, &hessian, notion)?)
    };
    info!(
        "base model: {} Newton iterations, validation {notion} surrogate {val_fair_surrogate:.6}",
        model.iterations
    );
    Ok(BaseStage {
        model,
        hessian,
        notion,
        val_fair_surrogate,
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reweighed {
    pub model: ModelParams,
    pub w_star: Vec<f64>,
    /// Absent when the base model is already fair.
    pub lp: Option<LpOutcome>,
}

impl Reweighed {
    pub fn lp_branch(&self) -> Option<LpBranch> {
        self.lp.as_ref().map(|o| o.which)
    }
}

/// Retrains with weights `1 - w`, warm-started at the base model.
pub fn retrain(train_set: &Dataset, base: &ModelParams, w: &[f64]) -> Result<ModelParams> {
    let opts = TrainOptions {
        warm_start: Some(base.theta.clone()),
        ..TrainOptions::default()
    };
    train_with(train_set, &TrainWeights::from_perturbation(w)?, base.l2_total, &opts)
}

fn lp_for(table: &InfluenceTable, cfg: &ReweighConfig) -> Result<LpOutcome> {
    let relaxed = solve_relaxed(table, cfg.beta, cfg.gamma)?;
    if relaxed.is_optimal() {
        return Ok(relaxed);
    }
    let budgeted = solve_budgeted(table, cfg.alpha)?;
    if !budgeted.is_optimal() {
        return Err(Error::Internal("budgeted program reported infeasible".into()));
    }
    Ok(budgeted)
}

/// Solves for `w*` on a precomputed base stage and retrains.
pub fn reweigh_with_base(train_set: &Dataset, base: &BaseStage, cfg: &ReweighConfig) -> Result<Reweighed> {
    cfg.validate()?;
    let Some(table) = &base.table else {
        return Ok(Reweighed {
            model: base.model.clone(),
            w_star: vec![0.0; train_set.len()],
            lp: None,
        });
    };
    let lp = lp_for(table, cfg)?;
    let w_star = lp
        .w_star
        .clone()
        .ok_or_else(|| Error::Internal("optimal program without a solution".into()))?;
    let model = retrain(train_set, &base.model, &w_star)?;
    Ok(Reweighed {
        model,
        w_star,
        lp: Some(lp),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub config: ReweighConfig,
    pub already_fair: bool,
    pub val_fair_surrogate: f64,
    pub base_model: ModelParams,
    pub reweighed_model: ModelParams,
    pub influence: Option<InfluenceTable>,
    pub lp: Option<LpOutcome>,
    pub lp_branch: Option<LpBranch>,
    pub w_star: Vec<f64>,
    pub base_val_metrics: MetricReport,
    pub reweighed_val_metrics: MetricReport,
    pub base_metrics: MetricReport,
    pub reweighed_metrics: MetricReport,
    pub region: Region,
}

/// Runs the full method and evaluates both models on `test`.
///
/// Test labels are not read before the final evaluation; a violation is
/// reported as an internal error.
pub fn run(train_set: &Dataset, val: &Dataset, test: &Dataset, cfg: &ReweighConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let test_reads = test.label_reads();
    let base = base_stage(train_set, val, cfg.notion, cfg.l2_total)?;
    let rew = reweigh_with_base(train_set, &base, cfg)?;
    let base_val_metrics = evaluate(&base.model, val)?;
    let reweighed_val_metrics = evaluate(&rew.model, val)?;
    if test.label_reads() != test_reads {
        return Err(Error::Internal("test labels were read before final evaluation".into()));
    }
    let base_metrics = evaluate(&base.model, test)?;
    let reweighed_metrics = evaluate(&rew.model, test)?;
    let region = region(&base_metrics, &reweighed_metrics, cfg.notion, DEFAULT_REGION_TOL);
    Ok(PipelineResult {
        config: cfg.clone(),
        already_fair: base.already_fair(),
        val_fair_surrogate: base.val_fair_surrogate,
        lp_branch: rew.lp_branch(),
        base_model: base.model,
        reweighed_model: rew.model,
        influence: base.table,
        lp: rew.lp,
        w_star: rew.w_star,
        base_val_metrics,
        reweighed_val_metrics,
        base_metrics,
        reweighed_metrics,
        region,
    })
}

/// Candidate values for each hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    // Round to the step's decimals so values print cleanly.
    (0..=n).map(|k| ((lo + k as f64 * step) * 100.0).round() / 100.0).collect()
}

impl Grid {
    /// beta in 0..=0.9 and gamma in 0..=0.4 by 0.1, alpha in 0.01..=0.15 by 0.01.
    pub fn full() -> Self {
        Grid {
            betas: steps(0.0, BETA_MAX, 0.1),
            gammas: steps(0.0, GAMMA_MAX, 0.1),
            alphas: steps(0.01, ALPHA_MAX, 0.01),
        }
    }

    pub fn single(beta: f64, gamma: f64, alpha: f64) -> Self {
        Grid {
            betas: vec![beta],
            gammas: vec![gamma],
            alphas: vec![alpha],
        }
    }

    pub fn len(&self) -> usize {
        self.betas.len() * self.gammas.len() * self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn configs(&self, notion: FairnessNotion, l2_total: f64, seed: u64) -> Vec<ReweighConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &beta in &self.betas {
            for &gamma in &self.gammas {
                for &alpha in &self.alphas {
                    out.push(ReweighConfig {
                        notion,
                        beta,
                        gamma,
                        alpha,
                        l2_total,
                        seed,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Allowed drop of validation accuracy below the base model.
    pub tol_acc: f64,
    pub seed: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            tol_acc: 0.0,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEvaluation {
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub lp_branch: Option<LpBranch>,
    pub sum_w: f64,
    pub val_accuracy: f64,
    pub val_gap: Option<f64>,
    /// Base validation gap minus candidate validation gap.
    pub improvement: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub selected: ReweighConfig,
    /// Set when no candidate met the accuracy constraint.
    pub fallback: bool,
    pub already_fair: bool,
    pub base_val_metrics: MetricReport,
    pub evaluations: Vec<GridEvaluation>,
}

/// Grid search scored on validation metrics.
pub fn grid_search(
    train_set: &Dataset,
    val: &Dataset,
    notion: FairnessNotion,
    l2_total: f64,
    grid: &Grid,
    opts: &GridOptions,
) -> Result<GridSearchResult> {
    let base = base_stage(train_set, val, notion, l2_total)?;
    let base_val = evaluate(&base.model, val)?;
    grid_search_with(train_set, &base, base_val, grid, opts, |_, m| evaluate(m, val))
}

/// Grid search with a caller-supplied candidate evaluator.
///
/// `evaluator` receives each grid point and its retrained model. Programs that
/// yield the same `w*` (every infeasible relaxed cell with the same alpha) are
/// retrained once.
pub fn grid_search_with<F>(
    train_set: &Dataset,
    base: &BaseStage,
    base_val: MetricReport,
    grid: &Grid,
    opts: &GridOptions,
    evaluator: F,
) -> Result<GridSearchResult>
where
    F: Fn(&ReweighConfig, &ModelParams) -> Result<MetricReport> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Config("grid has no candidates".into()));
    }
    let configs = grid.configs(base.notion, base.model.l2_total, opts.seed);
    for c in &configs {
        c.validate()?;
    }
    let Some(table) = &base.table else {
        return Ok(GridSearchResult {
            selected: configs[0].clone(),
            fallback: false,
            already_fair: true,
            base_val_metrics: base_val,
            evaluations: Vec::new(),
        });
    };

    // Solve every program once, keyed by what determines its solution.
    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
    enum Key {
        Relaxed(u64, u64),
        Budgeted(u64),
    }
    let mut keys = Vec::with_capacity(configs.len());
    let mut programs: BTreeMap<Key, LpOutcome> = BTreeMap::new();
    for c in &configs {
        let rk = Key::Relaxed(c.beta.to_bits(), c.gamma.to_bits());
        if !programs.contains_key(&rk) {
            programs.insert(rk, solve_relaxed(table, c.beta, c.gamma)?);
        }
        let key = if programs[&rk].is_optimal() {
            rk
        } else {
            let bk = Key::Budgeted(c.alpha.to_bits());
            if !programs.contains_key(&bk) {
                let out = solve_budgeted(table, c.alpha)?;
                if !out.is_optimal() {
                    return Err(Error::Internal("budgeted program reported infeasible".into()));
                }
                programs.insert(bk, out);
            }
            bk
        };
        keys.push(key);
    }
    let mut used: Vec<Key> = keys.clone();
    used.sort();
    used.dedup();
    let models: Vec<Result<ModelParams>> = parallel::install(|| {
        used.par_iter()
            .map(|k| {
                let w = programs[k].w_star.as_deref().unwrap_or_default();
                retrain(train_set, &base.model, w)
            })
            .collect()
    })?;
    let mut retrained: BTreeMap<Key, ModelParams> = BTreeMap::new();
    for (k, m) in used.iter().zip(models) {
        retrained.insert(*k, m?);
    }

    let base_gap = base_val.gap(base.notion);
    let reports: Vec<Result<MetricReport>> = parallel::install(|| {
        configs
            .par_iter()
            .zip(keys.par_iter())
            .map(|(c, k)| evaluator(c, &retrained[k]))
            .collect()
    })?;
    let mut evaluations = Vec::with_capacity(configs.len());
    for ((c, k), report) in configs.iter().zip(&keys).zip(reports) {
        let report = report?;
        let lp = &programs[k];
        let sum_w = lp.w_star.as_ref().map_or(0.0, |w| w.iter().sum());
        let val_gap = report.gap(base.notion);
        let improvement = match (base_gap, val_gap) {
            (Some(b), Some(g)) => Some(b - g),
            _ => None,
        };
        evaluations.push(GridEvaluation {
            beta: c.beta,
            gamma: c.gamma,
            alpha: c.alpha,
            lp_branch: Some(lp.which),
            sum_w,
            val_accuracy: report.accuracy,
            val_gap,
            improvement,
            feasible: report.accuracy >= base_val.accuracy - opts.tol_acc,
        });
    }

    let mut best: Option<usize> = None;
    for (i, e) in evaluations.iter().enumerate() {
        if !e.feasible {
            continue;
        }
        let Some(imp) = e.improvement else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let bi = evaluations[b].improvement.unwrap_or(f64::NEG_INFINITY);
                imp > bi || (imp == bi && e.sum_w < evaluations[b].sum_w)
            }
        };
        if better {
            best = Some(i);
        }
    }
    let (selected, fallback) = match best {
        Some(i) => (configs[i].clone(), false),
        None => {
            // Weakest fairness demand: largest beta, then largest gamma, then
            // smallest alpha.
            let i = (0..configs.len())
                .max_by(|&a, &b| {
                    let (x, y) = (&configs[a], &configs[b]);
                    x.beta
                        .total_cmp(&y.beta)
                        .then(x.gamma.total_cmp(&y.gamma))
                        .then(y.alpha.total_cmp(&x.alpha))
                        .then(b.cmp(&a))
                })
                .unwrap_or(0);
            warn!("no grid candidate kept validation accuracy; falling back to beta={}", configs[i].beta);
            (configs[i].clone(), true)
        }
    };
    Ok(GridSearchResult {
        selected,
        fallback,
        already_fair: false,
        base_val_metrics: base_val,
        evaluations,
    })
}
