//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any fails.
//!
//! Benchmark files are read from `REWEIGH_DATA_DIR` (default `<workspace>/data`,
//! filled by `scripts/fetch_datasets.py`). Lines tagged `[synthetic stand-in]`
//! repeat a criterion on generated data so the properties stay exercised
//! without the benchmarks.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reweigh_core::data::{load_dataset, DataSource, Dataset, DatasetId, LoadedSplits};
use reweigh_core::diag::{mean_abs_actual, Metric, Perturbation, StudyContext, StudyReport};
use reweigh_core::eval::{evaluate, MetricReport};
use reweigh_core::influence::{influence_of, FairnessNotion, InfluenceTable};
use reweigh_core::lp::{solve_budgeted, solve_relaxed, LpBranch, LpStatus};
use reweigh_core::model::{hessian, objective, objective_gradient, Hessian, TrainWeights};
use reweigh_core::pipeline::{
    base_stage, grid_search, reweigh_with_base, run, Grid, GridOptions, ReweighConfig,
};
use reweigh_core::synth::{biased_splits, SynthConfig};

const STAND_IN: &str = "[synthetic stand-in]";
const SYNTH_L2: f64 = 1.0;
const SEED: u64 = 42;

type Outcome = Result<(bool, String), String>;

struct Suite {
    failures: usize,
    total: usize,
}

impl Suite {
    fn check(&mut self, id: &str, title: &str, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        self.total += 1;
        if !pass {
            self.failures += 1;
        }
        let status = if pass { "PASS" } else { "FAIL" };
        println!("{status} {id} {title}: {detail} ({:.1}s)", t.elapsed().as_secs_f64());
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("REWEIGH_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn benchmark(id: DatasetId) -> Result<LoadedSplits, String> {
    let dir = data_dir();
    let file = dir.join(id.main_file());
    if !file.exists() {
        return Err(format!(
            "{} not found; set REWEIGH_DATA_DIR or run scripts/fetch_datasets.py",
            file.display()
        ));
    }
    load_dataset(&DataSource::Preset { id, dir }, None).map_err(|e| format!("{id}: {e}"))
}

struct Splits {
    train: Dataset,
    val: Dataset,
    test: Dataset,
    l2: f64,
}

fn real(id: DatasetId) -> Result<Splits, String> {
    let s = benchmark(id)?;
    Ok(Splits {
        train: s.train,
        val: s.val,
        test: s.test,
        l2: id.l2_total(),
    })
}

fn synthetic() -> Splits {
    let s = biased_splits(&SynthConfig::default()).expect("synthetic data");
    Splits {
        train: s.train,
        val: s.val,
        test: s.test,
        l2: SYNTH_L2,
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rho(report: &StudyReport, metric: Metric) -> f64 {
    let s = match metric {
        Metric::Util => &report.summary.util,
        Metric::Fair => &report.summary.fair,
    };
    s.pearson.unwrap_or(f64::NAN)
}

fn mae(report: &StudyReport, metric: Metric) -> f64 {
    let s = match metric {
        Metric::Util => &report.summary.util,
        Metric::Fair => &report.summary.fair,
    };
    s.mean_abs_error.unwrap_or(f64::NAN)
}

// 1. Predicted vs retrained change over 100 leave-one-out removals.
fn loo_fidelity(s: &Splits) -> Outcome {
    let t = Instant::now();
    let ctx = StudyContext::new(&s.train, &s.val, FairnessNotion::Eop, s.l2).map_err(err)?;
    let r = ctx.loo(100, SEED).map_err(err)?;
    let elapsed = t.elapsed();
    let (ru, rf) = (rho(&r, Metric::Util), rho(&r, Metric::Fair));
    let pass = r.summary.failed == 0 && ru >= 0.9 && rf >= 0.9 && elapsed < Duration::from_secs(300);
    Ok((
        pass,
        format!(
            "n_train={} rho_util={ru:.4} rho_fair={rf:.4} failed={} (need >= 0.9, < 300s)",
            s.train.len(),
            r.summary.failed
        ),
    ))
}

// 2. Finite-difference influence at eps = 1e-3 against the prediction.
fn epsilon_oracle(s: &Splits) -> Outcome {
    let ctx = StudyContext::new(&s.train, &s.val, FairnessNotion::Eop, s.l2).map_err(err)?;
    let r = ctx.epsilon(20, &[1e-3], SEED).map_err(err)?;
    let worst = |metric| {
        r.records_for(metric)
            .map(|rec| {
                let p = rec.predicted.expect("epsilon records carry predictions");
                (rec.actual - p).abs() / p.abs()
            })
            .fold(0.0_f64, f64::max)
    };
    let (wu, wf) = (worst(Metric::Util), worst(Metric::Fair));
    let n = r.records_for(Metric::Util).count();
    let pass = n == 20 && wu < 0.01 && wf < 0.01;
    Ok((
        pass,
        format!("samples={n} max_rel_err_util={wu:.2e} max_rel_err_fair={wf:.2e} (need < 1e-2)"),
    ))
}

// 3. Samples that help fairness without hurting utility exist, and the
// budgeted program uses them.
fn witness(s: &Splits, notion: FairnessNotion) -> Outcome {
    let base = base_stage(&s.train, &s.val, notion, s.l2).map_err(err)?;
    let gap = evaluate(&base.model, &s.val).map_err(err)?.gap(notion).unwrap_or(0.0);
    let Some(table) = &base.table else {
        return Ok((gap == 0.0, format!("{notion}: base surrogate gap is zero")));
    };
    let helpful = table.i_fair.iter().zip(&table.i_util).filter(|(f, u)| **f < 0.0 && **u <= 0.0).count();
    let out = solve_budgeted(table, 0.1).map_err(err)?;
    let sum_w: f64 = out.w_star.as_ref().map_or(0.0, |w| w.iter().sum());
    let obj = out.objective_value.unwrap_or(f64::NAN);
    let pass = helpful > 0 && out.is_optimal() && sum_w > 0.0 && obj < 0.0;
    Ok((
        pass,
        format!("{notion}: val_gap={gap:.4} helpful={helpful} sum_w={sum_w:.3} objective={obj:.4e}"),
    ))
}

fn witness_all(s: &Splits) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for notion in [FairnessNotion::Eop, FairnessNotion::Dp] {
        let (p, d) = witness(s, notion)?;
        pass &= p;
        parts.push(d);
    }
    Ok((pass, parts.join("; ")))
}

fn green_region(base: &MetricReport, new: &MetricReport, notion: FairnessNotion) -> (bool, String) {
    let (bg, ng) = (base.gap(notion).unwrap_or(f64::NAN), new.gap(notion).unwrap_or(f64::NAN));
    let reduction = (bg - ng) / bg;
    let pass = reduction >= 0.3 && new.accuracy >= base.accuracy - 0.002;
    (
        pass,
        format!(
            "test gap {bg:.4} -> {ng:.4} ({:.1}% reduction, need >= 30%), accuracy {:.4} -> {:.4} (need >= base - 0.002)",
            100.0 * reduction,
            base.accuracy,
            new.accuracy
        ),
    )
}

// 4a. Fixed configuration end to end.
fn end_to_end_fixed(s: &Splits, beta: f64, gamma: f64, limit: Duration) -> Outcome {
    let t = Instant::now();
    let mut cfg = ReweighConfig::new(FairnessNotion::Eop, s.l2);
    cfg.beta = beta;
    cfg.gamma = gamma;
    let r = run(&s.train, &s.val, &s.test, &cfg).map_err(err)?;
    let elapsed = t.elapsed();
    let (pass, detail) = green_region(&r.base_metrics, &r.reweighed_metrics, FairnessNotion::Eop);
    let branch = r.lp_branch.map_or("none", LpBranch::as_str);
    Ok((
        pass && elapsed < limit,
        format!("beta={beta} gamma={gamma} branch={branch}; {detail}; limit {}s", limit.as_secs()),
    ))
}

// 4b. Grid-searched configuration end to end.
fn end_to_end_grid(s: &Splits, limit: Duration) -> Outcome {
    let t = Instant::now();
    let g = grid_search(&s.train, &s.val, FairnessNotion::Eop, s.l2, &Grid::full(), &GridOptions::default())
        .map_err(err)?;
    let r = run(&s.train, &s.val, &s.test, &g.selected).map_err(err)?;
    let elapsed = t.elapsed();
    let (pass, detail) = green_region(&r.base_metrics, &r.reweighed_metrics, FairnessNotion::Eop);
    let c = &g.selected;
    let branch = r.lp_branch.map_or("none", LpBranch::as_str);
    Ok((
        pass && elapsed < limit,
        format!(
            "selected beta={} gamma={} alpha={} branch={branch} fallback={}; {detail}; limit {}s",
            c.beta,
            c.gamma,
            c.alpha,
            g.fallback,
            limit.as_secs()
        ),
    ))
}

// 5. LP solver against independent oracles.

/// Box-constrained LP `min c.x` subject to rows `a_k.x <= b_k`, `0 <= x <= 1`.
struct BoxLp {
    c: Vec<f64>,
    rows: Vec<(Vec<f64>, f64)>,
}

impl BoxLp {
    fn feasible(&self, x: &[f64], tol: f64) -> bool {
        self.rows
            .iter()
            .all(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= b + tol)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(p, q)| p * q).sum()
    }

    /// Best basic feasible solution: every vertex has all but `k` variables
    /// at a bound, with `k` rows tight determining the rest.
    fn vertex_min(&self) -> Option<f64> {
        let n = self.c.len();
        let m = self.rows.len();
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << m) {
            let tight: Vec<usize> = (0..m).filter(|k| mask >> k & 1 == 1).collect();
            let k = tight.len();
            if k > n {
                continue;
            }
            for free in combinations(n, k) {
                let fixed: Vec<usize> = (0..n).filter(|j| !free.contains(j)).collect();
                for bits in 0u64..(1 << fixed.len()) {
                    let mut x = vec![0.0; n];
                    for (t, &j) in fixed.iter().enumerate() {
                        x[j] = (bits >> t & 1) as f64;
                    }
                    if k > 0 {
                        let a = DMatrix::from_fn(k, k, |r, c| self.rows[tight[r]].0[free[c]]);
                        let b = DVector::from_fn(k, |r, _| {
                            let (row, rhs) = &self.rows[tight[r]];
                            rhs - fixed.iter().map(|&j| row[j] * x[j]).sum::<f64>()
                        });
                        let Some(sol) = a.lu().solve(&b) else { continue };
                        for (i, &j) in free.iter().enumerate() {
                            x[j] = sol[i];
                        }
                    }
                    if x.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)) && self.feasible(&x, 1e-9) {
                        let v = self.value(&x);
                        best = Some(best.map_or(v, |b| b.min(v)));
                    }
                }
            }
        }
        best
    }

    /// Best point of the uniform grid with the given number of intervals.
    fn grid_min(&self, intervals: usize) -> Option<f64> {
        let n = self.c.len();
        let mut idx = vec![0usize; n];
        let mut best: Option<f64> = None;
        let step = 1.0 / intervals as f64;
        loop {
            let x: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
            if self.feasible(&x, 0.0) {
                let v = self.value(&x);
                best = Some(best.map_or(v, |b| b.min(v)));
            }
            let mut p = 0;
            loop {
                if p == n {
                    return best;
                }
                idx[p] += 1;
                if idx[p] <= intervals {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
        }
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            go(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn lp_oracles() -> Outcome {
    const EXACT: f64 = 1e-7;
    const GRID: f64 = 0.05;
    const GRID_MAX_VARS: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_relaxed, mut worst_budgeted, mut worst_grid) = (0.0_f64, 0.0_f64, 0.0_f64);
    let (mut infeasible, mut gridded, mut mismatches) = (0, 0, Vec::new());
    for case in 0..100 {
        let n = rng.gen_range(2..=12);
        let i_fair: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let i_util: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gap = rng.gen_range(0.05..1.0);
        let beta = f64::from(rng.gen_range(0..=9)) / 10.0;
        let gamma = f64::from(rng.gen_range(0..=4)) / 10.0;
        let alpha = f64::from(rng.gen_range(1..=15)) / 100.0;
        let table = InfluenceTable::new(i_fair.clone(), i_util.clone(), gap, FairnessNotion::Eop).map_err(err)?;

        let u_min: f64 = i_util.iter().map(|v| v.min(0.0)).sum();
        let relaxed = BoxLp {
            c: vec![1.0; n],
            rows: vec![(i_fair.clone(), -(1.0 - beta) * gap), (i_util.clone(), gamma * u_min)],
        };
        let got = solve_relaxed(&table, beta, gamma).map_err(err)?;
        match (relaxed.vertex_min(), got.objective_value) {
            (None, None) => infeasible += 1,
            (Some(o), Some(v)) => {
                let e = (o - v).abs() / o.abs().max(1.0);
                worst_relaxed = worst_relaxed.max(e);
                if e > EXACT {
                    mismatches.push(format!("relaxed#{case}"));
                }
            }
            _ => mismatches.push(format!("relaxed#{case} status")),
        }

        let budgeted = BoxLp {
            c: i_fair.clone(),
            rows: vec![(i_util.clone(), 0.0), (vec![1.0; n], alpha * n as f64)],
        };
        let got = solve_budgeted(&table, alpha).map_err(err)?;
        let Some(v) = got.objective_value else {
            mismatches.push(format!("budgeted#{case} status"));
            continue;
        };
        let o = budgeted.vertex_min().ok_or("budgeted oracle found no vertex")?;
        let e = (o - v).abs() / o.abs().max(1.0);
        worst_budgeted = worst_budgeted.max(e);
        if e > EXACT {
            mismatches.push(format!("budgeted#{case}"));
        }
        if n <= GRID_MAX_VARS {
            gridded += 1;
            let g = budgeted.grid_min(100).ok_or("grid has no feasible point")?;
            let e = (g - v).abs();
            worst_grid = worst_grid.max(e);
            if e > GRID || v > g + EXACT {
                mismatches.push(format!("budgeted-grid#{case} n={n} grid={g:.4} lp={v:.4}"));
            }
        }
    }
    Ok((
        mismatches.is_empty(),
        format!(
            "100 instances (n 2..=12, {infeasible} relaxed infeasible): relaxed vs vertex max err {worst_relaxed:.1e}, \
             budgeted vs vertex max err {worst_budgeted:.1e} (need <= 1e-7); budgeted vs 0.01 grid on {gridded} \
             instances with n <= {GRID_MAX_VARS}: max err {worst_grid:.4} (need <= 0.05); mismatches {mismatches:?}"
        ),
    ))
}

// 6. Infeasible relaxed program falls back to the budgeted one.
fn fallback(s: &Splits) -> Outcome {
    let mut base = base_stage(&s.train, &s.val, FairnessNotion::Eop, s.l2).map_err(err)?;
    let n = s.train.len();
    // Every sample hurts fairness except one, which helps far too little to
    // close the gap: the relaxed program cannot be satisfied.
    let mut i_fair = vec![0.02; n];
    i_fair[7] = -1e-3;
    let mut i_util = vec![-0.05; n];
    i_util[7] = -0.01;
    let table = InfluenceTable::new(i_fair, i_util, 0.2, FairnessNotion::Eop).map_err(err)?;
    let relaxed = solve_relaxed(&table, 0.0, 0.0).map_err(err)?;
    base.table = Some(table);
    let cfg = ReweighConfig::new(FairnessNotion::Eop, s.l2);
    let rew = reweigh_with_base(&s.train, &base, &cfg).map_err(err)?;
    let branch = rew.lp_branch();
    let pass = relaxed.status == LpStatus::Infeasible && branch == Some(LpBranch::Budgeted) && rew.w_star[7] == 1.0;
    Ok((
        pass,
        format!(
            "relaxed status {:?} (phase-1 objective {:.3e}), pipeline branch {:?}, w*[7]={}, retrain grad norm {:.1e}",
            relaxed.status, relaxed.phase1_objective, branch, rew.w_star[7], rew.model.converged_grad_norm
        ),
    ))
}

// 7a. Finite differences and linearity.
fn numerics(s: &Splits, label: &str) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let d = s.train.n_features() + 1;
    let w = TrainWeights::new((0..s.train.len()).map(|_| rng.gen_range(0.2..1.0)).collect()).map_err(err)?;
    let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let f = |t: &[f64]| objective(&s.train, &w, t, s.l2).expect("objective");
    let g = |t: &[f64]| objective_gradient(&s.train, &w, t, s.l2).expect("gradient");
    let g0 = g(&theta);
    let h0 = hessian(&s.train, &w, &theta, s.l2).map_err(err)?;

    let h = 1e-5;
    let mut fd_grad = vec![0.0; d];
    let mut fd_hess = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[j] += h;
        tm[j] -= h;
        fd_grad[j] = (f(&tp) - f(&tm)) / (2.0 * h);
        let (gp, gm) = (g(&tp), g(&tm));
        for i in 0..d {
            fd_hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = g0.iter().zip(&fd_grad).map(|(a, b)| a - b).collect();
    let grad_rel = norm(&diff) / norm(&g0);
    let hess_rel = (&h0 - &fd_hess).norm() / h0.norm();

    let base = base_stage(&s.train, &s.val, FairnessNotion::Eop, s.l2).map_err(err)?;
    let table = base.table.as_ref().ok_or("base model already fair")?;
    let n = table.len();
    let w1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
    let w2: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
    let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
    let (f1, u1) = influence_of(&w1, table).map_err(err)?;
    let (f2, u2) = influence_of(&w2, table).map_err(err)?;
    let (fs, us) = influence_of(&sum, table).map_err(err)?;
    let scale = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
    let lin_fair = (fs - f1 - f2).abs() / scale(&table.i_fair);
    let lin_util = (us - u1 - u2).abs() / scale(&table.i_util);
    let lin = lin_fair.max(lin_util);

    let pass = grad_rel < 1e-6 && hess_rel < 1e-4 && lin < 1e-13;
    Ok((
        pass,
        format!(
            "{label}: gradient FD rel err {grad_rel:.1e} (need < 1e-6), Hessian FD rel err {hess_rel:.1e} \
             (need < 1e-4), influence additivity rel err {lin:.1e} (need < 1e-13)"
        ),
    ))
}

// 7b. Cholesky of the base Hessian on every benchmark.
fn cholesky_all() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for id in DatasetId::ALL {
        let s = real(id)?;
        let base = base_stage(&s.train, &s.val, FairnessNotion::Eop, s.l2).map_err(err)?;
        let h = Hessian::at(&s.train, &TrainWeights::ones(s.train.len()), &base.model.theta, s.l2);
        let ok = h.is_ok();
        pass &= ok;
        parts.push(format!("{id} (D={}, l2={}): {}", s.train.n_features(), s.l2, if ok { "ok" } else { "failed" }));
    }
    Ok((pass, parts.join(", ")))
}

// 8. Group removals stay correlated but with larger error than LOO.
fn group_effect(s: &Splits, size: usize, n_groups: usize) -> Outcome {
    let ctx = StudyContext::new(&s.train, &s.val, FairnessNotion::Eop, s.l2).map_err(err)?;
    let groups = ctx.group(size, n_groups, SEED).map_err(err)?;
    let loo = ctx.loo(100, SEED).map_err(err)?;
    let mut pass = groups.summary.failed == 0 && loo.summary.failed == 0;
    let mut parts = vec![format!("{n_groups} groups of {size}")];
    for metric in [Metric::Util, Metric::Fair] {
        let (r, m, ml) = (rho(&groups, metric), mae(&groups, metric), mae(&loo, metric));
        pass &= r >= 0.8 && m > ml;
        parts.push(format!("{metric:?}: rho={r:.4} (need >= 0.8) MAE group {m:.3e} vs LOO {ml:.3e}"));
    }
    Ok((pass, parts.join("; ")))
}

// 9. Flipping a label moves the fairness surrogate more than removing it.
fn label_flip(s: &Splits) -> Outcome {
    let ctx = StudyContext::new(&s.train, &s.val, FairnessNotion::Eop, s.l2).map_err(err)?;
    let r = ctx.flip(100, SEED).map_err(err)?;
    let flips = r
        .records_for(Metric::Fair)
        .filter(|x| matches!(x.perturbation, Perturbation::Flip { .. }))
        .count();
    let flip = mean_abs_actual(&r, "flip", Metric::Fair).ok_or("no flip records")?;
    let removal = mean_abs_actual(&r, "loo", Metric::Fair).ok_or("no removal records")?;
    Ok((
        flip > removal && flips == 100,
        format!("samples={flips} mean |df| flip {flip:.4e} vs removal {removal:.4e}"),
    ))
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0, total: 0 };
    let synth = synthetic();
    let german = real(DatasetId::German);
    let adult = real(DatasetId::Adult);
    let with = |s: &Result<Splits, String>, f: &dyn Fn(&Splits) -> Outcome| -> Outcome {
        match s {
            Ok(s) => f(s),
            Err(e) => Err(e.clone()),
        }
    };

    suite.check("C1", "LOO influence fidelity, german", || with(&german, &loo_fidelity));
    suite.check("C1", &format!("LOO influence fidelity {STAND_IN}"), || loo_fidelity(&synth));

    suite.check("C2", "epsilon perturbation oracle, german", || with(&german, &epsilon_oracle));
    suite.check("C2", &format!("epsilon perturbation oracle {STAND_IN}"), || epsilon_oracle(&synth));

    for id in DatasetId::ALL {
        suite.check("C3", &format!("helpful samples and nontrivial budgeted solution, {id}"), || {
            with(&real(id), &witness_all)
        });
    }
    suite.check("C3", &format!("helpful samples and nontrivial budgeted solution {STAND_IN}"), || {
        witness_all(&synth)
    });

    suite.check("C4", "no-cost fairness, german EOP beta=0 gamma=0", || {
        with(&german, &|s| end_to_end_fixed(s, 0.0, 0.0, Duration::from_secs(60)))
    });
    suite.check("C4", "no-cost fairness, adult EOP grid-searched", || {
        with(&adult, &|s| end_to_end_grid(s, Duration::from_secs(1800)))
    });
    suite.check("C4", &format!("no-cost fairness, EOP grid-searched {STAND_IN}"), || {
        end_to_end_grid(&synth, Duration::from_secs(60))
    });

    suite.check("C5", "LP oracle equivalence", lp_oracles);

    suite.check("C6", "fallback to the budgeted program", || fallback(&synth));

    suite.check("C7", "finite differences and influence linearity, german", || {
        with(&german, &|s| numerics(s, "german"))
    });
    suite.check("C7", &format!("finite differences and influence linearity {STAND_IN}"), || {
        numerics(&synth, "synthetic")
    });
    suite.check("C7", "Hessian Cholesky on all benchmarks", cholesky_all);

    suite.check("C8", "group effect, adult", || with(&adult, &|s| group_effect(s, 250, 50)));
    suite.check("C8", &format!("group effect {STAND_IN}"), || group_effect(&synth, 60, 50));

    suite.check("C9", "label flip vs removal, german", || with(&german, &label_flip));
    suite.check("C9", &format!("label flip vs removal {STAND_IN}"), || label_flip(&synth));

    println!("{} of {} acceptance checks passed", suite.total - suite.failures, suite.total);
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
