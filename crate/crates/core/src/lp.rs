//! Linear programs over `w in [0, 1]^N` with a handful of general rows.
//!
//! [`solve`] is a two-phase bounded-variable primal simplex. The basis has
//! one column per general row, so it is re-inverted densely after every
//! basis change; between basis changes reduced costs stay fixed and improving
//! variables are moved to their opposite bound in pricing order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::InfluenceTable;

pub const FEAS_TOL: f64 = 1e-7;
pub const COST_TOL: f64 = 1e-9;
pub const PIVOT_TOL: f64 = 1e-11;
/// Consecutive degenerate pivots before switching to lowest-index pricing.
const DEGENERATE_STREAK: usize = 50;
const MAX_BASIS_CHANGES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min objective . w` subject to `constraints` and `0 <= w <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSpec {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpBranch {
    Relaxed,
    Budgeted,
}

impl LpBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            LpBranch::Relaxed => "relaxed",
            LpBranch::Budgeted => "budgeted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present when optimal.
    pub x: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    /// Sum of artificial variables after phase 1, in row-scaled units.
    pub phase1_objective: f64,
    /// Per-row violation in original units (`max(0, lhs - rhs)` or `|lhs - rhs|`).
    pub residuals: Vec<f64>,
    pub basis_changes: usize,
    pub bound_flips: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub w_star: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub which: LpBranch,
    pub residuals: Vec<f64>,
    pub phase1_objective: f64,
}

impl LpOutcome {
    fn from_solution(sol: LpSolution, which: LpBranch) -> Self {
        LpOutcome {
            status: sol.status,
            w_star: sol.x,
            objective_value: sol.objective_value,
            which,
            residuals: sol.residuals,
            phase1_objective: sol.phase1_objective,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LpSpec {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint '{}' has {} coefficients for {n} variables",
                    c.name,
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("constraint '{}' is not finite", c.name)));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("objective is not finite".into()));
        }
        Ok(())
    }

    /// Violation of every row at `x`, in original units.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
                match c.relation {
                    Relation::Le => (lhs - c.rhs).max(0.0),
                    Relation::Eq => (lhs - c.rhs).abs(),
                }
            })
            .collect()
    }

    /// CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        fn terms(out: &mut String, coeffs: &[f64]) {
            let mut written = 0;
            for (j, &v) in coeffs.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                if written > 0 && written % 6 == 0 {
                    out.push_str("\n   ");
                }
                let sign = if v < 0.0 { '-' } else { '+' };
                let _ = write!(out, " {sign} {} w{j}", v.abs());
                written += 1;
            }
            if written == 0 {
                out.push_str(" 0 w0");
            }
        }
        let mut out = String::from("Minimize\n obj:");
        terms(&mut out, &self.objective);
        out.push_str("\nSubject To\n");
        for (k, c) in self.constraints.iter().enumerate() {
            let name = if c.name.is_empty() { format!("c{k}") } else { c.name.clone() };
            let _ = write!(out, " {name}:");
            terms(&mut out, &c.coeffs);
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.n_vars() {
            let _ = writeln!(out, " 0 <= w{j} <= 1");
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct Simplex {
    m: usize,
    /// Column-major constraint matrix including slacks and artificials.
    cols: Vec<f64>,
    b: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    x: Vec<f64>,
    n_struct: usize,
    basis_changes: usize,
    bound_flips: usize,
}

impl Simplex {
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    fn n_total(&self) -> usize {
        self.upper.len()
    }

    /// Inverse of the basis matrix, row-major.
    fn basis_inverse(&self) -> Result<Vec<f64>> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.col(j).iter().enumerate() {
                a[i * m + k] = *v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&r, &s| a[r * m + c].abs().total_cmp(&a[s * m + c].abs()))
                .unwrap_or(c);
            if a[p * m + c].abs() <= PIVOT_TOL {
                return Err(Error::Internal("singular simplex basis".into()));
            }
            for k in 0..m {
                a.swap(c * m + k, p * m + k);
                inv.swap(c * m + k, p * m + k);
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        Ok(inv)
    }

    fn mul(&self, inv: &[f64], v: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m).map(|i| (0..m).map(|k| inv[i * m + k] * v[k]).sum()).collect()
    }

    /// Recomputes basic values from the nonbasic ones.
    fn refresh_basic(&mut self, inv: &[f64]) {
        let mut r = self.b.clone();
        for j in 0..self.n_total() {
            if self.state[j] == State::Upper {
                let u = self.upper[j];
                for (ri, a) in r.iter_mut().zip(&self.cols[j * self.m..(j + 1) * self.m]) {
                    *ri -= a * u;
                }
            }
        }
        let xb = self.mul(inv, &r);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[k];
        }
    }

    fn run(&mut self, cost: &[f64]) -> Result<()> {
        let m = self.m;
        let mut bland = false;
        let mut streak = 0;
        loop {
            let inv = self.basis_inverse()?;
            self.refresh_basic(&inv);
            let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
            let y: Vec<f64> = (0..m).map(|k| (0..m).map(|i| cb[i] * inv[i * m + k]).sum()).collect();

            let mut cands: Vec<(usize, f64)> = (0..self.n_total())
                .filter_map(|j| {
                    let st = self.state[j];
                    if st == State::Basic || self.upper[j] <= 0.0 {
                        return None;
                    }
                    let d = cost[j] - self.col(j).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
                    let improving = (st == State::Lower && d < -COST_TOL) || (st == State::Upper && d > COST_TOL);
                    improving.then_some((j, d))
                })
                .collect();
            if cands.is_empty() {
                return Ok(());
            }
            if !bland {
                cands.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
            }

            let mut pivoted = false;
            for &(j, _) in &cands {
                let alpha = self.mul(&inv, self.col(j));
                let dir = if self.state[j] == State::Lower { 1.0 } else { -1.0 };
                let mut best: Option<(f64, usize, State)> = None;
                for (k, &v) in self.basis.iter().enumerate() {
                    let rate = -dir * alpha[k];
                    let (limit, hit) = if rate < -PIVOT_TOL {
                        (self.x[v].max(0.0) / -rate, State::Lower)
                    } else if rate > PIVOT_TOL && self.upper[v].is_finite() {
                        ((self.upper[v] - self.x[v]).max(0.0) / rate, State::Upper)
                    } else {
                        continue;
                    };
                    let better = match best {
                        None => true,
                        Some((t, row, _)) => {
                            limit < t - 1e-12 || (limit <= t + 1e-12 && v < self.basis[row])
                        }
                    };
                    if better {
                        best = Some((limit, k, hit));
                    }
                }
                let span = self.upper[j];
                match best {
                    Some((t, row, hit)) if t < span => {
                        let leaving = self.basis[row];
                        self.state[leaving] = hit;
                        self.x[leaving] = if hit == State::Lower { 0.0 } else { self.upper[leaving] };
                        self.state[j] = State::Basic;
                        self.basis[row] = j;
                        self.basis_changes += 1;
                        if t <= 1e-12 {
                            streak += 1;
                            if streak >= DEGENERATE_STREAK {
                                bland = true;
                            }
                        } else {
                            streak = 0;
                            bland = false;
                        }
                        pivoted = true;
                        break;
                    }
                    _ if span.is_finite() => {
                        for (k, &v) in self.basis.iter().enumerate() {
                            self.x[v] -= dir * span * alpha[k];
                        }
                        if self.state[j] == State::Lower {
                            self.state[j] = State::Upper;
                            self.x[j] = span;
                        } else {
                            self.state[j] = State::Lower;
                            self.x[j] = 0.0;
                        }
                        self.bound_flips += 1;
                    }
                    _ => return Err(Error::Internal("linear program is unbounded".into())),
                }
            }
            if pivoted && self.basis_changes > MAX_BASIS_CHANGES {
                return Err(Error::Internal(format!(
                    "simplex exceeded {MAX_BASIS_CHANGES} basis changes"
                )));
            }
        }
    }
}

/// Solves `spec` exactly up to floating-point tolerances.
pub fn solve(spec: &LpSpec) -> Result<LpSolution> {
    spec.validate()?;
    let n = spec.n_vars();
    let m = spec.constraints.len();

    // Scale rows by their largest coefficient and make right-hand sides
    // nonnegative.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut slack_sign = Vec::with_capacity(m);
    for c in &spec.constraints {
        let scale = c.coeffs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let flip = if c.rhs < 0.0 { -1.0 } else { 1.0 };
        rows.push(c.coeffs.iter().map(|v| flip * v / scale).collect());
        b.push(flip * c.rhs / scale);
        slack_sign.push(match c.relation {
            Relation::Le => Some(flip),
            Relation::Eq => None,
        });
    }

    let slack_rows: Vec<usize> = (0..m).filter(|&k| slack_sign[k].is_some()).collect();
    let art_rows: Vec<usize> = (0..m).filter(|&k| slack_sign[k] != Some(1.0)).collect();
    let n_slack = slack_rows.len();
    let first_artificial = n + n_slack;
    let n_total = first_artificial + art_rows.len();

    let mut cols = vec![0.0; n_total * m];
    for (k, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            cols[j * m + k] = *v;
        }
    }
    let mut basis = vec![usize::MAX; m];
    for (s, &k) in slack_rows.iter().enumerate() {
        let j = n + s;
        let sign = slack_sign[k].unwrap_or(1.0);
        cols[j * m + k] = sign;
        if sign > 0.0 {
            basis[k] = j;
        }
    }
    for (t, &k) in art_rows.iter().enumerate() {
        let j = first_artificial + t;
        cols[j * m + k] = 1.0;
        basis[k] = j;
    }
    let mut upper = vec![1.0; n];
    upper.extend(std::iter::repeat(f64::INFINITY).take(n_total - n));
    let mut state = vec![State::Lower; n_total];
    for &j in &basis {
        state[j] = State::Basic;
    }

    let mut sx = Simplex {
        m,
        cols,
        b,
        upper,
        state,
        basis,
        x: vec![0.0; n_total],
        n_struct: n,
        basis_changes: 0,
        bound_flips: 0,
    };

    let mut phase1_objective = 0.0;
    if first_artificial < n_total {
        let mut cost = vec![0.0; n_total];
        cost[first_artificial..].iter_mut().for_each(|c| *c = 1.0);
        sx.run(&cost)?;
        phase1_objective = sx.x[first_artificial..].iter().map(|v| v.max(0.0)).sum();
        if phase1_objective > FEAS_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: None,
                objective_value: None,
                phase1_objective,
                residuals: Vec::new(),
                basis_changes: sx.basis_changes,
                bound_flips: sx.bound_flips,
            });
        }
        for j in first_artificial..n_total {
            sx.upper[j] = 0.0;
            if sx.state[j] != State::Basic {
                sx.state[j] = State::Lower;
                sx.x[j] = 0.0;
            }
        }
    }

    let mut cost = vec![0.0; n_total];
    cost[..n].copy_from_slice(&spec.objective);
    sx.run(&cost)?;

    let x: Vec<f64> = sx.x[..sx.n_struct]
        .iter()
        .map(|&v| if v.abs() <= 1e-9 { 0.0 } else if (v - 1.0).abs() <= 1e-9 { 1.0 } else { v })
        .collect();
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Internal(format!("simplex produced out-of-bounds value {v}")));
    }
    let objective_value = spec.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
    let residuals = spec.residuals(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x: Some(x),
        objective_value: Some(objective_value),
        phase1_objective,
        residuals,
        basis_changes: sx.basis_changes,
        bound_flips: sx.bound_flips,
    })
}

/// `min_v sum_i v_i * i_util[i]` over `v in [0, 1]^N`.
pub fn min_util_bound(table: &InfluenceTable) -> f64 {
    table.i_util.iter().map(|v| v.min(0.0)).sum()
}

/// Smallest total weight that shrinks the fairness gap by a `(1 - beta)`
/// share while keeping the predicted utility change below `gamma * U_min`.
pub fn relaxed_spec(table: &InfluenceTable, beta: f64, gamma: f64) -> Result<LpSpec> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!("beta must be in [0, 1], got {beta}")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!("gamma must be nonnegative, got {gamma}")));
    }
    if table.fair_gap_surrogate <= 0.0 {
        return Err(Error::AlreadyFair);
    }
    Ok(LpSpec {
        objective: vec![1.0; table.len()],
        constraints: vec![
            Constraint {
                name: "fairness".into(),
                coeffs: table.i_fair.clone(),
                relation: Relation::Le,
                rhs: -(1.0 - beta) * table.fair_gap_surrogate,
            },
            Constraint {
                name: "utility".into(),
                coeffs: table.i_util.clone(),
                relation: Relation::Le,
                rhs: gamma * min_util_bound(table),
            },
        ],
    })
}

/// Largest predicted fairness improvement with no predicted utility loss and
/// at most `alpha * N` total weight.
pub fn budgeted_spec(table: &InfluenceTable, alpha: f64) -> Result<LpSpec> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1], got {alpha}")));
    }
    let n = table.len();
    Ok(LpSpec {
        objective: table.i_fair.clone(),
        constraints: vec![
            Constraint {
                name: "utility".into(),
                coeffs: table.i_util.clone(),
                relation: Relation::Le,
                rhs: 0.0,
            },
            Constraint {
                name: "budget".into(),
                coeffs: vec![1.0; n],
                relation: Relation::Le,
                rhs: alpha * n as f64,
            },
        ],
    })
}

pub fn solve_relaxed(table: &InfluenceTable, beta: f64, gamma: f64) -> Result<LpOutcome> {
    let sol = solve(&relaxed_spec(table, beta, gamma)?)?;
    Ok(LpOutcome::from_solution(sol, LpBranch::Relaxed))
}

pub fn solve_budgeted(table: &InfluenceTable, alpha: f64) -> Result<LpOutcome> {
    let sol = solve(&budgeted_spec(table, alpha)?)?;
    Ok(LpOutcome::from_solution(sol, LpBranch::Budgeted))
}

/// Relaxed program first, budgeted program when the relaxed one is infeasible.
pub fn solve_with_fallback(table: &InfluenceTable, beta: f64, gamma: f64, alpha: f64) -> Result<LpOutcome> {
    // Validate alpha up front so a bad value is not hidden by a feasible
    // relaxed program.
    budgeted_spec(&InfluenceTable::new(Vec::new(), Vec::new(), 0.0, table.notion)?, alpha)?;
    let relaxed = solve_relaxed(table, beta, gamma)?;
    if relaxed.is_optimal() {
        return Ok(relaxed);
    }
    solve_budgeted(table, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::FairnessNotion;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(i_fair: Vec<f64>, i_util: Vec<f64>, gap: f64) -> InfluenceTable {
        InfluenceTable::new(i_fair, i_util, gap, FairnessNotion::Eop).unwrap()
    }

    fn feasible(spec: &LpSpec, x: &[f64], tol: f64) -> bool {
        x.iter().all(|v| (-tol..=1.0 + tol).contains(v)) && spec.residuals(x).iter().all(|r| *r <= tol)
    }

    fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
        let k = b.len();
        for c in 0..k {
            let p = (c..k).max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs()))?;
            if a[p][c].abs() < 1e-12 {
                return None;
            }
            a.swap(c, p);
            b.swap(c, p);
            for r in 0..k {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for q in c..k {
                        a[r][q] -= f * a[c][q];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
        Some((0..k).map(|i| b[i] / a[i][i]).collect())
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut out = subsets(n - 1, k);
        for mut s in subsets(n - 1, k - 1) {
            s.push(n - 1);
            out.push(s);
        }
        out
    }

    /// Enumerates every basic solution: a set of tight rows, as many free
    /// variables, the rest fixed at 0 or 1.
    fn vertex_oracle(spec: &LpSpec) -> Option<f64> {
        let n = spec.n_vars();
        let m = spec.constraints.len();
        let eqs: Vec<usize> = (0..m).filter(|&k| spec.constraints[k].relation == Relation::Eq).collect();
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << m) {
            let tight: Vec<usize> = (0..m).filter(|&k| mask & (1 << k) != 0).collect();
            if eqs.iter().any(|e| !tight.contains(e)) || tight.len() > n {
                continue;
            }
            let k = tight.len();
            for free in subsets(n, k) {
                let fixed: Vec<usize> = (0..n).filter(|j| !free.contains(j)).collect();
                for bits in 0u32..(1 << fixed.len()) {
                    let mut x = vec![0.0; n];
                    for (t, &j) in fixed.iter().enumerate() {
                        x[j] = f64::from((bits >> t) & 1);
                    }
                    let mut a: Vec<Vec<f64>> =
                        tight.iter().map(|&r| free.iter().map(|&j| spec.constraints[r].coeffs[j]).collect()).collect();
                    let mut rhs: Vec<f64> = tight
                        .iter()
                        .map(|&r| {
                            let c = &spec.constraints[r];
                            c.rhs - fixed.iter().map(|&j| c.coeffs[j] * x[j]).sum::<f64>()
                        })
                        .collect();
                    let Some(sol) = solve_dense(&mut a, &mut rhs) else { continue };
                    for (&j, v) in free.iter().zip(sol) {
                        x[j] = v;
                    }
                    if feasible(spec, &x, 1e-9) {
                        let obj: f64 = spec.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
                        best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                    }
                }
            }
        }
        best
    }

    fn grid_oracle(spec: &LpSpec, step: f64) -> Option<f64> {
        let n = spec.n_vars();
        let levels = (1.0 / step).round() as usize + 1;
        let mut idx = vec![0usize; n];
        let mut best: Option<f64> = None;
        loop {
            let x: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
            if feasible(spec, &x, 1e-12) {
                let obj: f64 = spec.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
            let mut p = 0;
            loop {
                if p == n {
                    return best;
                }
                idx[p] += 1;
                if idx[p] < levels {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
        }
    }

    fn random_spec(rng: &mut ChaCha8Rng, n: usize, m: usize, with_eq: bool) -> LpSpec {
        let objective = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let constraints = (0..m)
            .map(|k| {
                let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let rhs = rng.gen_range(-1.5..1.5);
                Constraint {
                    name: format!("r{k}"),
                    coeffs,
                    relation: if with_eq && k == 0 { Relation::Eq } else { Relation::Le },
                    rhs,
                }
            })
            .collect();
        LpSpec { objective, constraints }
    }

    #[test]
    fn relaxed_single_binding_row() {
        let out = solve_relaxed(&table(vec![-2.0, 1.0], vec![-1.0, -1.0], 1.0), 0.0, 0.0).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.which, LpBranch::Relaxed);
        let w = out.w_star.unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && w[1] == 0.0);
        assert!((out.objective_value.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relaxed_without_improving_samples_is_infeasible() {
        let out = solve_relaxed(&table(vec![0.5, 0.0, 2.0], vec![-1.0, 1.0, 0.0], 0.3), 0.2, 0.0).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
        assert!(out.phase1_objective > FEAS_TOL);
        assert!(out.w_star.is_none());
    }

    #[test]
    fn budgeted_without_improving_samples_is_zero() {
        let out = solve_budgeted(&table(vec![1.0, 2.0], vec![0.3, -4.0], 0.1), 0.7).unwrap();
        assert_eq!(out.w_star.unwrap(), vec![0.0, 0.0]);
        assert_eq!(out.objective_value.unwrap(), 0.0);
    }

    #[test]
    fn budgeted_two_variable_geometry() {
        // The utility row caps w2 at w1 / 2 and the budget at w1 + w2 <= 1, so
        // the optimum sits where both bind.
        let t = table(vec![-1.0, -3.0], vec![-1.0, 2.0], 0.5);
        let out = solve_budgeted(&t, 0.5).unwrap();
        let w = out.w_star.unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-12 && (w[1] - 1.0 / 3.0).abs() < 1e-12, "{w:?}");
        let obj = out.objective_value.unwrap();
        assert!((obj + 5.0 / 3.0).abs() < 1e-12);
        let spec = budgeted_spec(&t, 0.5).unwrap();
        let grid = grid_oracle(&spec, 0.01).unwrap();
        assert!(obj <= grid + 1e-12 && grid - obj < 0.02);
        assert!((vertex_oracle(&spec).unwrap() - obj).abs() < 1e-7);
    }

    #[test]
    fn relaxed_is_never_beaten_by_grid_points() {
        // The grid optimum is only an upper bound here: both rows can bind at
        // fractional values, so exactness is checked against vertices.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let t = table(
                (0..4).map(|_| rng.gen_range(-2.0..1.0)).collect(),
                (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                rng.gen_range(0.1..1.0),
            );
            let beta = rng.gen_range(0.0..0.8);
            let gamma = rng.gen_range(0.0..0.5);
            let spec = relaxed_spec(&t, beta, gamma).unwrap();
            let out = solve_relaxed(&t, beta, gamma).unwrap();
            if let Some(g) = grid_oracle(&spec, 0.05) {
                let obj = out.objective_value.expect("grid found a feasible point");
                assert!(obj <= g + 1e-9, "{obj} vs grid {g}");
            }
            assert_eq!(out.objective_value.is_some(), vertex_oracle(&spec).is_some());
            if let (Some(obj), Some(v)) = (out.objective_value, vertex_oracle(&spec)) {
                assert!((obj - v).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn min_util_bound_clips_positives() {
        assert_eq!(min_util_bound(&table(vec![0.0; 3], vec![-2.0, 1.0, -0.5], 1.0)), -2.5);
        assert_eq!(min_util_bound(&table(vec![0.0; 2], vec![0.0, 3.0], 1.0)), 0.0);
    }

    #[test]
    fn min_util_bound_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = LpSpec {
            objective: u.clone(),
            constraints: Vec::new(),
        };
        let grid = grid_oracle(&spec, 0.1).unwrap();
        assert!((min_util_bound(&table(vec![0.0; 5], u, 1.0)) - grid).abs() < 1e-12);
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..60 {
            let n = 2 + case % 9;
            let m = 1 + case % 3;
            let spec = random_spec(&mut rng, n, m, case % 4 == 0);
            let sol = solve(&spec).unwrap();
            let oracle = vertex_oracle(&spec);
            match (sol.status, oracle) {
                (LpStatus::Optimal, Some(best)) => {
                    let obj = sol.objective_value.unwrap();
                    assert!((obj - best).abs() <= 1e-7, "case {case}: {obj} vs {best}");
                    assert!(sol.residuals.iter().all(|r| *r <= FEAS_TOL));
                }
                (LpStatus::Infeasible, None) => assert!(sol.phase1_objective > FEAS_TOL),
                other => panic!("case {case}: solver and oracle disagree: {other:?}"),
            }
        }
    }

    #[test]
    fn twelve_variables_three_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut optimal = 0;
        for _ in 0..4 {
            let spec = random_spec(&mut rng, 12, 3, false);
            let sol = solve(&spec).unwrap();
            let oracle = vertex_oracle(&spec);
            assert_eq!(sol.status == LpStatus::Optimal, oracle.is_some());
            if let (Some(obj), Some(best)) = (sol.objective_value, oracle) {
                assert!((obj - best).abs() <= 1e-7);
                optimal += 1;
            }
        }
        assert!(optimal > 0);
    }

    #[test]
    fn degenerate_ties_terminate() {
        // Many identical columns and a zero right-hand side.
        let n = 40;
        let spec = LpSpec {
            objective: vec![-1.0; n],
            constraints: vec![
                Constraint {
                    name: "a".into(),
                    coeffs: vec![1.0; n],
                    relation: Relation::Le,
                    rhs: 0.0,
                },
                Constraint {
                    name: "b".into(),
                    coeffs: (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect(),
                    relation: Relation::Le,
                    rhs: 0.0,
                },
            ],
        };
        let sol = solve(&spec).unwrap();
        assert_eq!(sol.objective_value, Some(0.0));
    }

    #[test]
    fn large_instance_satisfies_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 5000;
        let t = table(
            (0..n).map(|_| rng.gen_range(-1.0..1.0) * 1e-3).collect(),
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            0.05,
        );
        let out = solve_relaxed(&t, 0.1, 0.2).unwrap();
        assert!(out.is_optimal());
        assert!(out.residuals.iter().all(|r| *r <= FEAS_TOL));
        let w = out.w_star.unwrap();
        let (f, _) = crate::influence::influence_of(&w, &t).unwrap();
        assert!(f <= -0.9 * 0.05 + FEAS_TOL);
        let b = solve_budgeted(&t, 0.3).unwrap();
        assert!(b.residuals.iter().all(|r| *r <= FEAS_TOL));
        assert!(b.objective_value.unwrap() < 0.0);
    }

    #[test]
    fn fallback_order() {
        let t = table(vec![0.5, -0.1], vec![-1.0, -2.0], 1.0);
        let out = solve_with_fallback(&t, 0.0, 0.0, 0.5).unwrap();
        assert_eq!(out.which, LpBranch::Budgeted);
        assert!(out.is_optimal());
        let t = table(vec![-2.0, 1.0], vec![-1.0, -1.0], 1.0);
        assert_eq!(solve_with_fallback(&t, 0.0, 0.0, 0.5).unwrap().which, LpBranch::Relaxed);
        assert!(solve_with_fallback(&t, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn parameter_ranges_are_checked() {
        let t = table(vec![-1.0], vec![0.0], 1.0);
        assert!(solve_relaxed(&t, 1.5, 0.0).is_err());
        assert!(solve_relaxed(&t, 0.5, -1.0).is_err());
        assert!(solve_budgeted(&t, 1.5).is_err());
        let fair = table(vec![-1.0], vec![0.0], 0.0);
        assert!(matches!(solve_relaxed(&fair, 0.5, 0.0), Err(Error::AlreadyFair)));
    }

    #[test]
    fn lp_text_format() {
        let spec = budgeted_spec(&table(vec![-1.0, 0.0], vec![0.5, -2.0], 1.0), 0.5).unwrap();
        let text = spec.to_lp_format();
        assert_eq!(
            text,
            "Minimize\n obj: - 1 w0\nSubject To\n utility: + 0.5 w0 - 2 w1 <= 0\n budget: + 1 w0 + 1 w1 <= 1\nBounds\n 0 <= w0 <= 1\n 0 <= w1 <= 1\nEnd\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn relaxed_objective_is_scale_invariant(
            fair in proptest::collection::vec(-2.0f64..1.0, 6),
            util in proptest::collection::vec(-1.0f64..1.0, 6),
            gap in 0.05f64..1.0,
            beta in 0.0f64..1.0,
            gamma in 0.0f64..1.0,
            c in 0.01f64..100.0,
        ) {
            let a = solve_relaxed(&table(fair.clone(), util.clone(), gap), beta, gamma).unwrap();
            let scaled = table(
                fair.iter().map(|v| v * c).collect(),
                util.iter().map(|v| v * c).collect(),
                gap * c,
            );
            let b = solve_relaxed(&scaled, beta, gamma).unwrap();
            prop_assert_eq!(a.status, b.status);
            if let (Some(x), Some(y)) = (a.objective_value, b.objective_value) {
                prop_assert!((x - y).abs() <= 1e-7, "{} vs {}", x, y);
            }
        }

        #[test]
        fn weaker_fairness_demand_never_costs_more(
            fair in proptest::collection::vec(-2.0f64..1.0, 7),
            util in proptest::collection::vec(-1.0f64..1.0, 7),
            gap in 0.05f64..1.0,
            b1 in 0.0f64..1.0,
            b2 in 0.0f64..1.0,
            gamma in 0.0f64..1.0,
        ) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let t = table(fair, util, gap);
            let strict = solve_relaxed(&t, lo, gamma).unwrap();
            let loose = solve_relaxed(&t, hi, gamma).unwrap();
            if let Some(s) = strict.objective_value {
                let l = loose.objective_value.expect("looser program stays feasible");
                prop_assert!(l <= s + 1e-9);
            }
        }

        #[test]
        fn utility_scaling_keeps_budgeted_optimum(
            fair in proptest::collection::vec(-2.0f64..1.0, 6),
            util in proptest::collection::vec(-1.0f64..1.0, 6),
            alpha in 0.05f64..1.0,
            c in 0.01f64..100.0,
        ) {
            let a = solve_budgeted(&table(fair.clone(), util.clone(), 1.0), alpha).unwrap();
            let b = solve_budgeted(&table(fair, util.iter().map(|v| v * c).collect(), 1.0), alpha).unwrap();
            prop_assert!((a.objective_value.unwrap() - b.objective_value.unwrap()).abs() <= 1e-7);
        }

        #[test]
        fn optimal_points_are_feasible(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spec(&mut rng, 10, 2, seed % 3 == 0);
            let sol = solve(&spec).unwrap();
            match sol.x {
                Some(x) => {
                    prop_assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
                    prop_assert!(sol.residuals.iter().all(|r| *r <= FEAS_TOL));
                }
                None => prop_assert!(sol.phase1_objective > FEAS_TOL),
            }
        }
    }
}
