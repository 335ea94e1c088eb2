//! Turning relevance vectors into per-task sample budgets.
//!
//! The core rule gives task `t` the budget `max(c' |nu_t|^q, N_floor)` with
//! `c'` chosen so the budgets add up to `N_tot`. For `q = 1` this is the exact
//! minimizer of `sum_t nu_t^2 / n_t` over real `n >= N_floor` with
//! `sum n = N_tot`. Real-valued budgets are rounded to integers by largest
//! remainder.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::relevance::{self, default_support_tol};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Strategy {
    L1,
    L2,
    LpNq { p: Option<u32>, q: f64 },
    Passive,
    KnownNu { q: f64 },
    CostAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Integer budget per task; sums to `n_tot`.
    pub n: Vec<u64>,
    /// Real-valued budgets before rounding.
    pub continuous: Vec<f64>,
    pub n_tot: u64,
    pub n_floor: u64,
    pub strategy: Strategy,
    /// Proportionality constant `c'` (0 for uniform allocations).
    pub c_prime: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl Allocation {
    pub fn num_tasks(&self) -> usize {
        self.n.len()
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.n.iter().map(|&v| v as f64).collect()
    }

    /// Tasks that receive more than the floor.
    pub fn above_floor(&self) -> Vec<usize> {
        (0..self.n.len()).filter(|&t| self.n[t] > self.n_floor).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `task_index,n_t` rows with 1-based task indices.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["task_index", "n_t"])?;
        for (t, n) in self.n.iter().enumerate() {
            wtr.write_record([(t + 1).to_string(), n.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_budget(t: usize, n_tot: u64, n_floor: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::Dimension("no tasks to allocate".into()));
    }
    let required = n_floor.saturating_mul(t as u64);
    if n_tot < required {
        return Err(Error::InfeasibleBudget { n_tot, required });
    }
    Ok(())
}

/// Real budgets `max(c' a_t, floor)` summing to `n_tot`, for weights `a_t >= 0`
/// that are not all zero. Returns the budgets and `c'`.
///
/// `c' -> sum_t max(c' a_t, floor)` is piecewise linear with a breakpoint per
/// task; with tasks sorted by weight, the piece holding the solution is found
/// by a linear scan and solved exactly.
fn water_fill(weights: &[f64], n_tot: f64, floor: f64) -> (Vec<f64>, f64) {
    let t = weights.len();
    let mut order: Vec<usize> = (0..t).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut c_prime = 0.0;
    let mut head_sum = 0.0;
    for (m, &idx) in order.iter().enumerate() {
        head_sum += weights[idx];
        let free = n_tot - (t - m - 1) as f64 * floor;
        let c = free / head_sum;
        let next_ok = order.get(m + 1).is_none_or(|&nx| c * weights[nx] <= floor);
        if c * weights[idx] >= floor && next_ok {
            c_prime = c;
            break;
        }
    }
    let budgets = weights.iter().map(|&a| f64::max(c_prime * a, floor)).collect();
    (budgets, c_prime)
}

/// Largest-remainder rounding of real budgets (each at least `floor`) to
/// integers summing to `n_tot`; ties go to the lower task index.
pub fn round_largest_remainder(continuous: &[f64], n_tot: u64, floor: u64) -> Vec<u64> {
    let mut n: Vec<u64> = continuous.iter().map(|&v| (v.max(floor as f64)).floor() as u64).collect();
    let total: u64 = n.iter().sum();
    let mut order: Vec<usize> = (0..n.len()).collect();
    let frac = |i: usize| continuous[i] - continuous[i].floor();
    if total <= n_tot {
        order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
        let deficit = (n_tot - total) as usize;
        for i in 0..deficit {
            n[order[i % order.len()]] += 1;
        }
    } else {
        // Only reachable through round-off in the budgets: trim the smallest
        // remainders among tasks that stay at or above the floor.
        order.sort_by(|&a, &b| frac(a).total_cmp(&frac(b)).then(b.cmp(&a)));
        let mut excess = total - n_tot;
        let mut i = 0;
        while excess > 0 && i < 2 * order.len() * (excess as usize + 1) {
            let idx = order[i % order.len()];
            if n[idx] > floor {
                n[idx] -= 1;
                excess -= 1;
            }
            i += 1;
        }
    }
    n
}

/// With a zero floor, rounding can leave a task with positive weight at zero
/// samples, which makes its term infinite. Each such task takes one sample from
/// the currently largest count (lowest index on ties) while one is spare.
fn cover_positive_weights(n: &mut [u64], weights: &[f64]) {
    for i in 0..n.len() {
        if n[i] > 0 || weights[i] <= 0.0 {
            continue;
        }
        let donor = (0..n.len()).filter(|&j| n[j] > 1).max_by(|&a, &b| n[a].cmp(&n[b]).then(b.cmp(&a)));
        match donor {
            Some(j) => {
                n[j] -= 1;
                n[i] = 1;
            }
            None => return,
        }
    }
}

fn build(weights: &[f64], n_tot: u64, n_floor: u64, strategy: Strategy) -> Result<Allocation> {
    check_budget(weights.len(), n_tot, n_floor)?;
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("relevance vector"));
    }
    let t = weights.len();
    if weights.iter().all(|&w| w == 0.0) {
        let warning = "relevance vector is zero; falling back to a uniform allocation".to_string();
        log::warn!("{warning}");
        let mut alloc = passive_allocation(t, n_tot, n_floor)?;
        alloc.strategy = strategy;
        alloc.warning = Some(warning);
        return Ok(alloc);
    }
    let (continuous, c_prime) = water_fill(weights, n_tot as f64, n_floor as f64);
    let mut n = round_largest_remainder(&continuous, n_tot, n_floor);
    cover_positive_weights(&mut n, weights);
    Ok(Allocation { n, continuous, n_tot, n_floor, strategy, c_prime, warning: None })
}

/// Budgets `max(c' |nu_t|, N_floor)` with `sum = N_tot`.
pub fn allocate_fixed_nu(nu: &DVector<f64>, n_tot: u64, n_floor: u64) -> Result<Allocation> {
    let weights: Vec<f64> = nu.iter().map(|v| v.abs()).collect();
    build(&weights, n_tot, n_floor, Strategy::L1)
}

/// Budgets `max(c' |nu_t|^q, N_floor)` with `sum = N_tot`.
pub fn lpnq_allocation(nu: &DVector<f64>, q: f64, n_tot: u64, n_floor: u64) -> Result<Allocation> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent q = {q} must be positive")));
    }
    let weights: Vec<f64> = nu.iter().map(|v| v.abs().powf(q)).collect();
    let strategy = if q == 1.0 { Strategy::L1 } else { Strategy::LpNq { p: None, q } };
    build(&weights, n_tot, n_floor, strategy)
}

/// Equal budgets `N_tot / T`, remainder to the lowest task indices.
pub fn passive_allocation(t: usize, n_tot: u64, n_floor: u64) -> Result<Allocation> {
    check_budget(t, n_tot, n_floor)?;
    let continuous = vec![n_tot as f64 / t as f64; t];
    let base = n_tot / t as u64;
    let extra = (n_tot % t as u64) as usize;
    let n = (0..t).map(|i| base + u64::from(i < extra)).collect();
    Ok(Allocation { n, continuous, n_tot, n_floor, strategy: Strategy::Passive, c_prime: 0.0, warning: None })
}

/// `sum_t nu_t^2 / n_t`, with `0 / 0 = 0`.
pub fn nu_tilde_objective(nu: &DVector<f64>, n: &[f64]) -> Result<f64> {
    if nu.len() != n.len() {
        return Err(Error::Dimension("relevance vector and allocation differ in length".into()));
    }
    let mut total = 0.0;
    for (t, (&v, &nt)) in nu.iter().zip(n).enumerate() {
        if v == 0.0 {
            continue;
        }
        if nt <= 0.0 {
            return Err(Error::ZeroAllocation(t));
        }
        total += v * v / nt;
    }
    Ok(total)
}

/// Projected-gradient minimizer of `sum_t nu_t^2 / n_t` over
/// `{n >= floor, sum n = n_tot}`, with backtracking line search.
///
/// Independent of the breakpoint solve in [`allocate_fixed_nu`]; used to check it.
pub fn projected_gradient_allocation(nu: &DVector<f64>, n_tot: f64, floor: f64, max_iters: usize) -> Vec<f64> {
    let t = nu.len();
    let lower = floor.max(1e-9 * n_tot / t as f64);
    let sq: Vec<f64> = nu.iter().map(|v| v * v).collect();
    let f = |n: &[f64]| sq.iter().zip(n).map(|(s, x)| s / x).sum::<f64>();
    let mut n = project_capped_simplex(&vec![n_tot / t as f64; t], n_tot, lower);
    let mut value = f(&n);
    let mut step = (n_tot / t as f64).powi(3) / sq.iter().copied().fold(1e-300, f64::max);
    let mut stalls = 0;
    for _ in 0..max_iters {
        let grad: Vec<f64> = sq.iter().zip(&n).map(|(s, x)| -s / (x * x)).collect();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = n.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
            let cand = project_capped_simplex(&trial, n_tot, lower);
            let decrease: f64 = grad.iter().zip(cand.iter().zip(&n)).map(|(g, (c, x))| g * (c - x)).sum();
            let dist: f64 = cand.iter().zip(&n).map(|(c, x)| (c - x).powi(2)).sum();
            let fc = f(&cand);
            if fc <= value + decrease + dist / (2.0 * step) && fc <= value {
                accepted = fc < value;
                n = cand;
                value = fc;
                break;
            }
            step *= 0.5;
        }
        if accepted {
            step *= 2.0;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls > 3 {
                break;
            }
        }
    }
    n
}

/// Euclidean projection onto `{x >= lower, sum x = total}`.
fn project_capped_simplex(y: &[f64], total: f64, lower: f64) -> Vec<f64> {
    // x_i = max(lower, y_i - tau); sum is decreasing in tau, bisect.
    let sum_at = |tau: f64| y.iter().map(|v| (v - tau).max(lower)).sum::<f64>();
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min) - total;
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - lower;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut x: Vec<f64> = y.iter().map(|v| (v - tau).max(lower)).collect();
    // Put the bisection residue on the largest coordinate.
    let resid = total - x.iter().sum::<f64>();
    if let Some((imax, _)) = x.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        x[imax] += resid;
    }
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilevelResult {
    pub nu: DVector<f64>,
    pub allocation: Allocation,
    /// Objective at the continuous allocation.
    pub objective: f64,
    pub iterations: usize,
}

/// Largest `T` accepted by [`bilevel_oracle`].
pub const BILEVEL_MAX_TASKS: usize = 30;

/// Joint minimization of `sum_t nu_t^2 / n_t(nu)` over `{nu : W nu = w}`, where
/// `n(nu)` is the optimal continuous allocation for `nu`.
///
/// The objective `sum nu_t^2 / n_t` is jointly convex in `(nu, n)`, so
/// alternating exact minimization (weighted minimum-norm step for `nu`,
/// breakpoint allocation for `n`) reaches the global optimum. Several starts
/// are run and the best is kept.
pub fn bilevel_oracle(w_mat: &DMatrix<f64>, w: &DVector<f64>, n_tot: u64, n_floor: u64) -> Result<BilevelResult> {
    let (k, t) = w_mat.shape();
    if t > BILEVEL_MAX_TASKS {
        return Err(Error::InvalidArgument(format!("bilevel oracle is limited to T <= {BILEVEL_MAX_TASKS}")));
    }
    check_budget(t, n_tot, n_floor)?;
    let start = relevance::min_l2_solution(w_mat, w)?.nu;
    // Null-space projector for extra starting points.
    let pinv_rows = w_mat.clone().pseudo_inverse(1e-12).map_err(|e| Error::Degenerate(e.to_string()))?;
    let proj = DMatrix::identity(t, t) - &pinv_rows * w_mat;
    let mut rng = crate::rng::stream(0x5eed, 0, 3);
    let mut starts = vec![start.clone()];
    for _ in 0..4 {
        let dir = &proj * crate::rng::gaussian_vector(&mut rng, t);
        starts.push(&start + dir * (start.norm() / (k as f64).sqrt()));
    }

    let total = n_tot as f64;
    let floor = n_floor as f64;
    let mut best: Option<(f64, DVector<f64>, usize)> = None;
    for s in starts {
        let mut nu = s;
        let mut value = f64::INFINITY;
        let mut iters = 0;
        for it in 0..200_000 {
            iters = it + 1;
            let weights: Vec<f64> = nu.iter().map(|v| v.abs()).collect();
            let n = if weights.iter().all(|&v| v == 0.0) {
                vec![total / t as f64; t]
            } else {
                water_fill(&weights, total, floor).0
            };
            // nu = D W^T (W D W^T)^{-1} w with D = diag(n).
            let wd = DMatrix::from_fn(k, t, |i, j| w_mat[(i, j)] * n[j]);
            let gram = &wd * w_mat.transpose();
            let mu = crate::linalg::solve_spd(&gram, w);
            nu = wd.transpose() * mu;
            let new_value = nu_tilde_objective(&nu, &n).unwrap_or(f64::INFINITY);
            let done = value.is_finite() && (value - new_value).abs() <= 1e-15 * value;
            value = new_value;
            if done {
                break;
            }
        }
        // Objective at nu's own optimal allocation.
        let weights: Vec<f64> = nu.iter().map(|v| v.abs()).collect();
        let n = water_fill(&weights, total, floor).0;
        let obj = nu_tilde_objective(&nu, &n)?;
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, nu, iters));
        }
    }
    let (objective, nu, iterations) = best.expect("at least one start");
    let allocation = allocate_fixed_nu(&nu, n_tot, n_floor)?;
    Ok(BilevelResult { nu, allocation, objective, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Linear,
    Saltus,
    PiecewiseConcave,
}

/// Per-task sampling cost `f(n)`.
///
/// - `linear`: `c_var * n`.
/// - `saltus`: `0` for `n <= n_free`, else `c_fix + c_var * (n - n_free)`.
/// - `piecewise_concave`: `0` for `n <= n_free`, else `c_fix` plus a
///   piecewise-linear variable part whose slope `slopes[i]` applies from
///   `breakpoints[i]` (the first breakpoint is `n_free`); slopes are
///   non-negative and non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub kind: CostKind,
    #[serde(default)]
    pub c_fix: f64,
    #[serde(default)]
    pub c_var: f64,
    #[serde(default)]
    pub n_free: u64,
    #[serde(default)]
    pub breakpoints: Vec<u64>,
    #[serde(default)]
    pub slopes: Vec<f64>,
}

impl CostFunction {
    pub fn linear(c_var: f64) -> Self {
        Self { kind: CostKind::Linear, c_fix: 0.0, c_var, n_free: 0, breakpoints: vec![], slopes: vec![] }
    }

    pub fn saltus(c_fix: f64, c_var: f64, n_free: u64) -> Self {
        Self { kind: CostKind::Saltus, c_fix, c_var, n_free, breakpoints: vec![], slopes: vec![] }
    }

    pub fn piecewise_concave(c_fix: f64, n_free: u64, breakpoints: Vec<u64>, slopes: Vec<f64>) -> Result<Self> {
        let f = Self { kind: CostKind::PiecewiseConcave, c_fix, c_var: 0.0, n_free, breakpoints, slopes };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_fix >= 0.0) || !(self.c_var >= 0.0) {
            return Err(Error::InvalidArgument("cost coefficients must be non-negative".into()));
        }
        if self.kind == CostKind::PiecewiseConcave {
            let ok = !self.slopes.is_empty()
                && self.slopes.len() == self.breakpoints.len()
                && self.breakpoints[0] == self.n_free
                && self.breakpoints.windows(2).all(|p| p[0] < p[1])
                && self.slopes.iter().all(|s| *s >= 0.0)
                && self.slopes.windows(2).all(|p| p[1] <= p[0]);
            if !ok {
                return Err(Error::InvalidArgument(
                    "piecewise cost needs increasing breakpoints starting at n_free and non-increasing non-negative slopes"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, n: u64) -> f64 {
        match self.kind {
            CostKind::Linear => self.c_var * n as f64,
            CostKind::Saltus => {
                if n <= self.n_free {
                    0.0
                } else {
                    self.c_fix + self.c_var * (n - self.n_free) as f64
                }
            }
            CostKind::PiecewiseConcave => {
                if n <= self.n_free {
                    return 0.0;
                }
                let mut cost = self.c_fix;
                for (i, (&start, &slope)) in self.breakpoints.iter().zip(&self.slopes).enumerate() {
                    if n <= start {
                        break;
                    }
                    let end = self.breakpoints.get(i + 1).copied().unwrap_or(u64::MAX).min(n);
                    cost += slope * (end - start) as f64;
                }
                cost
            }
        }
    }
}

/// Total cost `sum_t f_t(n_t)` of per-task counts.
pub fn total_cost(counts: &[u64], cost_fns: &[CostFunction]) -> Result<f64> {
    if counts.len() != cost_fns.len() {
        return Err(Error::Dimension("need one cost function per task".into()));
    }
    Ok(counts.iter().zip(cost_fns).map(|(&n, f)| f.eval(n)).sum())
}

/// Cost of a two-phase plan: `sum_t f_t(n_{t,1} + n_{t,2})`.
pub fn eval_cost(phase2: &Allocation, phase1: Option<&Allocation>, cost_fns: &[CostFunction]) -> Result<f64> {
    let mut counts = phase2.n.clone();
    if let Some(p1) = phase1 {
        if p1.n.len() != counts.len() {
            return Err(Error::Dimension("phase allocations differ in length".into()));
        }
        for (c, extra) in counts.iter_mut().zip(&p1.n) {
            *c += extra;
        }
    }
    total_cost(&counts, cost_fns)
}

/// Cost-sensitive allocation: every task keeps its `N_floor` samples and only
/// tasks in the support of `nu` may receive more, proportionally to `|nu_t|`.
///
/// Driven by the minimum-L1 relevance vector (at most `k` nonzeros), at most
/// `k` tasks move past their free quota and pay a fixed cost.
pub fn cost_aware_allocate(nu: &DVector<f64>, n_tot: u64, n_floor: u64, cost_fns: &[CostFunction]) -> Result<Allocation> {
    if cost_fns.len() != nu.len() {
        return Err(Error::Dimension("need one cost function per task".into()));
    }
    for f in cost_fns {
        f.validate()?;
    }
    let tol = default_support_tol(nu);
    let sparse = nu.map(|v| if v.abs() > tol { v } else { 0.0 });
    let mut alloc = allocate_fixed_nu(&sparse, n_tot, n_floor)?;
    alloc.strategy = Strategy::CostAware;
    Ok(alloc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPlan {
    pub support: Vec<usize>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub nu: DVector<f64>,
    pub counts: Vec<u64>,
    pub cost: f64,
    pub nu_tilde: f64,
}

/// Largest `T` accepted by [`min_cost_support_oracle`].
pub const SUPPORT_ORACLE_MAX_TASKS: usize = 15;

/// Exhaustive search over supports `S` with `|S| <= k` for the cheapest plan
/// reaching `sum_t nu_t^2 / n_t <= target`, where `nu` is the exact solution
/// of `W nu = w` on `S` and tasks outside `S` keep `N_floor` samples.
pub fn min_cost_support_oracle(
    w_mat: &DMatrix<f64>,
    w: &DVector<f64>,
    n_floor: u64,
    cost_fns: &[CostFunction],
    target: f64,
) -> Result<SupportPlan> {
    let (k, t) = w_mat.shape();
    if t > SUPPORT_ORACLE_MAX_TASKS {
        return Err(Error::InvalidArgument(format!("support oracle is limited to T <= {SUPPORT_ORACLE_MAX_TASKS}")));
    }
    if cost_fns.len() != t || !(target > 0.0) {
        return Err(Error::InvalidArgument("need T cost functions and a positive target".into()));
    }
    let mut best: Option<SupportPlan> = None;
    for mask in 1u32..(1 << t) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let support: Vec<usize> = (0..t).filter(|&i| mask & (1 << i) != 0).collect();
        let sub = w_mat.select_columns(support.iter());
        if crate::linalg::sigma_min(&sub) <= 1e-10 * crate::linalg::sigma_max(&sub).max(1e-300) {
            continue;
        }
        let coef = crate::linalg::min_norm_lstsq(&sub, w, 1e-12);
        if (&sub * &coef - w).norm() > 1e-9 * (1.0 + w.norm()) {
            continue;
        }
        let mut nu = DVector::zeros(t);
        for (j, &s) in support.iter().enumerate() {
            nu[s] = coef[j];
        }
        let counts = counts_for_target(&nu, n_floor, target);
        let cost = total_cost(&counts, cost_fns)?;
        let counts_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let nu_tilde = nu_tilde_objective(&nu, &counts_f)?;
        let better = best.as_ref().is_none_or(|b| cost < b.cost || (cost == b.cost && nu_tilde < b.nu_tilde));
        if better {
            best = Some(SupportPlan { support, nu, counts, cost, nu_tilde });
        }
    }
    best.ok_or(Error::Infeasible)
}

/// Smallest L1-shaped integer counts `max(ceil(c |nu_t|), floor)` with
/// `sum nu_t^2 / n_t <= target`.
pub fn counts_for_target(nu: &DVector<f64>, n_floor: u64, target: f64) -> Vec<u64> {
    let floor = n_floor.max(1) as f64;
    let counts_at = |c: f64| -> Vec<u64> {
        nu.iter()
            .map(|v| if *v == 0.0 { n_floor } else { f64::max((c * v.abs()).ceil(), floor) as u64 })
            .collect()
    };
    let value = |counts: &[u64]| -> f64 {
        nu.iter().zip(counts).map(|(v, &n)| if *v == 0.0 { 0.0 } else { v * v / n as f64 }).sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while value(&counts_at(hi)) > target {
        hi *= 2.0;
    }
    if value(&counts_at(lo)) <= target {
        return counts_at(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(&counts_at(mid)) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    counts_at(hi)
}
