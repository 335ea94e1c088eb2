//! End-to-end strategy runners.
//!
//! Every runner draws source data through a [`TaskOracle`], fits the shared
//! representation, fits the target head on a fixed target sample and reports
//! the excess risk. Budgets are in source samples: `n_tot` is the total number
//! drawn over the whole run. The two-phase runners spend `T * n_floor` of it
//! exploring and allocate the remainder in phase 2; earlier data is always
//! kept and refit together with the new draws.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::allocation::{self, Allocation};
use crate::instance::{sample_task_draw, GroundTruth, TaskDataset};
use crate::relevance::{self, default_support_tol, support_size, LassoOptions, RelevanceVector};
use crate::serde_matrix;
use crate::trainer::{self, FitOptions, Init, TaskWeighting};
use crate::{Error, Result};

/// Source of task data for the runners.
pub trait TaskOracle: Sync {
    fn dim(&self) -> usize;
    fn num_tasks(&self) -> usize;
    /// `n` fresh samples of task `task_index` (1-based, `T + 1` is the target)
    /// from batch `draw_index`. Same arguments, same data.
    fn draw(&self, task_index: usize, n: usize, draw_index: u32) -> Result<TaskDataset>;
    /// Excess risk and subspace distance of a fitted target predictor.
    fn evaluate(&self, b_hat: &DMatrix<f64>, w_target_hat: &DVector<f64>) -> Result<(f64, f64)>;
}

/// [`TaskOracle`] backed by a known instance.
#[derive(Debug, Clone, Copy)]
pub struct InstanceOracle<'a> {
    pub gt: &'a GroundTruth,
    pub seed: u64,
}

impl<'a> InstanceOracle<'a> {
    pub fn new(gt: &'a GroundTruth, seed: u64) -> Self {
        Self { gt, seed }
    }
}

impl TaskOracle for InstanceOracle<'_> {
    fn dim(&self) -> usize {
        self.gt.d
    }

    fn num_tasks(&self) -> usize {
        self.gt.t
    }

    fn draw(&self, task_index: usize, n: usize, draw_index: u32) -> Result<TaskDataset> {
        sample_task_draw(self.gt, task_index, n, self.seed, draw_index)
    }

    fn evaluate(&self, b_hat: &DMatrix<f64>, w_target_hat: &DVector<f64>) -> Result<(f64, f64)> {
        let er = trainer::excess_risk_of(b_hat, w_target_hat, self.gt)?;
        let dist = trainer::subspace_distance(b_hat, &self.gt.b_star)?;
        Ok((er, dist))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "value")]
pub enum LambdaPolicy {
    /// A tiny fixed penalty.
    Lazy,
    /// Theory-driven penalty computed from the estimated heads.
    #[serde(rename = "paper_rule")]
    TheoryRule,
    Explicit(f64),
}

impl LambdaPolicy {
    pub fn resolve(&self, w_hat: &DMatrix<f64>, w_target_hat: &DVector<f64>) -> Result<f64> {
        match *self {
            LambdaPolicy::Lazy => Ok(relevance::LAZY_LAMBDA),
            LambdaPolicy::Explicit(v) if v >= 0.0 && v.is_finite() => Ok(v),
            LambdaPolicy::Explicit(v) => Err(Error::Config(format!("lambda = {v} must be a finite non-negative number"))),
            LambdaPolicy::TheoryRule => {
                let sv = crate::linalg::singular_values(w_hat);
                let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
                let smax = sv.iter().copied().fold(0.0, f64::max);
                let r = w_target_hat.norm().max(f64::MIN_POSITIVE);
                Ok(relevance::lambda_rule(w_hat.nrows(), r, smax, smin.max(f64::MIN_POSITIVE))?.lambda)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunParams {
    /// Total source samples over the run.
    pub n_tot: u64,
    /// Per-task minimum; also the exploration sample size per task.
    pub n_floor: u64,
    pub n_target: usize,
    pub lambda: LambdaPolicy,
    /// Number of trailing fit snapshots whose relevance estimates are averaged.
    pub average_last: usize,
    /// Start each refit from the previous representation.
    pub warm_start: bool,
    pub fit_tol: f64,
    pub fit_max_iters: usize,
    pub weighting: TaskWeighting,
    /// Multi-stage runner: number of stages.
    pub stages: usize,
    /// Multi-stage runner: budget growth factor per stage.
    pub growth: f64,
    /// Multi-stage runner: first-stage budget; derived from `n_tot` when absent.
    pub beta_1: Option<u64>,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            n_tot: 20_000,
            n_floor: 100,
            n_target: 500,
            lambda: LambdaPolicy::Lazy,
            average_last: 1,
            warm_start: true,
            fit_tol: 1e-10,
            fit_max_iters: 500,
            weighting: TaskWeighting::PerTask,
            stages: 4,
            growth: 2.0,
            beta_1: None,
        }
    }
}

impl RunParams {
    fn fit_options(&self, init: Init) -> FitOptions {
        FitOptions {
            tol: self.fit_tol,
            max_iters: self.fit_max_iters,
            init,
            snapshots: self.average_last.max(1),
            seed: 0,
            weighting: self.weighting,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    /// Samples drawn in this stage.
    pub allocation: Allocation,
    /// Per-task samples held after this stage.
    pub cumulative: Vec<u64>,
    pub train_loss: f64,
    pub fit_iterations: usize,
    pub excess_risk: f64,
    pub subspace_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: String,
    pub seed: u64,
    pub n_tot: u64,
    pub n_floor: u64,
    pub stages: Vec<StageSummary>,
    #[serde(with = "serde_matrix::vector_list")]
    pub nu_hat_history: Vec<DVector<f64>>,
    pub excess_risk: f64,
    pub subspace_distance: f64,
    /// L1 norm and support size of the relevance vector behind the final
    /// allocation (all-ones for passive).
    pub nu_l1: f64,
    pub support: usize,
    pub total_samples: u64,
    pub target_samples: usize,
    pub wall_ms: f64,
}

impl RunResult {
    pub fn final_allocation(&self) -> &Allocation {
        &self.stages.last().expect("runs have at least one stage").allocation
    }

    pub fn final_counts(&self) -> &[u64] {
        &self.stages.last().expect("runs have at least one stage").cumulative
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Accumulates source draws and counts every sample taken from the oracle.
struct SourcePool<'o, O: TaskOracle + ?Sized> {
    oracle: &'o O,
    data: Vec<TaskDataset>,
    counts: Vec<u64>,
    draws: u32,
}

impl<'o, O: TaskOracle + ?Sized> SourcePool<'o, O> {
    fn new(oracle: &'o O) -> Self {
        let t = oracle.num_tasks();
        let d = oracle.dim();
        Self { oracle, data: (1..=t).map(|i| TaskDataset::empty(i, d, 0)).collect(), counts: vec![0; t], draws: 0 }
    }

    fn draw(&mut self, increments: &[u64]) -> Result<()> {
        self.draws += 1;
        for (t, &n) in increments.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let batch = self.oracle.draw(t + 1, n as usize, self.draws)?;
            self.data[t].extend(&batch)?;
            self.counts[t] += n;
        }
        Ok(())
    }

    fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Draw index reserved for the target sample.
const TARGET_DRAW: u32 = 0;

struct Context<'o, O: TaskOracle + ?Sized> {
    oracle: &'o O,
    params: &'o RunParams,
    k: usize,
    pool: SourcePool<'o, O>,
    target: TaskDataset,
    stages: Vec<StageSummary>,
    nu_history: Vec<DVector<f64>>,
    model: Option<trainer::FittedModel>,
    w_target_hat: Option<DVector<f64>>,
}

impl<'o, O: TaskOracle + ?Sized> Context<'o, O> {
    fn new(oracle: &'o O, k: usize, params: &'o RunParams) -> Result<Self> {
        let t = oracle.num_tasks();
        if k == 0 || k > oracle.dim() {
            return Err(Error::Dimension(format!("k = {k} must lie in 1..=d")));
        }
        if params.n_target == 0 {
            return Err(Error::Config("n_target must be positive".into()));
        }
        let target = oracle.draw(t + 1, params.n_target, TARGET_DRAW)?;
        Ok(Self {
            oracle,
            params,
            k,
            pool: SourcePool::new(oracle),
            target,
            stages: Vec::new(),
            nu_history: Vec::new(),
            model: None,
            w_target_hat: None,
        })
    }

    /// Draws `allocation` on top of the pool, refits and evaluates.
    fn stage(&mut self, allocation: Allocation) -> Result<()> {
        self.pool.draw(&allocation.n)?;
        let init = match (&self.model, self.params.warm_start) {
            (Some(m), true) => Init::Warm(m.b_hat.clone()),
            _ => Init::Spectral,
        };
        let model = trainer::fit_source(&self.pool.data, self.k, &self.params.fit_options(init))?;
        let w_target_hat = trainer::fit_target_head(&model, &self.target)?;
        let (er, dist) = self.oracle.evaluate(&model.b_hat, &w_target_hat)?;
        self.stages.push(StageSummary {
            stage: self.stages.len() + 1,
            allocation,
            cumulative: self.pool.counts.clone(),
            train_loss: model.final_loss(),
            fit_iterations: model.iterations,
            excess_risk: er,
            subspace_distance: dist,
        });
        self.model = Some(model);
        self.w_target_hat = Some(w_target_hat);
        Ok(())
    }

    /// Relevance estimate from the current fit, averaged over the trailing
    /// snapshots. `l2` selects the minimum-norm solution instead of the Lasso.
    fn estimate_nu(&mut self, l2: bool) -> Result<DVector<f64>> {
        let model = self.model.as_ref().ok_or_else(|| Error::InvalidArgument("no fitted model".into()))?;
        let count = self.params.average_last.max(1).min(model.snapshots.len()).max(1);
        let start = model.snapshots.len().saturating_sub(count);
        let mut sum = DVector::zeros(self.pool.counts.len());
        let mut used = 0;
        let fallback = [trainer::Snapshot { b: model.b_hat.clone(), w: model.w_hat.clone() }];
        let snaps = if model.snapshots.is_empty() { &fallback[..] } else { &model.snapshots[start..] };
        for snap in snaps {
            let w_target = trainer::target_head_for(&snap.b, &self.target)?;
            let rv: RelevanceVector = if l2 {
                relevance::min_l2_solution(&snap.w, &w_target)?
            } else {
                let lambda = self.params.lambda.resolve(&snap.w, &w_target)?;
                relevance::lasso(&snap.w, &w_target, lambda, &LassoOptions::default())?
            };
            sum += rv.nu;
            used += 1;
        }
        let nu = sum / used as f64;
        self.nu_history.push(nu.clone());
        Ok(nu)
    }

    fn finish(self, strategy: &str, seed: u64, drive: &DVector<f64>, started: Instant) -> RunResult {
        let last = self.stages.last().expect("at least one stage");
        let tol = default_support_tol(drive);
        RunResult {
            strategy: strategy.to_string(),
            seed,
            n_tot: self.params.n_tot,
            n_floor: self.params.n_floor,
            excess_risk: last.excess_risk,
            subspace_distance: last.subspace_distance,
            nu_l1: drive.lp_norm(1),
            support: support_size(drive, tol),
            total_samples: self.pool.total(),
            target_samples: self.target.n(),
            stages: self.stages,
            nu_hat_history: self.nu_history,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

fn exploration_budget(t: usize, params: &RunParams) -> Result<(u64, u64)> {
    let explore = params.n_floor.saturating_mul(t as u64);
    if explore == 0 {
        return Err(Error::Config("two-phase runs need n_floor >= 1".into()));
    }
    if params.n_tot < 2 * explore {
        return Err(Error::InfeasibleBudget { n_tot: params.n_tot, required: 2 * explore });
    }
    Ok((explore, params.n_tot - explore))
}

fn two_phase<O: TaskOracle + ?Sized>(oracle: &O, k: usize, params: &RunParams, seed: u64, l2: bool) -> Result<RunResult> {
    let started = Instant::now();
    let t = oracle.num_tasks();
    let (explore, phase2) = exploration_budget(t, params)?;
    let mut ctx = Context::new(oracle, k, params)?;
    ctx.stage(allocation::passive_allocation(t, explore, params.n_floor)?)?;
    let nu_hat = ctx.estimate_nu(l2)?;
    let alloc = if l2 {
        let mut a = allocation::lpnq_allocation(&nu_hat, 2.0, phase2, params.n_floor)?;
        a.strategy = allocation::Strategy::L2;
        a
    } else {
        allocation::allocate_fixed_nu(&nu_hat, phase2, params.n_floor)?
    };
    ctx.stage(alloc)?;
    let name = if l2 { "l2" } else { "l1" };
    Ok(ctx.finish(name, seed, &nu_hat, started))
}

/// Two-phase active sampling with Lasso relevance estimates: explore with
/// `n_floor` samples per task, estimate `nu`, then spend the rest of the
/// budget as `max(c' |nu_t|, n_floor)`.
pub fn run_l1_amtrl<O: TaskOracle + ?Sized>(oracle: &O, k: usize, params: &RunParams, seed: u64) -> Result<RunResult> {
    two_phase(oracle, k, params, seed, false)
}

/// Two-phase baseline with the minimum-norm relevance estimate and budgets
/// proportional to `nu_t^2`.
pub fn run_l2_amtrl<O: TaskOracle + ?Sized>(oracle: &O, k: usize, params: &RunParams, seed: u64) -> Result<RunResult> {
    two_phase(oracle, k, params, seed, true)
}

/// Uniform allocation of the whole budget.
pub fn run_passive<O: TaskOracle + ?Sized>(oracle: &O, k: usize, params: &RunParams, seed: u64) -> Result<RunResult> {
    let started = Instant::now();
    let t = oracle.num_tasks();
    let mut ctx = Context::new(oracle, k, params)?;
    ctx.stage(allocation::passive_allocation(t, params.n_tot, params.n_floor)?)?;
    Ok(ctx.finish("passive", seed, &DVector::from_element(t, 1.0), started))
}

/// Single allocation from a given relevance vector with exponent `q`.
pub fn run_known_nu<O: TaskOracle + ?Sized>(
    oracle: &O,
    k: usize,
    params: &RunParams,
    seed: u64,
    nu_ref: &DVector<f64>,
    q: f64,
) -> Result<RunResult> {
    let started = Instant::now();
    if nu_ref.len() != oracle.num_tasks() {
        return Err(Error::Dimension("reference relevance vector has the wrong length".into()));
    }
    let mut alloc = allocation::lpnq_allocation(nu_ref, q, params.n_tot, params.n_floor)?;
    alloc.strategy = allocation::Strategy::KnownNu { q };
    let mut ctx = Context::new(oracle, k, params)?;
    ctx.stage(alloc)?;
    let name = if q == 1.0 { "known_l1".to_string() } else if q == 2.0 { "known_l2".to_string() } else { format!("known_q{q}") };
    Ok(ctx.finish(&name, seed, nu_ref, started))
}

/// First-stage budget for a multi-stage run spending about `n_tot` in total.
pub fn default_beta_1(params: &RunParams) -> u64 {
    let stages = params.stages.max(1) as i32;
    let growth_sum: f64 = (0..stages).map(|i| params.growth.powi(i)).sum();
    (params.n_tot as f64 / growth_sum).floor() as u64
}

/// Multi-stage sampling: starting from an all-ones relevance vector, stage `i`
/// draws `max(c' |nu_t|, n_floor)` samples with `sum = beta_i`, refits on all
/// data so far, re-estimates `nu` and sets `beta_{i+1} = growth * beta_i`.
pub fn run_multistage<O: TaskOracle + ?Sized>(oracle: &O, k: usize, params: &RunParams, seed: u64) -> Result<RunResult> {
    let started = Instant::now();
    if params.stages == 0 {
        return Err(Error::Config("multi-stage runs need at least one stage".into()));
    }
    if !(params.growth > 1.0) {
        return Err(Error::Config(format!("growth = {} must exceed 1", params.growth)));
    }
    let t = oracle.num_tasks();
    let floor_total = params.n_floor.saturating_mul(t as u64);
    let mut beta = params.beta_1.unwrap_or_else(|| default_beta_1(params)) as f64;
    let mut nu_hat = DVector::from_element(t, 1.0);
    let mut ctx = Context::new(oracle, k, params)?;
    for stage in 0..params.stages {
        let budget = (beta.round() as u64).max(floor_total);
        let mut alloc = allocation::allocate_fixed_nu(&nu_hat, budget, params.n_floor)?;
        if stage == 0 {
            alloc.strategy = allocation::Strategy::Passive;
        }
        ctx.stage(alloc)?;
        if stage + 1 < params.stages {
            nu_hat = ctx.estimate_nu(false)?;
        }
        beta *= params.growth;
    }
    Ok(ctx.finish("multistage", seed, &nu_hat, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{make_almost_sparse_instance, make_random_instance, GroundTruth, InstanceKind, InstanceMeta};

    fn params(n_tot: u64, n_floor: u64) -> RunParams {
        RunParams { n_tot, n_floor, n_target: 200, ..Default::default() }
    }

    #[test]
    fn noiseless_runs_are_exact() {
        let gt = make_random_instance(8, 2, 5, 0.0, 0.5, 3).unwrap();
        let oracle = InstanceOracle::new(&gt, 11);
        let p = params(400, 20);
        for run in [
            run_l1_amtrl(&oracle, 2, &p, 11).unwrap(),
            run_l2_amtrl(&oracle, 2, &p, 11).unwrap(),
            run_passive(&oracle, 2, &p, 11).unwrap(),
            run_multistage(&oracle, 2, &p, 11).unwrap(),
        ] {
            assert!(run.excess_risk <= 1e-10, "{} ER {}", run.strategy, run.excess_risk);
            let slack = if run.strategy == "multistage" { p.stages as u64 * 5 * p.n_floor } else { 0 };
            assert!(run.total_samples <= p.n_tot + slack, "{}", run.strategy);
        }
    }

    fn one_sparse_instance() -> GroundTruth {
        let base = make_random_instance(10, 3, 6, 0.1, 0.5, 5).unwrap();
        let w_target = base.w_star.column(0).into_owned();
        let mut nu = DVector::zeros(6);
        nu[0] = 1.0;
        let meta = InstanceMeta { kind: InstanceKind::Custom, reference_nu: Some(nu), ..base.meta.clone() };
        GroundTruth::new(base.b_star.clone(), base.w_star.clone(), w_target, 0.1, meta).unwrap()
    }

    #[test]
    fn one_sparse_target_concentrates_phase_two() {
        let gt = one_sparse_instance();
        let oracle = InstanceOracle::new(&gt, 2);
        let p = params(2400, 50);
        let run = run_known_nu(&oracle, 3, &p, 2, gt.meta.reference_nu.as_ref().unwrap(), 1.0).unwrap();
        let a = run.final_allocation();
        assert!(a.n[0] >= p.n_tot - 5 * p.n_floor);
        let run = run_l1_amtrl(&oracle, 3, &p, 2).unwrap();
        let a = run.final_allocation();
        let phase2 = p.n_tot - 6 * p.n_floor;
        assert!(a.n[0] as f64 >= 0.5 * phase2 as f64, "{:?}", a.n);
    }

    #[test]
    fn runs_are_deterministic() {
        let (gt, _) = make_almost_sparse_instance(10, 3, 8, 0.3, 4).unwrap();
        let oracle = InstanceOracle::new(&gt, 9);
        let p = params(1600, 40);
        let mut a = run_l1_amtrl(&oracle, 3, &p, 9).unwrap();
        let mut b = run_l1_amtrl(&oracle, 3, &p, 9).unwrap();
        a.wall_ms = 0.0;
        b.wall_ms = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn multistage_accounting() {
        let (gt, _) = make_almost_sparse_instance(10, 3, 8, 0.3, 4).unwrap();
        let oracle = InstanceOracle::new(&gt, 1);
        let p = RunParams { stages: 4, growth: 2.0, beta_1: Some(400), ..params(0, 10) };
        let run = run_multistage(&oracle, 3, &p, 1).unwrap();
        assert_eq!(run.stages.len(), 4);
        assert_eq!(run.total_samples, 400 * 15);
        let drawn: u64 = run.stages.iter().map(|s| s.allocation.n.iter().sum::<u64>()).sum();
        assert_eq!(drawn, run.total_samples);
        assert_eq!(run.stages[0].allocation.n, vec![50; 8]);
        assert_eq!(run.nu_hat_history.len(), 3);
    }

    #[test]
    fn single_stage_is_passive() {
        let (gt, _) = make_almost_sparse_instance(10, 3, 8, 0.3, 4).unwrap();
        let oracle = InstanceOracle::new(&gt, 1);
        let p = RunParams { stages: 1, ..params(800, 10) };
        let multi = run_multistage(&oracle, 3, &p, 1).unwrap();
        assert_eq!(multi.final_counts(), &[100; 8]);
    }

    #[test]
    fn infeasible_two_phase_budget() {
        let (gt, _) = make_almost_sparse_instance(10, 3, 8, 0.3, 4).unwrap();
        let oracle = InstanceOracle::new(&gt, 1);
        assert!(matches!(run_l1_amtrl(&oracle, 3, &params(100, 10), 1), Err(Error::InfeasibleBudget { .. })));
    }

    #[test]
    fn averaged_estimates_use_snapshots() {
        let (gt, _) = make_almost_sparse_instance(10, 3, 8, 0.3, 4).unwrap();
        let oracle = InstanceOracle::new(&gt, 1);
        let p = RunParams { average_last: 5, ..params(1600, 40) };
        let run = run_l1_amtrl(&oracle, 3, &p, 1).unwrap();
        assert_eq!(run.nu_hat_history.len(), 1);
        assert!(run.nu_hat_history[0].iter().all(|v| v.is_finite()));
    }
}
