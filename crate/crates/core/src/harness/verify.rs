//! Oracle-backed self checks bundled behind `amtrl verify`.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{self, allocate_fixed_nu, nu_tilde_objective, projected_gradient_allocation};
use crate::instance::{make_random_instance, sample_task};
use crate::relevance::{self, LassoOptions};
use crate::rng::{gaussian_matrix, gaussian_vector, stream};
use crate::trainer::{self, FitOptions};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    Fast,
    Full,
}

/// Named tolerances; each can be overridden from the verify config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative slack of the breakpoint allocation against the projected-gradient oracle.
    pub allocation_rel: f64,
    /// Relative slack for random integer allocations.
    pub allocation_integer_rel: f64,
    pub floor_free_rel: f64,
    pub norm_bound_rel: f64,
    pub lasso_lp_l1: f64,
    pub lasso_kkt: f64,
    pub bilevel_nu_l1: f64,
    pub bilevel_objective_rel: f64,
    pub trainer_monotone_abs: f64,
    pub trainer_loss_rel: f64,
    pub trainer_subspace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            allocation_rel: 1e-9,
            allocation_integer_rel: 1e-12,
            floor_free_rel: 1e-12,
            norm_bound_rel: 1e-10,
            lasso_lp_l1: 1e-4,
            lasso_kkt: 1e-8,
            bilevel_nu_l1: 1e-4,
            bilevel_objective_rel: 1e-6,
            trainer_monotone_abs: 1e-12,
            trainer_loss_rel: 1e-16,
            trainer_subspace: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub level: Level,
    pub seed: u64,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Worst observed value of the checked statistic.
    pub worst: f64,
    pub tolerance: f64,
    pub elapsed_ms: f64,
    /// Reported but excluded from the overall verdict.
    #[serde(default)]
    pub informational: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: Level,
    pub seed: u64,
    pub all_passed: bool,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn failing(&self) -> Vec<&str> {
        self.properties.iter().filter(|p| !p.passed && !p.informational).map(|p| p.name.as_str()).collect()
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    failures: usize,
    worst: f64,
    started: Instant,
    informational: bool,
    detail: String,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            cases: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
            started: Instant::now(),
            informational: false,
            detail: String::new(),
        }
    }

    /// Records one case whose statistic must not exceed the tolerance.
    fn check(&mut self, value: f64) {
        self.cases += 1;
        self.worst = self.worst.max(value);
        if !(value <= self.tolerance) {
            self.failures += 1;
        }
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            name: self.name.to_string(),
            passed: self.failures == 0 && self.cases > 0,
            cases: self.cases,
            failures: self.failures,
            worst: if self.worst.is_finite() { self.worst } else { 0.0 },
            tolerance: self.tolerance,
            elapsed_ms: self.started.elapsed().as_secs_f64() * 1e3,
            informational: self.informational,
            detail: self.detail,
        }
    }
}

fn relative_excess(value: f64, reference: f64) -> f64 {
    (value - reference) / reference.abs().max(f64::MIN_POSITIVE)
}

/// Random relevance vector with occasional exact zeros and a wide dynamic range.
pub fn random_relevance(rng: &mut ChaCha8Rng, t: usize) -> DVector<f64> {
    let mut nu = DVector::from_fn(t, |_, _| {
        let g: f64 = rng.sample(rand_distr::StandardNormal);
        if rng.random_bool(0.15) {
            0.0
        } else {
            g * 10f64.powf(rng.random_range(-2.0..1.0))
        }
    });
    if nu.iter().all(|v| *v == 0.0) {
        nu[0] = 1.0;
    }
    nu
}

/// Random integer allocation with `n_t >= floor` and `sum = n_tot`.
pub fn random_integer_allocation(rng: &mut ChaCha8Rng, t: usize, n_tot: u64, floor: u64) -> Vec<f64> {
    let spare = n_tot - floor * t as u64;
    let weights: Vec<f64> = (0..t).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = weights.iter().sum();
    let cont: Vec<f64> = weights.iter().map(|w| floor as f64 + spare as f64 * w / total).collect();
    allocation::round_largest_remainder(&cont, n_tot, floor).into_iter().map(|v| v as f64).collect()
}

fn allocation_checks(level: Level, seed: u64, tol: &Tolerances) -> Result<Vec<PropertyResult>> {
    let (triples, draws) = if level == Level::Full { (100, 1000) } else { (20, 200) };
    let mut rng = stream(seed, 0, 101);
    let mut cont = Tally::new("allocation_vs_projected_gradient", tol.allocation_rel);
    let mut integer = Tally::new("allocation_vs_random_integer", tol.allocation_integer_rel);
    for _ in 0..triples {
        let t = rng.random_range(2..=20);
        let nu = random_relevance(&mut rng, t);
        let floor = rng.random_range(0..=20u64);
        let n_tot = floor * t as u64 + rng.random_range(t as u64..=4000);
        let alloc = allocate_fixed_nu(&nu, n_tot, floor)?;
        let exact = nu_tilde_objective(&nu, &alloc.continuous)?;
        let pg = projected_gradient_allocation(&nu, n_tot as f64, floor as f64, 20_000);
        cont.check(relative_excess(exact, nu_tilde_objective(&nu, &pg)?));
        let ours = nu_tilde_objective(&nu, &alloc.counts_f64())?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..draws {
            let other = random_integer_allocation(&mut rng, t, n_tot, floor);
            if let Ok(v) = nu_tilde_objective(&nu, &other) {
                worst = worst.max(relative_excess(ours, v));
            }
        }
        integer.check(worst);
    }
    Ok(vec![cont.finish(), integer.finish()])
}

fn floor_free_check(seed: u64, tol: &Tolerances) -> Result<PropertyResult> {
    let mut rng = stream(seed, 0, 102);
    let mut tally = Tally::new("floor_free_equality", tol.floor_free_rel);
    for _ in 0..100 {
        let t = rng.random_range(1..=30);
        let nu = random_relevance(&mut rng, t);
        let n_tot = rng.random_range(1..=100_000u64);
        let alloc = allocate_fixed_nu(&nu, n_tot, 0)?;
        let value = nu_tilde_objective(&nu, &alloc.continuous)?;
        let closed = nu.lp_norm(1).powi(2) / n_tot as f64;
        tally.check(relative_excess(value, closed).abs());
    }
    Ok(tally.finish())
}

/// Generic full-row-rank system with `k <= 6`, `k < T <= 30`.
pub fn random_system(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>) {
    let k = rng.random_range(1..=6);
    let t = rng.random_range(k + 1..=30);
    (gaussian_matrix(rng, k, t), gaussian_vector(rng, k))
}

fn sparsity_and_bounds(level: Level, seed: u64, tol: &Tolerances) -> Result<Vec<PropertyResult>> {
    let count = if level == Level::Full { 100 } else { 20 };
    let mut rng = stream(seed, 0, 103);
    let mut sparsity = Tally::new("l1_solution_sparsity", 0.0);
    let mut l2 = Tally::new("norm_bound_min_l2", tol.norm_bound_rel);
    let mut l1_support = Tally::new("norm_bound_min_l1_on_support", tol.norm_bound_rel);
    let mut l1_sqrt_k = Tally::new("norm_bound_min_l1_sqrt_k", tol.norm_bound_rel);
    l1_sqrt_k.informational = true;
    l1_sqrt_k.detail = "sqrt(k)|w|/sigma_min(W) is not a valid bound for the min-L1 solution in general".into();
    for _ in 0..count {
        let (w_mat, w) = random_system(&mut rng);
        let k = w_mat.nrows();
        let nu1 = relevance::l1_oracle_lp(&w_mat, &w)?;
        sparsity.check(nu1.support_size.saturating_sub(k) as f64);
        let rep = relevance::norm_bound_check(&w_mat, &w)?;
        l2.check(relative_excess(rep.nu2_l2, rep.l2_bound));
        l1_support.check(relative_excess(rep.nu1_l1, rep.l1_support_bound));
        l1_sqrt_k.check(relative_excess(rep.nu1_l1, rep.l1_bound));
    }
    sparsity.detail = "support of the LP solution minus k".into();
    Ok(vec![sparsity.finish(), l2.finish(), l1_support.finish(), l1_sqrt_k.finish()])
}

fn lasso_checks(level: Level, seed: u64, tol: &Tolerances) -> Result<Vec<PropertyResult>> {
    let count = if level == Level::Full { 50 } else { 10 };
    let mut rng = stream(seed, 0, 104);
    let mut gap = Tally::new("lasso_basis_pursuit_limit", tol.lasso_lp_l1);
    let mut kkt = Tally::new("lasso_kkt", tol.lasso_kkt);
    for _ in 0..count {
        let (w_mat, w) = random_system(&mut rng);
        let lp = relevance::l1_oracle_lp(&w_mat, &w)?;
        let fit = relevance::lasso(&w_mat, &w, 1e-8, &LassoOptions::default())?;
        gap.check((&fit.nu - &lp.nu).lp_norm(1) / (1.0 + lp.l1_norm()));
        kkt.check(fit.kkt_residual);
    }
    Ok(vec![gap.finish(), kkt.finish()])
}

fn bilevel_check(level: Level, seed: u64, tol: &Tolerances) -> Result<Vec<PropertyResult>> {
    let count = if level == Level::Full { 20 } else { 3 };
    let mut rng = stream(seed, 0, 105);
    let mut nu_gap = Tally::new("bilevel_matches_l1", tol.bilevel_nu_l1);
    let mut obj_gap = Tally::new("bilevel_objective", tol.bilevel_objective_rel);
    let (n_tot, floor) = (1_000_000, 1);
    for _ in 0..count {
        let k = rng.random_range(1..=4);
        let t = rng.random_range(k + 1..=12);
        let w_mat = gaussian_matrix(&mut rng, k, t);
        let w = gaussian_vector(&mut rng, k);
        let res = allocation::bilevel_oracle(&w_mat, &w, n_tot, floor)?;
        let nu1 = relevance::l1_oracle_lp(&w_mat, &w)?.nu;
        let at_l1 = nu_tilde_objective(&nu1, &allocate_fixed_nu(&nu1, n_tot, floor)?.continuous)?;
        nu_gap.check((&res.nu - &nu1).lp_norm(1));
        obj_gap.check(relative_excess(res.objective, at_l1).abs());
    }
    Ok(vec![nu_gap.finish(), obj_gap.finish()])
}

fn trainer_checks(level: Level, seed: u64, tol: &Tolerances) -> Result<Vec<PropertyResult>> {
    let count = if level == Level::Full { 20 } else { 5 };
    let mut mono = Tally::new("trainer_loss_monotone", tol.trainer_monotone_abs);
    for i in 0..count {
        let s = seed.wrapping_add(i);
        let gt = make_random_instance(10, 3, 6, 0.5, 0.5, s)?;
        let data: Vec<_> = (1..=6).map(|t| sample_task(&gt, t, 25 + 5 * t, s)).collect::<Result<_>>()?;
        let model = trainer::fit_source(&data, 3, &FitOptions::default())?;
        let rise = model.train_loss_history.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
        mono.check(if rise.is_finite() { rise } else { 0.0 });
    }
    let mut loss = Tally::new("trainer_noiseless_loss", tol.trainer_loss_rel);
    let mut dist = Tally::new("trainer_noiseless_subspace", tol.trainer_subspace);
    let noiseless = if level == Level::Full { 3 } else { 1 };
    for i in 0..noiseless {
        let s = seed.wrapping_add(1000 + i);
        let gt = make_random_instance(8, 3, 6, 0.0, 0.5, s)?;
        let data: Vec<_> = (1..=6).map(|t| sample_task(&gt, t, 50 * 8, s)).collect::<Result<_>>()?;
        let model = trainer::fit_source(&data, 3, &FitOptions::default())?;
        loss.check(model.final_loss() / (1.0 + model.train_loss_history[0]));
        dist.check(trainer::subspace_distance(&model.b_hat, &gt.b_star)?);
    }
    Ok(vec![mono.finish(), loss.finish(), dist.finish()])
}

/// Runs the suite at the configured level; when `out` is given the report is
/// written to `out/verify.json`.
pub fn cmd_verify(config: &VerifyConfig, out: Option<&Path>) -> Result<VerifyReport> {
    let tol = &config.tolerances;
    let level = config.level;
    let seed = config.seed;
    let mut properties = allocation_checks(level, seed, tol)?;
    properties.push(floor_free_check(seed, tol)?);
    properties.extend(sparsity_and_bounds(level, seed, tol)?);
    properties.extend(lasso_checks(level, seed, tol)?);
    properties.extend(bilevel_check(level, seed, tol)?);
    properties.extend(trainer_checks(level, seed, tol)?);
    let all_passed = properties.iter().all(|p| p.passed || p.informational);
    let report = VerifyReport { level, seed, all_passed, properties };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}
