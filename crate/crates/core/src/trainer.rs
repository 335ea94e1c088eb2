//! Alternating least squares for the shared linear representation.
//!
//! The source objective is
//!
//! ```text
//! L(B, W) = (1/T) * sum_t (1/n_t) * || Y_t - X_t B w_t ||^2
//! ```
//!
//! Each half step minimizes it exactly: heads given `B` are independent
//! `k`-dimensional least-squares problems, and `B` given the heads is one
//! linear least-squares problem in the `d * k` entries of `B`. After each
//! `B` update the representation is re-orthonormalized by a thin QR with the
//! triangular factor folded into the heads, which leaves every `B w_t`
//! unchanged.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::instance::{GroundTruth, TaskDataset};
use crate::linalg::{min_norm_lstsq, orthonormality_defect, singular_values, solve_spd, thin_qr};
use crate::rng::{self, gaussian_matrix};
use crate::serde_matrix;
use crate::{Error, Result};

/// Above this many unknowns in `B` the exact solve is replaced by
/// gradient steps with exact line search.
pub const MAX_DIRECT_UNKNOWNS: usize = 20_000;

const RIDGE_INIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Top-`k` left singular vectors of the per-task ridge estimates.
    Spectral,
    /// Start from a given orthonormal representation.
    Warm(DMatrix<f64>),
}

/// How tasks of different sizes are weighted in the source objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskWeighting {
    /// `(1/T) sum_t (1/n_t) |Y_t - X_t B w_t|^2`: every task counts equally.
    #[default]
    PerTask,
    /// `(1/N) sum_t |Y_t - X_t B w_t|^2`: every sample counts equally.
    PerSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub init: Init,
    /// Number of trailing `(B, W)` iterates kept on the fitted model.
    pub snapshots: usize,
    /// Seed for the random fallback initialization.
    pub seed: u64,
    pub weighting: TaskWeighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 500, init: Init::Spectral, snapshots: 1, seed: 0, weighting: TaskWeighting::PerTask }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(with = "serde_matrix::matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "serde_matrix::matrix")]
    pub w: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    #[serde(rename = "B_hat", with = "serde_matrix::matrix")]
    pub b_hat: DMatrix<f64>,
    #[serde(rename = "W_hat", with = "serde_matrix::matrix")]
    pub w_hat: DMatrix<f64>,
    #[serde(with = "serde_matrix::option_vector", default)]
    pub w_target_hat: Option<DVector<f64>>,
    pub train_loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Last few ALS iterates, oldest first; the final entry equals `(b_hat, w_hat)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<Snapshot>,
}

impl FittedModel {
    pub fn final_loss(&self) -> f64 {
        self.train_loss_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn with_target_head(mut self, target: &TaskDataset) -> Result<Self> {
        self.w_target_hat = Some(fit_target_head(&self, target)?);
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Writes `iteration,loss` rows.
    pub fn write_loss_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["iteration", "loss"])?;
        for (i, loss) in self.train_loss_history.iter().enumerate() {
            wtr.write_record([i.to_string(), format!("{loss:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-task data plus the Gram statistics used by both half steps.
struct TaskStats {
    x: DMatrix<f64>,
    y: DVector<f64>,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    weight: f64,
}

fn group_tasks(datasets: &[TaskDataset], weighting: TaskWeighting) -> Result<Vec<TaskStats>> {
    if datasets.is_empty() {
        return Err(Error::InvalidArgument("no source datasets".into()));
    }
    let d = datasets[0].d();
    let mut by_task: BTreeMap<usize, Vec<&TaskDataset>> = BTreeMap::new();
    for ds in datasets {
        if ds.d() != d {
            return Err(Error::Dimension("datasets disagree on input dimension".into()));
        }
        if !crate::linalg::all_finite(ds.x.iter()) || !crate::linalg::all_finite(ds.y.iter()) {
            return Err(Error::NonFinite("source data"));
        }
        by_task.entry(ds.task_index).or_default().push(ds);
    }
    let t = by_task.len();
    if by_task.keys().copied().ne(1..=t) {
        return Err(Error::InvalidArgument("source task indices must be exactly 1..=T".into()));
    }
    let mut stats = Vec::with_capacity(t);
    for (index, parts) in by_task {
        let n: usize = parts.iter().map(|p| p.n()).sum();
        if n < 1 {
            return Err(Error::InvalidArgument(format!("task {index} has no samples")));
        }
        let mut x = DMatrix::zeros(n, d);
        let mut y = DVector::zeros(n);
        let mut row = 0;
        for p in parts {
            x.rows_mut(row, p.n()).copy_from(&p.x);
            y.rows_mut(row, p.n()).copy_from(&p.y);
            row += p.n();
        }
        let gram = x.tr_mul(&x);
        let xty = x.tr_mul(&y);
        stats.push(TaskStats { x, y, gram, xty, weight: 1.0 / (t as f64 * n as f64) });
    }
    if weighting == TaskWeighting::PerSample {
        let total: usize = stats.iter().map(|s| s.y.len()).sum();
        for s in &mut stats {
            s.weight = 1.0 / total as f64;
        }
    }
    Ok(stats)
}

fn source_loss(stats: &[TaskStats], b: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    stats
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let theta = b * w.column(t);
            s.weight * (&s.y - &s.x * theta).norm_squared()
        })
        .sum()
}

/// Value of the per-task weighted source objective for arbitrary `(B, W)`.
pub fn source_objective(datasets: &[TaskDataset], b: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<f64> {
    let stats = group_tasks(datasets, TaskWeighting::PerTask)?;
    if w.ncols() != stats.len() || b.ncols() != w.nrows() || b.nrows() != stats[0].x.ncols() {
        return Err(Error::Dimension("representation/head shapes do not match the data".into()));
    }
    Ok(source_loss(&stats, b, w))
}

fn update_heads(stats: &[TaskStats], b: &DMatrix<f64>) -> DMatrix<f64> {
    let k = b.ncols();
    let mut w = DMatrix::zeros(k, stats.len());
    for (t, s) in stats.iter().enumerate() {
        let gb = &s.gram * b;
        let lhs = b.tr_mul(&gb);
        let rhs = b.tr_mul(&s.xty);
        w.set_column(t, &solve_spd(&lhs, &rhs));
    }
    w
}

/// Exact minimizer over `B` for fixed heads, via the `dk x dk` normal equations
/// on `vec(B)` (column-major).
fn update_representation_direct(stats: &[TaskStats], w: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let k = w.nrows();
    let dk = d * k;
    let mut lhs = DMatrix::zeros(dk, dk);
    let mut rhs = DVector::zeros(dk);
    for (t, s) in stats.iter().enumerate() {
        let wt = w.column(t);
        for i in 0..k {
            let ci = s.weight * wt[i];
            if ci != 0.0 {
                rhs.rows_mut(i * d, d).axpy(ci, &s.xty, 1.0);
            }
            for j in 0..=i {
                let c = s.weight * wt[i] * wt[j];
                if c == 0.0 {
                    continue;
                }
                let mut block = lhs.view_mut((i * d, j * d), (d, d));
                block += &s.gram * c;
            }
        }
    }
    // Mirror the lower block triangle.
    for i in 0..k {
        for j in 0..i {
            let block = lhs.view((i * d, j * d), (d, d)).transpose();
            lhs.view_mut((j * d, i * d), (d, d)).copy_from(&block);
        }
    }
    let vec_b = solve_spd(&lhs, &rhs);
    DMatrix::from_column_slice(d, k, vec_b.as_slice())
}

/// Gradient steps with exact line search; each step cannot increase the loss.
fn update_representation_gradient(stats: &[TaskStats], b: &DMatrix<f64>, w: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let mut b = b.clone();
    for _ in 0..steps {
        // Negative half-gradient: sum_t a_t (X^T y - G B w_t) w_t^T.
        let mut dir = DMatrix::zeros(b.nrows(), b.ncols());
        for (t, s) in stats.iter().enumerate() {
            let wt = w.column(t);
            let r = &s.xty - &s.gram * (&b * wt);
            dir.ger(s.weight, &r, &wt, 1.0);
        }
        let num = dir.norm_squared();
        let den: f64 = stats
            .iter()
            .enumerate()
            .map(|(t, s)| {
                let v = &dir * w.column(t);
                s.weight * v.dot(&(&s.gram * &v))
            })
            .sum();
        if num == 0.0 || den <= 0.0 {
            break;
        }
        b += dir * (num / den);
    }
    b
}

fn initial_representation(stats: &[TaskStats], d: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let t = stats.len();
    let mut ridge = DMatrix::zeros(d, t);
    for (i, s) in stats.iter().enumerate() {
        let mut lhs = s.gram.clone();
        for j in 0..d {
            lhs[(j, j)] += RIDGE_INIT;
        }
        ridge.set_column(i, &solve_spd(&lhs, &s.xty));
    }
    let mut rng = rng::stream(seed, u32::MAX, 0);
    let random = gaussian_matrix(&mut rng, d, k);
    if ridge.iter().all(|v| *v == 0.0) || !crate::linalg::all_finite(ridge.iter()) {
        return thin_qr(&random).0;
    }
    let svd = ridge.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut start = DMatrix::zeros(d, k);
    for j in 0..k {
        match order.get(j) {
            Some(&c) if svd.singular_values[c] > 0.0 => start.set_column(j, &u.column(c)),
            _ => start.set_column(j, &random.column(j)),
        }
    }
    thin_qr(&start).0
}

/// Fits `(B_hat, W_hat)` on the source tasks by alternating least squares.
pub fn fit_source(datasets: &[TaskDataset], k: usize, options: &FitOptions) -> Result<FittedModel> {
    let stats = group_tasks(datasets, options.weighting)?;
    let d = stats[0].x.ncols();
    if k == 0 || k > d {
        return Err(Error::Dimension(format!("k = {k} must lie in 1..=d = {d}")));
    }
    let mut b = match &options.init {
        Init::Spectral => initial_representation(&stats, d, k, options.seed),
        Init::Warm(b0) => {
            if b0.shape() != (d, k) {
                return Err(Error::Dimension("warm-start representation has the wrong shape".into()));
            }
            thin_qr(b0).0
        }
    };
    let keep = options.snapshots.max(1);
    let mut snapshots = VecDeque::with_capacity(keep + 1);
    let mut w = update_heads(&stats, &b);
    let mut history = vec![source_loss(&stats, &b, &w)];
    let mut converged = history[0] == 0.0;
    let mut iterations = 0;
    snapshots.push_back(Snapshot { b: b.clone(), w: w.clone() });

    while !converged && iterations < options.max_iters {
        let b_new = if d * k <= MAX_DIRECT_UNKNOWNS {
            update_representation_direct(&stats, &w, d)
        } else {
            update_representation_gradient(&stats, &b, &w, 10)
        };
        let (q, r) = thin_qr(&b_new);
        let w_rot = &r * &w;
        b = q;
        w = update_heads(&stats, &b);
        // The heads update is an exact minimization from (b, w_rot), so only
        // accept it when it does not lose to round-off.
        let loss_rot = source_loss(&stats, &b, &w_rot);
        let mut loss = source_loss(&stats, &b, &w);
        if loss > loss_rot {
            w = w_rot;
            loss = loss_rot;
        }
        let prev = *history.last().expect("history is non-empty");
        if loss > prev {
            // Round-off at the floor of the objective; keep the previous iterate.
            let last = snapshots.back().expect("snapshot present");
            b = last.b.clone();
            w = last.w.clone();
            converged = true;
            break;
        }
        iterations += 1;
        history.push(loss);
        snapshots.push_back(Snapshot { b: b.clone(), w: w.clone() });
        if snapshots.len() > keep {
            snapshots.pop_front();
        }
        if loss == 0.0 || (prev - loss) / prev < options.tol {
            converged = true;
        }
    }

    Ok(FittedModel {
        b_hat: b,
        w_hat: w,
        w_target_hat: None,
        train_loss_history: history,
        iterations,
        converged,
        snapshots: snapshots.into_iter().collect(),
    })
}

/// Minimum-norm least-squares target head on the design `X B_hat`.
pub fn fit_target_head(model: &FittedModel, target: &TaskDataset) -> Result<DVector<f64>> {
    target_head_for(&model.b_hat, target)
}

pub fn target_head_for(b_hat: &DMatrix<f64>, target: &TaskDataset) -> Result<DVector<f64>> {
    if target.n() == 0 {
        return Err(Error::InvalidArgument("empty target dataset".into()));
    }
    if target.d() != b_hat.nrows() {
        return Err(Error::Dimension("target inputs do not match B_hat".into()));
    }
    let design = &target.x * b_hat;
    Ok(min_norm_lstsq(&design, &target.y, 1e-12))
}

/// Population excess risk `(B_hat w_hat - B* w*)^T Sigma (B_hat w_hat - B* w*)`
/// on the target task.
pub fn excess_risk(model: &FittedModel, gt: &GroundTruth) -> Result<f64> {
    let w_hat = model
        .w_target_hat
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("model has no target head".into()))?;
    excess_risk_of(&model.b_hat, w_hat, gt)
}

pub fn excess_risk_of(b_hat: &DMatrix<f64>, w_hat: &DVector<f64>, gt: &GroundTruth) -> Result<f64> {
    if b_hat.nrows() != gt.d || b_hat.ncols() != w_hat.len() {
        return Err(Error::Dimension("fitted model does not match the instance".into()));
    }
    let delta = b_hat * w_hat - &gt.b_star * &gt.w_target_star;
    let risk = match &gt.covariance {
        crate::instance::CovarianceKind::Identity => delta.norm_squared(),
        crate::instance::CovarianceKind::DiagonalBounded(diag) => {
            delta.iter().zip(diag).map(|(v, s)| s * v * v).sum()
        }
    };
    Ok(risk.max(0.0))
}

/// `sqrt(1 - sigma_min(B_hat^T B_star)^2)`: sine of the largest principal angle.
pub fn subspace_distance(b_hat: &DMatrix<f64>, b_star: &DMatrix<f64>) -> Result<f64> {
    if b_hat.shape() != b_star.shape() {
        return Err(Error::Dimension("representations differ in shape".into()));
    }
    for (name, m) in [("B_hat", b_hat), ("B_star", b_star)] {
        let defect = orthonormality_defect(m);
        if defect > 1e-6 {
            return Err(Error::InvalidArgument(format!("{name} is not orthonormal (defect {defect:e})")));
        }
    }
    let cross = b_hat.tr_mul(b_star);
    let smin = singular_values(&cross).iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    Ok((1.0 - smin * smin).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{make_random_instance, sample_task};

    fn source_data(gt: &GroundTruth, n: usize, seed: u64) -> Vec<TaskDataset> {
        (1..=gt.t).map(|t| sample_task(gt, t, n, seed).unwrap()).collect()
    }

    #[test]
    fn noiseless_fit_reaches_round_off() {
        let gt = make_random_instance(8, 2, 5, 0.0, 0.5, 1).unwrap();
        let data = source_data(&gt, 400, 2);
        let model = fit_source(&data, 2, &FitOptions::default()).unwrap();
        let first = model.train_loss_history[0];
        assert!(model.final_loss() <= 1e-16 * (first + 1.0), "{}", model.final_loss());
        assert!(subspace_distance(&model.b_hat, &gt.b_star).unwrap() <= 1e-6);
        assert!(orthonormality_defect(&model.b_hat) <= 1e-8);
    }

    #[test]
    fn rank_one_single_task_matches_ols() {
        let gt = make_random_instance(5, 1, 1, 0.3, 0.5, 4).unwrap();
        let data = source_data(&gt, 60, 3);
        let model = fit_source(&data, 1, &FitOptions::default()).unwrap();
        let product = &model.b_hat * model.w_hat.column(0);
        let ols = solve_spd(&data[0].x.tr_mul(&data[0].x), &data[0].x.tr_mul(&data[0].y));
        assert!((product - ols).abs().max() <= 1e-8);
    }

    #[test]
    fn loss_history_is_monotone() {
        for seed in 0..20 {
            let gt = make_random_instance(10, 3, 6, 0.5, 0.3, seed).unwrap();
            let data = source_data(&gt, 15, seed + 100);
            let model = fit_source(&data, 3, &FitOptions::default()).unwrap();
            for pair in model.train_loss_history.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "seed {seed}: {pair:?}");
            }
        }
    }

    #[test]
    fn qr_refold_is_loss_neutral() {
        let gt = make_random_instance(7, 2, 4, 0.4, 0.5, 8).unwrap();
        let data = source_data(&gt, 30, 1);
        let mut rng = rng::stream(5, 0, 0);
        let b = gaussian_matrix(&mut rng, 7, 2);
        let w = gaussian_matrix(&mut rng, 2, 4);
        let before = source_objective(&data, &b, &w).unwrap();
        let (q, r) = thin_qr(&b);
        let after = source_objective(&data, &q, &(r * w)).unwrap();
        assert!((before - after).abs() <= 1e-10 * before);
    }

    #[test]
    fn gradient_fallback_never_increases_loss() {
        let gt = make_random_instance(6, 2, 4, 0.4, 0.5, 9).unwrap();
        let data = source_data(&gt, 20, 2);
        let stats = group_tasks(&data, TaskWeighting::PerTask).unwrap();
        let mut rng = rng::stream(1, 0, 0);
        let b = thin_qr(&gaussian_matrix(&mut rng, 6, 2)).0;
        let w = update_heads(&stats, &b);
        let b1 = update_representation_gradient(&stats, &b, &w, 25);
        let exact = update_representation_direct(&stats, &w, 6);
        let l0 = source_loss(&stats, &b, &w);
        let l1 = source_loss(&stats, &b1, &w);
        let l2 = source_loss(&stats, &exact, &w);
        assert!(l1 <= l0 && l2 <= l1 + 1e-12);
    }

    #[test]
    fn rejects_missing_tasks_and_bad_data() {
        let gt = make_random_instance(5, 1, 2, 0.1, 0.5, 0).unwrap();
        let mut data = source_data(&gt, 5, 0);
        data[1].task_index = 3;
        assert!(fit_source(&data, 1, &FitOptions::default()).is_err());
        let mut data = source_data(&gt, 5, 0);
        data[0] = TaskDataset::empty(1, 5, 0);
        assert!(fit_source(&data, 1, &FitOptions::default()).is_err());
        let mut data = source_data(&gt, 5, 0);
        data[0].y[0] = f64::NAN;
        assert!(matches!(fit_source(&data, 1, &FitOptions::default()), Err(Error::NonFinite(_))));
    }

    fn oracle_model(gt: &GroundTruth) -> FittedModel {
        FittedModel {
            b_hat: gt.b_star.clone(),
            w_hat: gt.w_star.clone(),
            w_target_hat: None,
            train_loss_history: vec![],
            iterations: 0,
            converged: true,
            snapshots: vec![],
        }
    }

    #[test]
    fn target_head_realizable_and_zero() {
        let gt = make_random_instance(6, 2, 3, 0.0, 0.5, 3).unwrap();
        let model = oracle_model(&gt);
        let target = sample_task(&gt, 4, 40, 5).unwrap();
        let w = fit_target_head(&model, &target).unwrap();
        assert!((&w - &gt.w_target_star).abs().max() <= 1e-8);

        let mut zero = target.clone();
        zero.y.fill(0.0);
        assert!(fit_target_head(&model, &zero).unwrap().iter().all(|v| *v == 0.0));

        let square = sample_task(&gt, 4, 2, 6).unwrap();
        let mut noisy = square.clone();
        noisy.y[0] += 0.3;
        let w = fit_target_head(&model, &noisy).unwrap();
        assert!((&noisy.y - &noisy.x * &gt.b_star * w).norm() <= 1e-8);

        assert!(fit_target_head(&model, &TaskDataset::empty(4, 6, 0)).is_err());
    }

    #[test]
    fn excess_risk_cases() {
        let gt = make_random_instance(6, 2, 3, 0.0, 0.5, 3).unwrap();
        let mut model = oracle_model(&gt);
        assert!(excess_risk(&model, &gt).is_err());
        model.w_target_hat = Some(gt.w_target_star.clone());
        assert_eq!(excess_risk(&model, &gt).unwrap(), 0.0);

        let angle: f64 = 0.7;
        let q = DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
        let rotated = excess_risk_of(&(&gt.b_star * &q), &(q.transpose() * &gt.w_target_star), &gt).unwrap();
        assert!(rotated < 1e-28);

        // B_hat w_hat = B* w* + delta e_1.
        let delta = 0.3;
        let mut target = &gt.b_star * &gt.w_target_star;
        target[0] += delta;
        let b1 = DMatrix::from_column_slice(6, 1, target.as_slice());
        let er = excess_risk_of(&b1, &DVector::from_element(1, 1.0), &gt).unwrap();
        assert!((er - delta * delta).abs() < 1e-14);
    }

    #[test]
    fn subspace_distance_cases() {
        let b = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let perp = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(subspace_distance(&b, &b).unwrap(), 0.0);
        assert!((subspace_distance(&b, &perp).unwrap() - 1.0).abs() < 1e-15);
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!(subspace_distance(&(&b * q), &b).unwrap() < 1e-7);
        assert!(subspace_distance(&(&b * 2.0), &b).is_err());
    }

    #[test]
    fn loss_csv_has_header_and_rows() {
        let gt = make_random_instance(5, 1, 2, 0.1, 0.5, 0).unwrap();
        let model = fit_source(&source_data(&gt, 10, 0), 1, &FitOptions::default()).unwrap();
        let mut buf = Vec::new();
        model.write_loss_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,loss\n"));
        assert_eq!(text.lines().count(), model.train_loss_history.len() + 1);
        let back = FittedModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back.b_hat, model.b_hat);
    }

    #[test]
    fn weightings_agree_on_balanced_data() {
        let gt = make_random_instance(6, 2, 4, 0.3, 0.5, 8).unwrap();
        let data = source_data(&gt, 25, 2);
        let a = fit_source(&data, 2, &FitOptions::default()).unwrap();
        let opts = FitOptions { weighting: TaskWeighting::PerSample, ..Default::default() };
        let b = fit_source(&data, 2, &opts).unwrap();
        assert!((a.final_loss() - b.final_loss()).abs() <= 1e-12 * a.final_loss());
    }
}
