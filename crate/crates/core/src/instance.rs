//! Ground-truth linear representation models and synthetic task data.
//!
//! A [`GroundTruth`] holds an orthonormal representation `B*` (d x k), the
//! source heads `W*` (k x T, one column per task) and the target head. Task
//! `t` produces samples `y = x^T B* w_t + z` with `x ~ N(0, Sigma)` and
//! `z ~ N(0, sigma_z^2)`. Task indices are 1-based; index `T + 1` is the
//! target task.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{complete_orthonormal, sigma_min, thin_qr};
use crate::rng::{self, gaussian_matrix, gaussian_vector, INSTANCE_STREAM};
use crate::serde_matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "diagonal")]
pub enum CovarianceKind {
    Identity,
    /// Diagonal covariance shared by every task; entries must be positive.
    DiagonalBounded(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Random,
    AlmostSparse,
    AlignedWorstCase,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub kind: InstanceKind,
    pub seed: u64,
    /// `W*` has full row rank.
    pub diverse: bool,
    /// `d > T >= k`.
    pub high_dimensional: bool,
    /// Mixing vector used to build the target head, when known.
    #[serde(with = "serde_matrix::option_vector", default)]
    pub reference_nu: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub d: usize,
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub sigma_z: f64,
    #[serde(rename = "B_star", with = "serde_matrix::matrix")]
    pub b_star: DMatrix<f64>,
    #[serde(rename = "W_star", with = "serde_matrix::matrix")]
    pub w_star: DMatrix<f64>,
    #[serde(with = "serde_matrix::vector")]
    pub w_target_star: DVector<f64>,
    pub covariance: CovarianceKind,
    pub meta: InstanceMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub task_index: usize,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub seed: u64,
}

impl TaskDataset {
    pub fn empty(task_index: usize, d: usize, seed: u64) -> Self {
        Self { task_index, x: DMatrix::zeros(0, d), y: DVector::zeros(0), seed }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Appends the rows of `other` (same task) below this dataset's rows.
    pub fn extend(&mut self, other: &TaskDataset) -> Result<()> {
        if other.task_index != self.task_index || other.d() != self.d() {
            return Err(Error::Dimension("cannot merge datasets of different tasks".into()));
        }
        if other.n() == 0 {
            return Ok(());
        }
        let n0 = self.n();
        let n1 = n0 + other.n();
        let mut x = DMatrix::zeros(n1, self.d());
        x.rows_mut(0, n0).copy_from(&self.x);
        x.rows_mut(n0, other.n()).copy_from(&other.x);
        let mut y = DVector::zeros(n1);
        y.rows_mut(0, n0).copy_from(&self.y);
        y.rows_mut(n0, other.n()).copy_from(&other.y);
        self.x = x;
        self.y = y;
        Ok(())
    }
}

impl GroundTruth {
    /// Assembles an instance from explicit matrices after checking shapes and
    /// orthonormality of `b_star`.
    pub fn new(
        b_star: DMatrix<f64>,
        w_star: DMatrix<f64>,
        w_target_star: DVector<f64>,
        sigma_z: f64,
        meta: InstanceMeta,
    ) -> Result<Self> {
        let (d, k) = b_star.shape();
        let t = w_star.ncols();
        if w_star.nrows() != k || w_target_star.len() != k {
            return Err(Error::Dimension(format!(
                "B* is {d}x{k} but W* is {}x{t} and w_target has {} entries",
                w_star.nrows(),
                w_target_star.len()
            )));
        }
        if !(sigma_z >= 0.0) || !sigma_z.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma_z = {sigma_z}")));
        }
        let defect = crate::linalg::orthonormality_defect(&b_star);
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!("B* is not orthonormal (defect {defect:e})")));
        }
        Ok(Self { d, k, t, sigma_z, b_star, w_star, w_target_star, covariance: CovarianceKind::Identity, meta })
    }

    pub fn with_covariance(mut self, covariance: CovarianceKind) -> Result<Self> {
        if let CovarianceKind::DiagonalBounded(diag) = &covariance {
            if diag.len() != self.d || diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument("diagonal covariance must have d positive entries".into()));
            }
        }
        self.covariance = covariance;
        Ok(self)
    }

    /// Head of task `task_index` (1-based; `T + 1` is the target).
    pub fn head(&self, task_index: usize) -> Result<DVector<f64>> {
        match task_index {
            i if i >= 1 && i <= self.t => Ok(self.w_star.column(i - 1).clone_owned()),
            i if i == self.t + 1 => Ok(self.w_target_star.clone()),
            i => Err(Error::TaskIndex { index: i, max: self.t + 1 }),
        }
    }

    /// Regression vector `B* w_t` in input space.
    pub fn regressor(&self, task_index: usize) -> Result<DVector<f64>> {
        Ok(&self.b_star * self.head(task_index)?)
    }

    /// Covariance of the target-task inputs, as a full matrix.
    pub fn target_covariance(&self) -> DMatrix<f64> {
        match &self.covariance {
            CovarianceKind::Identity => DMatrix::identity(self.d, self.d),
            CovarianceKind::DiagonalBounded(diag) => DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let gt: GroundTruth = serde_json::from_str(s)?;
        if gt.b_star.shape() != (gt.d, gt.k) || gt.w_star.shape() != (gt.k, gt.t) || gt.w_target_star.len() != gt.k {
            return Err(Error::Dimension("instance document has inconsistent shapes".into()));
        }
        Ok(gt)
    }
}

fn check_dims(d: usize, k: usize, t: usize) -> Result<()> {
    if k == 0 || d == 0 || t == 0 {
        return Err(Error::Dimension("d, k and T must be positive".into()));
    }
    if k > d {
        return Err(Error::Dimension(format!("k = {k} exceeds d = {d}")));
    }
    if t < k {
        return Err(Error::Dimension(format!("T = {t} is smaller than k = {k}")));
    }
    Ok(())
}

fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    thin_qr(&gaussian_matrix(rng, rows, cols)).0
}

fn meta(kind: InstanceKind, seed: u64, d: usize, k: usize, t: usize, reference_nu: Option<DVector<f64>>) -> InstanceMeta {
    InstanceMeta { kind, seed, diverse: true, high_dimensional: d > t && t >= k, reference_nu }
}

/// Random instance: `B*` from the QR of a Gaussian matrix, Gaussian `W*`
/// rescaled so that `sigma_min(W*) >= sigma_min_floor`, and a target head
/// `W* nu` for a Gaussian mixing `nu ~ N(0, I/T)` kept in the metadata.
pub fn make_random_instance(
    d: usize,
    k: usize,
    t: usize,
    sigma_z: f64,
    sigma_min_floor: f64,
    seed: u64,
) -> Result<GroundTruth> {
    check_dims(d, k, t)?;
    if !(sigma_min_floor > 0.0) {
        return Err(Error::InvalidArgument("sigma_min_floor must be positive".into()));
    }
    let mut rng = rng::stream(seed, INSTANCE_STREAM, 0);
    let b_star = random_orthonormal(&mut rng, d, k);
    let mut w_star = gaussian_matrix(&mut rng, k, t);
    let smin = sigma_min(&w_star);
    if smin < sigma_min_floor {
        // Round-off in the rescaled SVD must not dip below the floor.
        w_star *= sigma_min_floor / smin * (1.0 + 1e-12);
    }
    let nu = gaussian_vector(&mut rng, t) / (t as f64).sqrt();
    let w_target = &w_star * &nu;
    GroundTruth::new(b_star, w_star, w_target, sigma_z, meta(InstanceKind::Random, seed, d, k, t, Some(nu)))
}

/// The approximately 1-sparse relevance vector: `sqrt(1 - 1/(T-1))` on the
/// first task and `1/(T-1)` on every other task. Unit Euclidean norm.
pub fn almost_sparse_nu(t: usize) -> Result<DVector<f64>> {
    if t < 3 {
        return Err(Error::Dimension(format!("almost-sparse relevance needs T >= 3, got {t}")));
    }
    let tail = 1.0 / (t as f64 - 1.0);
    Ok(DVector::from_fn(t, |i, _| if i == 0 { (1.0 - tail).sqrt() } else { tail }))
}

/// Instance whose minimum-Euclidean-norm relevance vector is exactly
/// [`almost_sparse_nu`].
///
/// `W* = U s V^T` with `U` a random rotation, all singular values equal to
/// `s = sqrt(T/k)` (so heads have unit mean squared norm) and the first right
/// singular vector equal to the reference relevance vector. The target head is
/// `W* nu`, which places `nu` in the row space of `W*`.
pub fn make_almost_sparse_instance(
    d: usize,
    k: usize,
    t: usize,
    sigma_z: f64,
    seed: u64,
) -> Result<(GroundTruth, DVector<f64>)> {
    let nu = almost_sparse_nu(t)?;
    check_dims(d, k, t)?;
    let mut rng = rng::stream(seed, INSTANCE_STREAM, 0);
    let b_star = random_orthonormal(&mut rng, d, k);
    let u = random_orthonormal(&mut rng, k, k);
    let extra = gaussian_matrix(&mut rng, t, k - 1);
    let v = complete_orthonormal(&nu, &extra)?;
    let scale = (t as f64 / k as f64).sqrt();
    let w_star = &u * v.transpose() * scale;
    let w_target = &w_star * &nu;
    let gt = GroundTruth::new(
        b_star,
        w_star,
        w_target,
        sigma_z,
        meta(InstanceKind::AlmostSparse, seed, d, k, t, Some(nu.clone())),
    )?;
    Ok((gt, nu))
}

/// Hard instance for L2-driven sampling: `W*` is dominated by a rank-one
/// component whose right singular vector is the all-ones direction, so the
/// minimum-Euclidean-norm relevance vector is `1` and L2 sampling spreads its
/// budget evenly over all tasks.
///
/// Singular values are `c_w / sqrt(T)` (leading) and
/// `c_w / (2 sqrt((k-1) T))` (the other `k - 1`); the target head is `W* 1`,
/// of norm `c_w`.
pub fn make_aligned_worstcase_instance(d: usize, k: usize, t: usize, c_w: f64, seed: u64) -> Result<GroundTruth> {
    if k < 2 {
        return Err(Error::Dimension(format!("aligned worst case needs k >= 2, got {k}")));
    }
    check_dims(d, k, t)?;
    if !(c_w > 0.0) {
        return Err(Error::InvalidArgument("c_w must be positive".into()));
    }
    let mut rng = rng::stream(seed, INSTANCE_STREAM, 0);
    let b_star = random_orthonormal(&mut rng, d, k);
    let u = random_orthonormal(&mut rng, k, k);
    let ones = DVector::from_element(t, 1.0);
    let v = complete_orthonormal(&ones, &gaussian_matrix(&mut rng, t, k - 1))?;
    let tf = t as f64;
    let lead = c_w / tf.sqrt();
    let rest = c_w / (2.0 * ((k as f64 - 1.0) * tf).sqrt());
    let sv = DVector::from_fn(k, |i, _| if i == 0 { lead } else { rest });
    let w_star = &u * DMatrix::from_diagonal(&sv) * v.transpose();
    let w_target = &w_star * &ones;
    let mut m = meta(InstanceKind::AlignedWorstCase, seed, d, k, t, Some(ones));
    m.diverse = true;
    GroundTruth::new(b_star, w_star, w_target, 0.0, m)
}

/// Draws `n` samples of task `task_index` on draw index 0.
pub fn sample_task(gt: &GroundTruth, task_index: usize, n: usize, seed: u64) -> Result<TaskDataset> {
    sample_task_draw(gt, task_index, n, seed, 0)
}

/// Draws `n` samples of task `task_index` from the stream keyed by
/// `(seed, task_index, draw_index)`. Distinct draw indices give independent
/// batches of the same task.
pub fn sample_task_draw(
    gt: &GroundTruth,
    task_index: usize,
    n: usize,
    seed: u64,
    draw_index: u32,
) -> Result<TaskDataset> {
    let theta = gt.regressor(task_index)?;
    let mut rng = rng::stream(seed, task_index as u32, draw_index);
    let mut x = gaussian_matrix(&mut rng, n, gt.d);
    if let CovarianceKind::DiagonalBounded(diag) = &gt.covariance {
        for (j, var) in diag.iter().enumerate() {
            x.column_mut(j).scale_mut(var.sqrt());
        }
    }
    let mut y = &x * &theta;
    if gt.sigma_z > 0.0 {
        for yi in y.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *yi += gt.sigma_z * z;
        }
    }
    Ok(TaskDataset { task_index, x, y, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_defect, singular_values};

    #[test]
    fn smallest_legal_instance() {
        let gt = make_random_instance(4, 1, 1, 0.0, 1.0, 0).unwrap();
        assert!((gt.b_star.column(0).norm() - 1.0).abs() < 1e-12);
        assert!(gt.w_star[(0, 0)].abs() >= 1.0);
    }

    #[test]
    fn random_instance_respects_sigma_floor_and_is_deterministic() {
        let gt = make_random_instance(30, 5, 40, 0.5, 0.5, 7).unwrap();
        assert!(*singular_values(&gt.w_star).iter().last().unwrap() >= 0.5);
        assert!(orthonormality_defect(&gt.b_star) <= 1e-10);
        assert_eq!(gt, make_random_instance(30, 5, 40, 0.5, 0.5, 7).unwrap());
        // First nonzero entry of each column is positive.
        for j in 0..5 {
            assert!(gt.b_star.column(j).iter().find(|v| v.abs() > 1e-12).unwrap() > &0.0);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(make_random_instance(3, 4, 5, 0.0, 1.0, 0).is_err());
        assert!(make_random_instance(5, 4, 3, 0.0, 1.0, 0).is_err());
        assert!(make_random_instance(5, 2, 3, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn almost_sparse_reference_vector() {
        let nu = almost_sparse_nu(11).unwrap();
        assert!((nu[0] - 0.9f64.sqrt()).abs() < 1e-15);
        assert!(nu.iter().skip(1).all(|v| (v - 0.1).abs() < 1e-15));
        assert!((nu.norm() - 1.0).abs() < 1e-12);
        let l1: f64 = nu.iter().map(|v| v.abs()).sum();
        assert!((l1 - (0.9f64.sqrt() + 1.0)).abs() < 1e-12 && l1 < 2.0);

        let nu3 = almost_sparse_nu(3).unwrap();
        assert!((nu3[0] - 0.5f64.sqrt()).abs() < 1e-15 && nu3[1] == 0.5 && nu3[2] == 0.5);
        assert!((nu3.norm() - 1.0).abs() < 1e-12);

        let nu51 = almost_sparse_nu(51).unwrap();
        let mut sum = 0.0;
        for v in nu51.iter() {
            sum += v.abs();
        }
        assert!((sum - ((49.0f64 / 50.0).sqrt() + 1.0)).abs() < 1e-12);
        assert!(almost_sparse_nu(2).is_err());
    }

    #[test]
    fn almost_sparse_instance_is_consistent() {
        let (gt, nu) = make_almost_sparse_instance(20, 4, 15, 0.1, 3).unwrap();
        let recon = &gt.w_star * &nu;
        assert!((recon - &gt.w_target_star).abs().max() <= 1e-10);
        assert_eq!(gt.meta.reference_nu.as_ref(), Some(&nu));
        // nu is the minimum-norm solution.
        let pinv = crate::linalg::min_norm_lstsq(&gt.w_star, &gt.w_target_star, 1e-12);
        assert!((pinv - &nu).abs().max() < 1e-10);
    }

    #[test]
    fn aligned_worst_case_construction() {
        let gt = make_aligned_worstcase_instance(6, 2, 4, 1.0, 0).unwrap();
        let sv = singular_values(&gt.w_star);
        assert!((sv[1] - 0.25).abs() < 1e-12);
        assert!((gt.w_target_star.norm() - 1.0).abs() < 1e-10);
        let nu2 = crate::linalg::min_norm_lstsq(&gt.w_star, &gt.w_target_star, 1e-12);
        let ones = DVector::from_element(4, 1.0);
        let cos = nu2.dot(&ones) / (nu2.norm() * ones.norm());
        assert!(cos.clamp(-1.0, 1.0).acos() < 1e-8);
        assert!(make_aligned_worstcase_instance(6, 1, 4, 1.0, 0).is_err());
    }

    #[test]
    fn noiseless_samples_are_exact() {
        let gt = make_random_instance(6, 2, 3, 0.0, 0.5, 1).unwrap();
        for task in 1..=4 {
            let ds = sample_task(&gt, task, 25, 9).unwrap();
            let resid = &ds.y - &ds.x * gt.regressor(task).unwrap();
            assert!(resid.iter().all(|v| *v == 0.0));
        }
        assert!(sample_task(&gt, 0, 5, 9).is_err());
        assert!(sample_task(&gt, 5, 5, 9).is_err());
        let empty = sample_task(&gt, 1, 0, 9).unwrap();
        assert_eq!(empty.n(), 0);
        assert_eq!(empty.x.nrows(), 0);
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let gt = make_random_instance(5, 2, 2, 0.5, 0.5, 2).unwrap();
        let ds = sample_task(&gt, 1, 10_000, 4).unwrap();
        let resid = &ds.y - &ds.x * gt.regressor(1).unwrap();
        let mean = resid.mean();
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() as f64 - 1.0);
        assert!((0.23..=0.27).contains(&var), "variance {var}");
    }

    #[test]
    fn sampling_is_pure() {
        let gt = make_random_instance(5, 2, 3, 0.3, 0.5, 2).unwrap();
        let a = sample_task(&gt, 2, 17, 11).unwrap();
        let b = sample_task(&gt, 2, 17, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_task_draw(&gt, 2, 17, 11, 1).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let (gt, _) = make_almost_sparse_instance(7, 3, 5, 0.25, 5).unwrap();
        let back = GroundTruth::from_json(&gt.to_json().unwrap()).unwrap();
        assert_eq!(gt, back);
        let v: serde_json::Value = serde_json::from_str(&gt.to_json().unwrap()).unwrap();
        assert_eq!(v["T"], 5);
        assert_eq!(v["B_star"].as_array().unwrap().len(), 7);
    }

    #[test]
    fn diagonal_covariance_scales_inputs() {
        let gt = make_random_instance(3, 1, 1, 0.0, 0.5, 0)
            .unwrap()
            .with_covariance(CovarianceKind::DiagonalBounded(vec![4.0, 1.0, 0.25]))
            .unwrap();
        let ds = sample_task(&gt, 1, 20_000, 1).unwrap();
        let var0 = ds.x.column(0).norm_squared() / 20_000.0;
        let var2 = ds.x.column(2).norm_squared() / 20_000.0;
        assert!((var0 - 4.0).abs() < 0.2 && (var2 - 0.25).abs() < 0.02);
    }
}
