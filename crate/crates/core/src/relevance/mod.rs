//! Estimators of the relevance vector `nu` with `W nu = w`.
//!
//! `W` is the `k x T` matrix of source heads and `w` the target head. Three
//! solvers are provided: the Lasso (`lasso`), the minimum Euclidean norm
//! solution (`min_l2_solution`) and the exact minimum L1 norm solution from a
//! linear program (`l1_oracle_lp`). The remaining functions are diagnostics.

pub mod lasso;
pub mod simplex;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{min_norm_lstsq, singular_values};
use crate::rng;
use crate::serde_matrix;
use crate::{Error, Result};

pub use lasso::{lasso_objective, LassoOptions};

/// Penalty of the lazy regularization policy.
pub const LAZY_LAMBDA: f64 = 1e-10;

/// Relative rank tolerance on `W`: singular values at or below
/// `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Largest `T` accepted by the LP oracle.
pub const LP_MAX_TASKS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Lasso,
    MinL2,
    LpL1Oracle,
    Known,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVector {
    #[serde(with = "serde_matrix::vector")]
    pub nu: DVector<f64>,
    pub solver: Solver,
    pub lambda: f64,
    pub kkt_residual: f64,
    pub support_size: usize,
    pub support_tol: f64,
    /// Coordinate-descent sweeps or simplex pivots, when applicable.
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub converged: bool,
    /// Coordinates whose column of `W` is zero (Lasso only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<usize>,
}

impl RelevanceVector {
    pub fn from_nu(nu: DVector<f64>, solver: Solver) -> Self {
        let support_tol = default_support_tol(&nu);
        let support_size = support_size(&nu, support_tol);
        Self { nu, solver, lambda: 0.0, kkt_residual: 0.0, support_size, support_tol, iterations: 0, converged: true, degenerate: vec![] }
    }

    pub fn l1_norm(&self) -> f64 {
        self.nu.lp_norm(1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn default_support_tol(nu: &DVector<f64>) -> f64 {
    1e-9 * (1.0 + nu.amax())
}

pub fn support_size(nu: &DVector<f64>, tol: f64) -> usize {
    nu.iter().filter(|v| v.abs() > tol).count()
}

fn check_shapes(w_mat: &DMatrix<f64>, w: &DVector<f64>) -> Result<()> {
    if w.len() != w_mat.nrows() {
        return Err(Error::Dimension(format!(
            "W is {}x{} but w has {} entries",
            w_mat.nrows(),
            w_mat.ncols(),
            w.len()
        )));
    }
    if !crate::linalg::all_finite(w_mat.iter()) || !crate::linalg::all_finite(w.iter()) {
        return Err(Error::NonFinite("relevance inputs"));
    }
    Ok(())
}

/// Errors unless `W` has full row rank; returns `(sigma_min, sigma_max)`.
pub fn require_full_row_rank(w_mat: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (k, t) = w_mat.shape();
    let sv = singular_values(w_mat);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = if t < k { 0.0 } else { sv.iter().copied().fold(f64::INFINITY, f64::min) };
    if k == 0 || !(smin > RANK_TOL * smax) {
        return Err(Error::RankDeficient { sigma_min: smin, sigma_max: smax });
    }
    Ok((smin, smax))
}

/// Lasso estimate `argmin 0.5 |w - W nu|^2 + lambda |nu|_1` by cyclic
/// coordinate descent with exact soft-thresholding updates.
pub fn lasso(w_mat: &DMatrix<f64>, w: &DVector<f64>, lambda: f64, options: &LassoOptions) -> Result<RelevanceVector> {
    check_shapes(w_mat, w)?;
    let fit = lasso::coordinate_descent(w_mat, w, lambda, options)?;
    let mut rv = RelevanceVector::from_nu(fit.nu, Solver::Lasso);
    rv.lambda = lambda;
    rv.kkt_residual = kkt_residual(w_mat, w, &rv.nu, lambda);
    rv.iterations = fit.sweeps;
    rv.converged = fit.converged;
    rv.degenerate = fit.zero_columns;
    Ok(rv)
}

/// Minimum Euclidean norm solution `W^T (W W^T)^{-1} w`.
pub fn min_l2_solution(w_mat: &DMatrix<f64>, w: &DVector<f64>) -> Result<RelevanceVector> {
    check_shapes(w_mat, w)?;
    require_full_row_rank(w_mat)?;
    let nu = min_norm_lstsq(w_mat, w, RANK_TOL);
    let resid = (w_mat * &nu - w).norm();
    if resid > 1e-8 * (1.0 + w.norm()) {
        return Err(Error::Degenerate(format!("min-norm residual {resid:e}")));
    }
    Ok(RelevanceVector::from_nu(nu, Solver::MinL2))
}

/// Exact minimum L1 norm solution of `W nu = w` from the split linear program
/// `min 1^T (p + q)  s.t.  W p - W q = w, p, q >= 0`.
///
/// The simplex returns a vertex, so at most `k` coordinates are nonzero.
pub fn l1_oracle_lp(w_mat: &DMatrix<f64>, w: &DVector<f64>) -> Result<RelevanceVector> {
    check_shapes(w_mat, w)?;
    let (k, t) = w_mat.shape();
    if t > LP_MAX_TASKS {
        return Err(Error::InvalidArgument(format!("LP oracle is limited to T <= {LP_MAX_TASKS}, got {t}")));
    }
    require_full_row_rank(w_mat)?;
    let mut a = DMatrix::zeros(k, 2 * t);
    a.view_mut((0, 0), (k, t)).copy_from(w_mat);
    a.view_mut((0, t), (k, t)).copy_from(&(-w_mat));
    let cost = DVector::from_element(2 * t, 1.0);
    let sol = simplex::solve(&a, w, &cost)?;
    let nu = DVector::from_fn(t, |i, _| sol.x[i] - sol.x[t + i]);
    let resid = (w_mat * &nu - w).amax();
    if resid > 1e-8 * (1.0 + w.amax()) {
        return Err(Error::Degenerate(format!("LP vertex residual {resid:e}")));
    }
    let mut rv = RelevanceVector::from_nu(nu, Solver::LpL1Oracle);
    rv.iterations = sol.pivots;
    Ok(rv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRule {
    pub lambda: f64,
    pub gamma: f64,
}

/// Theory-driven penalty
/// `lambda = 45 sqrt(k) R C_W s / gamma * max(1, C_W / gamma)` with
/// `gamma = max(2160 k^1.5 C_W^2 / s, sqrt(2160 k^1.5 C_W^3 / s))`, where
/// `R` bounds the target head norm, `C_W` bounds `sigma_max(W*)` and `s` is a
/// lower bound on `sigma_min(W*)`.
pub fn lambda_rule(k: usize, r: f64, c_w: f64, sigma_underbar: f64) -> Result<LambdaRule> {
    if k == 0 || !(r > 0.0) || !(c_w > 0.0) || !(sigma_underbar > 0.0) {
        return Err(Error::InvalidArgument("lambda rule needs positive k, R, C_W and sigma".into()));
    }
    let kf = k as f64;
    let base = 2160.0 * kf.powf(1.5);
    let gamma = f64::max(base * c_w * c_w / sigma_underbar, (base * c_w.powi(3) / sigma_underbar).sqrt());
    let lambda = 45.0 * kf.sqrt() * r * c_w * sigma_underbar / gamma * f64::max(1.0, c_w / gamma);
    Ok(LambdaRule { lambda, gamma })
}

/// Largest violation of the Lasso stationarity conditions for `nu`, with
/// `g = W^T (w - W nu)`: `|g_t - lambda sign(nu_t)|` on nonzero coordinates and
/// `max(0, |g_t| - lambda)` on zero ones.
pub fn kkt_residual(w_mat: &DMatrix<f64>, w: &DVector<f64>, nu: &DVector<f64>, lambda: f64) -> f64 {
    let g = w_mat.transpose() * (w - w_mat * nu);
    g.iter()
        .zip(nu.iter())
        .map(|(&gt, &v)| if v != 0.0 { (gt - lambda * v.signum()).abs() } else { (gt.abs() - lambda).max(0.0) })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    pub k: usize,
    pub nu1_l1: f64,
    pub nu2_l2: f64,
    pub c_w: f64,
    pub sigma_min: f64,
    /// `sqrt(k) c_w / sigma_min`.
    pub l1_bound: f64,
    /// `c_w / sigma_min`.
    pub l2_bound: f64,
    pub l1_ok: bool,
    pub l2_ok: bool,
    /// `sqrt(|S|) c_w / sigma_min(W_S)` over the support `S` of `nu^1`; unlike
    /// `l1_bound` this one holds for every instance.
    pub l1_support_bound: f64,
    pub l1_support_ok: bool,
}

/// Checks `|nu^1|_1 <= sqrt(k) |w| / sigma_min(W)` and
/// `|nu^2|_2 <= |w| / sigma_min(W)` (with `1e-10` relative slack).
///
/// The second inequality always holds because `nu^2` lies in the row space of
/// `W`. The first can fail: `nu^1` generally has a null-space component, e.g.
/// `W = (0.5, -2, 1)`, `w = 1` gives `|nu^1|_1 = 0.5 > 1 / sqrt(5.25)`. The
/// support-restricted bound in `l1_support_bound` is the one that is always
/// valid.
pub fn norm_bound_check(w_mat: &DMatrix<f64>, w: &DVector<f64>) -> Result<NormBoundReport> {
    check_shapes(w_mat, w)?;
    let (sigma_min, _) = require_full_row_rank(w_mat)?;
    let k = w_mat.nrows();
    let nu1 = l1_oracle_lp(w_mat, w)?;
    let nu1_l1 = nu1.l1_norm();
    let support: Vec<usize> = (0..nu1.nu.len()).filter(|&i| nu1.nu[i].abs() > nu1.support_tol).collect();
    let nu2_l2 = min_l2_solution(w_mat, w)?.nu.norm();
    let c_w = w.norm();
    let l1_bound = (k as f64).sqrt() * c_w / sigma_min;
    let l2_bound = c_w / sigma_min;
    let slack = 1.0 + 1e-10;
    let l1_support_bound = if support.is_empty() {
        0.0
    } else {
        let sub = w_mat.select_columns(support.iter());
        (support.len() as f64).sqrt() * c_w / crate::linalg::sigma_min(&sub)
    };
    Ok(NormBoundReport {
        k,
        nu1_l1,
        nu2_l2,
        c_w,
        sigma_min,
        l1_bound,
        l2_bound,
        l1_ok: nu1_l1 <= l1_bound * slack,
        l2_ok: nu2_l2 <= l2_bound * slack,
        l1_support_bound,
        l1_support_ok: nu1_l1 <= l1_support_bound * slack,
    })
}

/// Sampled estimate of the restricted eigenvalue of `W` over the cone
/// `{delta : |delta_{S^c}|_1 <= 3 |delta_S|_1}`: the smallest observed
/// `|W delta|^2 / |delta|^2`. An upper bound on the true constant, since the
/// exact minimization is intractable.
pub fn restricted_eigenvalue_estimate(w_mat: &DMatrix<f64>, support: &[usize], samples: usize, seed: u64) -> Result<f64> {
    let t = w_mat.ncols();
    if support.is_empty() || support.iter().any(|&s| s >= t) {
        return Err(Error::InvalidArgument("support must be a nonempty set of column indices".into()));
    }
    let mut in_support = vec![false; t];
    for &s in support {
        in_support[s] = true;
    }
    let mut rng = rng::stream(seed, 0, 7);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let mut delta = rng::gaussian_vector(&mut rng, t);
        let on: f64 = (0..t).filter(|&i| in_support[i]).map(|i| delta[i].abs()).sum();
        let off: f64 = (0..t).filter(|&i| !in_support[i]).map(|i| delta[i].abs()).sum();
        if off > 0.0 {
            let scale = rng.random::<f64>() * 3.0 * on / off;
            for i in (0..t).filter(|&i| !in_support[i]) {
                delta[i] *= scale;
            }
        }
        let norm = delta.norm_squared();
        if norm > 0.0 {
            best = best.min((w_mat * &delta).norm_squared() / norm);
        }
    }
    Ok(best)
}

/// Whether `lambda >= 2 |W^T z|_inf` for a noise vector `z`, the condition
/// under which the Lasso error bounds apply.
pub fn penalty_dominates_noise(w_mat: &DMatrix<f64>, z: &DVector<f64>, lambda: f64) -> bool {
    lambda >= 2.0 * (w_mat.transpose() * z).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vector, stream};

    fn padded_identity(k: usize, t: usize) -> DMatrix<f64> {
        DMatrix::from_fn(k, t, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn lasso_scalar_soft_threshold() {
        let w_mat = padded_identity(3, 5);
        let w = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let rv = lasso(&w_mat, &w, 0.1, &LassoOptions::default()).unwrap();
        assert!((rv.nu[0] - 0.9).abs() < 1e-12);
        assert!(rv.nu.iter().skip(1).all(|v| *v == 0.0));
        assert_eq!(rv.support_size, 1);
    }

    #[test]
    fn lasso_null_solution_above_threshold() {
        let mut rng = stream(1, 0, 0);
        let w_mat = gaussian_matrix(&mut rng, 3, 6);
        let w = gaussian_vector(&mut rng, 3);
        let lmax = (w_mat.transpose() * &w).amax();
        let rv = lasso(&w_mat, &w, lmax, &LassoOptions::default()).unwrap();
        assert!(rv.nu.iter().all(|v| *v == 0.0));
        assert_eq!(kkt_residual(&w_mat, &w, &rv.nu, lmax), 0.0);
    }

    #[test]
    fn lasso_tiny_penalty_matches_basis_pursuit() {
        let mut rng = stream(2, 0, 0);
        let w_mat = gaussian_matrix(&mut rng, 3, 6);
        let w = gaussian_vector(&mut rng, 3);
        let lp = l1_oracle_lp(&w_mat, &w).unwrap();
        let rv = lasso(&w_mat, &w, 1e-8, &LassoOptions::default()).unwrap();
        let gap = (&rv.nu - &lp.nu).lp_norm(1);
        assert!(gap <= 1e-4 * (1.0 + lp.l1_norm()), "gap {gap}");
        assert!(rv.kkt_residual <= 1e-8 * (1.0 + (w_mat.transpose() * &w).amax()));
    }

    #[test]
    fn kkt_grows_with_perturbation() {
        let mut rng = stream(3, 0, 0);
        let w_mat = gaussian_matrix(&mut rng, 3, 6);
        let w = gaussian_vector(&mut rng, 3);
        let rv = lasso(&w_mat, &w, 0.05, &LassoOptions::default()).unwrap();
        let active = rv.nu.iter().position(|v| *v != 0.0).unwrap();
        let mut last = rv.kkt_residual;
        for eps in [1e-3, 2e-3, 4e-3] {
            let mut p = rv.nu.clone();
            p[active] += eps;
            let r = kkt_residual(&w_mat, &w, &p, 0.05);
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn lasso_scale_equivariance() {
        let mut rng = stream(4, 0, 0);
        let w_mat = gaussian_matrix(&mut rng, 4, 10);
        let w = gaussian_vector(&mut rng, 4);
        let base = lasso(&w_mat, &w, 0.02, &LassoOptions::default()).unwrap();
        for c in [0.5, 3.0] {
            let scaled = lasso(&(&w_mat * c), &(&w * c), 0.02 * c * c, &LassoOptions::default()).unwrap();
            assert!((&scaled.nu - &base.nu).amax() <= 1e-10);
        }
    }

    #[test]
    fn min_l2_cases() {
        let w = DVector::from_vec(vec![3.0, -2.0]);
        let rv = min_l2_solution(&DMatrix::identity(2, 2), &w).unwrap();
        assert!((&rv.nu - &w).amax() < 1e-14);

        let row = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let rv = min_l2_solution(&row, &DVector::from_element(1, 2.0)).unwrap();
        assert!((rv.nu[0] - 1.0).abs() < 1e-12 && (rv.nu[1] - 1.0).abs() < 1e-12);

        let singular = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(min_l2_solution(&singular, &w), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn lp_picks_larger_coefficient() {
        let row = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let rv = l1_oracle_lp(&row, &DVector::from_element(1, 2.0)).unwrap();
        assert!(rv.nu[0].abs() < 1e-14 && (rv.nu[1] - 1.0).abs() < 1e-14);
        assert!((rv.l1_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lp_handles_negative_coordinates() {
        let w_mat = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let w = DVector::from_vec(vec![-2.0, -2.0]);
        let rv = l1_oracle_lp(&w_mat, &w).unwrap();
        assert!((rv.nu[2] + 2.0).abs() < 1e-12);
        assert!((rv.l1_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lp_is_minimal_against_null_space_perturbations() {
        let mut rng = stream(5, 0, 0);
        let w_mat = gaussian_matrix(&mut rng, 3, 8);
        let w = gaussian_vector(&mut rng, 3);
        let lp = l1_oracle_lp(&w_mat, &w).unwrap();
        assert!((&w_mat * &lp.nu - &w).amax() <= 1e-8);
        let svd = w_mat.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        // Rows 3.. of the full V^T would be needed; build null-space projector instead.
        let proj = DMatrix::identity(8, 8) - v_t.transpose() * &v_t;
        for _ in 0..1000 {
            let step = &proj * gaussian_vector(&mut rng, 8) * rng.random::<f64>();
            let other = &lp.nu + step;
            assert!(lp.l1_norm() <= other.lp_norm(1) + 1e-12);
        }
    }

    #[test]
    fn lp_rejects_infeasible_and_large() {
        let rank_one = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(l1_oracle_lp(&rank_one, &DVector::from_vec(vec![1.0, 0.0])).is_err());
        let wide = DMatrix::from_element(1, 201, 1.0);
        assert!(l1_oracle_lp(&wide, &DVector::from_element(1, 1.0)).is_err());
    }

    #[test]
    fn lambda_rule_unit_case() {
        let rule = lambda_rule(1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(rule.gamma, 2160.0);
        assert!((rule.lambda - 45.0 / 2160.0).abs() < 1e-15);
        let scaled = lambda_rule(1, 3.0, 1.0, 1.0).unwrap();
        assert!((scaled.lambda - 3.0 * rule.lambda).abs() < 1e-15);
        assert!(lambda_rule(1, 0.0, 1.0, 1.0).is_err());
        assert!(lambda_rule(0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lambda_rule_second_evaluation() {
        // k = 4, R = 1, C_W = 2, sigma = 0.5, evaluated branch by branch.
        let k32 = 4f64.powf(1.5); // 8
        let first = 2160.0 * k32 * 4.0 / 0.5; // 138240
        let second = (2160.0 * k32 * 8.0 / 0.5_f64).sqrt(); // sqrt(276480)
        let gamma = if first > second { first } else { second };
        let lam = 45.0 * 2.0 * 1.0 * 2.0 * 0.5 / gamma * if 2.0 / gamma > 1.0 { 2.0 / gamma } else { 1.0 };
        let rule = lambda_rule(4, 1.0, 2.0, 0.5).unwrap();
        assert_eq!(rule.gamma, 138240.0);
        assert!((rule.lambda - lam).abs() <= 1e-15 * lam);
    }

    #[test]
    fn norm_bounds_hold_and_are_tight() {
        let mut rng = stream(6, 0, 0);
        let w_mat = gaussian_matrix(&mut rng, 3, 7);
        let w = gaussian_vector(&mut rng, 3);
        let rep = norm_bound_check(&w_mat, &w).unwrap();
        assert!(rep.l1_ok && rep.l2_ok);

        // Orthogonal rows scaled by sigma; w along the weakest direction.
        let w_mat = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 0.5, 0.0]);
        let w = DVector::from_vec(vec![0.0, 1.5]);
        let rep = norm_bound_check(&w_mat, &w).unwrap();
        assert!((rep.nu2_l2 - rep.l2_bound).abs() < 1e-12);
        assert!(rep.l2_ok && rep.l1_ok);

        // k = 1: nu^1 puts all weight on the largest entry, which beats the
        // Euclidean norm of the row, so the sqrt(k) bound is violated.
        let w_mat = DMatrix::from_row_slice(1, 3, &[0.5, -2.0, 1.0]);
        let rep = norm_bound_check(&w_mat, &DVector::from_element(1, 1.0)).unwrap();
        assert!((rep.nu1_l1 - 0.5).abs() < 1e-14);
        assert!((rep.l1_bound - 1.0 / 5.25f64.sqrt()).abs() < 1e-14);
        assert!(!rep.l1_ok);
        assert!(rep.l1_support_ok && rep.l2_ok);
    }

    #[test]
    fn restricted_eigenvalue_is_positive_for_generic_matrix() {
        let mut rng = stream(7, 0, 0);
        let w_mat = gaussian_matrix(&mut rng, 6, 8);
        let re = restricted_eigenvalue_estimate(&w_mat, &[0, 1], 500, 1).unwrap();
        assert!(re > 0.0 && re.is_finite());
        assert!(restricted_eigenvalue_estimate(&w_mat, &[], 10, 1).is_err());
    }

    #[test]
    fn noise_dominance_rule() {
        let w_mat = DMatrix::identity(2, 2);
        let z = DVector::from_vec(vec![0.1, -0.3]);
        assert!(penalty_dominates_noise(&w_mat, &z, 0.6));
        assert!(!penalty_dominates_noise(&w_mat, &z, 0.5));
    }

    #[test]
    fn relevance_json_has_provenance() {
        let rv = RelevanceVector::from_nu(DVector::from_vec(vec![1.0, 0.0]), Solver::LpL1Oracle);
        let v: serde_json::Value = serde_json::from_str(&rv.to_json().unwrap()).unwrap();
        assert_eq!(v["solver"], "lp_l1_oracle");
        assert!(v.get("kkt_residual").is_some());
    }
}
