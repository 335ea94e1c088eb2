//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Thin QR factorization `a = q * r` with `q` having orthonormal columns.
///
/// Columns of `q` are flipped so that the first entry with magnitude above
/// `1e-12` is positive; the matching rows of `r` are flipped too, so the
/// product is unchanged.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..q.ncols() {
        let pivot = q.column(j).iter().copied().find(|v| v.abs() > 1e-12);
        if let Some(p) = pivot {
            if p < 0.0 {
                q.column_mut(j).neg_mut();
                r.row_mut(j).neg_mut();
            }
        }
    }
    (q, r)
}

pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    if a.is_empty() {
        return DVector::zeros(0);
    }
    let mut s = a.clone().svd(false, false).singular_values;
    s.as_mut_slice().sort_by(|x, y| y.total_cmp(x));
    s
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    singular_values(a).iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn sigma_max(a: &DMatrix<f64>) -> f64 {
    singular_values(a).iter().copied().fold(0.0, f64::max)
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD.
///
/// Singular values at or below `rel_tol * sigma_max` are treated as zero.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DVector::zeros(n);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(n);
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut x = DVector::zeros(n);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * smax {
            let coef = u.column(i).dot(b) / s;
            x += v_t.row(i).transpose() * coef;
        }
    }
    x
}

/// Solves a symmetric positive (semi)definite system, falling back to the
/// SVD pseudoinverse when Cholesky fails.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    match a.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => min_norm_lstsq(a, b, 1e-14),
    }
}

/// Orthonormal basis of the orthogonal complement of `first` extended to
/// `cols` columns; column 0 is `first / |first|`.
pub fn complete_orthonormal(first: &DVector<f64>, extra: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norm = first.norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("zero leading vector".into()));
    }
    let cols = 1 + extra.ncols();
    if extra.nrows() != first.len() || cols > first.len() {
        return Err(Error::Dimension("cannot complete basis".into()));
    }
    let mut m = DMatrix::zeros(first.len(), cols);
    m.set_column(0, &(first / norm));
    for j in 0..extra.ncols() {
        m.set_column(j + 1, &extra.column(j));
    }
    // Two rounds of modified Gram-Schmidt keep the leading column exact.
    for j in 1..cols {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let ci = m.column(i).clone_owned();
                m.column_mut(j).axpy(-proj, &ci, 1.0);
            }
        }
        let nj = m.column(j).norm();
        if nj < 1e-10 {
            return Err(Error::Degenerate("dependent columns in basis completion".into()));
        }
        m.column_mut(j).scale_mut(1.0 / nj);
    }
    Ok(m)
}

/// `max |a^T a - I|` over entries.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let g = a.transpose() * a;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn all_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> bool {
    values.into_iter().all(|v| v.is_finite())
}
