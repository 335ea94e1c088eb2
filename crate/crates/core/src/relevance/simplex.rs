//! Dense two-phase tableau simplex for `min c^T x  s.t.  A x = b, x >= 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index enters, lowest basis
//! index breaks ratio ties), which cannot cycle. The returned point is a basic
//! feasible solution: at most `rows(A)` entries are nonzero. Sized for small
//! verification problems, not for production LPs.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Basic variable of each constraint row.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

struct Tableau {
    // (m + 1) x (cols + 1); last row is the reduced-cost row, last column the rhs.
    t: DMatrix<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.t.nrows() - 1
    }

    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        self.t.row_mut(row).scale_mut(1.0 / p);
        let pivot_row = self.t.row(row).clone_owned();
        for r in 0..self.t.nrows() {
            if r != row {
                let f = self.t[(r, col)];
                if f != 0.0 {
                    let mut target = self.t.row_mut(r);
                    target -= &pivot_row * f;
                }
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs Bland's rule over columns `0..allowed`.
    fn optimize(&mut self, allowed: usize, tol: f64, max_pivots: usize) -> Result<()> {
        let obj = self.rows();
        let rhs = self.rhs_col();
        loop {
            if self.pivots >= max_pivots {
                return Err(Error::PivotLimit(max_pivots));
            }
            let Some(enter) = (0..allowed).find(|&j| self.t[(obj, j)] < -tol) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..obj {
                let a = self.t[(r, enter)];
                if a > tol {
                    let ratio = self.t[(r, rhs)] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - tol || ((ratio - lratio).abs() <= tol && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, enter),
                None => return Err(Error::Degenerate("unbounded linear program".into())),
            }
        }
    }
}

/// Solves `min c^T x` over `{x >= 0 : A x = b}`.
///
/// Returns [`Error::Infeasible`] when the constraints admit no nonnegative
/// point. Redundant equality rows are dropped.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<LpSolution> {
    let (m, n) = a.shape();
    if b.len() != m || c.len() != n {
        return Err(Error::Dimension("LP data shapes disagree".into()));
    }
    let scale = a.amax().max(b.amax()).max(1.0);
    let tol = 1e-11 * scale;
    let max_pivots = 50 * (m + n) + 1000;

    // Columns: n structural, m artificial, rhs.
    let mut t = DMatrix::zeros(m + 1, n + m + 1);
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(r, j)] = sign * a[(r, j)];
        }
        t[(r, n + r)] = 1.0;
        t[(r, n + m)] = sign * b[r];
    }
    // Phase-one reduced costs: minimize the sum of artificials.
    for j in 0..n {
        t[(m, j)] = -(0..m).map(|r| t[(r, j)]).sum::<f64>();
    }
    t[(m, n + m)] = -(0..m).map(|r| t[(r, n + m)]).sum::<f64>();
    let mut tab = Tableau { t, basis: (n..n + m).collect(), pivots: 0 };
    tab.optimize(n, tol, max_pivots)?;
    if -tab.t[(m, n + m)] > 1e-9 * scale {
        return Err(Error::Infeasible);
    }

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    let mut redundant = Vec::new();
    for r in 0..m {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.t[(r, j)].abs() > tol) {
                Some(j) => tab.pivot(r, j),
                None => redundant.push(r),
            }
        }
    }
    if !redundant.is_empty() {
        let keep: Vec<usize> = (0..=m).filter(|r| !redundant.contains(r)).collect();
        tab.t = tab.t.select_rows(keep.iter());
        tab.basis = keep.iter().filter(|&&r| r < m).map(|&r| tab.basis[r]).collect();
    }
    let rows = tab.rows();
    let rhs = tab.rhs_col();

    // Phase two: reduced costs c_j - c_B^T B^{-1} A_j, artificial columns barred.
    for j in 0..tab.t.ncols() {
        let cj = if j < n { c[j] } else { 0.0 };
        let mut v = if j == rhs { 0.0 } else { cj };
        for r in 0..rows {
            let cb = c[tab.basis[r]];
            v -= cb * tab.t[(r, j)];
        }
        tab.t[(rows, j)] = v;
    }
    tab.optimize(n, tol, max_pivots)?;

    // Recover the vertex from the original data for accuracy.
    let basis = tab.basis.clone();
    let rows_kept: Vec<usize> = (0..m).filter(|r| !redundant.contains(r)).collect();
    let bmat = DMatrix::from_fn(rows_kept.len(), basis.len(), |i, j| a[(rows_kept[i], basis[j])]);
    let brhs = DVector::from_fn(rows_kept.len(), |i, _| b[rows_kept[i]]);
    let xb = bmat
        .lu()
        .solve(&brhs)
        .unwrap_or_else(|| DVector::from_fn(basis.len(), |i, _| tab.t[(i, rhs)]));
    let mut x = DVector::zeros(n);
    for (i, &j) in basis.iter().enumerate() {
        x[j] = xb[i].max(0.0);
    }
    let objective = c.dot(&x);
    Ok(LpSolution { x, objective, basis, pivots: tab.pivots })
}
