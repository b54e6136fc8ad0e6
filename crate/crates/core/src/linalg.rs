//! Small dense helpers shared by the problem and dual modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Relative pivot floor below which a symmetric matrix is not treated as
/// positive definite.
pub const PD_RELATIVE_FLOOR: f64 = 1e-10;

/// Pivot scale of a symmetric matrix: `1 + max |diag|`.
pub fn pivot_scale(m: &DMatrix<f64>) -> f64 {
    1.0 + m.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Positive-definiteness threshold for pivots of `m`.
pub fn pd_threshold(m: &DMatrix<f64>) -> f64 {
    PD_RELATIVE_FLOOR * pivot_scale(m)
}

/// Cholesky factor of a symmetric matrix together with its smallest pivot.
///
/// Pivots are the squared diagonal entries of the lower factor. The factor is
/// only kept when every pivot clears [`pd_threshold`].
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    pub factor: Option<Cholesky<f64, Dyn>>,
    pub min_pivot: f64,
}

impl PivotedCholesky {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let threshold = pd_threshold(m);
        match Cholesky::new(m.clone()) {
            Some(chol) => {
                let min_pivot = chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|d| d * d)
                    .fold(f64::INFINITY, f64::min);
                let min_pivot = if m.nrows() == 0 {
                    f64::INFINITY
                } else {
                    min_pivot
                };
                if min_pivot > threshold {
                    Self {
                        factor: Some(chol),
                        min_pivot,
                    }
                } else {
                    Self {
                        factor: None,
                        min_pivot,
                    }
                }
            }
            None => Self {
                factor: None,
                min_pivot: leading_failure_pivot(m),
            },
        }
    }

    pub fn is_pd(&self) -> bool {
        self.factor.is_some()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        self.factor.as_ref().map(|c| c.solve(rhs))
    }
}

/// Runs an unguarded Cholesky elimination and returns the first
/// non-positive pivot it meets.
fn leading_failure_pivot(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return d;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    0.0
}

/// Largest absolute entry, zero for an empty matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Checks `m == mᵀ` within `1e-12 · max |entry|`.
pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let tol = 1e-12 * max_abs(m);
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let r = half_diff.hypot(b);
    (mean - r, mean + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_and_indefinite() {
        let pd = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = PivotedCholesky::new(&pd);
        assert!(f.is_pd());
        assert!((f.min_pivot - (3.0 - 0.25)).abs() < 1e-12);

        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let f = PivotedCholesky::new(&indef);
        assert!(!f.is_pd());
        assert!(f.min_pivot <= 0.0);
    }

    #[test]
    fn tiny_pivot_is_not_pd() {
        let m = DMatrix::from_row_slice(1, 1, &[1e-12]);
        assert!(!PivotedCholesky::new(&m).is_pd());
    }

    #[test]
    fn symmetric_2x2_eigs() {
        let (lo, hi) = sym2_eigenvalues(2.0, 1.0, 2.0);
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetry_check() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(is_symmetric(&s));
        assert!(!is_symmetric(&a));
    }
}
