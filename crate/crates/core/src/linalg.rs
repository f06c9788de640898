//! Small dense kernels. Fast dimensions are tiny, so everything is dense LU
//! or SVD on `DMatrix`.

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// 2-norm condition number from the singular values (`inf` when singular).
pub fn condition_number(a: &Matrix) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// LU factorisation that refuses ill-conditioned matrices.
pub struct CheckedLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CheckedLu {
    pub fn new(a: &Matrix, what: &'static str) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "{what}: expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let condition = condition_number(a);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Singular { what, condition });
        }
        Ok(Self { lu: a.clone().lu() })
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        self.lu.solve(b).expect("LU of a well-conditioned matrix is invertible")
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        self.lu.solve(b).expect("LU of a well-conditioned matrix is invertible")
    }
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let ata = a.transpose() * a;
    let n = ata.nrows();
    let mut v = Vector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = &ata * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}
