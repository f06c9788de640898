//! The linear two-scale problem
//!
//! ```text
//! dx/dt = A11 x + A12 y + b1,    ε dy/dt = A21 x + A22 y + b2
//! ```
//!
//! whose slow manifold is the affine graph `y = C x + d`. Matching terms in
//! the manifold equation gives the Riccati system
//!
//! ```text
//! ε C A12 C + ε C A11 - A22 C - A21 = 0,    (A22 - ε C A12) d = ε C b1 - b2
//! ```
//!
//! For small ε the map `C ↦ -A22⁻¹A21 + ε A22⁻¹ C A11 + ε A22⁻¹ C A12 C` is a
//! contraction, and its iterates `C_k` are exactly the manifold iteration
//! restricted to affine graphs, so `C_k - C* = O(ε^{k+1})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, CheckedLu};
use crate::system::TwoScaleSystem;
use crate::{Matrix, Vector};

/// Symmetric-part eigenvalues of `A22` must lie below `-NEG_DEF_TOL`.
const NEG_DEF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTwoScale {
    pub a11: Matrix,
    pub a12: Matrix,
    pub a21: Matrix,
    pub a22: Matrix,
    pub b1: Vector,
    pub b2: Vector,
}

impl LinearTwoScale {
    pub fn new(a11: Matrix, a12: Matrix, a21: Matrix, a22: Matrix, b1: Vector, b2: Vector) -> Result<Self> {
        let n_x = a11.nrows();
        let n_y = a22.nrows();
        let shapes = [
            ("A11", a11.shape(), (n_x, n_x)),
            ("A12", a12.shape(), (n_x, n_y)),
            ("A21", a21.shape(), (n_y, n_x)),
            ("A22", a22.shape(), (n_y, n_y)),
            ("b1", b1.shape(), (n_x, 1)),
            ("b2", b2.shape(), (n_y, 1)),
        ];
        for (name, got, want) in shapes {
            if got != want || n_x == 0 || n_y == 0 {
                return Err(Error::Dimension(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        let sym = (&a22 + a22.transpose()) * 0.5;
        let top = sym.symmetric_eigenvalues().max();
        if !(top < -NEG_DEF_TOL) {
            return Err(Error::InvalidConfig(format!(
                "A22 must be negative definite; largest symmetric-part eigenvalue is {top}"
            )));
        }
        Ok(Self {
            a11,
            a12,
            a21,
            a22,
            b1,
            b2,
        })
    }

    /// Scalar system `dx/dt = y`, `ε dy/dt = x - y`.
    pub fn naive_scalar() -> Self {
        let one = |v: f64| Matrix::from_element(1, 1, v);
        Self::new(one(0.0), one(1.0), one(1.0), one(-1.0), Vector::zeros(1), Vector::zeros(1)).expect("scalar naive system is valid")
    }

    /// Random instance with entries in `[-1, 1]` and `A22 = -(I + RRᵀ/n_y) + K - Kᵀ`,
    /// whose symmetric part is at most `-I`.
    pub fn random(n_x: usize, n_y: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..=1.0));
        let a11 = m(n_x, n_x);
        let a12 = m(n_x, n_y);
        let a21 = m(n_y, n_x);
        let r = m(n_y, n_y);
        let k = m(n_y, n_y) * 0.5;
        let b1 = m(n_x, 1).column(0).into_owned();
        let b2 = m(n_y, 1).column(0).into_owned();
        let a22 = -(Matrix::identity(n_y, n_y) + &r * r.transpose() / n_y as f64) + &k - k.transpose();
        Self::new(a11, a12, a21, a22, b1, b2)
    }

    pub fn n_x(&self) -> usize {
        self.a11.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.a22.nrows()
    }

    /// Smallest eigenvalue of `-(A22 + A22ᵀ)/2`, the dissipativity constant.
    pub fn dissipativity(&self) -> f64 {
        let sym = (&self.a22 + self.a22.transpose()) * -0.5;
        sym.symmetric_eigenvalues().min()
    }

    /// The same problem as a general [`TwoScaleSystem`] with exact Jacobians.
    pub fn to_system(&self, name: &str) -> Result<TwoScaleSystem> {
        let (a11, a12, b1) = (self.a11.clone(), self.a12.clone(), self.b1.clone());
        let (a21, a22, b2) = (self.a21.clone(), self.a22.clone(), self.b2.clone());
        let (jy, jx) = (self.a22.clone(), self.a21.clone());
        Ok(TwoScaleSystem::new(
            name,
            self.n_x(),
            self.n_y(),
            move |x, y| &a11 * x + &a12 * y + &b1,
            move |x, y| &a21 * x + &a22 * y + &b2,
            self.dissipativity(),
        )?
        .with_jacobians(move |_, _| jy.clone(), move |_, _| jx.clone()))
    }

    /// Norm of `ε C A12 C + ε C A11 - A22 C - A21`.
    pub fn residual_c(&self, c: &Matrix, epsilon: f64) -> f64 {
        let r = (c * &self.a12 * c + c * &self.a11) * epsilon - &self.a22 * c - &self.a21;
        spectral_norm(&r)
    }

    /// Norm of `(A22 - ε C A12) d - ε C b1 + b2`.
    pub fn residual_d(&self, c: &Matrix, d: &Vector, epsilon: f64) -> f64 {
        ((&self.a22 - c * &self.a12 * epsilon) * d - c * &self.b1 * epsilon + &self.b2).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub c_star: Matrix,
    pub d_star: Vector,
    pub residual_c: f64,
    pub residual_d: f64,
    pub iterations: usize,
}

struct Iteration<'a> {
    sys: &'a LinearTwoScale,
    a22: CheckedLu,
    epsilon: f64,
    c0: Matrix,
    d0: Vector,
}

impl<'a> Iteration<'a> {
    fn new(sys: &'a LinearTwoScale, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be non-negative, got {epsilon}")));
        }
        let a22 = CheckedLu::new(&sys.a22, "A22")?;
        let c0 = -a22.solve_matrix(&sys.a21);
        let d0 = -a22.solve(&sys.b2);
        Ok(Self { sys, a22, epsilon, c0, d0 })
    }

    fn next_c(&self, c: &Matrix) -> Matrix {
        let inner = (c * &self.sys.a11 + c * &self.sys.a12 * c) * self.epsilon;
        &self.c0 + self.a22.solve_matrix(&inner)
    }

    fn next_d(&self, c: &Matrix, d: &Vector) -> Vector {
        let inner = (c * &self.sys.b1 + c * &self.sys.a12 * d) * self.epsilon;
        &self.d0 + self.a22.solve(&inner)
    }
}

/// Solves the Riccati system by fixed-point iteration on `C`, stopping when
/// both the update and the residual are at most `tol` (spectral norms), then
/// solves the linear equation for `d`.
pub fn riccati_fixed_point(sys: &LinearTwoScale, epsilon: f64, tol: f64, max_iter: usize) -> Result<RiccatiSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let it = Iteration::new(sys, epsilon)?;
    let mut c = it.c0.clone();
    let mut iterations = 0;
    loop {
        let next = it.next_c(&c);
        iterations += 1;
        let update = spectral_norm(&(&next - &c));
        c = next;
        if !update.is_finite() || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iterations,
                last_update: update,
            });
        }
        if update <= tol && sys.residual_c(&c, epsilon) <= tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Divergence {
                iterations,
                last_update: update,
            });
        }
    }
    let lhs = &sys.a22 - &c * &sys.a12 * epsilon;
    let rhs = &c * &sys.b1 * epsilon - &sys.b2;
    let d = CheckedLu::new(&lhs, "A22 - eps C A12")?.solve(&rhs);
    Ok(RiccatiSolution {
        residual_c: sys.residual_c(&c, epsilon),
        residual_d: sys.residual_d(&c, &d, epsilon),
        c_star: c,
        d_star: d,
        iterations,
    })
}

/// The explicit iterates `(C_k, d_k)` starting from `C₀ = -A22⁻¹A21`,
/// `d₀ = -A22⁻¹b2`.
pub fn riccati_iterates(sys: &LinearTwoScale, epsilon: f64, k: usize) -> Result<(Matrix, Vector)> {
    let it = Iteration::new(sys, epsilon)?;
    let (mut c, mut d) = (it.c0.clone(), it.d0.clone());
    for _ in 0..k {
        let d_next = it.next_d(&c, &d);
        c = it.next_c(&c);
        d = d_next;
    }
    Ok((c, d))
}

/// `(C_k - C*, d_k - d*)` propagated through the error recursion
///
/// ```text
/// E_{j+1} = ε A22⁻¹ (E_j A11 + C_j A12 E_j + E_j A12 C*)
/// e_{j+1} = ε A22⁻¹ (E_j b1 + C_j A12 e_j + E_j A12 d*)
/// ```
///
/// Algebraically equal to subtracting the fixed point from the iterates, but
/// each step scales an already small quantity by ε instead of cancelling two
/// O(1) matrices, so errors far below machine epsilon stay resolved.
pub fn riccati_iterate_errors(sys: &LinearTwoScale, epsilon: f64, k: usize, fixed: &RiccatiSolution) -> Result<(Matrix, Vector)> {
    let it = Iteration::new(sys, epsilon)?;
    let (cs, ds) = (&fixed.c_star, &fixed.d_star);
    let mut c = it.c0.clone();
    let mut e_c = &it.c0 - cs;
    let mut e_d = &it.d0 - ds;
    for _ in 0..k {
        let inner_c = &e_c * &sys.a11 + &c * &sys.a12 * &e_c + &e_c * &sys.a12 * cs;
        let inner_d = &e_c * &sys.b1 + &c * &sys.a12 * &e_d + &e_c * &sys.a12 * ds;
        let next_e_c = it.a22.solve_matrix(&inner_c) * epsilon;
        e_d = it.a22.solve(&inner_d) * epsilon;
        c = it.next_c(&c);
        e_c = next_e_c;
    }
    Ok((e_c, e_d))
}
