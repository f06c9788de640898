//! The slow-fast problem contract.
//!
//! A [`TwoScaleSystem`] describes
//!
//! ```text
//! dx/dt = f(x, y)
//! dy/dt = g(x, y) / ε
//! ```
//!
//! with `g(x, ·)` strongly dissipative, so the frozen-`x` fast dynamics relax
//! to the unique root `γ(x)` of `g(x, y) = 0`. Systems are plain values built
//! from closures, so user-defined problems need no changes to this crate.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Right-hand side `(x, y) -> vector`.
pub type SlowFastFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
/// Jacobian block `(x, y) -> matrix`.
pub type JacobianFn = Arc<dyn Fn(&Vector, &Vector) -> Matrix + Send + Sync>;

/// Immutable description of a dissipative two-scale problem.
#[derive(Clone)]
pub struct TwoScaleSystem {
    name: String,
    n_x: usize,
    n_y: usize,
    f: SlowFastFn,
    g: SlowFastFn,
    g_jac_y: Option<JacobianFn>,
    g_jac_x: Option<JacobianFn>,
    beta_hat: f64,
}

impl fmt::Debug for TwoScaleSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoScaleSystem")
            .field("name", &self.name)
            .field("n_x", &self.n_x)
            .field("n_y", &self.n_y)
            .field("analytic_jacobians", &self.has_analytic_jacobians())
            .field("beta_hat", &self.beta_hat)
            .finish()
    }
}

impl TwoScaleSystem {
    /// Builds a system from its slow velocity `f` and fast drift `g` (the
    /// latter without the `1/ε` factor). `beta_hat` is the estimate of the
    /// dissipativity constant used by the coupled-stage termination test.
    pub fn new<F, G>(name: impl Into<String>, n_x: usize, n_y: usize, f: F, g: G, beta_hat: f64) -> Result<Self>
    where
        F: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
        G: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        if n_x == 0 || n_y == 0 {
            return Err(Error::InvalidConfig(format!(
                "dimensions must be positive (n_x = {n_x}, n_y = {n_y})"
            )));
        }
        if !(beta_hat > 0.0 && beta_hat.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta_hat must be positive and finite, got {beta_hat}"
            )));
        }
        Ok(Self {
            name: name.into(),
            n_x,
            n_y,
            f: Arc::new(f),
            g: Arc::new(g),
            g_jac_y: None,
            g_jac_x: None,
            beta_hat,
        })
    }

    /// Attaches analytic Jacobians `∂g/∂y` (n_y×n_y) and `∂g/∂x` (n_y×n_x).
    pub fn with_jacobians<JY, JX>(mut self, g_jac_y: JY, g_jac_x: JX) -> Self
    where
        JY: Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
        JX: Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
    {
        self.g_jac_y = Some(Arc::new(g_jac_y));
        self.g_jac_x = Some(Arc::new(g_jac_x));
        self
    }

    /// Returns a copy without analytic Jacobians, forcing finite differences.
    pub fn without_jacobians(&self) -> Self {
        Self {
            g_jac_y: None,
            g_jac_x: None,
            ..self.clone()
        }
    }

    pub fn with_beta_hat(mut self, beta_hat: f64) -> Result<Self> {
        if !(beta_hat > 0.0 && beta_hat.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta_hat must be positive and finite, got {beta_hat}"
            )));
        }
        self.beta_hat = beta_hat;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.g_jac_y.is_some() && self.g_jac_x.is_some()
    }

    #[inline]
    pub fn f(&self, x: &Vector, y: &Vector) -> Vector {
        let out = (self.f)(x, y);
        debug_assert_eq!(out.len(), self.n_x, "f returned the wrong length");
        out
    }

    #[inline]
    pub fn g(&self, x: &Vector, y: &Vector) -> Vector {
        let out = (self.g)(x, y);
        debug_assert_eq!(out.len(), self.n_y, "g returned the wrong length");
        out
    }

    pub fn check_dims(&self, x: &Vector, y: &Vector) -> Result<()> {
        if x.len() != self.n_x || y.len() != self.n_y {
            return Err(Error::Dimension(format!(
                "{}: expected (n_x, n_y) = ({}, {}), got ({}, {})",
                self.name,
                self.n_x,
                self.n_y,
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    /// `(∂g/∂y, ∂g/∂x)` at `(x, y)`, see [`jacobian_g`].
    pub fn jacobian_g(&self, x: &Vector, y: &Vector) -> (Matrix, Matrix) {
        jacobian_g(self, x, y)
    }
}

/// Jacobians of `g`: analytic when the system supplies them, otherwise
/// central differences with step `√eps_mach · max(1, |component|)`.
pub fn jacobian_g(system: &TwoScaleSystem, x: &Vector, y: &Vector) -> (Matrix, Matrix) {
    match (&system.g_jac_y, &system.g_jac_x) {
        (Some(jy), Some(jx)) => (jy(x, y), jx(x, y)),
        _ => finite_difference_jacobian_g(system, x, y),
    }
}

/// Central-difference Jacobians of `g`, regardless of analytic availability.
pub fn finite_difference_jacobian_g(system: &TwoScaleSystem, x: &Vector, y: &Vector) -> (Matrix, Matrix) {
    let n_y = system.n_y();
    let mut g_y = Matrix::zeros(n_y, n_y);
    let mut y_pert = y.clone();
    for j in 0..n_y {
        let h = fd_step(y[j]);
        y_pert[j] = y[j] + h;
        let plus = system.g(x, &y_pert);
        y_pert[j] = y[j] - h;
        let minus = system.g(x, &y_pert);
        y_pert[j] = y[j];
        g_y.set_column(j, &((plus - minus) / (2.0 * h)));
    }

    let mut g_x = Matrix::zeros(n_y, system.n_x());
    let mut x_pert = x.clone();
    for j in 0..system.n_x() {
        let h = fd_step(x[j]);
        x_pert[j] = x[j] + h;
        let plus = system.g(&x_pert, y);
        x_pert[j] = x[j] - h;
        let minus = system.g(&x_pert, y);
        x_pert[j] = x[j];
        g_x.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    (g_y, g_x)
}

fn fd_step(component: f64) -> f64 {
    f64::EPSILON.sqrt() * component.abs().max(1.0)
}

/// Axis-aligned region of state space used to probe dissipativity.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub x_lo: Vector,
    pub x_hi: Vector,
    pub y_lo: Vector,
    pub y_hi: Vector,
}

impl SampleBox {
    pub fn new(x_lo: Vector, x_hi: Vector, y_lo: Vector, y_hi: Vector) -> Result<Self> {
        if x_lo.len() != x_hi.len() || y_lo.len() != y_hi.len() {
            return Err(Error::Dimension("sample box bounds differ in length".into()));
        }
        let ordered = x_lo.iter().zip(x_hi.iter()).all(|(lo, hi)| lo <= hi) && y_lo.iter().zip(y_hi.iter()).all(|(lo, hi)| lo <= hi);
        if !ordered {
            return Err(Error::InvalidConfig("sample box has lo > hi".into()));
        }
        Ok(Self { x_lo, x_hi, y_lo, y_hi })
    }

    /// The cube `[-radius, radius]^(n_x + n_y)`.
    pub fn centered(n_x: usize, n_y: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig(format!("box radius must be positive, got {radius}")));
        }
        Self::new(
            Vector::from_element(n_x, -radius),
            Vector::from_element(n_x, radius),
            Vector::from_element(n_y, -radius),
            Vector::from_element(n_y, radius),
        )
    }

    /// Smallest box containing all the given `(x, y)` pairs.
    pub fn bounding<'a>(points: impl IntoIterator<Item = (&'a Vector, &'a Vector)>) -> Option<Self> {
        let mut iter = points.into_iter();
        let (x0, y0) = iter.next()?;
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (x0.clone(), x0.clone(), y0.clone(), y0.clone());
        for (x, y) in iter {
            x_lo = x_lo.inf(x);
            x_hi = x_hi.sup(x);
            y_lo = y_lo.inf(y);
            y_hi = y_hi.sup(y);
        }
        Some(Self { x_lo, x_hi, y_lo, y_hi })
    }
}

fn sample_in(rng: &mut ChaCha8Rng, lo: &Vector, hi: &Vector) -> Vector {
    Vector::from_iterator(
        lo.len(),
        lo.iter()
            .zip(hi.iter())
            .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l }),
    )
}

/// Empirical dissipativity constant of `g(x, ·)` over a box.
///
/// Returns the minimum over `sample_count` random triples `(x, y, ŷ)` of
/// `-⟨g(x,y) - g(x,ŷ), y - ŷ⟩ / |y - ŷ|²`. A negative result means the
/// fast dynamics are not dissipative somewhere in the box.
pub fn check_dissipativity(system: &TwoScaleSystem, sample_count: usize, region: &SampleBox, seed: u64) -> Result<f64> {
    if sample_count == 0 {
        return Err(Error::InvalidConfig("sample_count must be at least 1".into()));
    }
    if region.x_lo.len() != system.n_x() || region.y_lo.len() != system.n_y() {
        return Err(Error::Dimension(format!(
            "sample box is ({}, {})-dimensional, system {} is ({}, {})",
            region.x_lo.len(),
            region.y_lo.len(),
            system.name(),
            system.n_x(),
            system.n_y()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimate = f64::INFINITY;
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    while accepted < sample_count {
        attempts += 1;
        let x = sample_in(&mut rng, &region.x_lo, &region.x_hi);
        let y = sample_in(&mut rng, &region.y_lo, &region.y_hi);
        let mut y_hat = sample_in(&mut rng, &region.y_lo, &region.y_hi);
        let mut dy = &y - &y_hat;
        if dy.norm_squared() < 1e-20 {
            // degenerate fast box: perturb along the first axis
            y_hat[0] += 1e-6;
            dy = &y - &y_hat;
        }
        let g_y = system.g(&x, &y);
        let g_hat = system.g(&x, &y_hat);
        if !(g_y.iter().all(|v| v.is_finite()) && g_hat.iter().all(|v| v.is_finite())) {
            return Err(Error::non_finite("g during dissipativity probe", format!("sample {attempts}")));
        }
        let ratio = -(g_y - g_hat).dot(&dy) / dy.norm_squared();
        estimate = estimate.min(ratio);
        accepted += 1;
    }
    Ok(estimate)
}
