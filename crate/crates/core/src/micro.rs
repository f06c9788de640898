//! Microscopic solver.
//!
//! Approximates `ỹ = g̃ₓ⁻¹(εh)`, the unique root of `g(x, ỹ) = ε h`, by
//! running `M` steps of size `δt = α ε` on the relaxation dynamics
//!
//! ```text
//! dỹ/dt = g(x, ỹ) / ε - h
//! ```
//!
//! whose only stationary point is the wanted root. For linear `g` with
//! `∂g/∂y = -β` and forward Euler, each step contracts the error by `|1 - αβ|`.

use crate::error::{Error, Result};
use crate::steppers::{Scheme, VectorField};
use crate::system::TwoScaleSystem;
use crate::Vector;

/// Where a micro solve takes its starting value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InitialGuess {
    /// Last value produced by the same approximator (the warm start).
    #[default]
    PreviousValue,
    /// Whatever the caller supplies for each evaluation.
    Supplied,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroConfig {
    /// `δt = alpha · ε`.
    pub alpha: f64,
    /// Number of relaxation steps `M`.
    pub steps: usize,
    pub initial_guess: InitialGuess,
    pub scheme: Scheme,
}

impl Default for MicroConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            steps: 10,
            initial_guess: InitialGuess::default(),
            scheme: Scheme::ForwardEuler,
        }
    }
}

impl MicroConfig {
    pub fn new(alpha: f64, steps: usize) -> Result<Self> {
        let cfg = Self {
            alpha,
            steps,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("micro alpha must be positive, got {}", self.alpha)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("micro step count M must be at least 1".into()));
        }
        Ok(())
    }

    /// Forward-Euler relaxation needs `α·β < 2`; returns a message when the
    /// configured `alpha` violates that for the given dissipativity estimate.
    pub fn stability_warning(&self, beta_hat: f64) -> Option<String> {
        let product = self.alpha * beta_hat;
        (self.scheme == Scheme::ForwardEuler && product >= 2.0)
            .then(|| format!("micro solver may be unstable: alpha * beta_hat = {product} >= 2"))
    }
}

/// Output of one micro solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroSolve {
    pub y: Vector,
    /// Always 1; kept so callers can sum solves uniformly.
    pub calls: usize,
}

struct Relaxation<'a> {
    system: &'a TwoScaleSystem,
    x: &'a Vector,
    h: &'a Vector,
    inv_eps: f64,
}

impl VectorField for Relaxation<'_> {
    fn dim(&self) -> usize {
        self.system.n_y()
    }

    fn eval(&mut self, y: &Vector) -> Result<Vector> {
        Ok(self.system.g(self.x, y) * self.inv_eps - self.h)
    }
}

/// Relaxes `y0` towards the root of `g(x, y) = ε h` with `config.steps` steps.
///
/// `h` is the right-hand side exactly as it appears in `g = ε h`, so callers
/// pass a directional-derivative estimate straight through.
pub fn relax_solve(system: &TwoScaleSystem, x: &Vector, h: &Vector, y0: &Vector, epsilon: f64, config: &MicroConfig) -> Result<MicroSolve> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    system.check_dims(x, y0)?;
    if h.len() != system.n_y() {
        return Err(Error::Dimension(format!(
            "micro right-hand side has length {}, expected {}",
            h.len(),
            system.n_y()
        )));
    }
    let dt = config.alpha * epsilon;
    let mut field = Relaxation {
        system,
        x,
        h,
        inv_eps: 1.0 / epsilon,
    };
    let mut y = y0.clone();
    for m in 0..config.steps {
        y = config.scheme.step(&mut field, &y, dt).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::non_finite(what, format!("micro step {m}")),
            other => other,
        })?;
    }
    Ok(MicroSolve { y, calls: 1 })
}

/// `|g(x, y) - ε h|`, the defect of a micro solution.
pub fn micro_residual(system: &TwoScaleSystem, x: &Vector, y: &Vector, h: &Vector, epsilon: f64) -> f64 {
    (system.g(x, y) - h * epsilon).norm()
}
