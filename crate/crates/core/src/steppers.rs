//! Explicit one-step integrators `z_{n+1} = z_n + dt·φ(z_n, dt)`.
//!
//! Fields are autonomous. A field may still be told the stage time offset
//! inside the current step through [`VectorField::eval_stage`]; the reduced
//! slow dynamics use this to extrapolate warm starts.

use crate::error::{Error, Result};
use crate::Vector;

/// An autonomous vector field `z -> dz/dt`.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval(&mut self, state: &Vector) -> Result<Vector>;

    /// Evaluation at a stage located `offset` after the start of the step.
    fn eval_stage(&mut self, _offset: f64, state: &Vector) -> Result<Vector> {
        self.eval(state)
    }
}

/// Adapter turning an infallible closure into a [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: FnMut(&Vector) -> Vector,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: FnMut(&Vector) -> Vector,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&mut self, state: &Vector) -> Result<Vector> {
        Ok((self.f)(state))
    }
}

/// Named one-step scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scheme {
    ForwardEuler,
    #[default]
    Rk4,
}

impl Scheme {
    pub fn step<V: VectorField + ?Sized>(self, field: &mut V, state: &Vector, dt: f64) -> Result<Vector> {
        match self {
            Scheme::ForwardEuler => euler_step(field, state, dt),
            Scheme::Rk4 => rk4_step(field, state, dt),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ForwardEuler => "fe",
            Scheme::Rk4 => "rk4",
        }
    }
}

fn ensure_finite(state: Vector, what: &'static str) -> Result<Vector> {
    if state.iter().all(|v| v.is_finite()) {
        Ok(state)
    } else {
        Err(Error::non_finite(what, "stepper output"))
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")))
    }
}

/// `state + dt·field(state)`.
pub fn euler_step<V: VectorField + ?Sized>(field: &mut V, state: &Vector, dt: f64) -> Result<Vector> {
    check_dt(dt)?;
    let k1 = field.eval_stage(0.0, state)?;
    ensure_finite(state + k1 * dt, "forward Euler")
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<V: VectorField + ?Sized>(field: &mut V, state: &Vector, dt: f64) -> Result<Vector> {
    check_dt(dt)?;
    let half = 0.5 * dt;
    let k1 = field.eval_stage(0.0, state)?;
    let k2 = field.eval_stage(half, &(state + &k1 * half))?;
    let k3 = field.eval_stage(half, &(state + &k2 * half))?;
    let k4 = field.eval_stage(dt, &(state + &k3 * dt))?;
    let incr = (k1 + k4 + (k2 + k3) * 2.0) * (dt / 6.0);
    ensure_finite(state + incr, "RK4")
}

/// Number of steps of size `dt` needed to cover `span`, treating spans that
/// are an integer multiple of `dt` up to rounding as exact.
pub fn steps_to_cover(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let ratio = span / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn decay() -> FnField<impl FnMut(&Vector) -> Vector> {
        FnField::new(1, |z: &Vector| -z)
    }

    #[test]
    fn zero_field_is_identity() {
        let mut zero = FnField::new(2, |z: &Vector| Vector::zeros(z.len()));
        let z = dvector![1.5, -3.0];
        assert_eq!(euler_step(&mut zero, &z, 0.3).unwrap(), z);
        assert_eq!(rk4_step(&mut zero, &z, 0.3).unwrap(), z);
    }

    #[test]
    fn constant_field_is_exact() {
        let mut c = FnField::new(1, |_z: &Vector| dvector![2.0]);
        let z = dvector![1.0];
        assert_relative_eq!(euler_step(&mut c, &z, 0.25).unwrap()[0], 1.5);
        assert_relative_eq!(rk4_step(&mut c, &z, 0.25).unwrap()[0], 1.5);
    }

    #[test]
    fn euler_linear_decay() {
        let z = euler_step(&mut decay(), &dvector![1.0], 0.1).unwrap();
        assert_relative_eq!(z[0], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn euler_lands_on_relaxation_target_when_dt_equals_eps() {
        let (x, eps) = (0.7, 1e-3);
        let mut relax = FnField::new(1, move |z: &Vector| dvector![(x - z[0]) / eps]);
        let z = euler_step(&mut relax, &dvector![5.0], eps).unwrap();
        assert_relative_eq!(z[0], x, epsilon = 1e-14);
    }

    #[test]
    fn rk4_growth_matches_taylor_polynomial() {
        let mut grow = FnField::new(1, |z: &Vector| z.clone());
        let z = rk4_step(&mut grow, &dvector![1.0], 0.1).unwrap();
        // 1 + h + h²/2 + h³/6 + h⁴/24
        assert_relative_eq!(z[0], 1.1051708333333334, epsilon = 1e-15);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut z = dvector![1.0];
            let mut f = decay();
            for _ in 0..n {
                z = rk4_step(&mut f, &z, dt).unwrap();
            }
            (z[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!((14.0..18.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        assert!(rk4_step(&mut decay(), &dvector![1.0], 0.0).is_err());
        let mut blow = FnField::new(1, |_z: &Vector| dvector![f64::NAN]);
        let err = euler_step(&mut blow, &dvector![1.0], 0.1).unwrap_err();
        assert!(err.is_non_finite());
    }

    #[test]
    fn stage_offsets_follow_rk4_tableau() {
        struct Probe(Vec<f64>);
        impl VectorField for Probe {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&mut self, _s: &Vector) -> Result<Vector> {
                Ok(dvector![0.0])
            }
            fn eval_stage(&mut self, offset: f64, s: &Vector) -> Result<Vector> {
                self.0.push(offset);
                self.eval(s)
            }
        }
        let mut p = Probe(Vec::new());
        rk4_step(&mut p, &dvector![0.0], 0.2).unwrap();
        assert_eq!(p.0, vec![0.0, 0.1, 0.1, 0.2]);
    }

    #[test]
    fn step_counts() {
        assert_eq!(steps_to_cover(4.0, 1e-5), 400_000);
        assert_eq!(steps_to_cover(1.0, 0.3), 4);
        assert_eq!(steps_to_cover(0.0, 0.1), 0);
        assert_eq!(steps_to_cover(4.0 - 4e-4, 5e-3), 800);
    }

    proptest::proptest! {
        #[test]
        fn rk4_scalar_linear_is_degree_four_taylor(lambda in -5.0f64..5.0, h in 1e-3f64..0.5) {
            let mut f = FnField::new(1, move |z: &Vector| z * lambda);
            let z = rk4_step(&mut f, &dvector![1.0], h).unwrap()[0];
            let q = lambda * h;
            let taylor = 1.0 + q + q * q / 2.0 + q.powi(3) / 6.0 + q.powi(4) / 24.0;
            proptest::prop_assert!((z - taylor).abs() <= 1e-12 * taylor.abs().max(1.0));
        }
    }
}
