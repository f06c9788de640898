//! Approximations `Γ̂_k(x, ε)` of the slow invariant manifold.
//!
//! The exact manifold `y = Γ(x, ε)` solves `g(x, Γ) = ε ∇ₓΓ · f(x, Γ)`. The
//! iteration
//!
//! ```text
//! Γ_0 = γ,    g(x, Γ_{k+1}) = ε ∇ₓΓ_k · f(x, Γ_k)
//! ```
//!
//! gains one power of ε per step. Both evaluators below realise it with the
//! microscopic solver and numerical directional derivatives:
//!
//! * [`hmm_type2`] applies the iteration literally at every level;
//! * [`hmm_type1`] uses the closed forms of `γ + εγ₁` for `k ≤ 2` (at the
//!   price of Jacobians of `g`) and recurses like type 2 above that.
//!
//! The recursion is evaluated without memoisation so the number of micro
//! solves per evaluation is exactly [`micro_call_count`].

use crate::error::{Error, Result};
use crate::linalg::CheckedLu;
use crate::micro::{relax_solve, InitialGuess, MicroConfig};
use crate::system::TwoScaleSystem;
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Algorithm {
    /// Expansion-based (Jacobians of `g` for `k ≤ 2`).
    #[default]
    Type1,
    /// Pure fixed-point recursion.
    Type2,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Type1 => "type1",
            Algorithm::Type2 => "type2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DiffScheme {
    #[default]
    Forward,
    Central,
}

impl DiffScheme {
    pub fn name(self) -> &'static str {
        match self {
            DiffScheme::Forward => "forward",
            DiffScheme::Central => "central",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldConfig {
    /// Order `k` of the approximation.
    pub k: usize,
    pub algorithm: Algorithm,
    pub diff_scheme: DiffScheme,
    /// Difference step `τ`.
    pub tau: f64,
    pub micro: MicroConfig,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            k: 2,
            algorithm: Algorithm::default(),
            diff_scheme: DiffScheme::default(),
            tau: 1e-6,
            micro: MicroConfig::default(),
        }
    }
}

impl ManifoldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        self.micro.validate()
    }

    pub fn with_order(mut self, k: usize) -> Self {
        self.k = k;
        self
    }
}

/// One evaluation of `Γ̂_k` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldEval {
    pub value: Vector,
    /// Top-level estimate of `∇ₓΓ_{k-1} · f(x, Γ_{k-1})`, i.e. of `dy/dt`
    /// along the slow flow. `None` for `k = 0`.
    pub slope: Option<Vector>,
    pub micro_calls: usize,
}

/// Closed-form number of micro solves for one evaluation of `Γ̂_k`.
///
/// Forward differences evaluate the child level at two points, central
/// differences at three, which gives `T(k) = 2T(k-1) + 1` resp.
/// `T(k) = 3T(k-1) + 1`. Type 1 starts the recursion from `T(1) = 1`
/// (and its `k = 2` level spends one solve on `γ̂` instead of a child).
pub fn micro_call_count(algorithm: Algorithm, scheme: DiffScheme, k: usize) -> usize {
    let k = k as u32;
    match (algorithm, scheme) {
        (Algorithm::Type2, DiffScheme::Forward) => 2usize.pow(k + 1) - 1,
        (Algorithm::Type2, DiffScheme::Central) => (3usize.pow(k + 1) - 1) / 2,
        (Algorithm::Type1, _) if k <= 1 => 1,
        (Algorithm::Type1, DiffScheme::Forward) => 3 * 2usize.pow(k - 2) - 1,
        (Algorithm::Type1, DiffScheme::Central) => (7 * 3usize.pow(k - 2) - 1) / 2,
    }
}

/// Difference quotient for `∇Γ(x) · v`.
///
/// Forward: `(Γ(x + vτ) - Γ(x)) / τ`; central: `(Γ(x + vτ) - Γ(x - vτ)) / 2τ`.
pub fn directional_difference<F>(mut gamma: F, x: &Vector, v: &Vector, tau: f64, scheme: DiffScheme) -> Result<Vector>
where
    F: FnMut(&Vector) -> Result<Vector>,
{
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    match scheme {
        DiffScheme::Forward => {
            let center = gamma(x)?;
            let plus = gamma(&(x + v * tau))?;
            Ok((plus - center) / tau)
        }
        DiffScheme::Central => {
            let plus = gamma(&(x + v * tau))?;
            let minus = gamma(&(x - v * tau))?;
            Ok((plus - minus) / (2.0 * tau))
        }
    }
}

struct FirstOrder {
    gamma1: Vector,
    /// `∇γ · F = -G_y⁻¹ G_x F`.
    grad_gamma_f: Vector,
    g_y: CheckedLu,
}

fn first_order_terms(system: &TwoScaleSystem, x: &Vector, gamma_x: &Vector) -> Result<FirstOrder> {
    let big_f = system.f(x, gamma_x);
    let (g_y, g_x) = system.jacobian_g(x, gamma_x);
    let g_y = CheckedLu::new(&g_y, "G_y")?;
    let w = g_y.solve(&(g_x * big_f));
    let grad_gamma_f = -w;
    let gamma1 = g_y.solve(&grad_gamma_f);
    Ok(FirstOrder { gamma1, grad_gamma_f, g_y })
}

/// First-order correction `γ₁ = -G_y⁻² G_x F` at `(x, γ(x))`, with
/// `F = f(x, γ)`, via two solves against `G_y`.
pub fn gamma1_analytic(system: &TwoScaleSystem, x: &Vector, gamma_x: &Vector) -> Result<Vector> {
    system.check_dims(x, gamma_x)?;
    Ok(first_order_terms(system, x, gamma_x)?.gamma1)
}

struct Recursion<'a> {
    system: &'a TwoScaleSystem,
    epsilon: f64,
    config: &'a ManifoldConfig,
    seed: &'a Vector,
    calls: usize,
}

type Level = (Vector, Option<Vector>);

impl Recursion<'_> {
    fn micro(&mut self, x: &Vector, h: &Vector, y0: &Vector, level: usize) -> Result<Vector> {
        self.calls += 1;
        relax_solve(self.system, x, h, y0, self.epsilon, &self.config.micro)
            .map(|s| s.y)
            .map_err(|e| e.at_level(level))
    }

    fn base(&mut self, x: &Vector) -> Result<Vector> {
        let zero = Vector::zeros(self.system.n_y());
        let seed = self.seed;
        self.micro(x, &zero, seed, 0)
    }

    fn eval(&mut self, algorithm: Algorithm, x: &Vector, k: usize) -> Result<Level> {
        match algorithm {
            Algorithm::Type1 => self.type1(x, k),
            Algorithm::Type2 => self.type2(x, k),
        }
    }

    /// Directional difference of level `child` along `f(x, center)`, where
    /// `center` is that level's value at `x`.
    fn slope(&mut self, algorithm: Algorithm, x: &Vector, center: &Vector, child: usize) -> Result<Vector> {
        let v = self.system.f(x, center);
        let tau = self.config.tau;
        match self.config.diff_scheme {
            DiffScheme::Forward => {
                let plus = self.eval(algorithm, &(x + &v * tau), child)?.0;
                Ok((plus - center) / tau)
            }
            DiffScheme::Central => {
                let plus = self.eval(algorithm, &(x + &v * tau), child)?.0;
                let minus = self.eval(algorithm, &(x - &v * tau), child)?.0;
                Ok((plus - minus) / (2.0 * tau))
            }
        }
    }

    /// One fixed-point step on top of level `k - 1`. The micro solve starts
    /// from `Γ̂_{k-1}(x)`, which is already `O(ε^k)` from the target.
    fn iterate(&mut self, algorithm: Algorithm, x: &Vector, k: usize) -> Result<Level> {
        let center = self.eval(algorithm, x, k - 1)?.0;
        let slope = self.slope(algorithm, x, &center, k - 1)?;
        let value = self.micro(x, &slope, &center, k)?;
        Ok((value, Some(slope)))
    }

    fn type2(&mut self, x: &Vector, k: usize) -> Result<Level> {
        if k == 0 {
            return Ok((self.base(x)?, None));
        }
        self.iterate(Algorithm::Type2, x, k)
    }

    fn type1(&mut self, x: &Vector, k: usize) -> Result<Level> {
        match k {
            0 => Ok((self.base(x)?, None)),
            1 => {
                let gamma = self.base(x)?;
                let terms = first_order_terms(self.system, x, &gamma).map_err(|e| e.at_level(1))?;
                Ok((gamma + terms.gamma1 * self.epsilon, Some(terms.grad_gamma_f)))
            }
            2 => {
                let gamma = self.base(x)?;
                let terms = first_order_terms(self.system, x, &gamma).map_err(|e| e.at_level(2))?;
                let gamma_1 = gamma + &terms.gamma1 * self.epsilon;
                let slope = self.slope(Algorithm::Type1, x, &gamma_1, 1)?;
                let defect = &slope * self.epsilon - self.system.g(x, &gamma_1);
                let value = gamma_1 + terms.g_y.solve(&defect);
                Ok((value, Some(slope)))
            }
            _ => self.iterate(Algorithm::Type1, x, k),
        }
    }
}

fn check_eval_inputs(system: &TwoScaleSystem, x: &Vector, epsilon: f64, config: &ManifoldConfig, seed: &Vector) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    config.validate()?;
    system.check_dims(x, seed)
}

fn run(
    system: &TwoScaleSystem,
    x: &Vector,
    epsilon: f64,
    config: &ManifoldConfig,
    seed: &Vector,
    algorithm: Algorithm,
) -> Result<ManifoldEval> {
    check_eval_inputs(system, x, epsilon, config, seed)?;
    let mut rec = Recursion {
        system,
        epsilon,
        config,
        seed,
        calls: 0,
    };
    let (value, slope) = rec.eval(algorithm, x, config.k)?;
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("manifold value", format!("order {}", config.k)));
    }
    Ok(ManifoldEval {
        value,
        slope,
        micro_calls: rec.calls,
    })
}

/// Evaluates `Γ̂_k(x, ε)` with the expansion-based algorithm, ignoring
/// `config.algorithm`. `seed` starts the base-level micro solves.
pub fn hmm_type1(system: &TwoScaleSystem, x: &Vector, epsilon: f64, config: &ManifoldConfig, seed: &Vector) -> Result<ManifoldEval> {
    run(system, x, epsilon, config, seed, Algorithm::Type1)
}

/// Evaluates `Γ̂_k(x, ε)` with the pure fixed-point recursion, ignoring
/// `config.algorithm`.
pub fn hmm_type2(system: &TwoScaleSystem, x: &Vector, epsilon: f64, config: &ManifoldConfig, seed: &Vector) -> Result<ManifoldEval> {
    run(system, x, epsilon, config, seed, Algorithm::Type2)
}

/// Dispatches on `config.algorithm`.
pub fn evaluate_manifold(
    system: &TwoScaleSystem,
    x: &Vector,
    epsilon: f64,
    config: &ManifoldConfig,
    seed: &Vector,
) -> Result<ManifoldEval> {
    run(system, x, epsilon, config, seed, config.algorithm)
}

#[derive(Debug, Clone)]
struct LastEval {
    time: f64,
    value: Vector,
    slope: Option<Vector>,
}

/// Stateful evaluator used along a trajectory.
///
/// Chooses each evaluation's micro seed according to
/// `config.micro.initial_guess`; with warm starts enabled the previous value
/// is advanced by `slope · Δt` to the new evaluation time. Holds mutable
/// state, so use one instance per worker.
#[derive(Debug, Clone)]
pub struct ManifoldApproximator {
    system: TwoScaleSystem,
    config: ManifoldConfig,
    epsilon: f64,
    warm_start: bool,
    supplied: Option<Vector>,
    last: Option<LastEval>,
    micro_calls: u64,
    evaluations: u64,
}

impl ManifoldApproximator {
    pub fn new(system: TwoScaleSystem, config: ManifoldConfig, epsilon: f64) -> Result<Self> {
        config.validate()?;
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            system,
            config,
            epsilon,
            warm_start: false,
            supplied: None,
            last: None,
            micro_calls: 0,
            evaluations: 0,
        })
    }

    pub fn with_warm_start(mut self, warm_start: bool) -> Self {
        self.warm_start = warm_start;
        self
    }

    /// Seed used by `Supplied`, and by `PreviousValue` before the first
    /// evaluation.
    pub fn supply_guess(&mut self, y: Vector) {
        self.supplied = Some(y);
    }

    pub fn config(&self) -> &ManifoldConfig {
        &self.config
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn micro_calls(&self) -> u64 {
        self.micro_calls
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    fn fallback(&self) -> Vector {
        self.supplied.clone().unwrap_or_else(|| Vector::zeros(self.system.n_y()))
    }

    /// Micro seed for an evaluation at `time`.
    pub fn seed_for(&self, time: f64) -> Vector {
        match self.config.micro.initial_guess {
            InitialGuess::Zero => Vector::zeros(self.system.n_y()),
            InitialGuess::Supplied => self.fallback(),
            InitialGuess::PreviousValue => match &self.last {
                Some(last) => match (&last.slope, self.warm_start) {
                    (Some(slope), true) => &last.value + slope * (time - last.time),
                    _ => last.value.clone(),
                },
                None => self.fallback(),
            },
        }
    }

    /// Evaluates at `x` without advancing the warm-start clock.
    pub fn evaluate(&mut self, x: &Vector) -> Result<ManifoldEval> {
        let time = self.last.as_ref().map_or(0.0, |l| l.time);
        self.evaluate_at(x, time)
    }

    /// Evaluates at `x`, where `time` is the simulation time of the query.
    pub fn evaluate_at(&mut self, x: &Vector, time: f64) -> Result<ManifoldEval> {
        let seed = self.seed_for(time);
        let out = evaluate_manifold(&self.system, x, self.epsilon, &self.config, &seed)?;
        self.micro_calls += out.micro_calls as u64;
        self.evaluations += 1;
        self.last = Some(LastEval {
            time,
            value: out.value.clone(),
            slope: out.slope.clone(),
        });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn naive() -> TwoScaleSystem {
        TwoScaleSystem::new("naive", 1, 1, |_x, y| y.clone(), |x, y| x - y, 1.0)
            .unwrap()
            .with_jacobians(|_, _| dmatrix![-1.0], |_, _| dmatrix![1.0])
    }

    fn enzyme() -> TwoScaleSystem {
        TwoScaleSystem::new(
            "enzyme",
            1,
            1,
            |x, y| dvector![-x[0] + (x[0] + 0.5) * y[0]],
            |x, y| dvector![x[0] - (x[0] + 1.0) * y[0]],
            1.5,
        )
        .unwrap()
    }

    fn exact_micro(k: usize, algorithm: Algorithm, diff_scheme: DiffScheme) -> ManifoldConfig {
        ManifoldConfig {
            k,
            algorithm,
            diff_scheme,
            // nested differences amplify round-off by (ε/τ) per level
            tau: 1e-3,
            micro: MicroConfig::new(1.0, 1).unwrap(),
        }
    }

    #[test]
    fn directional_difference_examples() {
        let sq = |x: &Vector| Ok(x.map(|v| v * v));
        let fwd = directional_difference(sq, &dvector![1.0], &dvector![1.0], 0.1, DiffScheme::Forward).unwrap();
        assert_relative_eq!(fwd[0], 2.1, epsilon = 1e-12);
        let ctr = directional_difference(sq, &dvector![1.0], &dvector![1.0], 0.1, DiffScheme::Central).unwrap();
        assert_relative_eq!(ctr[0], 2.0, epsilon = 1e-12);

        let lin = |x: &Vector| Ok(dvector![3.0 * x[0] - 2.0 * x[1]]);
        for scheme in [DiffScheme::Forward, DiffScheme::Central] {
            for tau in [1e-3, 0.5, 2.0] {
                let d = directional_difference(lin, &dvector![0.3, 0.1], &dvector![1.0, 1.0], tau, scheme).unwrap();
                assert_relative_eq!(d[0], 1.0, epsilon = 1e-12);
            }
        }
        assert!(directional_difference(sq, &dvector![1.0], &dvector![1.0], 0.0, DiffScheme::Forward).is_err());
    }

    #[test]
    fn gamma1_examples() {
        let g1 = gamma1_analytic(&naive(), &dvector![2.0], &dvector![2.0]).unwrap();
        assert_relative_eq!(g1[0], -2.0, epsilon = 1e-14);

        let still = TwoScaleSystem::new("still", 1, 1, |_x, _y| dvector![0.0], |x, y| x - y, 1.0).unwrap();
        assert_eq!(gamma1_analytic(&still, &dvector![1.0], &dvector![1.0]).unwrap()[0], 0.0);

        // G_y = -2, G_x = 0.5, F = -0.25
        let g1 = gamma1_analytic(&enzyme(), &dvector![1.0], &dvector![0.5]).unwrap();
        assert_relative_eq!(g1[0], 0.03125, epsilon = 1e-9);
        // equivalent form G_y⁻¹ ∇γ F with ∇γ = 1/(x+1)²
        assert_relative_eq!(g1[0], (1.0 / -2.0) * 0.25 * -0.25, epsilon = 1e-9);
    }

    #[test]
    fn gamma1_rejects_singular_jacobian() {
        let flat = TwoScaleSystem::new("flat", 1, 1, |x, _| x.clone(), |x, _y| x.clone(), 1.0).unwrap();
        let err = gamma1_analytic(&flat, &dvector![1.0], &dvector![0.0]).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }), "{err}");
    }

    #[test]
    fn type2_on_naive_problem() {
        let sys = naive();
        let seed = dvector![0.0];
        let v0 = hmm_type2(
            &sys,
            &dvector![1.0],
            0.1,
            &exact_micro(0, Algorithm::Type2, DiffScheme::Forward),
            &seed,
        )
        .unwrap();
        assert_relative_eq!(v0.value[0], 1.0, epsilon = 1e-15);
        assert!(v0.slope.is_none());

        for tau in [1e-5, 1e-3, 0.3] {
            let mut cfg = exact_micro(1, Algorithm::Type2, DiffScheme::Forward);
            cfg.tau = tau;
            let v1 = hmm_type2(&sys, &dvector![2.0], 0.01, &cfg, &seed).unwrap();
            assert_relative_eq!(v1.value[0], 1.98, epsilon = 1e-9);
        }

        let v2 = hmm_type2(
            &sys,
            &dvector![1.0],
            0.1,
            &exact_micro(2, Algorithm::Type2, DiffScheme::Forward),
            &seed,
        )
        .unwrap();
        assert_relative_eq!(v2.value[0], 0.919, epsilon = 1e-9);
        let eps: f64 = 0.1;
        let slow_slope = ((1.0 + 4.0 * eps).sqrt() - 1.0) / (2.0 * eps);
        let gap = (v2.value[0] - slow_slope).abs();
        assert_relative_eq!(gap, 2.9e-3, max_relative = 0.05);
    }

    #[test]
    fn type1_on_naive_problem() {
        let sys = naive();
        let seed = dvector![0.0];
        let v1 = hmm_type1(
            &sys,
            &dvector![1.0],
            0.1,
            &exact_micro(1, Algorithm::Type1, DiffScheme::Forward),
            &seed,
        )
        .unwrap();
        assert_relative_eq!(v1.value[0], 0.9, epsilon = 1e-12);
        let v2 = hmm_type1(
            &sys,
            &dvector![1.0],
            0.1,
            &exact_micro(2, Algorithm::Type1, DiffScheme::Forward),
            &seed,
        )
        .unwrap();
        assert_relative_eq!(v2.value[0], 0.919, epsilon = 1e-9);
        let v0 = hmm_type1(
            &sys,
            &dvector![1.7],
            0.1,
            &exact_micro(0, Algorithm::Type1, DiffScheme::Forward),
            &seed,
        )
        .unwrap();
        let direct = relax_solve(&sys, &dvector![1.7], &dvector![0.0], &seed, 0.1, &MicroConfig::new(1.0, 1).unwrap()).unwrap();
        assert_eq!(v0.value, direct.y);
    }

    #[test]
    fn call_counts_match_closed_form() {
        let sys = enzyme();
        for algorithm in [Algorithm::Type1, Algorithm::Type2] {
            for scheme in [DiffScheme::Forward, DiffScheme::Central] {
                for k in 0..=4 {
                    let mut cfg = exact_micro(k, algorithm, scheme);
                    cfg.micro = MicroConfig::new(0.5, 3).unwrap();
                    let out = evaluate_manifold(&sys, &dvector![0.9], 1e-2, &cfg, &dvector![0.4]).unwrap();
                    assert_eq!(
                        out.micro_calls,
                        micro_call_count(algorithm, scheme, k),
                        "{algorithm:?} {scheme:?} k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn closed_forms_follow_recurrences() {
        // independent oracle: unroll the recurrences
        fn rec(alg: Algorithm, scheme: DiffScheme, k: usize) -> usize {
            let fan = match scheme {
                DiffScheme::Forward => 2,
                DiffScheme::Central => 3,
            };
            match (alg, k) {
                (_, 0) | (Algorithm::Type1, 1) => 1,
                (Algorithm::Type1, 2) => 1 + (fan - 1) * rec(alg, scheme, 1),
                _ => fan * rec(alg, scheme, k - 1) + 1,
            }
        }
        for alg in [Algorithm::Type1, Algorithm::Type2] {
            for scheme in [DiffScheme::Forward, DiffScheme::Central] {
                for k in 0..8 {
                    assert_eq!(micro_call_count(alg, scheme, k), rec(alg, scheme, k));
                }
            }
        }
        assert_eq!(micro_call_count(Algorithm::Type2, DiffScheme::Forward, 2), 7);
        assert_eq!(micro_call_count(Algorithm::Type1, DiffScheme::Forward, 1), 1);
        assert_eq!(micro_call_count(Algorithm::Type2, DiffScheme::Central, 2), 13);
    }

    #[test]
    fn iteration_residual_is_micro_residual() {
        // with an exhaustive micro solve, g(x, Γ̂_k) = ε·slope to round-off
        let sys = enzyme();
        let mut cfg = exact_micro(3, Algorithm::Type2, DiffScheme::Central);
        cfg.micro = MicroConfig::new(0.5, 200).unwrap();
        cfg.tau = 1e-4;
        let eps = 0.01;
        for x in [0.3, 1.0, 2.5] {
            let x = dvector![x];
            let out = hmm_type2(&sys, &x, eps, &cfg, &dvector![0.0]).unwrap();
            let slope = out.slope.unwrap();
            let r = crate::micro::micro_residual(&sys, &x, &out.value, &slope, eps);
            assert!(r < 1e-13, "residual {r}");
        }
    }

    #[test]
    fn algorithms_agree_on_linear_problem() {
        let sys = naive();
        for k in 0..=2 {
            for x in [-2.0, 0.5, 3.0] {
                let a = hmm_type1(
                    &sys,
                    &dvector![x],
                    0.01,
                    &exact_micro(k, Algorithm::Type1, DiffScheme::Forward),
                    &dvector![0.0],
                )
                .unwrap();
                let b = hmm_type2(
                    &sys,
                    &dvector![x],
                    0.01,
                    &exact_micro(k, Algorithm::Type2, DiffScheme::Forward),
                    &dvector![0.0],
                )
                .unwrap();
                assert!((a.value[0] - b.value[0]).abs() < 1e-10, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn nan_is_annotated_with_level() {
        let sys = TwoScaleSystem::new("blow", 1, 1, |_x, y| y.map(|v| v * 1e300), |x, y| x - y, 1.0).unwrap();
        let mut cfg = exact_micro(2, Algorithm::Type2, DiffScheme::Forward);
        cfg.tau = 1e10;
        let err = hmm_type2(&sys, &dvector![1.0], 0.1, &cfg, &dvector![0.0]).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn approximator_seeds() {
        let sys = enzyme();
        let mut cfg = exact_micro(1, Algorithm::Type2, DiffScheme::Forward);
        cfg.micro = MicroConfig::new(0.5, 2).unwrap();
        let mut approx = ManifoldApproximator::new(sys.clone(), cfg, 0.01).unwrap().with_warm_start(true);
        assert_eq!(approx.seed_for(0.0), dvector![0.0]);
        approx.supply_guess(dvector![0.3]);
        assert_eq!(approx.seed_for(0.0), dvector![0.3]);
        let first = approx.evaluate_at(&dvector![1.0], 0.0).unwrap();
        let slope = first.slope.clone().unwrap();
        assert_relative_eq!(approx.seed_for(0.5), &first.value + &slope * 0.5);
        assert_eq!(approx.micro_calls(), 3);

        let mut cold = ManifoldApproximator::new(sys.clone(), cfg, 0.01).unwrap();
        cold.evaluate(&dvector![1.0]).unwrap();
        assert_eq!(cold.seed_for(0.5), cold.seed_for(0.0));

        let mut zero_cfg = cfg;
        zero_cfg.micro.initial_guess = InitialGuess::Zero;
        let mut z = ManifoldApproximator::new(sys, zero_cfg, 0.01).unwrap();
        z.supply_guess(dvector![0.3]);
        z.evaluate(&dvector![1.0]).unwrap();
        assert_eq!(z.seed_for(1.0), dvector![0.0]);
    }
}
