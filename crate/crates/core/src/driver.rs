//! Two-stage simulation.
//!
//! 1. The full stiff system is integrated at `Δt_c` while the fast variable
//!    relaxes onto the manifold. Every `n_p` steps the distance
//!    `z_n = |y_n - Γ̂_k(x_n)|` is compared with its value one block earlier;
//!    while the initial layer decays, `z` shrinks by about
//!    `exp(-β n_p Δt_c / ε)` per block. Once it fails to shrink by the laxer
//!    factor `μ = exp(-β̂ n_p Δt_c / 2ε)` the layer is over and the switch
//!    time `T_c` is recorded.
//! 2. From `T_c` to `T` the reduced equation `dX/dt = f(X, Γ̂_k(X, ε))` is
//!    integrated at the macroscopic step `Δt`.

use std::time::Instant;

use log::warn;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldApproximator, ManifoldConfig};
use crate::steppers::{steps_to_cover, Scheme, VectorField};
use crate::system::TwoScaleSystem;
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverConfig {
    pub epsilon: f64,
    /// Terminal time `T`.
    pub t_end: f64,
    pub dt_coupled: f64,
    pub dt_macro: f64,
    /// Criterion period `n_p`.
    pub n_p: usize,
    /// Order of the manifold approximation used by the termination test.
    pub criterion_order: usize,
    pub manifold: ManifoldConfig,
    /// Extrapolate micro seeds along the slow flow.
    pub warm_start: bool,
    pub coupled_scheme: Scheme,
    pub macro_scheme: Scheme,
    /// Keep every n-th state of each stage (the last state is always kept).
    pub record_stride: usize,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            t_end: 1.0,
            dt_coupled: 1e-5,
            dt_macro: 1e-2,
            n_p: 10,
            criterion_order: 2,
            manifold: ManifoldConfig::default(),
            warm_start: true,
            coupled_scheme: Scheme::Rk4,
            macro_scheme: Scheme::Rk4,
            record_stride: 1,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("terminal time must be positive, got {}", self.t_end));
        }
        if !(self.dt_coupled > 0.0 && self.dt_coupled <= self.dt_macro && self.dt_macro <= self.t_end) {
            return bad(format!(
                "need 0 < dt_coupled <= dt_macro <= T, got {} / {} / {}",
                self.dt_coupled, self.dt_macro, self.t_end
            ));
        }
        if self.n_p == 0 {
            return bad("criterion period n_p must be at least 1".into());
        }
        if self.record_stride == 0 {
            return bad("record stride must be at least 1".into());
        }
        self.manifold.validate()
    }
}

/// Sampled states of one stage. `y_states` is empty for the decoupled stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x_states: Vec<Vector>,
    pub y_states: Vec<Vector>,
}

impl Trajectory {
    fn push(&mut self, t: f64, x: &Vector, y: Option<&Vector>) {
        self.times.push(t);
        self.x_states.push(x.clone());
        if let Some(y) = y {
            self.y_states.push(y.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn has_fast_states(&self) -> bool {
        !self.y_states.is_empty() && self.y_states.len() == self.times.len()
    }
}

#[derive(Debug, Clone)]
pub struct CoupledStage {
    pub x: Vector,
    pub y: Vector,
    pub trajectory: Trajectory,
    pub t_c: f64,
    pub n_c: usize,
    /// False when the stage ran to `T` without the criterion firing.
    pub criterion_fired: bool,
    /// `(t_n, z_n)` at every criterion check.
    pub z_checks: Vec<(f64, f64)>,
    pub micro_calls: u64,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub coupled: Trajectory,
    pub decoupled: Trajectory,
    pub t_c: f64,
    pub n_c: usize,
    pub x_final: Vector,
    pub micro_calls_total: u64,
    /// Seconds; informational only.
    pub wall_time: f64,
    pub criterion_fired: bool,
    pub z_checks: Vec<(f64, f64)>,
}

struct CoupledField<'a> {
    system: &'a TwoScaleSystem,
    inv_eps: f64,
}

impl CoupledField<'_> {
    fn split(&self, state: &Vector) -> (Vector, Vector) {
        let n_x = self.system.n_x();
        (state.rows(0, n_x).into_owned(), state.rows(n_x, self.system.n_y()).into_owned())
    }
}

impl VectorField for CoupledField<'_> {
    fn dim(&self) -> usize {
        self.system.n_x() + self.system.n_y()
    }

    fn eval(&mut self, state: &Vector) -> Result<Vector> {
        let (x, y) = self.split(state);
        let dx = self.system.f(&x, &y);
        let dy = self.system.g(&x, &y) * self.inv_eps;
        let mut out = Vector::zeros(state.len());
        out.rows_mut(0, dx.len()).copy_from(&dx);
        out.rows_mut(dx.len(), dy.len()).copy_from(&dy);
        Ok(out)
    }
}

fn stack(x: &Vector, y: &Vector) -> Vector {
    let mut z = Vector::zeros(x.len() + y.len());
    z.rows_mut(0, x.len()).copy_from(x);
    z.rows_mut(x.len(), y.len()).copy_from(y);
    z
}

/// Integrates the full system from `t = 0`. With `detect` set, the
/// termination test runs every `n_p` steps; otherwise the stage runs to `T`.
fn coupled(system: &TwoScaleSystem, x0: &Vector, y0: &Vector, config: &DriverConfig, detect: bool) -> Result<CoupledStage> {
    config.validate()?;
    system.check_dims(x0, y0)?;
    let mut field = CoupledField {
        system,
        inv_eps: 1.0 / config.epsilon,
    };
    let criterion = ManifoldConfig {
        k: config.criterion_order,
        ..config.manifold
    };
    // y_n is a poor micro seed inside the layer (and may sit outside the
    // relaxation's stability region), so the test tracks Γ̂ on its own
    let mut criterion = ManifoldApproximator::new(system.clone(), criterion, config.epsilon)?.with_warm_start(config.warm_start);
    let mu = (-system.beta_hat() * config.n_p as f64 * config.dt_coupled / (2.0 * config.epsilon)).exp();

    let n_max = steps_to_cover(config.t_end, config.dt_coupled);
    let mut state = stack(x0, y0);
    let mut traj = Trajectory::default();
    traj.push(0.0, x0, Some(y0));
    let mut z_checks = Vec::new();
    let mut previous_z: Option<f64> = None;
    let mut fired = false;
    let mut n = 0;
    let mut t = 0.0;

    while n < n_max {
        let t_next = if n + 1 == n_max {
            config.t_end
        } else {
            (n + 1) as f64 * config.dt_coupled
        };
        state = config
            .coupled_scheme
            .step(&mut field, &state, t_next - t)
            .map_err(|e| e.at_step("coupled", n + 1, t_next))?;
        n += 1;
        t = t_next;
        let keep = n % config.record_stride == 0 || n == n_max;

        if detect && n % config.n_p == 0 {
            let (x, y) = field.split(&state);
            let gamma = criterion.evaluate_at(&x, t).map_err(|e| e.at_step("coupled", n, t))?;
            let z = (&y - &gamma.value).norm();
            z_checks.push((t, z));
            if let Some(prev) = previous_z {
                if z >= mu * prev {
                    fired = true;
                    let (x, y) = field.split(&state);
                    traj.push(t, &x, Some(&y));
                    break;
                }
            }
            previous_z = Some(z);
        }
        if keep {
            let (x, y) = field.split(&state);
            traj.push(t, &x, Some(&y));
        }
    }
    if detect && !fired {
        warn!(
            "{}: termination criterion never fired; coupled stage ran to T = {}",
            system.name(),
            config.t_end
        );
    }
    let (x, y) = field.split(&state);
    Ok(CoupledStage {
        x,
        y,
        trajectory: traj,
        t_c: t,
        n_c: n,
        criterion_fired: fired,
        z_checks,
        micro_calls: criterion.micro_calls(),
    })
}

/// Coupled stage with the termination test.
pub fn run_coupled_stage(system: &TwoScaleSystem, x0: &Vector, y0: &Vector, config: &DriverConfig) -> Result<CoupledStage> {
    coupled(system, x0, y0, config, true)
}

/// Full system on `[0, T]` at `Δt_c` without switching.
pub fn integrate_coupled(system: &TwoScaleSystem, x0: &Vector, y0: &Vector, config: &DriverConfig) -> Result<CoupledStage> {
    coupled(system, x0, y0, config, false)
}

struct ReducedField<'a> {
    system: &'a TwoScaleSystem,
    approx: ManifoldApproximator,
    step_start: f64,
}

impl VectorField for ReducedField<'_> {
    fn dim(&self) -> usize {
        self.system.n_x()
    }

    fn eval(&mut self, x: &Vector) -> Result<Vector> {
        self.eval_stage(0.0, x)
    }

    fn eval_stage(&mut self, offset: f64, x: &Vector) -> Result<Vector> {
        let gamma = self.approx.evaluate_at(x, self.step_start + offset)?;
        Ok(self.system.f(x, &gamma.value))
    }
}

/// Decoupled stage: RK4 (or the configured scheme) on the reduced model from
/// `t_start` to `T`, last step shortened to land on `T`. `seed` starts the
/// first micro solve; pass the fast state at the switch.
pub fn run_decoupled_stage(
    system: &TwoScaleSystem,
    x_start: &Vector,
    t_start: f64,
    seed: &Vector,
    config: &DriverConfig,
) -> Result<(Trajectory, u64)> {
    config.validate()?;
    system.check_dims(x_start, seed)?;
    if !(t_start < config.t_end) {
        return Err(Error::InvalidConfig(format!(
            "decoupled stage needs t_start < T, got {t_start} >= {}",
            config.t_end
        )));
    }
    let mut approx = ManifoldApproximator::new(system.clone(), config.manifold, config.epsilon)?.with_warm_start(config.warm_start);
    approx.supply_guess(seed.clone());
    let mut field = ReducedField {
        system,
        approx,
        step_start: t_start,
    };
    let n = steps_to_cover(config.t_end - t_start, config.dt_macro);
    let mut traj = Trajectory::default();
    traj.push(t_start, x_start, None);
    let mut x = x_start.clone();
    let mut t = t_start;
    for i in 0..n {
        let t_next = if i + 1 == n {
            config.t_end
        } else {
            t_start + (i + 1) as f64 * config.dt_macro
        };
        field.step_start = t;
        x = config
            .macro_scheme
            .step(&mut field, &x, t_next - t)
            .map_err(|e| e.at_step("decoupled", i + 1, t_next))?;
        t = t_next;
        if (i + 1) % config.record_stride == 0 || i + 1 == n {
            traj.push(t, &x, None);
        }
    }
    Ok((traj, field.approx.micro_calls()))
}

/// Coupled stage followed by the decoupled stage.
pub fn simulate(system: &TwoScaleSystem, x0: &Vector, y0: &Vector, config: &DriverConfig) -> Result<SimulationResult> {
    let start = Instant::now();
    let stage = run_coupled_stage(system, x0, y0, config)?;
    let (decoupled, x_final, decoupled_calls) = if stage.t_c < config.t_end {
        let (traj, calls) = run_decoupled_stage(system, &stage.x, stage.t_c, &stage.y, config)?;
        let x_final = traj.x_states.last().cloned().unwrap_or_else(|| stage.x.clone());
        (traj, x_final, calls)
    } else {
        let mut traj = Trajectory::default();
        traj.push(stage.t_c, &stage.x, None);
        (traj, stage.x.clone(), 0)
    };
    Ok(SimulationResult {
        coupled: stage.trajectory,
        decoupled,
        t_c: stage.t_c,
        n_c: stage.n_c,
        x_final,
        micro_calls_total: stage.micro_calls + decoupled_calls,
        wall_time: start.elapsed().as_secs_f64(),
        criterion_fired: stage.criterion_fired,
        z_checks: stage.z_checks,
    })
}

/// Coupled baseline over the whole interval, packaged like [`simulate`]
/// with `T_c = T` and a trivial decoupled stage.
pub fn simulate_coupled_only(system: &TwoScaleSystem, x0: &Vector, y0: &Vector, config: &DriverConfig) -> Result<SimulationResult> {
    let start = Instant::now();
    let stage = integrate_coupled(system, x0, y0, config)?;
    let mut decoupled = Trajectory::default();
    decoupled.push(stage.t_c, &stage.x, None);
    Ok(SimulationResult {
        coupled: stage.trajectory,
        decoupled,
        t_c: stage.t_c,
        n_c: stage.n_c,
        x_final: stage.x,
        micro_calls_total: 0,
        wall_time: start.elapsed().as_secs_f64(),
        criterion_fired: false,
        z_checks: Vec::new(),
    })
}

/// `|y_t - Γ̂_k(x_t, ε)|` along a trajectory with fast states. The samples
/// are evaluated in order, each micro solve seeded from the previous value.
pub fn z_diagnostic(system: &TwoScaleSystem, trajectory: &Trajectory, manifold: &ManifoldConfig, epsilon: f64) -> Result<Vec<f64>> {
    if !trajectory.has_fast_states() {
        return Err(Error::InvalidConfig("z diagnostic needs a trajectory with fast states".into()));
    }
    let mut approx = ManifoldApproximator::new(system.clone(), *manifold, epsilon)?;
    trajectory
        .times
        .iter()
        .zip(trajectory.x_states.iter().zip(&trajectory.y_states))
        .map(|(&t, (x, y))| Ok((y - approx.evaluate_at(x, t)?.value).norm()))
        .collect()
}
