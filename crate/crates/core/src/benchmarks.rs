//! Benchmark problems, reference solutions and convergence sweeps.
//!
//! | case     | slow `f`                         | fast `g`                        |
//! |----------|----------------------------------|---------------------------------|
//! | `naive`  | `y`                              | `x - y`                         |
//! | `enzyme` | `-x + (x + c) y`                 | `x - (x + 1) y`                 |
//! | `fvdp`   | `(-y + a sin 2πx₂, b)`           | `y + x₁ - y³/3`                 |
//! | `chua`   | `(-d x₂, -a y + x₁ + b x₂)`      | `x₂ - c₃y³ - c₂y² - c₁y`        |
//! | `vdp`    | `y`                              | `-((x² - 1) y + x)`             |
//!
//! Errors are the Euclidean norm of the slow variable at `T` against the
//! closed form (naive) or a fine coupled RK4 run (everything else).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use nalgebra::{dmatrix, dvector};
use rayon::prelude::*;

use crate::convergence::{fit_loglog, LineFit};
use crate::driver::{integrate_coupled, simulate, simulate_coupled_only, DriverConfig};
use crate::error::{Error, Result};
use crate::manifold::{Algorithm, DiffScheme, ManifoldConfig};
use crate::micro::{InitialGuess, MicroConfig};
use crate::system::TwoScaleSystem;
use crate::Vector;

/// Closed-form slow solution `(t, x0, y0, ε) -> x(t)`.
pub type ExactSolution = fn(f64, &Vector, &Vector, f64) -> Vector;

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub name: &'static str,
    pub description: &'static str,
    pub system: TwoScaleSystem,
    pub x0: Vector,
    pub y0: Vector,
    /// Default run configuration; `driver.t_end` is the case horizon.
    pub driver: DriverConfig,
    /// Step of the coupled reference run.
    pub reference_dt: f64,
    pub exact: Option<ExactSolution>,
}

fn manifold(k: usize, algorithm: Algorithm, diff_scheme: DiffScheme, tau: f64, alpha: f64, steps: usize) -> ManifoldConfig {
    ManifoldConfig {
        k,
        algorithm,
        diff_scheme,
        tau,
        micro: MicroConfig {
            alpha,
            steps,
            initial_guess: InitialGuess::PreviousValue,
            ..MicroConfig::default()
        },
    }
}

fn driver(epsilon: f64, t_end: f64, dt_coupled: f64, dt_macro: f64, manifold: ManifoldConfig) -> DriverConfig {
    DriverConfig {
        epsilon,
        t_end,
        dt_coupled,
        dt_macro,
        manifold,
        ..DriverConfig::default()
    }
}

fn naive() -> BenchmarkCase {
    let system = TwoScaleSystem::new("naive", 1, 1, |_x, y| y.clone(), |x, y| x - y, 1.0)
        .expect("valid system")
        .with_jacobians(|_, _| dmatrix![-1.0], |_, _| dmatrix![1.0]);
    BenchmarkCase {
        name: "naive",
        description: "linear scalar test problem with a closed-form solution",
        system,
        x0: dvector![1.0],
        y0: dvector![2.0],
        driver: driver(
            1e-5,
            4.0,
            1e-5,
            5e-3,
            manifold(2, Algorithm::Type1, DiffScheme::Forward, 1e-5, 1.0, 1),
        ),
        reference_dt: 1e-7,
        exact: Some(|t, x0, y0, eps| dvector![naive_exact(t, x0[0], y0[0], eps)]),
    }
}

fn enzyme() -> BenchmarkCase {
    let c = 0.5;
    let system = TwoScaleSystem::new(
        "enzyme",
        1,
        1,
        move |x, y| dvector![-x[0] + (x[0] + c) * y[0]],
        |x, y| dvector![x[0] - (x[0] + 1.0) * y[0]],
        1.5,
    )
    .expect("valid system")
    .with_jacobians(|x, _| dmatrix![-(x[0] + 1.0)], |_, y| dmatrix![1.0 - y[0]]);
    BenchmarkCase {
        name: "enzyme",
        description: "Michaelis-Menten enzyme kinetics",
        system,
        x0: dvector![1.0],
        y0: dvector![0.0],
        driver: driver(
            1e-2,
            1.0,
            1e-5,
            1e-2,
            manifold(2, Algorithm::Type1, DiffScheme::Central, 1e-6, 0.5, 10),
        ),
        reference_dt: 1e-6,
        exact: None,
    }
}

fn forced_vdp() -> BenchmarkCase {
    let (a, b) = (2.0, 1.0);
    let system = TwoScaleSystem::new(
        "fvdp",
        2,
        1,
        move |x, y| dvector![-y[0] + a * (2.0 * PI * x[1]).sin(), b],
        |x, y| dvector![y[0] + x[0] - y[0].powi(3) / 3.0],
        0.01,
    )
    .expect("valid system")
    .with_jacobians(|_, y| dmatrix![1.0 - y[0] * y[0]], |_, _| dmatrix![1.0, 0.0]);
    BenchmarkCase {
        name: "fvdp",
        description: "forced Van der Pol oscillator",
        system,
        x0: dvector![3.0, 1.0],
        y0: dvector![1.0],
        driver: driver(
            1e-4,
            1.0,
            1e-5,
            1e-2,
            manifold(2, Algorithm::Type2, DiffScheme::Forward, 1e-6, 0.1, 25),
        ),
        reference_dt: 1e-5,
        exact: None,
    }
}

fn chua() -> BenchmarkCase {
    let (a, b, d) = (0.7, 0.25, 1.0);
    let (c1, c2, c3) = (7.0, 15.0, 20.0);
    let system = TwoScaleSystem::new(
        "chua",
        2,
        1,
        move |x, y| dvector![-d * x[1], -a * y[0] + x[0] + b * x[1]],
        move |x, y| {
            let v = y[0];
            dvector![x[1] - c3 * v.powi(3) - c2 * v * v - c1 * v]
        },
        10.0,
    )
    .expect("valid system")
    .with_jacobians(
        move |_, y| dmatrix![-(3.0 * c3 * y[0] * y[0] + 2.0 * c2 * y[0] + c1)],
        |_, _| dmatrix![0.0, 1.0],
    );
    BenchmarkCase {
        name: "chua",
        description: "cubic Chua circuit",
        system,
        x0: dvector![1.0, 1.0],
        y0: dvector![1.0],
        driver: driver(
            1e-2,
            1.0,
            1e-6,
            1e-2,
            manifold(2, Algorithm::Type2, DiffScheme::Central, 1e-6, 0.1, 10),
        ),
        reference_dt: 1e-6,
        exact: None,
    }
}

fn vdp() -> BenchmarkCase {
    let system = TwoScaleSystem::new(
        "vdp",
        1,
        1,
        |_x, y| y.clone(),
        |x, y| dvector![-((x[0] * x[0] - 1.0) * y[0] + x[0])],
        3.0,
    )
    .expect("valid system")
    .with_jacobians(|x, _| dmatrix![-(x[0] * x[0] - 1.0)], |x, y| dmatrix![-(2.0 * x[0] * y[0] + 1.0)]);
    BenchmarkCase {
        name: "vdp",
        description: "Van der Pol oscillator on its slow branch",
        system,
        x0: dvector![4.0],
        y0: dvector![2.0],
        driver: driver(
            1e-3,
            5.0,
            1e-5,
            2e-2,
            manifold(2, Algorithm::Type2, DiffScheme::Forward, 1e-6, 0.1, 20),
        ),
        reference_dt: 1e-5,
        exact: None,
    }
}

/// The five bundled cases.
pub fn registry() -> Vec<BenchmarkCase> {
    vec![naive(), enzyme(), forced_vdp(), chua(), vdp()]
}

pub fn find_case(name: &str) -> Option<BenchmarkCase> {
    registry().into_iter().find(|c| c.name == name)
}

/// Closed-form slow component of the naive problem, with the eigenvalues
/// written as `λ = -(1 ± √(1 + 4ε)) / 2ε`.
///
/// The slow eigenvalue is evaluated in that form, which loses about
/// `1e-16 / ε` to cancellation; at `ε = 1e-5` this shifts `x(4)` by ~1e-9.
/// [`naive_exact_stable`] avoids the cancellation.
pub fn naive_exact(t: f64, x0: f64, y0: f64, epsilon: f64) -> f64 {
    let s = (1.0 + 4.0 * epsilon).sqrt();
    let l1 = -(1.0 + s) / (2.0 * epsilon);
    let l2 = -(1.0 - s) / (2.0 * epsilon);
    combine(t, x0, y0, l1, l2)
}

/// Same as [`naive_exact`] with the slow eigenvalue as `2 / (1 + √(1 + 4ε))`.
pub fn naive_exact_stable(t: f64, x0: f64, y0: f64, epsilon: f64) -> f64 {
    let s = (1.0 + 4.0 * epsilon).sqrt();
    let l1 = -(1.0 + s) / (2.0 * epsilon);
    let l2 = 2.0 / (1.0 + s);
    combine(t, x0, y0, l1, l2)
}

fn combine(t: f64, x0: f64, y0: f64, l1: f64, l2: f64) -> f64 {
    let den = l1 - l2;
    (-l2 * x0 + y0) / den * (l1 * t).exp() + (l1 * x0 - y0) / den * (l2 * t).exp()
}

/// Fully coupled RK4 over `[0, T]` at `dt_fine`.
pub fn reference_solution(case: &BenchmarkCase, epsilon: f64, dt_fine: f64) -> Result<Vector> {
    reference_with_horizon(case, epsilon, dt_fine, case.driver.t_end)
}

fn reference_with_horizon(case: &BenchmarkCase, epsilon: f64, dt_fine: f64, t_end: f64) -> Result<Vector> {
    let cfg = DriverConfig {
        epsilon,
        t_end,
        dt_coupled: dt_fine,
        dt_macro: dt_fine,
        record_stride: usize::MAX,
        ..case.driver
    };
    Ok(integrate_coupled(&case.system, &case.x0, &case.y0, &cfg)?.x)
}

type ReferenceKey = (&'static str, u64, u64, u64);

/// Memoised coupled references keyed by `(case, ε, dt, T)`. Clones share
/// storage.
#[derive(Debug, Clone, Default)]
pub struct ReferenceCache {
    inner: Arc<Mutex<HashMap<ReferenceKey, Vector>>>,
}

impl ReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, case: &BenchmarkCase, epsilon: f64, dt_fine: f64, t_end: f64) -> Result<Vector> {
        let key = (case.name, epsilon.to_bits(), dt_fine.to_bits(), t_end.to_bits());
        if let Some(v) = self.inner.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = reference_with_horizon(case, epsilon, dt_fine, t_end)?;
        self.inner.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Slow state at `cfg.t_end` to measure errors against: the closed form when
/// the case has one, otherwise a cached coupled run at `reference_dt`.
pub fn reference_for(case: &BenchmarkCase, cfg: &DriverConfig, reference_dt: Option<f64>, cache: &ReferenceCache) -> Result<Vector> {
    match (case.exact, reference_dt) {
        (Some(exact), None) => Ok(exact(cfg.t_end, &case.x0, &case.y0, cfg.epsilon)),
        (_, dt) => cache.get(case, cfg.epsilon, dt.unwrap_or(case.reference_dt), cfg.t_end),
    }
}

/// Optional replacements for any configuration value of a case.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CaseOverrides {
    pub epsilon: Option<f64>,
    pub t_end: Option<f64>,
    pub dt_coupled: Option<f64>,
    pub dt_macro: Option<f64>,
    pub n_p: Option<usize>,
    pub criterion_order: Option<usize>,
    pub k: Option<usize>,
    pub algorithm: Option<Algorithm>,
    pub diff_scheme: Option<DiffScheme>,
    pub tau: Option<f64>,
    pub micro_steps: Option<usize>,
    pub alpha: Option<f64>,
    pub initial_guess: Option<InitialGuess>,
    pub warm_start: Option<bool>,
}

impl CaseOverrides {
    pub fn apply(&self, base: &DriverConfig) -> DriverConfig {
        let mut c = *base;
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { c.$($dst).+ = v; })*
            };
        }
        set!(
            epsilon => epsilon,
            t_end => t_end,
            dt_coupled => dt_coupled,
            dt_macro => dt_macro,
            n_p => n_p,
            criterion_order => criterion_order,
            k => manifold.k,
            algorithm => manifold.algorithm,
            diff_scheme => manifold.diff_scheme,
            tau => manifold.tau,
            micro_steps => manifold.micro.steps,
            alpha => manifold.micro.alpha,
            initial_guess => manifold.micro.initial_guess,
            warm_start => warm_start,
        );
        c
    }

    /// Fields set in `self` win over those set in `lower`.
    pub fn or(self, lower: CaseOverrides) -> CaseOverrides {
        CaseOverrides {
            epsilon: self.epsilon.or(lower.epsilon),
            t_end: self.t_end.or(lower.t_end),
            dt_coupled: self.dt_coupled.or(lower.dt_coupled),
            dt_macro: self.dt_macro.or(lower.dt_macro),
            n_p: self.n_p.or(lower.n_p),
            criterion_order: self.criterion_order.or(lower.criterion_order),
            k: self.k.or(lower.k),
            algorithm: self.algorithm.or(lower.algorithm),
            diff_scheme: self.diff_scheme.or(lower.diff_scheme),
            tau: self.tau.or(lower.tau),
            micro_steps: self.micro_steps.or(lower.micro_steps),
            alpha: self.alpha.or(lower.alpha),
            initial_guess: self.initial_guess.or(lower.initial_guess),
            warm_start: self.warm_start.or(lower.warm_start),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    /// Full coupled integration over `[0, T]`.
    Coupled,
    /// Two-stage run with `Γ̂_k`.
    Hmm(usize),
}

impl SolverKind {
    pub fn label(self) -> String {
        match self {
            SolverKind::Coupled => "coupled".into(),
            SolverKind::Hmm(k) => k.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Epsilon,
    DtMacro,
    Tau,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Epsilon => "eps",
            SweepAxis::DtMacro => "dt",
            SweepAxis::Tau => "tau",
        }
    }

    pub fn apply(self, cfg: &mut DriverConfig, value: f64) {
        match self {
            SweepAxis::Epsilon => cfg.epsilon = value,
            SweepAxis::DtMacro => cfg.dt_macro = value,
            SweepAxis::Tau => cfg.manifold.tau = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    NanFailure(String),
    Error(String),
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NanFailure(_) => "nan-failure",
            CellStatus::Error(_) => "error",
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, CellStatus::Ok)
    }

    fn from_error(e: &Error) -> Self {
        if e.is_non_finite() {
            CellStatus::NanFailure(e.to_string())
        } else {
            CellStatus::Error(e.to_string())
        }
    }
}

/// One simulation and its error. Failed cells carry `NaN` error and `T_c`.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub kind: SolverKind,
    pub axis_value: f64,
    pub config: DriverConfig,
    pub t_c: f64,
    pub error: f64,
    pub micro_calls: u64,
    pub wall_ms: f64,
    pub criterion_fired: bool,
    pub status: CellStatus,
}

/// Runs one solver on a case and measures the slow-variable error at `T`.
pub fn run_cell(
    case: &BenchmarkCase,
    kind: SolverKind,
    cfg: &DriverConfig,
    reference_dt: Option<f64>,
    cache: &ReferenceCache,
) -> CellResult {
    let mut cfg = *cfg;
    if let SolverKind::Hmm(k) = kind {
        cfg.manifold.k = k;
    }
    let start = Instant::now();
    let run = match kind {
        SolverKind::Coupled => simulate_coupled_only(&case.system, &case.x0, &case.y0, &cfg),
        SolverKind::Hmm(_) => simulate(&case.system, &case.x0, &case.y0, &cfg),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let outcome = run.and_then(|res| {
        let reference = reference_for(case, &cfg, reference_dt, cache)?;
        Ok((res, reference))
    });
    match outcome {
        Ok((res, reference)) => {
            let error = (&res.x_final - reference).norm();
            let status = if error.is_finite() {
                CellStatus::Ok
            } else {
                CellStatus::NanFailure("non-finite error".into())
            };
            CellResult {
                kind,
                axis_value: f64::NAN,
                config: cfg,
                t_c: res.t_c,
                error,
                micro_calls: res.micro_calls_total,
                wall_ms,
                criterion_fired: res.criterion_fired,
                status,
            }
        }
        Err(e) => CellResult {
            kind,
            axis_value: f64::NAN,
            config: cfg,
            t_c: f64::NAN,
            error: f64::NAN,
            micro_calls: 0,
            wall_ms,
            criterion_fired: false,
            status: CellStatus::from_error(&e),
        },
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    /// Coupled reference step; `None` uses the case's closed form or its
    /// default reference step.
    pub reference_dt: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct KindFit {
    pub kind: SolverKind,
    /// `None` when fewer than two cells succeeded.
    pub fit: Option<LineFit>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub case: String,
    pub axis: SweepAxis,
    /// Sorted by solver kind, then axis value.
    pub rows: Vec<CellResult>,
    pub fits: Vec<KindFit>,
}

impl ConvergenceReport {
    pub fn fit(&self, kind: SolverKind) -> Option<LineFit> {
        self.fits.iter().find(|f| f.kind == kind).and_then(|f| f.fit)
    }

    /// `(axis value, error)` of the successful cells of one solver.
    pub fn errors(&self, kind: SolverKind) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.kind == kind && r.status.is_ok())
            .map(|r| (r.axis_value, r.error))
            .collect()
    }
}

/// Checks that a sweep grid has at least three points spanning a decade.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "sweep grid needs at least 3 points, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidConfig("sweep grid values must be positive".into()));
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidConfig(format!(
            "sweep grid must span at least one decade, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Runs every `(kind, grid value)` cell and fits `log error` against
/// `log axis` per solver. Failing cells are recorded and skipped by the fit.
pub fn convergence_sweep(
    case: &BenchmarkCase,
    kinds: &[SolverKind],
    axis: SweepAxis,
    grid: &[f64],
    overrides: &CaseOverrides,
    options: &SweepOptions,
) -> Result<ConvergenceReport> {
    validate_grid(grid)?;
    if kinds.is_empty() {
        return Err(Error::InvalidConfig("no solvers requested".into()));
    }
    let base = overrides.apply(&case.driver);
    let cells: Vec<(SolverKind, f64, DriverConfig)> = kinds
        .iter()
        .flat_map(|&kind| {
            grid.iter().map(move |&v| {
                let mut cfg = base;
                axis.apply(&mut cfg, v);
                (kind, v, cfg)
            })
        })
        .collect();
    for (_, _, cfg) in &cells {
        cfg.validate()?;
    }
    let cache = ReferenceCache::new();
    let work = || {
        cells
            .par_iter()
            .map(|(kind, v, cfg)| {
                let mut row = run_cell(case, *kind, cfg, options.reference_dt, &cache);
                row.axis_value = *v;
                row
            })
            .collect::<Vec<_>>()
    };
    let mut rows = if options.jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work)
    };
    rows.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.axis_value.total_cmp(&b.axis_value)));

    let mut fits = Vec::new();
    for &kind in kinds {
        if fits.iter().any(|f: &KindFit| f.kind == kind) {
            continue;
        }
        let (h, e): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.kind == kind && r.status.is_ok())
            .map(|r| (r.axis_value, r.error))
            .unzip();
        fits.push(KindFit {
            kind,
            fit: fit_loglog(&h, &e).ok(),
        });
    }
    Ok(ConvergenceReport {
        case: case.name.to_string(),
        axis,
        rows,
        fits,
    })
}
