use log::{info, warn};
use mshom_core::benchmarks::{
    convergence_sweep, find_case, run_cell, validate_grid, BenchmarkCase, CellResult, CellStatus, ReferenceCache, SweepOptions,
};
use mshom_core::convergence::log_space;
use mshom_core::linalg::spectral_norm;
use mshom_core::riccati::{riccati_fixed_point, riccati_iterate_errors, riccati_iterates};
use mshom_core::{fit_loglog, registry, CaseOverrides, DriverConfig, LinearTwoScale, SolverKind, SweepAxis};

use crate::custom::CustomProblem;
use crate::report::{echo_driver, fmt_f64, RiccatiRow, Sink};
use crate::{CliError, Settings};

const SIMULATION_KEYS: &[&str] = &[
    "problem",
    "k",
    "eps",
    "t_end",
    "dt_c",
    "dt",
    "n_p",
    "criterion_order",
    "alg",
    "diff",
    "tau",
    "M",
    "alpha",
    "initial_guess",
    "warm_start",
    "reference_dt",
    "jobs",
    "output",
    "f",
    "g",
    "x0",
    "y0",
    "beta_hat",
];
const CUSTOM_KEYS: &[&str] = &["f", "g", "x0", "y0", "beta_hat"];
const RICCATI_KEYS: &[&str] = &["eps", "k", "seed", "nx", "ny", "tol", "jobs", "output"];
const AXES: [(&str, SweepAxis); 3] = [("eps", SweepAxis::Epsilon), ("dt", SweepAxis::DtMacro), ("tau", SweepAxis::Tau)];

struct Plan {
    case: BenchmarkCase,
    overrides: CaseOverrides,
    base: DriverConfig,
    kinds: Vec<SolverKind>,
    reference_dt: Option<f64>,
}

fn load_case(s: &Settings) -> Result<BenchmarkCase, CliError> {
    let name = s
        .text("problem")
        .ok_or_else(|| CliError::Usage("problem: required (see list-problems)".into()))?;
    if name == "custom" {
        let need = |key: &str| {
            s.text(key)
                .ok_or_else(|| CliError::Usage(format!("{key}: required for problem=custom")))
        };
        let (f, g) = (need("f")?, need("g")?);
        return CustomProblem {
            f: &f,
            g: &g,
            x0: s.float("x0").unwrap_or(1.0),
            y0: s.float("y0").unwrap_or(0.0),
            beta_hat: s.float("beta_hat").unwrap_or(1.0),
        }
        .build();
    }
    if let Some(key) = CUSTOM_KEYS.iter().find(|k| s.contains(k)) {
        return Err(CliError::Usage(format!("key '{key}' only applies to problem=custom")));
    }
    find_case(&name).ok_or_else(|| CliError::Usage(format!("problem: unknown problem '{name}' (see list-problems)")))
}

fn single(s: &Settings, key: &str) -> Result<Option<f64>, CliError> {
    match s.grid(key) {
        None => Ok(None),
        Some(v) if v.len() == 1 => Ok(Some(v[0])),
        Some(v) => Err(CliError::Usage(format!(
            "{key}: expected a single value, got {} (sweep one axis at a time)",
            v.len()
        ))),
    }
}

fn plan(s: &Settings, axis: Option<&str>) -> Result<Plan, CliError> {
    let mut case = load_case(s)?;
    let value = |key: &str| if axis == Some(key) { Ok(None) } else { single(s, key) };
    let overrides = CaseOverrides {
        epsilon: value("eps")?,
        t_end: s.float("t_end"),
        dt_coupled: s.float("dt_c"),
        dt_macro: value("dt")?,
        n_p: s.count("n_p"),
        criterion_order: s.count("criterion_order"),
        k: None,
        algorithm: s.algorithm(),
        diff_scheme: s.diff(),
        tau: value("tau")?,
        micro_steps: s.count("M"),
        alpha: s.float("alpha"),
        initial_guess: s.initial_guess(),
        warm_start: s.flag("warm_start"),
    };
    let base = overrides.apply(&case.driver);
    if case.name == "custom" {
        case.reference_dt = base.dt_coupled;
    }
    let kinds = s.kinds().unwrap_or_else(|| vec![SolverKind::Hmm(base.manifold.k)]);
    if kinds.is_empty() {
        return Err(CliError::Usage("k: no solvers given".into()));
    }
    Ok(Plan {
        case,
        overrides,
        base,
        kinds,
        reference_dt: s.float("reference_dt"),
    })
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

fn echo(plan: &Plan, s: &Settings, axis: Option<(&str, &[f64])>) -> Vec<(String, String)> {
    let kinds: Vec<String> = plan.kinds.iter().map(|k| k.label()).collect();
    let mut out = vec![
        ("problem".to_string(), plan.case.name.to_string()),
        ("k".to_string(), kinds.join(",")),
    ];
    for (key, value) in echo_driver(&plan.base) {
        match axis {
            Some((name, grid)) if name == key => out.push((key, join(grid))),
            _ => out.push((key, value)),
        }
    }
    if plan.reference_dt.is_some() || plan.case.exact.is_none() {
        out.push(("reference_dt".into(), fmt_f64(plan.reference_dt.unwrap_or(plan.case.reference_dt))));
    }
    if plan.case.name == "custom" {
        for key in ["f", "g"] {
            out.push((key.into(), s.text(key).unwrap_or_default()));
        }
        out.push(("x0".into(), fmt_f64(plan.case.x0[0])));
        out.push(("y0".into(), fmt_f64(plan.case.y0[0])));
        out.push(("beta_hat".into(), fmt_f64(plan.case.system.beta_hat())));
    }
    out
}

fn failure(status: &CellStatus) -> Option<&str> {
    match status {
        CellStatus::Ok => None,
        CellStatus::NanFailure(m) | CellStatus::Error(m) => Some(m),
    }
}

fn log_cell(r: &CellResult) {
    match failure(&r.status) {
        None => info!(
            "{}: error {:.4e}, Tc {}, {} micro calls, {:.1} ms",
            r.kind.label(),
            r.error,
            fmt_f64(r.t_c),
            r.micro_calls,
            r.wall_ms
        ),
        Some(m) => warn!("{} at {}: {}: {m}", r.kind.label(), fmt_f64(r.axis_value), r.status.label()),
    }
}

fn warn_stability(plan: &Plan) {
    if let Some(w) = plan.base.manifold.micro.stability_warning(plan.case.system.beta_hat()) {
        warn!("{w}");
    }
}

/// One row per requested solver at a single configuration. Any failed row
/// makes the command fail after the table is written.
pub fn run(s: &Settings) -> Result<(), CliError> {
    s.restrict(SIMULATION_KEYS, "run")?;
    let plan = plan(s, None)?;
    plan.base.validate()?;
    warn_stability(&plan);
    let mut sink = Sink::open(s.output().as_deref(), &echo(&plan, s, None))?;
    let cache = ReferenceCache::new();
    let rows: Vec<CellResult> = plan
        .kinds
        .iter()
        .map(|&kind| {
            let mut row = run_cell(&plan.case, kind, &plan.base, plan.reference_dt, &cache);
            row.axis_value = plan.base.epsilon;
            log_cell(&row);
            row
        })
        .collect();
    sink.cells(plan.case.name, &rows)?;
    match rows.iter().find_map(|r| failure(&r.status).map(|m| (r.kind, m))) {
        Some((kind, m)) => Err(CliError::Numerical(format!("solver {}: {m}", kind.label()))),
        None => Ok(()),
    }
}

/// A grid over exactly one of eps, dt, tau. Failed cells are reported in
/// the table and do not fail the command.
pub fn sweep(s: &Settings) -> Result<(), CliError> {
    s.restrict(SIMULATION_KEYS, "sweep")?;
    let axes: Vec<(&str, SweepAxis, Vec<f64>)> = AXES
        .iter()
        .filter_map(|&(key, axis)| s.grid(key).filter(|g| g.len() != 1).map(|g| (key, axis, g)))
        .collect();
    let (key, axis, grid) = match &axes[..] {
        [] => return Err(CliError::Usage("sweep needs a grid for one of eps, dt or tau".into())),
        [one] => one.clone(),
        [a, b, ..] => {
            return Err(CliError::Usage(format!(
                "only one axis may be swept, got grids for {} and {}",
                a.0, b.0
            )))
        }
    };
    validate_grid(&grid).map_err(|e| CliError::Usage(format!("{key}: {e}")))?;
    let plan = plan(s, Some(key))?;
    warn_stability(&plan);
    let mut sink = Sink::open(s.output().as_deref(), &echo(&plan, s, Some((key, &grid))))?;
    let options = SweepOptions {
        jobs: s.count("jobs").unwrap_or(0),
        reference_dt: plan.reference_dt,
    };
    let report = convergence_sweep(&plan.case, &plan.kinds, axis, &grid, &plan.overrides, &options)?;
    report.rows.iter().filter(|r| !r.status.is_ok()).for_each(log_cell);
    sink.cells(plan.case.name, &report.rows)?;
    for f in &report.fits {
        match f.fit {
            Some(fit) => info!(
                "{}: error ~ {key}^{:.3} (r^2 {:.4}, {} points)",
                f.kind.label(),
                fit.slope,
                fit.r_squared,
                fit.points
            ),
            None => warn!("{}: fewer than two usable cells, no fit", f.kind.label()),
        }
    }
    Ok(())
}

/// `‖C_k − C*‖₂`, `|d_k − d*|` and the iterate residual for each `(ε, k)`.
pub fn riccati(s: &Settings) -> Result<(), CliError> {
    s.restrict(RICCATI_KEYS, "riccati")?;
    let mut config = Vec::new();
    let sys = match s.seed() {
        Some(seed) => {
            let (nx, ny) = (s.count("nx").unwrap_or(2), s.count("ny").unwrap_or(2));
            if nx == 0 || ny == 0 {
                return Err(CliError::Usage("nx, ny: dimensions must be positive".into()));
            }
            config.extend([("seed", seed.to_string()), ("nx", nx.to_string()), ("ny", ny.to_string())]);
            LinearTwoScale::random(nx, ny, seed)?
        }
        None => {
            if let Some(key) = ["nx", "ny"].into_iter().find(|k| s.contains(k)) {
                return Err(CliError::Usage(format!("{key}: only used with seed (random instance)")));
            }
            LinearTwoScale::naive_scalar()
        }
    };
    let eps = s.grid("eps").unwrap_or_else(|| log_space(1e-4, 1e-2, 5));
    if eps.is_empty() {
        return Err(CliError::Usage("eps: empty grid".into()));
    }
    let orders: Vec<usize> = match s.kinds() {
        None => (0..=3).collect(),
        Some(kinds) => kinds
            .into_iter()
            .map(|k| match k {
                SolverKind::Hmm(k) => Ok(k),
                SolverKind::Coupled => Err(CliError::Usage("k: riccati takes iterate orders only".into())),
            })
            .collect::<Result<_, _>>()?,
    };
    let tol = s.float("tol").unwrap_or(1e-14);
    config.extend([
        ("eps", join(&eps)),
        ("k", orders.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
        ("tol", fmt_f64(tol)),
    ]);
    let config: Vec<(String, String)> = config.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let mut sink = Sink::open(s.output().as_deref(), &config)?;

    let mut rows = Vec::new();
    for &e in &eps {
        let fixed = riccati_fixed_point(&sys, e, tol, 10_000)?;
        info!(
            "eps {}: fixed point in {} iterations, residuals {:.2e} / {:.2e}",
            fmt_f64(e),
            fixed.iterations,
            fixed.residual_c,
            fixed.residual_d
        );
        for &k in &orders {
            let (err_c, err_d) = riccati_iterate_errors(&sys, e, k, &fixed)?;
            let (c, d) = riccati_iterates(&sys, e, k)?;
            rows.push(RiccatiRow {
                epsilon: e,
                k,
                c_err: spectral_norm(&err_c),
                d_err: err_d.norm(),
                residual: sys.residual_c(&c, e).max(sys.residual_d(&c, &d, e)),
            });
        }
    }
    sink.riccati(&rows)?;
    for &k in &orders {
        let (h, err): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.k == k).map(|r| (r.epsilon, r.c_err)).unzip();
        if let Ok(fit) = fit_loglog(&h, &err) {
            info!("k={k}: |C_k - C*| ~ eps^{:.3}", fit.slope);
        }
    }
    Ok(())
}

pub fn list_problems() {
    for case in registry() {
        let d = &case.driver;
        let m = &d.manifold;
        println!("{:<8} {}", case.name, case.description);
        println!(
            "         n_x={} n_y={} eps={} t_end={} dt_c={} dt={} k={} alg={} diff={} tau={} M={} alpha={} beta_hat={} reference={}",
            case.system.n_x(),
            case.system.n_y(),
            fmt_f64(d.epsilon),
            fmt_f64(d.t_end),
            fmt_f64(d.dt_coupled),
            fmt_f64(d.dt_macro),
            m.k,
            m.algorithm.name(),
            m.diff_scheme.name(),
            fmt_f64(m.tau),
            m.micro.steps,
            fmt_f64(m.micro.alpha),
            fmt_f64(case.system.beta_hat()),
            if case.exact.is_some() {
                "closed-form".to_string()
            } else {
                format!("coupled dt={}", fmt_f64(case.reference_dt))
            },
        );
    }
    println!("custom   scalar problem from expressions: --f, --g (in x and y), --x0, --y0, --beta-hat");
}
