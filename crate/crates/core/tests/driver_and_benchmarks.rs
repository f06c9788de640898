use mshom_core::benchmarks::{
    convergence_sweep, find_case, naive_exact, naive_exact_stable, reference_solution, registry, BenchmarkCase, CellStatus, SweepOptions,
};
use mshom_core::driver::{integrate_coupled, simulate, z_diagnostic};
use mshom_core::{CaseOverrides, DriverConfig, ManifoldConfig, SolverKind, SweepAxis, TwoScaleSystem};
use nalgebra::dvector;

#[test]
fn every_case_runs_at_its_defaults() {
    for case in registry() {
        for k in 0..=2 {
            let cfg = DriverConfig {
                manifold: ManifoldConfig { k, ..case.driver.manifold },
                record_stride: 1000,
                ..case.driver
            };
            let res = simulate(&case.system, &case.x0, &case.y0, &cfg).unwrap_or_else(|e| panic!("{} k={k}: {e}", case.name));
            assert!(res.criterion_fired, "{} k={k}", case.name);
            assert!(res.x_final.iter().all(|v| v.is_finite()));
            assert_eq!(*res.decoupled.times.last().unwrap(), case.driver.t_end);
            assert!((res.t_c - res.n_c as f64 * cfg.dt_coupled).abs() < 1e-12);
        }
    }
}

#[test]
fn attractor_decay_bound() {
    let case = find_case("naive").unwrap();
    let mut worst: f64 = 0.0;
    for eps in [1e-3, 1e-4] {
        let cfg = DriverConfig {
            epsilon: eps,
            t_end: 40.0 * eps,
            dt_coupled: eps / 10.0,
            dt_macro: eps / 10.0,
            ..case.driver
        };
        let run = integrate_coupled(&case.system, &case.x0, &case.y0, &cfg).unwrap();
        for k in 0..=2 {
            let m = ManifoldConfig {
                k,
                tau: eps,
                ..case.driver.manifold
            };
            let z = z_diagnostic(&case.system, &run.trajectory, &m, eps).unwrap();
            for (t, zt) in run.trajectory.times.iter().zip(&z) {
                let bound = eps.powi(k as i32 + 1) + (-t / (2.0 * eps)).exp() * z[0];
                worst = worst.max(zt / bound);
            }
        }
    }
    assert!(worst < 10.0, "fitted constant {worst}");
}

#[test]
fn warm_start_does_not_change_converged_results() {
    let case = find_case("enzyme").unwrap();
    let mut cfg = case.driver;
    cfg.manifold.micro.steps = 200;
    let on = simulate(&case.system, &case.x0, &case.y0, &DriverConfig { warm_start: true, ..cfg }).unwrap();
    let off = simulate(&case.system, &case.x0, &case.y0, &DriverConfig { warm_start: false, ..cfg }).unwrap();
    assert!((on.x_final - off.x_final).amax() < 1e-10);
}

#[test]
fn simulation_is_deterministic() {
    let case = find_case("fvdp").unwrap();
    let a = simulate(&case.system, &case.x0, &case.y0, &case.driver).unwrap();
    let b = simulate(&case.system, &case.x0, &case.y0, &case.driver).unwrap();
    assert_eq!(a.x_final, b.x_final);
    assert_eq!(a.coupled, b.coupled);
    assert_eq!(a.decoupled, b.decoupled);
    assert_eq!((a.t_c, a.n_c, a.micro_calls_total), (b.t_c, b.n_c, b.micro_calls_total));
    assert_eq!(a.z_checks, b.z_checks);
}

#[test]
fn naive_reference_matches_closed_form() {
    let case = find_case("naive").unwrap();
    let eps = 1e-5;
    let r = reference_solution(&case, eps, 1e-6).unwrap()[0];
    let exact = naive_exact_stable(4.0, 1.0, 2.0, eps);
    assert!((r - exact).abs() < 1e-9, "{}", r - exact);
    // the textbook form of the slow eigenvalue is off by ~1e-9 at this ε
    let textbook = naive_exact(4.0, 1.0, 2.0, eps);
    assert!((textbook - exact).abs() > 5e-10);
}

#[test]
fn enzyme_reference_is_converged() {
    let case = find_case("enzyme").unwrap();
    let a = reference_solution(&case, 1e-2, 1e-5).unwrap();
    let b = reference_solution(&case, 1e-2, 5e-6).unwrap();
    assert!((a - b).amax() < 1e-10);
}

#[test]
fn sweep_records_failing_cells_and_keeps_going() {
    let system = TwoScaleSystem::new("blowup", 1, 1, |_x, y| y.map(f64::exp), |x, y| x - y, 1.0).unwrap();
    let case = BenchmarkCase {
        name: "blowup",
        description: "f = exp(y), fails for huge difference steps",
        system,
        x0: dvector![0.0],
        y0: dvector![0.0],
        driver: DriverConfig {
            epsilon: 1e-3,
            t_end: 0.5,
            dt_coupled: 1e-4,
            dt_macro: 1e-2,
            manifold: ManifoldConfig {
                k: 2,
                micro: mshom_core::MicroConfig::new(1.0, 1).unwrap(),
                ..ManifoldConfig::default()
            },
            ..DriverConfig::default()
        },
        reference_dt: 1e-4,
        exact: None,
    };
    let report = convergence_sweep(
        &case,
        &[SolverKind::Hmm(1), SolverKind::Hmm(2)],
        SweepAxis::Tau,
        &[1e-4, 1e-3, 1e3],
        &CaseOverrides::default(),
        &SweepOptions {
            jobs: 2,
            reference_dt: None,
        },
    )
    .unwrap();
    assert_eq!(report.rows.len(), 6);
    let failed: Vec<_> = report.rows.iter().filter(|r| !r.status.is_ok()).collect();
    assert!(!failed.is_empty());
    for r in &failed {
        assert!(matches!(r.status, CellStatus::NanFailure(_)), "{:?}", r.status);
        assert_eq!(r.axis_value, 1e3);
    }
    assert_eq!(report.errors(SolverKind::Hmm(2)).len(), 2);
    assert!(report.fit(SolverKind::Hmm(2)).is_some());
    // rows come back ordered by solver, then axis value
    let keys: Vec<_> = report.rows.iter().map(|r| (r.kind, r.axis_value)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    assert_eq!(keys, sorted);
}

#[test]
fn decoupling_error_order_on_enzyme() {
    let case = find_case("enzyme").unwrap();
    let overrides = CaseOverrides {
        dt_macro: Some(1e-3),
        ..Default::default()
    };
    let grid = mshom_core::convergence::log_space(1e-3, 1e-2, 4);
    let kinds = [SolverKind::Hmm(0), SolverKind::Hmm(1), SolverKind::Hmm(2)];
    let report = convergence_sweep(&case, &kinds, SweepAxis::Epsilon, &grid, &overrides, &SweepOptions::default()).unwrap();
    for (k, kind) in kinds.iter().enumerate() {
        let slope = report.fit(*kind).unwrap().slope;
        assert!(slope >= k as f64 + 0.7, "k={k}: slope {slope}");
    }
}
