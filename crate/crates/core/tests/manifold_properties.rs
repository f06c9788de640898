use mshom_core::benchmarks::{find_case, BenchmarkCase};
use mshom_core::convergence::{fit_loglog, log_space};
use mshom_core::driver::run_coupled_stage;
use mshom_core::manifold::{evaluate_manifold, gamma1_analytic, hmm_type1, hmm_type2, micro_call_count};
use mshom_core::micro::{micro_residual, relax_solve};
use mshom_core::riccati::{riccati_iterates, LinearTwoScale};
use mshom_core::{Algorithm, DiffScheme, ManifoldConfig, MicroConfig, Vector};
use nalgebra::dvector;
use proptest::prelude::*;

fn cfg(k: usize, algorithm: Algorithm, diff_scheme: DiffScheme, tau: f64, micro: MicroConfig) -> ManifoldConfig {
    ManifoldConfig {
        k,
        algorithm,
        diff_scheme,
        tau,
        micro,
    }
}

/// A state on the case's trajectory just after the initial layer.
fn settled(case: &BenchmarkCase) -> (Vector, Vector) {
    let stage = run_coupled_stage(&case.system, &case.x0, &case.y0, &case.driver).unwrap();
    (stage.x, stage.y)
}

#[test]
fn counts_hold_on_every_benchmark() {
    for name in ["enzyme", "fvdp", "chua"] {
        let case = find_case(name).unwrap();
        let (x, y) = settled(&case);
        for algorithm in [Algorithm::Type1, Algorithm::Type2] {
            for scheme in [DiffScheme::Forward, DiffScheme::Central] {
                for k in 0..=4 {
                    let c = cfg(k, algorithm, scheme, 1e-5, case.driver.manifold.micro);
                    let out = evaluate_manifold(&case.system, &x, case.driver.epsilon, &c, &y).unwrap();
                    assert_eq!(out.micro_calls, micro_call_count(algorithm, scheme, k));
                }
            }
        }
    }
}

#[test]
fn manifold_residual_equals_micro_residual() {
    for name in ["enzyme", "fvdp", "chua", "vdp"] {
        let case = find_case(name).unwrap();
        let micro = MicroConfig {
            steps: 400,
            ..case.driver.manifold.micro
        };
        let eps = case.driver.epsilon;
        let (x, seed) = settled(&case);
        for k in 0..=2 {
            let c = cfg(k + 1, Algorithm::Type2, DiffScheme::Central, 1e-4, micro);
            let out = hmm_type2(&case.system, &x, eps, &c, &seed).unwrap();
            let r = micro_residual(&case.system, &x, &out.value, out.slope.as_ref().unwrap(), eps);
            assert!(r < 1e-12, "{name} k={}: residual {r}", k + 1);
        }
    }
}

/// `|Γ̂₁ - (γ + εγ₁)|` is `O(ε²)` once `g` is nonlinear in `y`.
#[test]
fn first_iterate_matches_expansion_on_nonlinear_fast_field() {
    let case = find_case("chua").unwrap();
    let micro = MicroConfig::new(0.05, 400).unwrap();
    let xs: Vec<Vector> = (0..8).map(|i| dvector![1.0 - 0.2 * i as f64, -0.6 + 0.2 * i as f64]).collect();
    let grid = log_space(1e-4, 1e-2, 6);
    let mut gaps = Vec::new();
    for &eps in &grid {
        let c = cfg(1, Algorithm::Type2, DiffScheme::Central, 1e-4, micro);
        let mut worst: f64 = 0.0;
        for x in &xs {
            let seed = dvector![0.0];
            let it = hmm_type2(&case.system, x, eps, &c, &seed).unwrap().value;
            let gamma = relax_solve(&case.system, x, &dvector![0.0], &seed, eps, &micro).unwrap().y;
            let exp = &gamma + gamma1_analytic(&case.system, x, &gamma).unwrap() * eps;
            worst = worst.max((it - exp).norm());
        }
        gaps.push(worst);
    }
    let fit = fit_loglog(&grid, &gaps).unwrap();
    assert!(fit.slope >= 1.9, "slope {} gaps {gaps:?}", fit.slope);
}

/// Difference error of `Γ̂₁` alone: `O(ετ)` forward, `O(ετ²)` central.
#[test]
fn difference_error_orders_at_a_point() {
    let case = find_case("vdp").unwrap();
    let micro = MicroConfig::new(0.1, 400).unwrap();
    let (x, eps) = (dvector![3.0], 1e-3);
    let seed = relax_solve(
        &case.system,
        &x,
        &dvector![0.0],
        &dvector![0.0],
        eps,
        &MicroConfig { steps: 4000, ..micro },
    )
    .unwrap()
    .y;
    let exact = {
        // γ(x) = -x/(x²-1); the manifold equation gives Γ₁ in closed form for g affine in y
        let g = -x[0] / (x[0] * x[0] - 1.0);
        let dg = (x[0] * x[0] + 1.0) / (x[0] * x[0] - 1.0).powi(2);
        g + eps * dg * g / -(x[0] * x[0] - 1.0)
    };
    let taus = log_space(1e-3, 1e-1, 6);
    for (scheme, order) in [(DiffScheme::Forward, 1.0), (DiffScheme::Central, 2.0)] {
        let errs: Vec<f64> = taus
            .iter()
            .map(|&tau| {
                let c = cfg(1, Algorithm::Type2, scheme, tau, micro);
                (hmm_type2(&case.system, &x, eps, &c, &seed).unwrap().value[0] - exact).abs()
            })
            .collect();
        let fit = fit_loglog(&taus, &errs).unwrap();
        assert!((fit.slope - order).abs() <= 0.3, "{scheme:?}: slope {} errs {errs:?}", fit.slope);
    }
}

#[test]
fn linear_manifold_reconstructs_riccati_iterates() {
    let sys = LinearTwoScale::random(2, 2, 21).unwrap();
    let system = sys.to_system("lin").unwrap();
    let eps = 1e-2;
    let l = nalgebra::linalg::SVD::new(sys.a22.clone(), false, false).singular_values.max();
    let micro = MicroConfig::new(1.0 / (l * l), 4000).unwrap();
    for k in 0..=3 {
        let (ck, dk) = riccati_iterates(&sys, eps, k).unwrap();
        let c = cfg(k, Algorithm::Type2, DiffScheme::Forward, 1e-2, micro);
        let origin = Vector::zeros(2);
        let at_origin = hmm_type2(&system, &origin, eps, &c, &origin).unwrap().value;
        assert!((&at_origin - &dk).amax() < 1e-10, "k={k}: d");
        for j in 0..2 {
            let e = Vector::from_fn(2, |i, _| if i == j { 1.0 } else { 0.0 });
            let v = hmm_type2(&system, &e, eps, &c, &origin).unwrap().value;
            assert!((v - &ck * &e - &dk).amax() < 1e-10, "k={k}: column {j}");
        }
    }
}

proptest! {
    #[test]
    fn type1_and_type2_agree_on_linear_problems(x in -5.0f64..5.0, a21 in 0.2f64..2.0, beta in 0.5f64..4.0, k in 0usize..=2) {
        let sys = LinearTwoScale::new(
            nalgebra::dmatrix![-0.3],
            nalgebra::dmatrix![1.0],
            nalgebra::dmatrix![a21],
            nalgebra::dmatrix![-beta],
            dvector![0.1],
            dvector![0.4],
        )
        .unwrap()
        .to_system("lin")
        .unwrap();
        let micro = MicroConfig::new(1.0 / beta, 1).unwrap();
        let c = cfg(k, Algorithm::Type1, DiffScheme::Forward, 1e-2, micro);
        let a = hmm_type1(&sys, &dvector![x], 1e-2, &c, &dvector![0.0]).unwrap().value[0];
        let b = hmm_type2(&sys, &dvector![x], 1e-2, &c, &dvector![0.0]).unwrap().value[0];
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
