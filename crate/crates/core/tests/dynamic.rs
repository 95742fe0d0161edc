use std::f64::consts::{E, PI};

use proptest::prelude::*;

use vpgrav::boundary::BoundaryDatum;
use vpgrav::characteristics::{backward_exit, PotentialForce, StepRule};
use vpgrav::distribution::{Distribution, Role};
use vpgrav::dynamic::{
    fit_decay, lambda_infinity, DynamicConfig, DynamicSolver, InitialPerturbation, Source,
    StateNorms, TimeSample,
};
use vpgrav::error::Error;
use vpgrav::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use vpgrav::model::{Params, PhasePoint, Sign};
use vpgrav::steady::{
    grad_h_table, GradHTable, SteadyConfig, SteadySeed, SteadySolution, SteadySolver,
};

fn params() -> Params {
    Params::new(10.0, Sign::Plus, 1.5, 1.0).unwrap()
}

fn steady() -> (SteadySolution, GradHTable) {
    let grid = PhaseGrid::new(
        SpatialGrid::new(1, 1, 20, 1.85, 1.05).unwrap(),
        VelocityGrid::new([6, 6, 16], 3.05).unwrap(),
    );
    let cfg = SteadyConfig {
        tol_fix: 1e-10,
        max_iter: 60,
        step: StepRule::Relative(5e-3),
        mode_cut: None,
        seed: SteadySeed::Zero,
    };
    let sol = SteadySolver::new(
        params(),
        grid,
        BoundaryDatum::maxwellian(1.0, 2.0).unwrap(),
        cfg,
    )
    .unwrap()
    .solve()
    .unwrap();
    let table = grad_h_table(&sol).unwrap();
    (sol, table)
}

fn layer(grid: &PhaseGrid) -> Distribution {
    InitialPerturbation::Layer {
        amplitude: 0.01,
        decay: 2.0,
    }
    .build(grid, &params())
    .unwrap()
}

#[test]
fn rate_examples() {
    let p = params();
    let (g, beta) = (p.g, p.beta);
    let scale = g * g * beta / 64.0;
    // Argument of the logarithm equal to e.
    let n = g * beta * beta / (2f64.powf(8.5 + 2.0 / g) * PI.powf(1.5) * (E - 2.0));
    assert!((lambda_infinity(&p, n).unwrap() - scale).abs() < 1e-12 * scale);
    // Large norms leave ln 2.
    assert!((lambda_infinity(&p, 1e200).unwrap() - scale * 2f64.ln()).abs() < 1e-12);
    assert_eq!(lambda_infinity(&p, 0.0).unwrap(), f64::INFINITY);
    assert!(lambda_infinity(&p, -1.0).is_err());
}

#[test]
fn zero_perturbation_stays_zero() {
    let (sol, table) = steady();
    let solver = DynamicSolver::new(
        &sol,
        &table,
        DynamicConfig {
            dt: 0.02,
            t_final: 0.1,
            ..DynamicConfig::default()
        },
    )
    .unwrap();
    let f0 = Distribution::zeros(sol.grid().clone(), Role::Perturbation, 1.5);
    let ev = solver.evolve(f0, |_| Ok(())).unwrap();
    assert_eq!(ev.samples.len(), 6);
    assert!(ev
        .samples
        .iter()
        .all(|s| s.norms.rho_sup == 0.0 && s.decay_lhs == 0.0));
    assert!(ev.last.f.values().iter().all(|v| *v == 0.0));
    assert_eq!(ev.report.lambda_fit, None);
}

#[test]
fn constant_source_accumulates_over_the_step() {
    let (sol, table) = steady();
    let (c, dt) = (0.7, 0.02);
    let cfg = DynamicConfig {
        dt,
        source: Source::Constant(c),
        ..DynamicConfig::default()
    };
    let solver = DynamicSolver::new(&sol, &table, cfg).unwrap();
    let grid = sol.grid().clone();
    let state = solver
        .initial_state(Distribution::zeros(grid.clone(), Role::Perturbation, 1.5))
        .unwrap();
    let next = solver.step(&state, dt).unwrap();
    let force = PotentialForce::steady(10.0, &sol.phi).unwrap();
    for i in (0..grid.len()).step_by(5) {
        let z = grid.point(i);
        let t_b = backward_exit(&z, &force, StepRule::Absolute(1e-4))
            .unwrap()
            .t_b;
        let expect = c * t_b.min(dt);
        assert!(
            (next.f.values()[i] - expect).abs() < 1e-6,
            "node {i}: {} vs {expect}",
            next.f.values()[i]
        );
    }
}

#[test]
fn pure_transport_keeps_sign_and_sup() {
    let (sol, table) = steady();
    let cfg = DynamicConfig {
        dt: 0.03,
        source: Source::Off,
        ..DynamicConfig::default()
    };
    let solver = DynamicSolver::new(&sol, &table, cfg).unwrap();
    let grid = sol.grid().clone();
    let mut state = solver.initial_state(layer(&grid)).unwrap();
    for _ in 0..6 {
        let next = solver.step(&state, 0.03).unwrap();
        assert!(next.f.values().iter().all(|v| *v >= 0.0));
        assert!(next.f.sup() <= state.f.sup() * (1.0 + 1e-12));
        state = next;
    }
}

#[test]
fn incoming_wall_nodes_are_zero() {
    let (sol, table) = steady();
    let solver = DynamicSolver::new(
        &sol,
        &table,
        DynamicConfig {
            dt: 0.02,
            ..DynamicConfig::default()
        },
    )
    .unwrap();
    let grid = sol.grid().clone();
    let f0 = Distribution::from_fn(grid.clone(), Role::Perturbation, 1.5, |z| {
        0.01 * (-(z.speed_squared())).exp()
    })
    .unwrap();
    let next = solver
        .step(&solver.initial_state(f0).unwrap(), 0.02)
        .unwrap();
    for i in 0..grid.len() {
        let z = grid.point(i);
        if z.x[2] == 0.0 && z.v[2] > 0.0 {
            assert_eq!(next.f.values()[i], 0.0, "node {i}");
        }
    }
}

#[test]
fn coarse_time_steps_are_refused() {
    let (sol, table) = steady();
    let probe = DynamicSolver::new(&sol, &table, DynamicConfig::default()).unwrap();
    let dt = 2.0 * probe.max_stable_dt();
    let solver = DynamicSolver::new(
        &sol,
        &table,
        DynamicConfig {
            dt,
            t_final: 1.0,
            ..DynamicConfig::default()
        },
    )
    .unwrap();
    let err = solver.evolve(layer(sol.grid()), |_| Ok(())).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn small_layer_decays_and_keeps_the_bounds() {
    let (sol, table) = steady();
    let cfg = DynamicConfig {
        dt: 0.04,
        t_final: 1.2,
        output_stride: 5,
        ..DynamicConfig::default()
    };
    let solver = DynamicSolver::new(&sol, &table, cfg).unwrap();
    let mut observed = Vec::new();
    let ev = solver
        .evolve(layer(sol.grid()), |s| {
            observed.push(s.step);
            Ok(())
        })
        .unwrap();
    assert_eq!(observed, vec![0, 5, 10, 15, 20, 25, 30]);
    let r = &ev.report;
    assert!(r.bootstrap.all() && r.decay_holds && r.flux_bound_holds);
    assert!(r.lambda_fit.unwrap() > 0.0);
    assert!(r.e_b <= 2.0);
}

fn sample(t: f64, rho: f64) -> TimeSample {
    let norms = StateNorms {
        rho_sup: rho,
        f_half_weighted: 0.0,
        f_eighth_weighted: 0.0,
        grad_psi_sup: 0.0,
        flux_potential_sup: 0.0,
    };
    TimeSample {
        t,
        norms,
        decay_lhs: 0.0,
        decay_rhs: 0.0,
        decay_f_lhs: 0.0,
        decay_f_rhs: 0.0,
        flux_bound_lhs: 0.0,
        flux_bound_rhs: 0.0,
        bootstrap_ok: true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_decreases_with_the_gradient_norm(a in 1e-6..1e3f64, b in 1e-6..1e3f64) {
        let p = params();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (l_lo, l_hi) = (lambda_infinity(&p, lo).unwrap(), lambda_infinity(&p, hi).unwrap());
        prop_assert!(l_hi <= l_lo);
        prop_assert!(l_hi >= p.g * p.g * p.beta / 64.0 * 2f64.ln());
    }

    #[test]
    fn fit_recovers_exponential_rates(rate in 0.1..30.0f64, c in 1e-6..1.0f64) {
        let samples: Vec<TimeSample> = (0..=40).map(|i| {
            let t = 0.05 * i as f64;
            sample(t, c * (-rate * t).exp())
        }).collect();
        let (fit, window, n) = fit_decay(&samples, 2.0);
        prop_assert!((fit.unwrap() - rate).abs() < 1e-8 * rate);
        prop_assert_eq!(window, Some((1.0, 2.0)));
        prop_assert_eq!(n, 21);
    }

    #[test]
    fn layer_gradient_matches_differences(x3 in 0.0..2.0f64, v in prop::array::uniform3(-2.0..2.0f64), decay in 0.5..3.0f64) {
        let f0 = InitialPerturbation::Layer { amplitude: 0.3, decay };
        let g = 10.0;
        let value = |z: &PhasePoint| {
            let e = (-decay * (z.speed_squared() + 2.0 * g * z.x[2])).exp();
            0.3 * e * (1.0 - (-2.0 * decay * g * z.x[2]).exp())
        };
        let z = PhasePoint::new([0.1, 0.2, x3 + 1e-3], v).unwrap();
        let (dx, dv) = f0.gradient(&z, g);
        let h = 1e-6;
        let (mut p, mut m) = (z, z);
        p.x[2] += h;
        m.x[2] -= h;
        prop_assert!(((value(&p) - value(&m)) / (2.0 * h) - dx[2]).abs() < 1e-6);
        prop_assert!(dx[0] == 0.0 && dx[1] == 0.0);
        for a in 0..3 {
            let (mut p, mut m) = (z, z);
            p.v[a] += h;
            m.v[a] -= h;
            prop_assert!(((value(&p) - value(&m)) / (2.0 * h) - dv[a]).abs() < 1e-6);
        }
    }
}
