//! Horizontally uniform Maxwellian inflow: the steady potential solves
//! `Φ'' = η ρ0 e^{−2β(Φ + g x3)}`, `Φ(0) = 0`, `Φ' → 0`.

use std::f64::consts::PI;

mod common;
use common::{closed_form, shooting};

use vpgrav::boundary::BoundaryDatum;
use vpgrav::characteristics::StepRule;
use vpgrav::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use vpgrav::model::{Params, Sign};
use vpgrav::steady::{SteadyConfig, SteadySeed, SteadySolver};

#[test]
fn closed_form_agrees_with_shooting() {
    let xs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
    for eta in [1.0, -1.0] {
        let rho0 = PI.powf(1.5);
        let shot = shooting(eta, rho0, 1.0, 3.0, &xs);
        for (x, s) in xs.iter().zip(&shot) {
            let c = closed_form(eta, rho0, 1.0, 3.0, *x);
            assert!((c - s).abs() < 1e-8, "eta {eta} x {x}: {c} vs {s}");
        }
    }
}

#[test]
fn steady_potential_matches_the_oracle() {
    let (g, beta_g) = (3.0, 1.0);
    let rho0 = (PI / beta_g).powf(1.5);
    for sign in [Sign::Plus, Sign::Minus] {
        let params = Params::new(g, sign, 0.9, 0.9).unwrap();
        let spatial = SpatialGrid::new(1, 1, 128, 18.0, 1.02).unwrap();
        let velocity = VelocityGrid::new([12, 12, 48], 5.0).unwrap();
        let grid = PhaseGrid::new(spatial.clone(), velocity);
        let cfg = SteadyConfig {
            tol_fix: 1e-9,
            max_iter: 60,
            step: StepRule::Relative(5e-3),
            mode_cut: None,
            seed: SteadySeed::Zero,
        };
        let solver = SteadySolver::new(
            params,
            grid,
            BoundaryDatum::maxwellian(1.0, beta_g).unwrap(),
            cfg,
        )
        .unwrap();
        let sol = solver.solve().unwrap();
        let err = spatial
            .heights()
            .iter()
            .zip(sol.phi.node_potential())
            .map(|(x, p)| (p - closed_form(sign.value(), rho0, beta_g, g, *x)).abs())
            .fold(0.0f64, f64::max);
        assert!(sol.converged);
        assert!(sol.history.iter().all(|s| s.bounds.worst_margin() > -1e-3));
        assert!(err <= 1e-4, "sup error {err:e}");
    }
}
