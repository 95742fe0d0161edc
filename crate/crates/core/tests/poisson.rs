use std::f64::consts::PI;

use proptest::prelude::*;

use vpgrav::distribution::DensityField;
use vpgrav::grid::SpatialGrid;
use vpgrav::model::Sign;
use vpgrav::poisson::{solve_dirichlet, PoissonSolver};

mod common;

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn vertical_mode_matches_closed_form() {
    let grid = SpatialGrid::new(1, 1, 128, 30.0, 1.02).unwrap();
    let rho = DensityField::from_fn(grid.clone(), |x| (-x[2]).exp()).unwrap();
    let phi = solve_dirichlet(&rho, Sign::Plus).unwrap();
    for (i, p) in phi.node_potential().iter().enumerate() {
        let x3 = grid.position(i)[2];
        assert!((p - common::poisson_mode0(x3)).abs() < 1e-5, "x3 {x3}");
    }
    // Φ' = −e^{−x3}.
    let g = phi.gradient(&[0.0, 0.0, 0.7]);
    assert!((g[2] + (-0.7f64).exp()).abs() < 1e-5);
}

#[test]
fn first_horizontal_mode_matches_closed_form() {
    let grid = SpatialGrid::new(8, 4, 128, 30.0, 1.02).unwrap();
    let rho =
        DensityField::from_fn(grid.clone(), |x| (-x[2]).exp() * (2.0 * PI * x[0]).cos()).unwrap();
    let phi = solve_dirichlet(&rho, Sign::Plus).unwrap();
    for x in [[0.1, 0.3, 0.25], [-0.4, 0.0, 1.5], [0.33, -0.2, 4.0]] {
        let exact = common::poisson_mode1(x[2]) * (2.0 * PI * x[0]).cos();
        assert!((phi.potential(&x) - exact).abs() < 1e-5, "{x:?}");
    }
}

#[test]
fn mode_cut_drops_high_modes() {
    let grid = SpatialGrid::new(8, 1, 64, 10.0, 1.0).unwrap();
    let rho =
        DensityField::from_fn(grid.clone(), |x| (-x[2]).exp() * (6.0 * PI * x[0]).cos()).unwrap();
    let cut = PoissonSolver::new(&grid, Some(1))
        .unwrap()
        .solve(&rho, Sign::Plus)
        .unwrap();
    assert!(cut.potential_sup() < 1e-12);
}

fn density(grid: &SpatialGrid, a: f64, b: f64, k: f64) -> DensityField {
    DensityField::from_fn(grid.clone(), |x| {
        (-k * x[2]).exp()
            * (a + b * (2.0 * PI * x[0]).cos() + 0.5 * b * (2.0 * PI * (x[0] - x[1])).sin())
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flipping_the_coupling_flips_the_potential(a in -2.0..2.0f64, b in -1.0..1.0f64, k in 0.5..3.0f64) {
        let grid = SpatialGrid::new(4, 4, 24, 6.0, 1.05).unwrap();
        let rho = density(&grid, a, b, k);
        let plus = solve_dirichlet(&rho, Sign::Plus).unwrap();
        let minus = solve_dirichlet(&rho, Sign::Minus).unwrap();
        let neg: Vec<f64> = minus.node_potential().iter().map(|p| -p).collect();
        prop_assert!(sup_diff(plus.node_potential(), &neg) <= 1e-14 * (1.0 + plus.potential_sup()));
    }

    #[test]
    fn solve_is_linear(a in -2.0..2.0f64, b in -1.0..1.0f64, c in -3.0..3.0f64) {
        let grid = SpatialGrid::new(4, 2, 16, 5.0, 1.0).unwrap();
        let r1 = density(&grid, a, b, 1.0);
        let r2 = density(&grid, b, a, 2.0);
        let mix: Vec<f64> = r1.values().iter().zip(r2.values()).map(|(x, y)| x + c * y).collect();
        let mix = DensityField::from_values(grid.clone(), mix).unwrap();
        let p1 = solve_dirichlet(&r1, Sign::Plus).unwrap();
        let p2 = solve_dirichlet(&r2, Sign::Plus).unwrap();
        let pm = solve_dirichlet(&mix, Sign::Plus).unwrap();
        let expect: Vec<f64> = p1.node_potential().iter().zip(p2.node_potential()).map(|(x, y)| x + c * y).collect();
        prop_assert!(sup_diff(pm.node_potential(), &expect) <= 1e-12 * (1.0 + pm.potential_sup()));
    }

    #[test]
    fn potential_vanishes_on_the_wall(a in -2.0..2.0f64, b in -1.0..1.0f64, x1 in -0.5..0.5f64, x2 in -0.5..0.5f64) {
        let grid = SpatialGrid::new(4, 4, 16, 5.0, 1.0).unwrap();
        let phi = solve_dirichlet(&density(&grid, a, b, 1.0), Sign::Plus).unwrap();
        prop_assert!(phi.potential(&[x1, x2, 0.0]).abs() <= 1e-14);
    }
}
