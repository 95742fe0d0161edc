use vpgrav::boundary::BoundaryDatum;
use vpgrav::characteristics::StepRule;
use vpgrav::conditions::Status;
use vpgrav::dynamic::{DynamicConfig, InitialPerturbation};
use vpgrav::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use vpgrav::model::{Params, Sign};
use vpgrav::steady::{SteadyConfig, SteadySeed};
use vpgrav::verify::{run_battery, Horizon, Scenario, VerifySettings};

fn scenario(
    params: Params,
    boundary: BoundaryDatum,
    f0: InitialPerturbation,
    horizon: Horizon,
) -> Scenario {
    let spatial = SpatialGrid::new(1, 1, 16, 3.0, 1.05).unwrap();
    let velocity = VelocityGrid::new([6, 6, 16], 3.0).unwrap();
    Scenario {
        params,
        grid: PhaseGrid::new(spatial, velocity),
        boundary,
        steady: SteadyConfig {
            tol_fix: 1e-10,
            max_iter: 60,
            step: StepRule::Relative(5e-3),
            mode_cut: None,
            seed: SteadySeed::Zero,
        },
        dynamic: DynamicConfig {
            dt: 0.02,
            ..DynamicConfig::default()
        },
        horizon,
        f0,
        verify: VerifySettings {
            samples: 200,
            jacobian_samples: 10,
            ..VerifySettings::default()
        },
    }
}

#[test]
fn vacuum_passes_everything() {
    let params = Params::new(10.0, Sign::Plus, 1.5, 1.0).unwrap();
    let sc = scenario(
        params,
        BoundaryDatum::vacuum(),
        InitialPerturbation::Zero,
        Horizon::Rates(5.0),
    );
    let b = run_battery(&sc).unwrap();
    assert!(b.report.passed());
    for r in &b.report.records {
        assert_eq!(r.status, Status::Pass, "{}: {}", r.spec.id, r.note);
    }
    assert_eq!(b.uniqueness_distance, 0.0);
}

#[test]
fn weak_gravity_fails_the_bootstrap_and_skips_gated_checks() {
    let params = Params::new(1.0, Sign::Minus, 1.5, 1.0).unwrap();
    let f0 = InitialPerturbation::Layer {
        amplitude: 0.01,
        decay: 2.0,
    };
    let sc = scenario(
        params,
        BoundaryDatum::maxwellian(3.0, 2.0).unwrap(),
        f0,
        Horizon::Time(0.1),
    );
    let b = run_battery(&sc).unwrap();
    assert_eq!(b.report.get("Bootstrap").unwrap().status, Status::Fail);
    assert!(!b.report.passed());
    for id in ["exit_time", "velocity_lemma"] {
        assert_eq!(b.report.get(id).unwrap().status, Status::Unchecked, "{id}");
    }
    assert!(b
        .report
        .hard_failures()
        .iter()
        .any(|r| r.spec.id == "Bootstrap"));
}

#[test]
fn rendering_is_reproducible() {
    let params = Params::new(10.0, Sign::Plus, 1.5, 1.0).unwrap();
    let f0 = InitialPerturbation::Layer {
        amplitude: 0.01,
        decay: 2.0,
    };
    let sc = scenario(
        params,
        BoundaryDatum::maxwellian(1.0, 2.0).unwrap(),
        f0,
        Horizon::Time(0.2),
    );
    let a = run_battery(&sc).unwrap().report.render();
    let b = run_battery(&sc).unwrap().report.render();
    assert_eq!(a, b);
    assert!(a.starts_with("# vpgrav verify report"));
    assert!(a.lines().filter(|l| l.starts_with("check ")).count() >= 20);
}
