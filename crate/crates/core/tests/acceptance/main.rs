//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p vpgrav --test acceptance`. Time limits are
//! checked against wall time on the machine at hand.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use vpgrav::boundary::BoundaryDatum;
use vpgrav::characteristics::{backward_exit, FreeFall, PotentialForce, StepRule};
use vpgrav::conditions::Status;
use vpgrav::distribution::{DensityField, Distribution, Role};
use vpgrav::dynamic::DynamicConfig;
use vpgrav::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use vpgrav::io::{RunConfig, Snapshot};
use vpgrav::model::{Params, PhasePoint, Sign};
use vpgrav::poisson::{green_selftest, solve_dirichlet};
use vpgrav::steady::{SteadyConfig, SteadySeed, SteadySolver};
use vpgrav::verify::{
    exit_time_margin, run_battery, sample_points, Battery, Horizon, Scenario, VerifySettings,
};

#[path = "../common/mod.rs"]
mod common;

type Outcome = Result<(bool, String), String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, limit_s: Option<f64>, check: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (mut ok, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if let Some(limit) = limit_s {
            if secs >= limit {
                ok = false;
                detail.push_str(&format!("; over the {limit} s limit"));
            }
        }
        if !ok {
            self.failures += 1;
        }
        println!(
            "[{}] {id:>2}. {name}: {detail} ({secs:.2} s)",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn sup_error(values: &[f64], exact: impl Fn(usize) -> f64) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - exact(i)).abs())
        .fold(0.0, f64::max)
}

fn poisson_mode0() -> Outcome {
    let grid = SpatialGrid::new(1, 1, 512, 40.0, 1.0).map_err(err)?;
    let rho = DensityField::from_fn(grid.clone(), |x| (-x[2]).exp()).map_err(err)?;
    let phi = solve_dirichlet(&rho, Sign::Plus).map_err(err)?;
    let e = sup_error(phi.node_potential(), |i| {
        common::poisson_mode0(grid.position(i)[2])
    });
    Ok((e <= 1e-6, format!("sup error {e:.3e} at n3 = 512")))
}

fn poisson_mode1() -> Outcome {
    let grid = SpatialGrid::new(8, 1, 512, 40.0, 1.0).map_err(err)?;
    let rho = DensityField::from_fn(grid.clone(), |x| (-x[2]).exp() * (2.0 * PI * x[0]).cos())
        .map_err(err)?;
    let phi = solve_dirichlet(&rho, Sign::Plus).map_err(err)?;
    let e = sup_error(phi.node_potential(), |i| {
        let x = grid.position(i);
        common::poisson_mode1(x[2]) * (2.0 * PI * x[0]).cos()
    });
    Ok((e <= 1e-6, format!("sup error {e:.3e}")))
}

fn free_fall() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let g = rng.gen_range(0.5..20.0);
        let x3 = rng.gen_range(0.0..5.0);
        let v3 = rng.gen_range(-5.0..5.0);
        let z = PhasePoint::new([0.1, -0.2, x3], [0.3, -0.4, v3]).map_err(err)?;
        let t_b = backward_exit(
            &z,
            &FreeFall::new(g).map_err(err)?,
            StepRule::Relative(1e-2),
        )
        .map_err(err)?
        .t_b;
        worst = worst.max((t_b - common::free_fall_exit(g, x3, v3)).abs());
    }
    Ok((
        worst <= 1e-8,
        format!("1000 samples, max |t_b - exact| {worst:.3e}"),
    ))
}

fn exit_time_battery() -> Outcome {
    let params = Params::new(10.0, Sign::Plus, 1.5, 1.0).map_err(err)?;
    let spatial = SpatialGrid::new(4, 1, 32, 1.85, 1.05).map_err(err)?;
    let grid = PhaseGrid::new(spatial, VelocityGrid::new([8, 8, 16], 3.05).map_err(err)?);
    let boundary = BoundaryDatum::modulated(1.0, 2.0, 0.5).map_err(err)?;
    let cfg = SteadyConfig {
        tol_fix: 1e-10,
        max_iter: 60,
        step: StepRule::Relative(2e-2),
        mode_cut: None,
        seed: SteadySeed::Zero,
    };
    let sol = SteadySolver::new(params, grid.clone(), boundary, cfg)
        .map_err(err)?
        .solve()
        .map_err(err)?;
    let grad = sol.phi.gradient_sup();
    if !(sol.converged && grad <= params.g / 2.0) {
        return Ok((
            false,
            format!(
                "steady state not admissible: converged {}, |grad Phi| {grad:.3e}",
                sol.converged
            ),
        ));
    }
    let force = PotentialForce::steady(params.g, &sol.phi).map_err(err)?;
    let pts = sample_points(&grid, 10_000, &mut ChaCha8Rng::seed_from_u64(4));
    let margins: Vec<f64> = pts
        .par_iter()
        .map(|z| exit_time_margin(params.g, &force, z, StepRule::Absolute(1e-3)))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let violations = margins.iter().filter(|m| **m < 0.0).count();
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        violations == 0,
        format!("10000 samples, |grad Phi| {grad:.3e}, {violations} violations, worst margin {worst:.3e}"),
    ))
}

fn steady_oracle() -> Outcome {
    let (g, beta_g) = (3.0, 1.0);
    let rho0 = (PI / beta_g).powf(1.5);
    let mut parts = Vec::new();
    let mut ok = true;
    for sign in [Sign::Plus, Sign::Minus] {
        let params = Params::new(g, sign, 0.9, 0.9).map_err(err)?;
        let spatial = SpatialGrid::new(1, 1, 256, 18.0, 1.01).map_err(err)?;
        let grid = PhaseGrid::new(
            spatial.clone(),
            VelocityGrid::new([16, 16, 64], 5.0).map_err(err)?,
        );
        let cfg = SteadyConfig {
            tol_fix: 1e-10,
            max_iter: 80,
            step: StepRule::Relative(5e-3),
            mode_cut: None,
            seed: SteadySeed::Zero,
        };
        let boundary = BoundaryDatum::maxwellian(1.0, beta_g).map_err(err)?;
        let sol = SteadySolver::new(params, grid, boundary, cfg)
            .map_err(err)?
            .solve()
            .map_err(err)?;
        let heights = spatial.heights();
        let shot = common::shooting(sign.value(), rho0, beta_g, g, heights);
        let e = sup_error(sol.phi.node_potential(), |i| shot[i]);
        ok &= sol.converged && e <= 1e-4;
        parts.push(format!(
            "eta {:+} error {e:.3e} ({} iterations)",
            sign.value(),
            sol.iterations()
        ));
    }
    Ok((ok, parts.join(", ")))
}

fn default_scenario() -> Result<Scenario, String> {
    let text = include_str!("../../../../default.cfg");
    RunConfig::parse(text)
        .and_then(|c| c.scenario(std::path::Path::new(".")))
        .map_err(err)
}

fn uniform_bounds(b: &Battery) -> Outcome {
    let bounds = b
        .report
        .get("steady:uniform_bounds")
        .ok_or("missing check")?;
    let worst_relative = b
        .steady
        .history
        .iter()
        .map(|h| h.bounds.worst_margin())
        .fold(f64::INFINITY, f64::min);
    let ratios: Vec<f64> = b
        .steady
        .history
        .iter()
        .filter(|h| h.index > 2)
        .filter_map(|h| h.ratio)
        .collect();
    let worst_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let ok = bounds.status == Status::Pass && worst_relative >= -1e-3 && worst_ratio <= 0.5;
    Ok((
        ok,
        format!(
            "{} iterates, worst relative bound margin {worst_relative:.3e}, max ratio after iterate 2 {worst_ratio:.3e}",
            b.steady.history.len()
        ),
    ))
}

fn uniqueness(b: &Battery) -> Outcome {
    let gate = b
        .report
        .get("condition_unique")
        .ok_or("missing check")?
        .status;
    let d = b.uniqueness_distance;
    Ok((
        d <= 1e-6 && gate == Status::Pass,
        format!("weighted distance {d:.3e} between two starts"),
    ))
}

fn jacobian(b: &Battery) -> Outcome {
    let r = b.report.get("jacobian").ok_or("missing check")?;
    Ok((
        r.status == Status::Pass && r.samples == 100,
        format!("{} samples, {}", r.samples, r.note),
    ))
}

fn weight_invariance(b: &Battery) -> Outcome {
    let r = b.report.get("weight_invariance").ok_or("missing check")?;
    let m = r.worst_margin.unwrap_or(f64::NAN);
    Ok((
        r.status == Status::Pass,
        format!("{} samples, max drift {:.3e}", r.samples, 1e-7 - m),
    ))
}

fn envelope(b: &Battery) -> Outcome {
    let r = b.report.get("grad_v_h_envelope").ok_or("missing check")?;
    Ok((
        r.status == Status::Pass && r.samples == 10_000,
        format!("{} samples, {}", r.samples, r.note),
    ))
}

fn decay(b: &Battery) -> Outcome {
    let ev = &b.evolution;
    let r = &ev.report;
    let p = default_scenario()?.params;
    let (g, beta) = (p.g, p.beta);
    let n = b.weighted_grad_v_norm;
    let lambda = g * g * beta / 64.0
        * (2.0 + g * beta * beta / (2f64.powf(8.5 + 2.0 / g) * PI.powf(1.5) * n)).ln();
    let constant =
        16.0 * PI.powf(1.5) / beta.powf(1.5) * (16.0 * lambda * lambda / (beta * g * g)).exp();
    let rhs = constant * r.weighted_f0;
    let rhs_ok = ev
        .samples
        .iter()
        .all(|s| (s.decay_rhs - rhs).abs() <= 1e-12 * rhs);
    let lhs_ok = ev
        .samples
        .iter()
        .all(|s| (lambda * s.t).exp() * s.norms.rho_sup <= rhs);
    let flags = ev.samples.iter().all(|s| s.bootstrap_ok) && r.bootstrap.all();
    let horizon = (ev.last.t - 20.0 / lambda).abs() <= 1e-9 * ev.last.t;
    let fit = r.lambda_fit.unwrap_or(f64::NAN);
    let ok = (lambda - r.lambda_infinity).abs() <= 1e-12 * lambda
        && rhs_ok
        && lhs_ok
        && flags
        && fit > 0.0
        && r.e_b <= 2.0
        && horizon;
    Ok((
        ok,
        format!(
            "lambda_inf {lambda:.4}, lambda_fit {fit:.4}, decay margin {:.3e}, e_b {:.9}, bootstrap {flags}, {} samples to T = {:.3}",
            r.decay_margin,
            r.e_b,
            ev.samples.len(),
            ev.last.t
        ),
    ))
}

fn flux_bound(b: &Battery) -> Outcome {
    let p = default_scenario()?.params;
    let c = 8.0 * PI * (1.0 + 1.0 / (p.beta * p.g)) / (p.beta * p.beta);
    let mut running = 0.0f64;
    let mut worst = f64::INFINITY;
    for s in &b.evolution.samples {
        running = running.max(s.norms.f_half_weighted);
        worst = worst.min(c * running - s.norms.flux_potential_sup);
    }
    Ok((
        worst >= 0.0,
        format!(
            "{} steps, worst margin {worst:.3e}",
            b.evolution.samples.len()
        ),
    ))
}

fn green() -> Outcome {
    let r = green_selftest().map_err(err)?;
    let c2_error = (r.c2 - 1.0 / (2.0 * PI)).abs();
    let window: Vec<&(f64, f64)> = r
        .decay_samples
        .iter()
        .filter(|(d, _)| (1.0..=5.0).contains(d))
        .collect();
    let c = window
        .iter()
        .map(|(d, b)| b.abs() * d.exp())
        .fold(0.0, f64::max);
    let inside = window
        .iter()
        .all(|(d, b)| b.abs() <= c * (-d).exp() * (1.0 + 1e-12));
    let ok = r.passed && c2_error <= 1e-14 && c.is_finite() && inside && window.len() >= 10;
    Ok((
        ok,
        format!(
            "c2 error {c2_error:.1e}, fitted C {c:.4} over {} separations in [1, 5]",
            window.len()
        ),
    ))
}

fn io_round_trips() -> Outcome {
    let spatial = SpatialGrid::new(2, 3, 5, 1.5, 1.1).map_err(err)?;
    let grid = PhaseGrid::new(spatial, VelocityGrid::new([2, 3, 4], 2.0).map_err(err)?);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let values: Vec<f64> = (0..grid.len())
        .map(|_| rng.gen::<f64>() * 10f64.powi(rng.gen_range(-300..300)))
        .collect();
    let f = Distribution::from_values(grid, Role::Perturbation, 1.25, values).map_err(err)?;
    let bytes = Snapshot::from_distribution(&f, 9.5)
        .to_bytes()
        .map_err(err)?;
    let back = Snapshot::from_bytes(&bytes)
        .and_then(|s| s.to_distribution())
        .map_err(err)?;
    let bits = |d: &Distribution| d.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let snapshot_ok =
        bits(&back) == bits(&f) && back.grid == f.grid && back.beta.to_bits() == f.beta.to_bits();

    let cfg = RunConfig::parse(include_str!("../../../../default.cfg")).map_err(err)?;
    let echo = cfg.echo();
    let again = RunConfig::parse(&echo).map_err(err)?;
    let echo_ok = again == cfg && again.echo() == echo;

    let mut small = default_scenario()?;
    small.grid = PhaseGrid::new(
        SpatialGrid::new(1, 1, 32, 1.85, 1.05).map_err(err)?,
        VelocityGrid::new([8, 8, 24], 3.05).map_err(err)?,
    );
    small.horizon = Horizon::Time(0.5);
    small.dynamic = DynamicConfig {
        dt: 0.05,
        ..small.dynamic
    };
    small.verify = VerifySettings {
        samples: 500,
        jacobian_samples: 10,
        ..small.verify
    };
    let run = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(err)?;
        pool.install(|| run_battery(&small))
            .map(|b| b.report.render())
            .map_err(err)
    };
    let (a, b, c) = (run(1)?, run(1)?, run(3)?);
    let deterministic = a == b && a == c;
    Ok((
        snapshot_ok && echo_ok && deterministic,
        format!("snapshot bit-exact {snapshot_ok}, config echo stable {echo_ok}, battery reproducible across runs and thread counts {deterministic}"),
    ))
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    suite.run(1, "Poisson mode-0 oracle", Some(1.0), poisson_mode0);
    suite.run(2, "Poisson mode-1 oracle", Some(1.0), poisson_mode1);
    suite.run(3, "free-fall exit times", Some(5.0), free_fall);
    suite.run(
        4,
        "exit-time bounds under a solved potential",
        Some(60.0),
        exit_time_battery,
    );
    suite.run(5, "steady 1D3V shooting oracle", Some(120.0), steady_oracle);

    let start = Instant::now();
    let battery = default_scenario().and_then(|sc| run_battery(&sc).map_err(err));
    let battery_secs = start.elapsed().as_secs_f64();
    let battery = &battery;
    println!("     default-scenario battery: {battery_secs:.1} s");
    let with = |check: fn(&Battery) -> Outcome| -> Box<dyn FnOnce() -> Outcome + '_> {
        Box::new(move || battery.as_ref().map_err(Clone::clone).and_then(check))
    };
    suite.run(
        6,
        "uniform bounds and contraction",
        None,
        with(uniform_bounds),
    );
    suite.run(7, "uniqueness probe", None, with(uniqueness));
    suite.run(8, "flow Jacobian", None, with(jacobian));
    suite.run(9, "steady weight invariance", None, with(weight_invariance));
    suite.run(10, "weighted grad_v h envelope", None, with(envelope));
    suite.run(11, "dynamic decay certification", None, move || {
        let (ok, detail) = battery.as_ref().map_err(Clone::clone).and_then(decay)?;
        Ok((
            ok && battery_secs < 600.0,
            format!("{detail}; whole battery {battery_secs:.1} s of 600 s"),
        ))
    });
    suite.run(12, "flux-potential bound", None, with(flux_bound));
    suite.run(13, "Green function self-test", None, green);
    suite.run(14, "I/O round trips and determinism", None, io_round_trips);

    if suite.failures == 0 {
        println!("acceptance: all 14 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 14 criteria fail", suite.failures);
        ExitCode::FAILURE
    }
}
