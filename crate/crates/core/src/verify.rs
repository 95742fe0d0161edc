//! The inequality battery: builds a steady state and a perturbation run for
//! one scenario and checks every bound with an explicit margin.
//!
//! Sampling is seeded and reductions are exact minima over index-ordered
//! results, so the rendered report does not depend on the thread count.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::distributions::{Distribution as _, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boundary::BoundaryDatum;
use crate::characteristics::{
    backward_exit, exit_record, flow_with_jacobian, integrate_flow, velocity_lemma_check,
    weight_drift, Direction, FieldNorms, ForceField, PotentialForce, StepRule,
};
use crate::conditions::{check_conditions, ConditionInputs, Status};
use crate::dynamic::{
    weight_ratio_check, DynamicConfig, DynamicSolver, Evolution, InitialPerturbation,
};
use crate::error::{invalid, Result};
use crate::grid::PhaseGrid;
use crate::model::{kinetic_distance, Params, PhasePoint};
use crate::poisson::Field;
use crate::steady::{
    grad_h, grad_h_table, regularity_diagnostics, uniqueness_probe, weighted_sup_with, GradHTable,
    SteadyConfig, SteadySeed, SteadySolution, SteadySolver,
};

/// Density factor of the second start in the uniqueness check.
const UNIQUENESS_SEED_SCALE: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    /// An inequality with explicit constants; failure fails the run.
    Hard,
    /// A fitted or sufficient-only condition; failure is a warning.
    Soft,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckSpec {
    pub id: &'static str,
    /// Short statement of what is checked.
    pub anchor: &'static str,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub severity: Severity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub spec: CheckSpec,
    pub samples: usize,
    /// Smallest margin seen; nonnegative for a pass.
    pub worst_margin: Option<f64>,
    pub status: Status,
    pub note: String,
    pub wall: Duration,
}

impl CheckRecord {
    /// `pass`, `fail`, `unchecked`, or `warn` for a failing soft check.
    pub fn label(&self) -> &'static str {
        match (self.status, self.spec.severity) {
            (Status::Fail, Severity::Soft) => "warn",
            (Status::Pass, _) => "pass",
            (Status::Fail, _) => "fail",
            (Status::Unchecked, _) => "unchecked",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub records: Vec<CheckRecord>,
}

impl VerifyReport {
    pub fn get(&self, id: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.spec.id == id)
    }

    pub fn hard_failures(&self) -> Vec<&CheckRecord> {
        self.records
            .iter()
            .filter(|r| r.spec.severity == Severity::Hard && r.status == Status::Fail)
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.hard_failures().is_empty()
    }

    /// One record per line. Wall times are left out so that the text is
    /// reproducible.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let count = |l: &str| self.records.iter().filter(|r| r.label() == l).count();
        let _ = writeln!(out, "# vpgrav verify report");
        let _ = writeln!(out, "seed = {}", self.seed);
        for r in &self.records {
            let margin = r
                .worst_margin
                .map_or_else(|| "none".to_string(), |m| format!("{m:e}"));
            let sev = match r.spec.severity {
                Severity::Hard => "hard",
                Severity::Soft => "soft",
            };
            let _ = write!(
                out,
                "check id={} severity={sev} status={} samples={} margin={margin} anchor=\"{}\"",
                r.spec.id,
                r.label(),
                r.samples,
                r.spec.anchor
            );
            if !r.note.is_empty() {
                let _ = write!(out, " note=\"{}\"", r.note);
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "summary pass={} fail={} unchecked={} warn={}",
            count("pass"),
            count("fail"),
            count("unchecked"),
            count("warn")
        );
        out
    }
}

/// Tolerances and sample counts of the battery.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifySettings {
    pub seed: u64,
    pub samples: usize,
    pub jacobian_samples: usize,
    /// Combined relative tolerance on the uniform steady bounds.
    pub uniform_tolerance: f64,
    /// Largest successive-difference ratio after the second iterate.
    pub contraction: f64,
    pub uniqueness: f64,
    pub weight_drift: f64,
    pub jacobian: f64,
    pub determinant: f64,
    /// Fixed RK4 step for the trajectory checks.
    pub ode_step: f64,
    pub green_constant: f64,
    pub uniqueness_epsilon: f64,
    pub much_less_factor: f64,
}

impl Default for VerifySettings {
    fn default() -> VerifySettings {
        VerifySettings {
            seed: 42,
            samples: 10_000,
            jacobian_samples: 100,
            uniform_tolerance: 1e-3,
            contraction: 0.5,
            uniqueness: 1e-6,
            weight_drift: 1e-7,
            jacobian: 1e-5,
            determinant: 1e-6,
            ode_step: 1e-3,
            green_constant: 4.0,
            uniqueness_epsilon: 0.01,
            much_less_factor: 0.1,
        }
    }
}

/// Length of the perturbation run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Time(f64),
    /// `T = k/λ∞`.
    Rates(f64),
}

impl Horizon {
    pub fn resolve(self, lambda: f64) -> f64 {
        match self {
            Horizon::Time(t) => t,
            Horizon::Rates(k) if lambda.is_finite() && lambda > 0.0 => k / lambda,
            Horizon::Rates(_) => 0.0,
        }
    }
}

/// Everything one battery run needs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub params: Params,
    pub grid: PhaseGrid,
    pub boundary: BoundaryDatum,
    pub steady: SteadyConfig,
    pub dynamic: DynamicConfig,
    pub horizon: Horizon,
    pub f0: InitialPerturbation,
    pub verify: VerifySettings,
}

/// The report together with the computed states.
#[derive(Clone, Debug)]
pub struct Battery {
    pub report: VerifyReport,
    pub steady: SteadySolution,
    pub evolution: Evolution,
    pub uniqueness_distance: f64,
    /// `‖w_β ∇_v h‖∞`, which sets `λ∞`.
    pub weighted_grad_v_norm: f64,
}

/// The scenario's dynamic settings with the horizon resolved against `λ∞`
/// of the given steady state.
pub fn dynamic_config(
    scenario: &Scenario,
    steady: &SteadySolution,
    table: &GradHTable,
) -> Result<DynamicConfig> {
    let mut cfg = scenario.dynamic.clone();
    let lambda = DynamicSolver::new(steady, table, cfg.clone())?.lambda_infinity()?;
    cfg.t_final = scenario.horizon.resolve(lambda);
    Ok(cfg)
}

/// Uniform samples in `T² × [0, L3] × [−vmax, vmax]³`.
pub fn sample_points(grid: &PhaseGrid, n: usize, rng: &mut ChaCha8Rng) -> Vec<PhasePoint> {
    let h = Uniform::new(-0.5, 0.5);
    let z = Uniform::new_inclusive(0.0, grid.spatial.l3());
    let vm = grid.velocity.vmax();
    let v = Uniform::new_inclusive(-vm, vm);
    (0..n)
        .map(|_| PhasePoint {
            x: [h.sample(rng), h.sample(rng), z.sample(rng)],
            v: [v.sample(rng), v.sample(rng), v.sample(rng)],
        })
        .collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn min_of(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    values
        .into_iter()
        .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
}

struct Recorder {
    seed: u64,
    records: Vec<CheckRecord>,
    clock: Instant,
}

impl Recorder {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        id: &'static str,
        anchor: &'static str,
        severity: Severity,
        tolerance: f64,
        samples: usize,
        margin: Option<f64>,
        gate: bool,
        note: String,
    ) {
        let status = match margin {
            _ if !gate => Status::Unchecked,
            Some(m) if m >= 0.0 => Status::Pass,
            Some(_) => Status::Fail,
            None => Status::Unchecked,
        };
        let spec = CheckSpec {
            id,
            anchor,
            samples,
            seed: self.seed,
            tolerance,
            severity,
        };
        let wall = self.clock.elapsed();
        self.clock = Instant::now();
        self.records.push(CheckRecord {
            spec,
            samples,
            worst_margin: margin,
            status,
            note,
            wall,
        });
    }
}

/// Smaller of the margins of `t_b ≤ (2/g) min{√(v3² + g x3) − v3, √(v_b3² − g x3) + v_b3}`
/// and `t_b + t_f ≤ (4/g) √(v3² + g x3)` at `z`. Both bounds assume
/// `‖∇Φ‖∞ ≤ g/2`.
pub fn exit_time_margin<F: ForceField + ?Sized>(
    g: f64,
    force: &F,
    z: &PhasePoint,
    rule: StepRule,
) -> Result<f64> {
    let rec = exit_record(z, force, rule)?;
    let (x3, v3, vb3) = (z.x[2], z.v[2], rec.v_b[2]);
    let r = (v3 * v3 + g * x3).sqrt();
    let first = (2.0 / g) * (r - v3);
    let second = (2.0 / g) * ((vb3 * vb3 - g * x3).max(0.0).sqrt() + vb3);
    let radicand_ok = vb3 * vb3 - g * x3 >= -1e-12 * (1.0 + vb3 * vb3);
    let tb_margin = first.min(second) - rec.t_b;
    let sum_margin = (4.0 / g) * r - (rec.t_b + rec.t_f.unwrap_or(0.0));
    Ok(if radicand_ok {
        tb_margin.min(sum_margin)
    } else {
        -1.0
    })
}

/// `|v|` bin maxima of `e^{β̃/2(|v|² + g x3)} |∇_v h|` and a margin that is
/// nonnegative when the envelope is finite, non-increasing past its peak,
/// and at most 1% of the peak in the last populated bin.
pub fn envelope_margin(
    speeds: &[f64],
    values: &[f64],
    vmax: f64,
    bins: usize,
) -> (Vec<f64>, Option<f64>) {
    let top = vmax * 3f64.sqrt();
    let mut maxima = vec![-1.0f64; bins];
    for (s, v) in speeds.iter().zip(values) {
        let b = ((s / top) * bins as f64)
            .floor()
            .clamp(0.0, (bins - 1) as f64) as usize;
        maxima[b] = maxima[b].max(*v);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return (maxima, Some(-f64::INFINITY));
    }
    let filled: Vec<f64> = maxima.iter().copied().filter(|m| *m >= 0.0).collect();
    let Some(peak_at) = filled
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    else {
        return (maxima, None);
    };
    let peak = filled[peak_at];
    if peak == 0.0 {
        return (maxima, Some(0.0));
    }
    let mut margin = 0.01 - filled[filled.len() - 1] / peak;
    for w in filled[peak_at..].windows(2) {
        margin = margin.min((w[0] - w[1]) / peak);
    }
    (maxima, Some(margin))
}

/// Largest entry mismatch between the variational Jacobian and central
/// differences, relative to `max(1, |J|)`, and `|det J − 1|`.
fn jacobian_errors(
    force: &PotentialForce<'_>,
    z: &PhasePoint,
    duration: f64,
    rule: StepRule,
) -> Result<(f64, f64)> {
    let jac = flow_with_jacobian(z, force, duration, Direction::Backward, rule)?;
    let end = |p: &PhasePoint| -> Result<[f64; 6]> {
        let t = integrate_flow(p, force, duration, Direction::Backward, rule)?;
        Ok(*t.states.last().expect("trajectories start at the point"))
    };
    let mut worst = 0.0f64;
    for j in 0..6 {
        let mut plus = *z;
        let mut minus = *z;
        let base = if j < 3 { z.x[j] } else { z.v[j - 3] };
        let d = 1e-5 * (1.0 + base.abs());
        if j < 3 {
            plus.x[j] += d;
            minus.x[j] -= d;
        } else {
            plus.v[j - 3] += d;
            minus.v[j - 3] -= d;
        }
        let (a, b) = (end(&plus)?, end(&minus)?);
        for i in 0..6 {
            let fd = (a[i] - b[i]) / (2.0 * d);
            let an = jac.row(i)[j];
            worst = worst.max((fd - an).abs() / an.abs().max(1.0));
        }
    }
    Ok((worst, (jac.determinant() - 1.0).abs()))
}

/// Runs the whole battery for `scenario`.
pub fn run_battery(scenario: &Scenario) -> Result<Battery> {
    let s = &scenario.verify;
    if s.samples == 0 {
        return Err(invalid("verify.samples must be at least 1"));
    }
    let p = scenario.params;
    let (g, beta) = (p.g, p.beta);
    let grid = &scenario.grid;
    let mut rec = Recorder {
        seed: s.seed,
        records: Vec::new(),
        clock: Instant::now(),
    };
    let rule = StepRule::Absolute(s.ode_step);

    // Steady state from two starts.
    let solver = SteadySolver::new(
        p,
        grid.clone(),
        scenario.boundary.clone(),
        scenario.steady.clone(),
    )?;
    let probe = uniqueness_probe(&solver, SteadySeed::Scaled(UNIQUENESS_SEED_SCALE))?;
    let sol = probe.first.clone();
    let table = grad_h_table(&sol)?;
    let norm_wdvh = table.weighted_grad_v_sup(grid, beta, g, &sol.phi);

    // Perturbation run.
    let dynamic = DynamicSolver::new(&sol, &table, dynamic_config(scenario, &sol, &table)?)?;
    let f0 = scenario.f0.build(grid, &p)?;
    let evolution = dynamic.evolve(f0.clone(), |_| Ok(()))?;
    let report = &evolution.report;
    let sup_grad_psi = evolution
        .samples
        .iter()
        .map(|x| x.norms.grad_psi_sup)
        .fold(0.0, f64::max);
    let sup_f = evolution
        .samples
        .iter()
        .map(|x| x.norms.f_half_weighted)
        .fold(0.0, f64::max);
    let sup_d = evolution
        .samples
        .iter()
        .map(|x| x.norms.flux_potential_sup)
        .fold(0.0, f64::max);

    // Hypotheses.
    let psi0 = &evolution.psi.fields[0];
    let both0 = Field::sum(&sol.phi, psi0)?;
    let total0: Vec<f64> = sol
        .h
        .values()
        .iter()
        .zip(f0.values())
        .map(|(a, b)| a + b)
        .collect();
    let grad_total0 = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let z = grid.point(i);
            let (fx, fv) = scenario.f0.gradient(&z, g);
            let (hx, hv) = (table.grad_x[i], table.grad_v[i]);
            let mut n2 = 0.0;
            for a in 0..3 {
                n2 += (hx[a] + fx[a]).powi(2) + (hv[a] + fv[a]).powi(2);
            }
            n2.sqrt()
        })
        .collect::<Vec<f64>>();
    let inputs = ConditionInputs {
        green_constant: s.green_constant,
        weighted_g: Some(scenario.boundary.weighted_sup(beta)),
        weighted_grad_g: Some(scenario.boundary.weighted_gradient_sup(p.beta_tilde)),
        grad_phi: Some(sol.phi.gradient_sup()),
        grad_psi: Some(sup_grad_psi),
        half_weighted_f: Some(sup_f),
        weighted_h: Some(weighted_sup_with(grid, beta, g, &sol.phi, sol.h.values())),
        weighted_total0: Some(weighted_sup_with(grid, beta, g, &both0, &total0)),
        weighted_grad_total0: Some(weighted_sup_with(
            grid,
            p.beta_tilde,
            g,
            &both0,
            &grad_total0,
        )),
        weighted_grad_v_h: Some((norm_wdvh, beta)),
        uniqueness_epsilon: s.uniqueness_epsilon,
        much_less_factor: s.much_less_factor,
    };
    let conditions = check_conditions(&p, &inputs);
    let cond = |name: &str| conditions.get(name).expect("every condition is evaluated");
    rec.clock = Instant::now();
    let hyp = |rec: &mut Recorder, id: &'static str, anchor: &'static str, sev: Severity| {
        let c = cond(id);
        rec.push(id, anchor, sev, 0.0, 1, c.margin, true, String::new());
    };
    hyp(
        &mut rec,
        "condition:beta",
        "beta above the construction threshold",
        Severity::Hard,
    );
    hyp(
        &mut rec,
        "condition:G",
        "log-weighted smallness of the inflow gradient",
        Severity::Soft,
    );
    hyp(
        &mut rec,
        "Bootstrap",
        "|grad Phi| + sup |grad Psi| <= g/2",
        Severity::Hard,
    );
    hyp(
        &mut rec,
        "Bootstrap_f",
        "half-weighted perturbation below its threshold",
        Severity::Hard,
    );
    hyp(
        &mut rec,
        "choice:g",
        "data size M below the global construction threshold",
        Severity::Soft,
    );
    hyp(
        &mut rec,
        "choice_ML:M",
        "M much less than its cap",
        Severity::Soft,
    );
    hyp(
        &mut rec,
        "choice_ML:L",
        "L much less than its cap",
        Severity::Soft,
    );
    hyp(
        &mut rec,
        "condition_unique",
        "weighted grad_v h small for uniqueness",
        Severity::Soft,
    );
    let bootstrap_ok = cond("Bootstrap").status == Status::Pass;
    let unique_ok = cond("condition_unique").status == Status::Pass;

    // Steady iteration.
    let tol = s.uniform_tolerance;
    let uniform = min_of(sol.history.iter().map(|h| h.bounds.worst_margin() + tol));
    rec.push(
        "steady:uniform_bounds",
        "every iterate obeys the four uniform bounds",
        Severity::Hard,
        tol,
        sol.history.len(),
        uniform,
        true,
        String::new(),
    );
    let ratios: Vec<f64> = sol
        .history
        .iter()
        .filter(|h| h.index > 2)
        .filter_map(|h| h.ratio)
        .collect();
    let contraction = if ratios.is_empty() && sol.converged {
        Some(s.contraction)
    } else {
        min_of(ratios.iter().map(|r| s.contraction - r))
    };
    rec.push(
        "steady:contraction",
        "successive-difference ratio after iterate 2",
        Severity::Hard,
        s.contraction,
        ratios.len(),
        contraction,
        true,
        format!("iterations {}", sol.iterations()),
    );
    rec.push(
        "steady:converged",
        "Picard iteration reached tol_fix",
        Severity::Hard,
        scenario.steady.tol_fix,
        sol.iterations(),
        Some(if sol.converged { 0.0 } else { -1.0 }),
        true,
        String::new(),
    );
    rec.push(
        "steady:uniqueness",
        "fixed points from two starts coincide",
        Severity::Hard,
        s.uniqueness,
        2,
        Some(s.uniqueness - probe.distance),
        unique_ok,
        format!("distance {:e}", probe.distance),
    );

    // Steady trajectories.
    let force = PotentialForce::steady(g, &sol.phi)?;
    let pts = sample_points(grid, s.samples, &mut rng_for(s.seed, 1));
    let margins: Vec<f64> = pts
        .par_iter()
        .map(|z| exit_time_margin(g, &force, z, rule))
        .collect::<Result<_>>()?;
    rec.push(
        "exit_time",
        "t_b and t_b + t_f below the gravity bounds",
        Severity::Hard,
        0.0,
        pts.len(),
        min_of(margins),
        bootstrap_ok,
        String::new(),
    );

    let drifts: Vec<f64> = pts
        .par_iter()
        .map(|z| weight_drift(z, &force, beta, rule))
        .collect::<Result<_>>()?;
    rec.push(
        "weight_invariance",
        "steady weight constant along characteristics",
        Severity::Hard,
        s.weight_drift,
        pts.len(),
        min_of(drifts.iter().map(|d| s.weight_drift - d)),
        true,
        String::new(),
    );

    let norms = FieldNorms::of(&sol.phi);
    let lemma_pts = &pts[..pts.len().min(s.samples / 10).max(1)];
    let lemma: Vec<f64> = lemma_pts
        .par_iter()
        .map(|z| {
            velocity_lemma_check(z, &force, &norms, rule)
                .map(|r| r.upper_margin.min(r.lower_margin).min(r.exit_speed_margin))
        })
        .collect::<Result<_>>()?;
    rec.push(
        "velocity_lemma",
        "kinetic distance envelope along characteristics",
        Severity::Hard,
        0.0,
        lemma_pts.len(),
        min_of(lemma),
        bootstrap_ok,
        String::new(),
    );

    let env_pts = sample_points(grid, s.samples, &mut rng_for(s.seed, 2));
    let bt = p.beta_tilde;
    let weighted: Vec<f64> = env_pts
        .par_iter()
        .map(|z| {
            grad_h(&sol, z).map(|d| {
                let w = (0.5 * bt * (z.speed_squared() + g * z.x[2])).exp();
                w * (d.grad_v[0].powi(2) + d.grad_v[1].powi(2) + d.grad_v[2].powi(2)).sqrt()
            })
        })
        .collect::<Result<_>>()?;
    let speeds: Vec<f64> = env_pts.iter().map(|z| z.speed_squared().sqrt()).collect();
    let (_, env) = envelope_margin(&speeds, &weighted, grid.velocity.vmax(), 12);
    let sup = weighted.iter().fold(0.0f64, |m, v| m.max(*v));
    rec.push(
        "grad_v_h_envelope",
        "weighted grad_v h finite with a decaying envelope in |v|",
        Severity::Hard,
        0.0,
        env_pts.len(),
        env,
        true,
        format!("sup {sup:e}"),
    );

    let mut jrng = rng_for(s.seed, 3);
    let mut jac_pts = Vec::new();
    let mut tries = 0;
    while jac_pts.len() < s.jacobian_samples && tries < 100 * s.jacobian_samples.max(1) {
        tries += 1;
        let z = sample_points(grid, 1, &mut jrng)[0];
        if z.x[2] >= 0.05 && kinetic_distance(&p, &z, &sol.phi)? >= 0.1 {
            jac_pts.push(z);
        }
    }
    let jac = jac_pts
        .par_iter()
        .map(|z| {
            let t_b = backward_exit(z, &force, rule)?.t_b;
            jacobian_errors(&force, z, 0.5 * t_b, rule)
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let entry = jac.iter().fold(0.0f64, |m, e| m.max(e.0));
    let det = jac.iter().fold(0.0f64, |m, e| m.max(e.1));
    rec.push(
        "jacobian",
        "variational Jacobian matches central differences; det = 1",
        Severity::Hard,
        s.jacobian,
        jac_pts.len(),
        min_of(
            jac.iter()
                .map(|(e, d)| (s.jacobian - e).min(s.determinant - d)),
        ),
        true,
        format!("entry error {entry:e} det error {det:e}"),
    );

    // Perturbation run.
    let certifying = report.certifying();
    rec.push(
        "flux_potential_bound",
        "sup |D^-1 div b| within the weighted perturbation bound",
        Severity::Hard,
        0.0,
        evolution.samples.len(),
        min_of(
            evolution
                .samples
                .iter()
                .map(|x| x.flux_bound_rhs - x.flux_bound_lhs),
        ),
        true,
        String::new(),
    );
    rec.push(
        "e_b",
        "exp((64 beta/g) sup |D^-1 div b|^2) <= 2",
        Severity::Hard,
        2.0,
        evolution.samples.len(),
        Some(2.0 - report.e_b),
        true,
        format!("e_b {:e}", report.e_b),
    );
    let mut wrng = rng_for(s.seed, 4);
    let t_end = evolution.last.t;
    let times = Uniform::new_inclusive(0.0, t_end);
    let wpts: Vec<(f64, PhasePoint)> = sample_points(grid, (s.samples / 20).max(1), &mut wrng)
        .into_iter()
        .map(|z| (times.sample(&mut wrng), z))
        .collect();
    let wr = weight_ratio_check(&sol, &evolution.psi, sup_d, &wpts, rule)?;
    rec.push(
        "weight_ratio",
        "dynamic weight ratios and inverse weights along trajectories",
        Severity::Hard,
        s.weight_drift,
        wr.samples,
        // Log weights carry the integrator's drift; with Ψ ≡ 0 the ratio bound is an equality.
        Some(
            wr.ratio_margin
                .min(wr.inverse_margin)
                .min(wr.steady_inverse_margin)
                + s.weight_drift,
        ),
        bootstrap_ok,
        String::new(),
    );
    rec.push(
        "decay_rho",
        "exp(lambda t) |rho(t)| below the decay constant times the initial weighted norm",
        Severity::Hard,
        0.0,
        evolution.samples.len(),
        Some(report.decay_margin),
        certifying,
        format!("lambda_inf {:e}", report.lambda_infinity),
    );
    rec.push(
        "decay_f",
        "exp(lambda t) |e^{beta/8 (|v|^2+g x3)} f(t)| below its constant",
        Severity::Hard,
        0.0,
        evolution.samples.len(),
        min_of(evolution.samples.iter().map(|x| {
            if x.decay_f_rhs == 0.0 {
                0.0 - x.decay_f_lhs
            } else {
                (x.decay_f_rhs - x.decay_f_lhs) / x.decay_f_rhs
            }
        })),
        certifying,
        String::new(),
    );
    let quiet = evolution.samples.iter().all(|x| x.norms.rho_sup == 0.0);
    let rate = match report.lambda_fit {
        Some(l) => Some(l),
        None if quiet => Some(0.0),
        None => None,
    };
    rec.push(
        "decay_rate",
        "fitted decay rate of |rho| is positive",
        Severity::Hard,
        0.0,
        report.fit_samples,
        rate,
        true,
        report
            .lambda_fit
            .map(|l| format!("lambda_fit {l:e}"))
            .unwrap_or_default(),
    );

    // Fitted shapes.
    let reg = regularity_diagnostics(&sol, &table);
    let r2 = reg.rho_log_fit.map(|f| f.r_squared);
    rec.push(
        "regularity:rho_log",
        "near-wall d rho/dx3 follows C1 + C2 |ln(x3^2 + g x3)|",
        Severity::Soft,
        0.5,
        reg.rho_log_fit.map_or(0, |f| f.samples),
        r2.map(|r| r - 0.5),
        true,
        String::new(),
    );
    rec.push(
        "regularity:rho_far",
        "weighted far-field d rho/dx3 stays bounded",
        Severity::Soft,
        0.0,
        1,
        Some(
            if reg.rho_far_envelope.0.is_finite() && reg.rho_far_envelope.1.is_finite() {
                0.0
            } else {
                -1.0
            },
        ),
        true,
        format!(
            "near {:e} far {:e}",
            reg.rho_far_envelope.0, reg.rho_far_envelope.1
        ),
    );
    rec.push(
        "regularity:h_x",
        "weighted dh/dx3 against 1 + 1/alpha",
        Severity::Soft,
        0.0,
        grid.len(),
        Some(if reg.h_x_constant.is_finite() {
            0.0
        } else {
            -1.0
        }),
        true,
        format!("constant {:e}", reg.h_x_constant),
    );

    Ok(Battery {
        report: VerifyReport {
            seed: s.seed,
            records: rec.records,
        },
        steady: sol,
        evolution,
        uniqueness_distance: probe.distance,
        weighted_grad_v_norm: norm_wdvh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_margin_shapes() {
        let speeds = [0.1, 0.5, 1.0, 2.0, 3.0, 4.5];
        let (_, m) = envelope_margin(&speeds, &[0.5, 1.0, 0.8, 0.3, 0.05, 0.001], 3.0, 6);
        assert!(m.unwrap() >= 0.0);
        let (_, m) = envelope_margin(&speeds, &[0.5, 1.0, 0.8, 0.9, 0.05, 0.001], 3.0, 6);
        assert!(m.unwrap() < 0.0);
        let (_, m) = envelope_margin(&speeds, &[0.0; 6], 3.0, 6);
        assert_eq!(m, Some(0.0));
    }

    #[test]
    fn horizon_resolution() {
        assert_eq!(Horizon::Rates(20.0).resolve(2.0), 10.0);
        assert_eq!(Horizon::Rates(20.0).resolve(f64::INFINITY), 0.0);
        assert_eq!(Horizon::Time(3.0).resolve(1.0), 3.0);
    }

    #[test]
    fn sampling_is_seeded() {
        let grid = PhaseGrid::new(
            crate::grid::SpatialGrid::new(2, 2, 8, 1.0, 1.0).unwrap(),
            crate::grid::VelocityGrid::new([4, 4, 4], 2.0).unwrap(),
        );
        let a = sample_points(&grid, 5, &mut rng_for(7, 1));
        let b = sample_points(&grid, 5, &mut rng_for(7, 1));
        let c = sample_points(&grid, 5, &mut rng_for(7, 2));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
