//! Evolution of a perturbation `f` around a steady state.
//!
//! Each step is the Lagrangian formula on `[t_n, t_{n+1}]` with `Ψ` frozen at
//! `t_n`: the value at the foot of the characteristic (zero if it came in
//! through the wall) plus the source `∇Ψ·∇_v h` integrated along the path.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::characteristics::{integrate_flow, Direction, ForceField, PotentialForce, StepRule};
use crate::conditions::bootstrap_f_threshold;
use crate::distribution::{
    energy_weighted_sup, moment_density, moment_flux, DensityField, Distribution, FluxField, Role,
};
use crate::error::{invalid, Error, Result};
use crate::grid::PhaseGrid;
use crate::model::{Params, PhasePoint};
use crate::poisson::{Field, PoissonSolver, ScalarField};
use crate::steady::{linear_fit, weighted_sup_with, GradHTable, SteadySolution};

/// `λ∞ = (g²β/2⁶) ln(2 + gβ² / (2^{17/2 + 2/g} π^{3/2} ‖w_β∇_v h‖))`.
///
/// A vanishing norm makes the rate unbounded; `+∞` is returned.
pub fn lambda_infinity(params: &Params, norm_wdvh: f64) -> Result<f64> {
    if !(norm_wdvh >= 0.0) {
        return Err(invalid(format!(
            "weighted gradient norm must be nonnegative, got {norm_wdvh}"
        )));
    }
    let (g, beta) = (params.g, params.beta);
    if norm_wdvh == 0.0 {
        return Ok(f64::INFINITY);
    }
    let denom = 2f64.powf(8.5 + 2.0 / g) * PI.powf(1.5) * norm_wdvh;
    Ok(g * g * beta / 64.0 * (2.0 + g * beta * beta / denom).ln())
}

/// Initial perturbations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialPerturbation {
    Zero,
    /// `ε e^{−β_f(|v|² + 2g x3)} (1 − e^{−2β_f g x3})`, which vanishes on the wall.
    Layer {
        amplitude: f64,
        decay: f64,
    },
}

impl InitialPerturbation {
    pub fn build(&self, grid: &PhaseGrid, params: &Params) -> Result<Distribution> {
        match *self {
            InitialPerturbation::Zero => Ok(Distribution::zeros(
                grid.clone(),
                Role::Perturbation,
                params.beta,
            )),
            InitialPerturbation::Layer { amplitude, decay } => {
                if !(decay > 0.0) || !amplitude.is_finite() {
                    return Err(invalid(
                        "perturbation layer needs finite amplitude and positive decay",
                    ));
                }
                let g = params.g;
                Distribution::from_fn(grid.clone(), Role::Perturbation, params.beta, |z| {
                    let e = z.speed_squared() + 2.0 * g * z.x[2];
                    amplitude * (-decay * e).exp() * -(-2.0 * decay * g * z.x[2]).exp_m1()
                })
            }
        }
    }
}

impl InitialPerturbation {
    /// `(∇_x f0, ∇_v f0)` at `z`.
    pub fn gradient(&self, z: &PhasePoint, g: f64) -> ([f64; 3], [f64; 3]) {
        match *self {
            InitialPerturbation::Zero => ([0.0; 3], [0.0; 3]),
            InitialPerturbation::Layer { amplitude, decay } => {
                let base = amplitude * (-decay * (z.speed_squared() + 2.0 * g * z.x[2])).exp();
                let inner = (-2.0 * decay * g * z.x[2]).exp();
                let f = base * (1.0 - inner);
                let dx3 = base * 2.0 * decay * g * (2.0 * inner - 1.0);
                ([0.0, 0.0, dx3], z.v.map(|c| -2.0 * decay * c * f))
            }
        }
    }
}

/// Right-hand side of the perturbation equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Source {
    /// `∇Ψ·∇_v h`.
    Coupling,
    /// A constant, for consistency checks.
    Constant(f64),
    /// Pure transport.
    Off,
}

/// How `Ψ` enters a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeScheme {
    /// `Ψ(t_n)` throughout the step.
    Frozen,
    /// A frozen predictor, then a corrector with `(Ψ(t_n) + Ψ*)/2`.
    PredictorCorrector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Snapshots are handed to the observer every this many steps.
    pub output_stride: usize,
    /// RK4 substeps per time step.
    pub substeps: usize,
    pub mode_cut: Option<usize>,
    pub scheme: TimeScheme,
    pub source: Source,
}

impl Default for DynamicConfig {
    fn default() -> DynamicConfig {
        DynamicConfig {
            dt: 0.02,
            t_final: 1.0,
            output_stride: 10,
            substeps: 4,
            mode_cut: None,
            scheme: TimeScheme::Frozen,
            source: Source::Coupling,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateNorms {
    pub rho_sup: f64,
    /// `‖e^{β/2(|v|² + g x3)} f‖∞`.
    pub f_half_weighted: f64,
    /// `‖e^{β/8(|v|² + g x3)} f‖∞`.
    pub f_eighth_weighted: f64,
    pub grad_psi_sup: f64,
    /// `‖Δ₀⁻¹(∇·b)‖∞`.
    pub flux_potential_sup: f64,
}

/// Whether the two bootstrap conditions have held on `[0, t]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BootstrapFlags {
    pub bootstrap: bool,
    pub bootstrap_f: bool,
}

impl BootstrapFlags {
    pub fn all(&self) -> bool {
        self.bootstrap && self.bootstrap_f
    }
}

#[derive(Clone, Debug)]
pub struct DynamicState {
    pub t: f64,
    pub step: usize,
    pub f: Distribution,
    pub rho: DensityField,
    pub psi: Field,
    pub flux: FluxField,
    /// `Δ₀⁻¹(∇·b)`, so that `∂tΨ = −η Δ₀⁻¹(∇·b)`.
    pub flux_potential: ScalarField,
    pub norms: StateNorms,
    pub bootstrap: BootstrapFlags,
}

/// One row of the time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeSample {
    pub t: f64,
    pub norms: StateNorms,
    pub decay_lhs: f64,
    pub decay_rhs: f64,
    pub decay_f_lhs: f64,
    pub decay_f_rhs: f64,
    pub flux_bound_lhs: f64,
    pub flux_bound_rhs: f64,
    pub bootstrap_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub lambda_infinity: f64,
    /// Slope of `−ln ‖ϱ‖∞` over the fit window.
    pub lambda_fit: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub fit_samples: usize,
    /// `‖𝔴_{β,0} f0‖∞`.
    pub weighted_f0: f64,
    pub decay_holds: bool,
    pub decay_f_holds: bool,
    /// Smallest `(RHS − LHS)/RHS` of the density decay bound.
    pub decay_margin: f64,
    pub flux_bound_holds: bool,
    /// `e^{(64β/g) sup_t ‖Δ₀⁻¹(∇·b)‖²}`.
    pub e_b: f64,
    pub bootstrap: BootstrapFlags,
}

impl DecayReport {
    /// The decay bounds are certified only when both bootstrap conditions
    /// held for the whole run.
    pub fn certifying(&self) -> bool {
        self.bootstrap.all()
    }
}

/// `Ψ(t_n)` for every step, used to rebuild dynamic trajectories.
#[derive(Clone, Debug, Default)]
pub struct PsiHistory {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
}

impl PsiHistory {
    /// Index of the step whose frozen field acts at time `s`.
    fn interval(&self, s: f64) -> usize {
        match self.times.partition_point(|&t| t < s) {
            0 => 0,
            p => p - 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub samples: Vec<TimeSample>,
    pub last: DynamicState,
    pub report: DecayReport,
    pub psi: PsiHistory,
}

/// Time stepper bound to one steady state.
pub struct DynamicSolver<'a> {
    steady: &'a SteadySolution,
    grad_v: Vec<[f64; 3]>,
    grad_v3: Vec<f64>,
    norm_wdvh: f64,
    poisson: PoissonSolver,
    config: DynamicConfig,
}

/// Bilinear weights in `(x3, v3)` on the 1D3V grid.
#[derive(Clone, Copy, Debug)]
struct Corner {
    k: usize,
    j3: usize,
    wk: [f64; 2],
    wj: [f64; 2],
}

impl Corner {
    fn locate(grid: &PhaseGrid, x3: f64, v3: f64) -> Option<Corner> {
        if x3 > grid.spatial.l3() {
            return None;
        }
        let (k, tk) = grid.spatial.locate_vertical(x3.max(0.0));
        let (j3, tj) = grid.velocity.locate(2, v3)?;
        Some(Corner {
            k,
            j3,
            wk: [1.0 - tk, tk],
            wj: [1.0 - tj, tj],
        })
    }

    /// Interpolates the slice with horizontal velocity index `p`.
    #[inline]
    fn apply(&self, values: &[f64], vlen: usize, m3: usize, p: usize) -> f64 {
        let mut acc = 0.0;
        for a in 0..2 {
            let base = (self.k + a) * vlen + p * m3 + self.j3;
            acc += self.wk[a] * (self.wj[0] * values[base] + self.wj[1] * values[base + 1]);
        }
        acc
    }
}

/// What one vertical characteristic contributes to every node sharing its
/// `(x3, v3)`.
struct Column {
    foot: Option<Corner>,
    /// `(quadrature weight × source factor, where to read ∂v3 h)`.
    samples: Vec<(f64, Option<Corner>)>,
}

/// Trapezoid weights for samples at the given elapsed times.
fn trapezoid(elapsed: &[f64]) -> Vec<f64> {
    let n = elapsed.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = elapsed[i] - elapsed[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    w
}

impl<'a> DynamicSolver<'a> {
    pub fn new(
        steady: &'a SteadySolution,
        table: &GradHTable,
        config: DynamicConfig,
    ) -> Result<DynamicSolver<'a>> {
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", config.dt)));
        }
        if !(config.t_final >= 0.0) {
            return Err(invalid(format!(
                "T must be nonnegative, got {}",
                config.t_final
            )));
        }
        if config.substeps == 0 || config.output_stride == 0 {
            return Err(invalid("substeps and output stride must be at least 1"));
        }
        let grid = steady.grid();
        if table.grad_v.len() != grid.len() {
            return Err(invalid("gradient table does not match the steady grid"));
        }
        let p = &steady.params;
        let norm_wdvh = table.weighted_grad_v_sup(grid, p.beta, p.g, &steady.phi);
        let poisson = PoissonSolver::new(&grid.spatial, config.mode_cut)?;
        Ok(DynamicSolver {
            steady,
            grad_v3: table.grad_v.iter().map(|d| d[2]).collect(),
            grad_v: table.grad_v.clone(),
            norm_wdvh,
            poisson,
            config,
        })
    }

    pub fn grid(&self) -> &PhaseGrid {
        self.steady.grid()
    }

    pub fn params(&self) -> &Params {
        &self.steady.params
    }

    pub fn config(&self) -> &DynamicConfig {
        &self.config
    }

    /// `‖w_β ∇_v h‖∞` of the steady state.
    pub fn weighted_grad_v_norm(&self) -> f64 {
        self.norm_wdvh
    }

    pub fn lambda_infinity(&self) -> Result<f64> {
        lambda_infinity(self.params(), self.norm_wdvh)
    }

    /// `0.1 (2/g) median √(v3² + g x3)` over the vertical node pairs.
    pub fn max_stable_dt(&self) -> f64 {
        let grid = self.grid();
        let g = self.params().g;
        let m3 = grid.velocity.counts()[2];
        let mut r: Vec<f64> = grid
            .spatial
            .heights()
            .iter()
            .flat_map(|&z| (0..m3).map(move |j| (z, j)))
            .map(|(z, j)| {
                let v3 = grid.velocity.axis_node(2, j);
                (v3 * v3 + g * z).sqrt()
            })
            .collect();
        r.sort_by(f64::total_cmp);
        0.1 * (2.0 / g) * r[r.len() / 2]
    }

    fn is_column_grid(&self) -> bool {
        let sp = &self.grid().spatial;
        sp.n1() == 1 && sp.n2() == 1
    }

    /// Completes a state from its distribution.
    pub fn state_from(
        &self,
        t: f64,
        step: usize,
        f: Distribution,
        prior: Option<BootstrapFlags>,
    ) -> Result<DynamicState> {
        let p = *self.params();
        let rho = moment_density(&f);
        let flux = moment_flux(&f);
        let psi = self.poisson.solve(&rho, p.eta)?;
        let flux_potential = self.poisson.flux_potential(&flux)?;
        let grid = self.grid();
        let norms = StateNorms {
            rho_sup: rho.sup(),
            f_half_weighted: energy_weighted_sup(grid, 0.5 * p.beta, p.g, f.values()),
            f_eighth_weighted: energy_weighted_sup(grid, 0.125 * p.beta, p.g, f.values()),
            grad_psi_sup: psi.gradient_sup(),
            flux_potential_sup: flux_potential.sup(),
        };
        let now = BootstrapFlags {
            bootstrap: self.steady.phi.gradient_sup() + norms.grad_psi_sup <= p.g / 2.0,
            bootstrap_f: norms.f_half_weighted <= bootstrap_f_threshold(p.g, p.beta),
        };
        let bootstrap = match prior {
            Some(b) => BootstrapFlags {
                bootstrap: b.bootstrap && now.bootstrap,
                bootstrap_f: b.bootstrap_f && now.bootstrap_f,
            },
            None => now,
        };
        Ok(DynamicState {
            t,
            step,
            f,
            rho,
            psi,
            flux,
            flux_potential,
            norms,
            bootstrap,
        })
    }

    pub fn initial_state(&self, f0: Distribution) -> Result<DynamicState> {
        if f0.grid != *self.grid() {
            return Err(invalid(
                "initial perturbation does not live on the steady grid",
            ));
        }
        self.state_from(0.0, 0, f0, None)
    }

    /// One Duhamel step of length `dt`.
    pub fn step(&self, state: &DynamicState, dt: f64) -> Result<DynamicState> {
        if !(dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        let psi_parts = [(1.0, &state.psi)];
        let values = self.advance(&state.f, &psi_parts, dt)?;
        let values = match self.config.scheme {
            TimeScheme::Frozen => values,
            TimeScheme::PredictorCorrector => {
                let predicted = Distribution::from_values(
                    self.grid().clone(),
                    Role::Perturbation,
                    state.f.beta,
                    values,
                )?;
                let rho = moment_density(&predicted);
                let psi_star = self.poisson.solve(&rho, self.params().eta)?;
                self.advance(&state.f, &[(0.5, &state.psi), (0.5, &psi_star)], dt)?
            }
        };
        let f = Distribution::from_values(
            self.grid().clone(),
            Role::Perturbation,
            state.f.beta,
            values,
        )?;
        self.state_from(state.t + dt, state.step + 1, f, Some(state.bootstrap))
    }

    /// `f(t_n + dt)` at every node with `Ψ = Σ c·ψ` frozen.
    fn advance(&self, f: &Distribution, psi: &[(f64, &Field)], dt: f64) -> Result<Vec<f64>> {
        let g = self.params().g;
        let mut parts = vec![(1.0, &self.steady.phi)];
        parts.extend_from_slice(psi);
        let force = PotentialForce::new(g, parts)?;
        let rule = StepRule::Absolute(dt / self.config.substeps as f64);
        if self.is_column_grid() && force.is_vertical() {
            self.advance_columns(f, psi, &force, dt, rule)
        } else {
            self.advance_nodes(f, psi, &force, dt, rule)
        }
    }

    fn source_factor(&self, psi: &[(f64, &Field)], x: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (c, field) in psi {
            let d = field.gradient(x);
            for i in 0..3 {
                out[i] += c * d[i];
            }
        }
        out
    }

    fn advance_columns(
        &self,
        f: &Distribution,
        psi: &[(f64, &Field)],
        force: &PotentialForce<'_>,
        dt: f64,
        rule: StepRule,
    ) -> Result<Vec<f64>> {
        let grid = self.grid();
        let n3 = grid.spatial.n3();
        let m3 = grid.velocity.counts()[2];
        let vlen = grid.velocity.len();
        let heights = grid.spatial.heights();
        let source = self.config.source;
        let columns: Vec<Column> = (0..n3 * m3)
            .into_par_iter()
            .map(|p| {
                let (k, j3) = (p / m3, p % m3);
                let z = PhasePoint {
                    x: [0.0, 0.0, heights[k]],
                    v: [0.0, 0.0, grid.velocity.axis_node(2, j3)],
                };
                let traj =
                    integrate_flow(&z, force, dt, Direction::Backward, rule).map_err(|e| {
                        Error::Node {
                            node: p,
                            source: Box::new(e),
                        }
                    })?;
                let last = traj.states.last().expect("trajectories start at the node");
                let foot = if traj.exited {
                    None
                } else {
                    Corner::locate(grid, last[2], last[5])
                };
                let samples = match source {
                    Source::Off => Vec::new(),
                    _ => {
                        let elapsed: Vec<f64> = traj.times.iter().map(|t| -t).collect();
                        trapezoid(&elapsed)
                            .into_iter()
                            .zip(&traj.states)
                            .filter(|(w, _)| *w != 0.0)
                            .map(|(w, y)| match source {
                                Source::Constant(c) => (w * c, None),
                                _ => {
                                    let d3 = self.source_factor(psi, &[0.0, 0.0, y[2]])[2];
                                    (w * d3, Corner::locate(grid, y[2], y[5]))
                                }
                            })
                            .collect()
                    }
                };
                Ok(Column { foot, samples })
            })
            .collect::<Result<_>>()?;
        let prev = f.values();
        let mut out = vec![0.0; grid.len()];
        let horizontal = vlen / m3;
        out.par_chunks_mut(vlen).enumerate().for_each(|(k, row)| {
            for j3 in 0..m3 {
                let col = &columns[k * m3 + j3];
                for p in 0..horizontal {
                    let mut value = col.foot.map_or(0.0, |c| c.apply(prev, vlen, m3, p));
                    for (w, corner) in &col.samples {
                        value += match (source, corner) {
                            (Source::Constant(_), _) => *w,
                            (_, Some(c)) => w * c.apply(&self.grad_v3, vlen, m3, p),
                            (_, None) => 0.0,
                        };
                    }
                    row[p * m3 + j3] = value;
                }
            }
        });
        Ok(out)
    }

    fn advance_nodes(
        &self,
        f: &Distribution,
        psi: &[(f64, &Field)],
        force: &PotentialForce<'_>,
        dt: f64,
        rule: StepRule,
    ) -> Result<Vec<f64>> {
        let grid = self.grid();
        let source = self.config.source;
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let node = |e: Error| Error::Node {
                    node: i,
                    source: Box::new(e),
                };
                let z = grid.point(i);
                let traj =
                    integrate_flow(&z, force, dt, Direction::Backward, rule).map_err(node)?;
                let last = traj.states.last().expect("trajectories start at the node");
                let mut value = if traj.exited {
                    0.0
                } else {
                    let foot = PhasePoint {
                        x: [last[0], last[1], last[2]],
                        v: [last[3], last[4], last[5]],
                    };
                    f.interpolate(&foot).map_err(node)?.value
                };
                if source != Source::Off {
                    let elapsed: Vec<f64> = traj.times.iter().map(|t| -t).collect();
                    for (w, y) in trapezoid(&elapsed).into_iter().zip(&traj.states) {
                        if w == 0.0 {
                            continue;
                        }
                        value += w * match source {
                            Source::Constant(c) => c,
                            _ => {
                                let x = [y[0], y[1], y[2]];
                                let d = self.source_factor(psi, &x);
                                let st = grid.stencil(&x, &[y[3], y[4], y[5]]).map_err(node)?;
                                let gv = st.apply3(&self.grad_v);
                                d[0] * gv[0] + d[1] * gv[1] + d[2] * gv[2]
                            }
                        };
                    }
                }
                Ok(value)
            })
            .collect()
    }

    /// Steps from `f0` to `T`, calling `observe` on the initial state and on
    /// every `output_stride`-th state.
    pub fn evolve<O>(&self, f0: Distribution, mut observe: O) -> Result<Evolution>
    where
        O: FnMut(&DynamicState) -> Result<()>,
    {
        let p = *self.params();
        let dt = self.config.dt;
        let limit = self.max_stable_dt();
        if dt > limit {
            return Err(Error::Precondition(format!(
                "dt = {dt} does not resolve the exit-time scale; it must be at most {limit:e}"
            )));
        }
        let lambda = self.lambda_infinity()?;
        let mut state = self.initial_state(f0)?;
        let both = Field::sum(&self.steady.phi, &state.psi)?;
        let weighted_f0 = weighted_sup_with(self.grid(), p.beta, p.g, &both, state.f.values());
        let bounds = DecayBounds::new(&p, lambda, self.norm_wdvh, weighted_f0);
        let steps = (self.config.t_final / dt - 1e-9).ceil().max(0.0) as usize;
        let mut samples = Vec::with_capacity(steps + 1);
        let mut psi = PsiHistory::default();
        let mut sup_f = state.norms.f_half_weighted;
        let mut sup_d = state.norms.flux_potential_sup;
        samples.push(bounds.sample(&state, sup_f));
        observe(&state)?;
        for n in 0..steps {
            let h = if n + 1 == steps {
                self.config.t_final - state.t
            } else {
                dt
            };
            psi.times.push(state.t);
            psi.fields.push(state.psi.clone());
            state = self.step(&state, h.max(f64::MIN_POSITIVE))?;
            sup_f = sup_f.max(state.norms.f_half_weighted);
            sup_d = sup_d.max(state.norms.flux_potential_sup);
            samples.push(bounds.sample(&state, sup_f));
            if state.step % self.config.output_stride == 0 || n + 1 == steps {
                observe(&state)?;
            }
        }
        psi.times.push(state.t);
        psi.fields.push(state.psi.clone());
        let report = bounds.report(&samples, self.config.t_final, sup_d, state.bootstrap);
        Ok(Evolution {
            samples,
            last: state,
            report,
            psi,
        })
    }
}

/// Constants of the decay bounds for one run.
struct DecayBounds {
    params: Params,
    lambda: f64,
    weighted_f0: f64,
    rho_rhs: f64,
    f_rhs: f64,
}

/// `a·b` with `0·∞ = 0`.
fn mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl DecayBounds {
    fn new(p: &Params, lambda: f64, norm_wdvh: f64, weighted_f0: f64) -> DecayBounds {
        let (g, beta) = (p.g, p.beta);
        let e16 = (16.0 * lambda * lambda / (beta * g * g)).exp();
        let e64 = (64.0 * lambda * lambda / (g * g * beta)).exp();
        let rho_rhs = mul(16.0 * PI.powf(1.5) / beta.powf(1.5) * e16, weighted_f0);
        let inner = 1.0
            + mul(
                4f64.powf(3.0 + 1.0 / g) * PI.powf(1.5) / (g * beta * beta) * e64,
                norm_wdvh,
            );
        let f_rhs = mul(2.0 * e16 * inner, weighted_f0);
        DecayBounds {
            params: *p,
            lambda,
            weighted_f0,
            rho_rhs,
            f_rhs,
        }
    }

    fn sample(&self, s: &DynamicState, sup_f: f64) -> TimeSample {
        let (g, beta) = (self.params.g, self.params.beta);
        let grow = if s.t == 0.0 {
            1.0
        } else {
            (self.lambda * s.t).exp()
        };
        TimeSample {
            t: s.t,
            norms: s.norms,
            decay_lhs: mul(grow, s.norms.rho_sup),
            decay_rhs: self.rho_rhs,
            decay_f_lhs: mul(grow, s.norms.f_eighth_weighted),
            decay_f_rhs: self.f_rhs,
            flux_bound_lhs: s.norms.flux_potential_sup,
            flux_bound_rhs: 8.0 * PI * (1.0 + 1.0 / (beta * g)) / (beta * beta) * sup_f,
            bootstrap_ok: s.bootstrap.all(),
        }
    }

    fn report(
        &self,
        samples: &[TimeSample],
        t_final: f64,
        sup_d: f64,
        bootstrap: BootstrapFlags,
    ) -> DecayReport {
        let (g, beta) = (self.params.g, self.params.beta);
        let (lambda_fit, fit_window, fit_samples) = fit_decay(samples, t_final);
        let decay_margin = samples
            .iter()
            .map(|s| {
                if s.decay_rhs == 0.0 {
                    if s.decay_lhs == 0.0 {
                        0.0
                    } else {
                        -f64::INFINITY
                    }
                } else {
                    (s.decay_rhs - s.decay_lhs) / s.decay_rhs
                }
            })
            .fold(f64::INFINITY, f64::min);
        DecayReport {
            lambda_infinity: self.lambda,
            lambda_fit,
            fit_window,
            fit_samples,
            weighted_f0: self.weighted_f0,
            decay_holds: samples.iter().all(|s| s.decay_lhs <= s.decay_rhs),
            decay_f_holds: samples.iter().all(|s| s.decay_f_lhs <= s.decay_f_rhs),
            decay_margin,
            flux_bound_holds: samples.iter().all(|s| s.flux_bound_lhs <= s.flux_bound_rhs),
            e_b: (64.0 * beta / g * sup_d * sup_d).exp(),
            bootstrap,
        }
    }
}

/// Least squares on `ln ‖ϱ‖∞` over `[T/2, T]`, restricted to positive
/// samples. With fewer than 10 such samples the window becomes the second
/// half of the interval on which `ϱ` is still positive.
pub fn fit_decay(samples: &[TimeSample], t_final: f64) -> (Option<f64>, Option<(f64, f64)>, usize) {
    const MIN_SAMPLES: usize = 10;
    let positive: Vec<&TimeSample> = samples.iter().filter(|s| s.norms.rho_sup > 0.0).collect();
    let window = |a: f64, b: f64| -> Vec<&TimeSample> {
        positive
            .iter()
            .copied()
            .filter(|s| s.t >= a && s.t <= b)
            .collect()
    };
    let mut chosen = (t_final / 2.0, t_final);
    let mut pts = window(chosen.0, chosen.1);
    if pts.len() < MIN_SAMPLES {
        if let Some(last) = positive.last() {
            chosen = (last.t / 2.0, last.t);
            pts = window(chosen.0, chosen.1);
        }
    }
    let t: Vec<f64> = pts.iter().map(|s| s.t).collect();
    let y: Vec<f64> = pts.iter().map(|s| -s.norms.rho_sup.ln()).collect();
    match linear_fit(&t, &y) {
        Some(fit) => (Some(fit.slope), Some(chosen), fit.samples),
        None => (None, None, pts.len()),
    }
}

/// Builds the solver and runs it.
pub fn evolve(
    f0: Distribution,
    steady: &SteadySolution,
    table: &GradHTable,
    config: DynamicConfig,
) -> Result<Evolution> {
    DynamicSolver::new(steady, table, config)?.evolve(f0, |_| Ok(()))
}

/// Margins of the weight bounds along sampled dynamic trajectories, as
/// `ln(bound) − ln(observed)`; nonnegative means the bound holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightRatioReport {
    pub samples: usize,
    /// `𝔴(s′)/𝔴(s) ≤ e^{(8β/g)‖Δ₀⁻¹∇·b‖ √(v3² + g x3)}`.
    pub ratio_margin: f64,
    /// `1/𝔴(s) ≤ e^{(64β/g)‖Δ₀⁻¹∇·b‖²} e^{−β/2 |v|²} e^{−β/2 g x3}`.
    pub inverse_margin: f64,
    /// `1/w_β(Z(s)) ≤ e^{(16²β/2g²)‖Δ₀⁻¹∇·b‖²} e^{−β/4 |v|²} e^{−βg/4 x3}`.
    pub steady_inverse_margin: f64,
    /// Largest `|ln 𝔴(s) − ln w_β(Z(s))|` seen; zero when `Ψ ≡ 0`.
    pub dynamic_vs_steady: f64,
}

/// Follows characteristics through the frozen fields of `history`, backward
/// to `max(0, t − t_B)` and forward to `min(T, t + t_F)`, and records the
/// log weights along the way.
pub fn weight_ratio_check(
    steady: &SteadySolution,
    history: &PsiHistory,
    flux_potential_sup: f64,
    points: &[(f64, PhasePoint)],
    rule: StepRule,
) -> Result<WeightRatioReport> {
    let p = steady.params;
    let (g, beta) = (p.g, p.beta);
    if history.times.is_empty() {
        return Err(invalid("weight check needs at least one field"));
    }
    let t_end = *history.times.last().expect("nonempty");
    let d = flux_potential_sup;
    let last = history.times.len() - 1;
    let per_point: Vec<(f64, f64, f64, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(idx, (t, z))| {
            let node = |e: Error| Error::Node {
                node: idx,
                source: Box::new(e),
            };
            let mut logs: Vec<(f64, f64)> = Vec::new();
            for dir in [Direction::Backward, Direction::Forward] {
                let mut s = *t;
                let mut y = [z.x[0], z.x[1], z.x[2], z.v[0], z.v[1], z.v[2]];
                loop {
                    let (n, span) = match dir {
                        Direction::Backward if s > 0.0 => {
                            let n = history.interval(s);
                            (n, s - history.times[n])
                        }
                        Direction::Forward if s < t_end => {
                            let n = history
                                .times
                                .partition_point(|&a| a <= s)
                                .saturating_sub(1)
                                .min(last.saturating_sub(1));
                            (n, history.times[n + 1].min(t_end) - s)
                        }
                        _ => break,
                    };
                    let psi = &history.fields[n];
                    let force = PotentialForce::frozen(g, &steady.phi, psi).map_err(node)?;
                    let pt = PhasePoint {
                        x: [y[0], y[1], y[2]],
                        v: [y[3], y[4], y[5]],
                    };
                    let traj =
                        integrate_flow(&pt, &force, span.max(0.0), dir, rule).map_err(node)?;
                    for st in &traj.states {
                        let x = [st[0], st[1], st[2]];
                        let v2 = st[3] * st[3] + st[4] * st[4] + st[5] * st[5];
                        let ls = beta * (v2 + 2.0 * steady.phi.potential(&x) + 2.0 * g * st[2]);
                        logs.push((ls + 2.0 * beta * psi.potential(&x), ls));
                    }
                    y = *traj.states.last().expect("trajectories start at the node");
                    s += traj.times.last().copied().unwrap_or(0.0);
                    if traj.exited || span <= 0.0 {
                        break;
                    }
                }
            }
            let (mut lo, mut hi) = (f64::INFINITY, -f64::INFINITY);
            let mut worst_inv = -f64::INFINITY;
            let mut worst_steady = -f64::INFINITY;
            let mut gap = 0.0f64;
            for (ld, ls) in &logs {
                lo = lo.min(*ld);
                hi = hi.max(*ld);
                worst_inv = worst_inv.max(-ld);
                worst_steady = worst_steady.max(-ls);
                gap = gap.max((ld - ls).abs());
            }
            let (v2, x3, v3) = (z.speed_squared(), z.x[2], z.v[2]);
            let ratio = 8.0 * beta / g * d * (v3 * v3 + g * x3).sqrt() - (hi - lo);
            let inv = 64.0 * beta / g * d * d - 0.5 * beta * v2 - 0.5 * beta * g * x3 - worst_inv;
            let inv_steady = 128.0 * beta / (g * g) * d * d
                - 0.25 * beta * v2
                - 0.25 * beta * g * x3
                - worst_steady;
            Ok((ratio, inv, inv_steady, gap))
        })
        .collect::<Result<_>>()?;
    let fold =
        |f: fn(&(f64, f64, f64, f64)) -> f64| per_point.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(WeightRatioReport {
        samples: points.len(),
        ratio_margin: fold(|r| r.0),
        inverse_margin: fold(|r| r.1),
        steady_inverse_margin: fold(|r| r.2),
        dynamic_vs_steady: per_point.iter().map(|r| r.3).fold(0.0, f64::max),
    })
}
