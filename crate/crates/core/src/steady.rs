//! Steady states by Picard iteration along characteristics.
//!
//! Each step traces every phase node back to the wall under the previous
//! potential, reads off the inflow datum there, and re-solves the potential
//! from the new density.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::boundary::BoundaryDatum;
use crate::characteristics::{
    backward_exit, exit_derivatives, ExitDerivatives, ForceField, PotentialForce, StepRule,
};
use crate::distribution::{energy_weighted_sup, moment_density, DensityField, Distribution, Role};
use crate::error::{invalid, Error, Result};
use crate::grid::PhaseGrid;
use crate::model::{kinetic_distance_with_trace, wrap, Params, PhasePoint};
use crate::poisson::{Field, PoissonSolver};

/// Starting potential of the iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SteadySeed {
    Zero,
    /// The potential of the first iterate: closed form for a horizontally
    /// uniform Maxwellian, one Picard step otherwise.
    FirstIterate,
    /// The first-iterate density times a factor. Starts the iteration away
    /// from the zero-seeded sequence.
    Scaled(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyConfig {
    pub tol_fix: f64,
    pub max_iter: usize,
    pub step: StepRule,
    pub mode_cut: Option<usize>,
    pub seed: SteadySeed,
}

impl Default for SteadyConfig {
    fn default() -> SteadyConfig {
        SteadyConfig {
            tol_fix: 1e-9,
            max_iter: 50,
            step: StepRule::default(),
            mode_cut: None,
            seed: SteadySeed::Zero,
        }
    }
}

/// `lhs ≤ rhs` with a relative margin `(rhs − lhs)/rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    pub fn relative_margin(&self) -> f64 {
        if self.rhs.is_infinite() {
            1.0
        } else if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                -f64::INFINITY
            }
        } else {
            (self.rhs - self.lhs) / self.rhs
        }
    }
}

/// The four uniform-in-iteration bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformBounds {
    /// `‖h‖∞ ≤ ‖G‖∞`.
    pub h: BoundCheck,
    /// `‖w_β h‖∞ ≤ ‖e^{β|v|²}G‖∞`, with the weight of the tracing potential.
    pub weighted_h: BoundCheck,
    /// `‖e^{βg x3} ρ‖∞ ≤ (π/β)^{3/2} ‖e^{β|v|²}G‖∞`.
    pub density: BoundCheck,
    /// `‖∇Φ‖∞ ≤ g/2`.
    pub gradient: BoundCheck,
}

impl UniformBounds {
    pub fn worst_margin(&self) -> f64 {
        [self.h, self.weighted_h, self.density, self.gradient]
            .iter()
            .map(BoundCheck::relative_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// One Picard iterate `(h^ℓ, ρ^ℓ, Φ^ℓ)`.
#[derive(Clone, Debug)]
pub struct SteadyIterate {
    pub index: usize,
    pub h: Distribution,
    pub rho: DensityField,
    pub phi: Field,
    /// Absent for the seed.
    pub bounds: Option<UniformBounds>,
    /// `‖e^{β/2(|v|² + g x3)}(h^ℓ − h^{ℓ−1})‖∞`.
    pub difference: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterateSummary {
    pub index: usize,
    pub difference: f64,
    /// `difference / previous difference`.
    pub ratio: Option<f64>,
    pub bounds: UniformBounds,
    pub gradient_sup: f64,
}

#[derive(Clone, Debug)]
pub struct SteadySolution {
    pub params: Params,
    pub boundary: BoundaryDatum,
    pub step: StepRule,
    pub h: Distribution,
    pub rho: DensityField,
    pub phi: Field,
    pub history: Vec<IterateSummary>,
    pub converged: bool,
    /// Last successive-difference ratio measured above the rounding floor.
    pub contraction: Option<f64>,
}

impl SteadySolution {
    pub fn grid(&self) -> &PhaseGrid {
        &self.h.grid
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

/// `h(z) = G(x_b(z), v_b(z))` under the steady force.
pub fn evaluate_h_backtrace<F: ForceField + ?Sized>(
    z: &PhasePoint,
    force: &F,
    boundary: &BoundaryDatum,
    rule: StepRule,
) -> Result<f64> {
    if boundary.is_vacuum() {
        return Ok(0.0);
    }
    let rec = backward_exit(z, force, rule)?;
    Ok(boundary.value(rec.x_b[0], rec.x_b[1], &rec.v_b))
}

/// Traces every node of `grid` back to the wall under `phi`.
///
/// For a horizontally homogeneous potential the exit depends on `(x3, v3)`
/// only, so one exit per vertical pair is shifted across `(x∥, v∥)`.
pub fn backtrace_grid(
    grid: &PhaseGrid,
    phi: &Field,
    params: &Params,
    boundary: &BoundaryDatum,
    rule: StepRule,
) -> Result<Vec<f64>> {
    let n = grid.len();
    if boundary.is_vacuum() {
        return Ok(vec![0.0; n]);
    }
    let force = PotentialForce::steady(params.g, phi)?;
    let sp = &grid.spatial;
    let vg = &grid.velocity;
    let [_, _, m3] = vg.counts();
    if force.is_vertical() {
        let n3 = sp.n3();
        let z = sp.heights();
        let exits: Vec<(f64, f64)> = (0..n3 * m3)
            .into_par_iter()
            .map(|p| {
                let (k, j3) = (p / m3, p % m3);
                let pt = PhasePoint {
                    x: [0.0, 0.0, z[k]],
                    v: [0.0, 0.0, vg.axis_node(2, j3)],
                };
                let rec = backward_exit(&pt, &force, rule).map_err(|e| Error::Node {
                    node: p,
                    source: Box::new(e),
                })?;
                Ok((rec.t_b, rec.v_b[2]))
            })
            .collect::<Result<_>>()?;
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let (s, j) = grid.split(i);
                let (_, _, k) = sp.split(s);
                let (_, _, j3) = vg.split(j);
                let (t_b, vb3) = exits[k * m3 + j3];
                let x = sp.position(s);
                let v = vg.node(j);
                boundary.value(
                    wrap(x[0] - t_b * v[0]),
                    wrap(x[1] - t_b * v[1]),
                    &[v[0], v[1], vb3],
                )
            })
            .collect())
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| {
                evaluate_h_backtrace(&grid.point(i), &force, boundary, rule).map_err(|e| {
                    Error::Node {
                        node: i,
                        source: Box::new(e),
                    }
                })
            })
            .collect()
    }
}

/// `max e^{β/2(|v|² + g x3)} |a − b|` over the nodes.
pub fn half_weighted_distance(grid: &PhaseGrid, beta: f64, g: f64, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    energy_weighted_sup(grid, 0.5 * beta, g, &diff)
}

/// `max w_β h` with the weight of the potential `phi`, over the nodes.
pub fn weighted_sup_with(grid: &PhaseGrid, beta: f64, g: f64, phi: &Field, values: &[f64]) -> f64 {
    let vlen = grid.velocity.len();
    let pot = phi.node_potential();
    values
        .par_chunks(vlen)
        .enumerate()
        .map(|(s, row)| {
            let x3 = grid.spatial.position(s)[2];
            let base = 2.0 * pot[s] + 2.0 * g * x3;
            row.iter().enumerate().fold(0.0f64, |m, (j, f)| {
                if *f == 0.0 {
                    return m;
                }
                let v = grid.velocity.node(j);
                m.max(f.abs() * (beta * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + base)).exp())
            })
        })
        .reduce(|| 0.0, f64::max)
}

/// Reusable Picard solver for one grid and inflow datum.
pub struct SteadySolver {
    params: Params,
    grid: PhaseGrid,
    boundary: BoundaryDatum,
    config: SteadyConfig,
    poisson: PoissonSolver,
}

impl SteadySolver {
    pub fn new(
        params: Params,
        grid: PhaseGrid,
        boundary: BoundaryDatum,
        config: SteadyConfig,
    ) -> Result<SteadySolver> {
        if !(config.tol_fix > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol_fix must be positive, got {}",
                config.tol_fix
            )));
        }
        config.step.validate()?;
        let poisson = PoissonSolver::new(&grid.spatial, config.mode_cut)?;
        Ok(SteadySolver {
            params,
            grid,
            boundary,
            config,
            poisson,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    /// The analytic first-iterate density when `G` is a uniform Maxwellian:
    /// `ρ¹ = A (π/β_G)^{3/2} e^{−2β_G g x3}`.
    pub fn first_iterate_density(&self) -> Option<DensityField> {
        let (a, bg, ripple) = self.boundary.maxwellian_parameters()?;
        if ripple != 0.0 {
            return None;
        }
        let rho0 = a * (PI / bg).powf(1.5);
        let g = self.params.g;
        DensityField::from_fn(self.grid.spatial.clone(), |x| {
            rho0 * (-2.0 * bg * g * x[2]).exp()
        })
        .ok()
    }

    /// Iterate 0 for the configured seed.
    pub fn seed(&self, seed: SteadySeed) -> Result<SteadyIterate> {
        let zero = SteadyIterate {
            index: 0,
            h: Distribution::zeros(self.grid.clone(), Role::Steady, self.params.beta),
            rho: DensityField::zeros(self.grid.spatial.clone()),
            phi: Field::zero(self.grid.spatial.clone()),
            bounds: None,
            difference: None,
        };
        match seed {
            SteadySeed::Zero => Ok(zero),
            SteadySeed::FirstIterate | SteadySeed::Scaled(_) => {
                let mut rho = match self.first_iterate_density() {
                    Some(rho) => rho,
                    None => self.picard_iterate(&zero)?.rho,
                };
                if let SteadySeed::Scaled(c) = seed {
                    if !c.is_finite() {
                        return Err(invalid("seed scale must be finite"));
                    }
                    let scaled = rho.values().iter().map(|r| c * r).collect();
                    rho = DensityField::from_values(self.grid.spatial.clone(), scaled)?;
                }
                let phi = self.poisson.solve(&rho, self.params.eta)?;
                Ok(SteadyIterate { rho, phi, ..zero })
            }
        }
    }

    /// `h^{ℓ+1}` by backtracing under `Φ^ℓ`, then `ρ^{ℓ+1}` and `Φ^{ℓ+1}`.
    pub fn picard_iterate(&self, prev: &SteadyIterate) -> Result<SteadyIterate> {
        let p = &self.params;
        let values = backtrace_grid(&self.grid, &prev.phi, p, &self.boundary, self.config.step)?;
        let difference = half_weighted_distance(&self.grid, p.beta, p.g, &values, prev.h.values());
        let weighted_h = weighted_sup_with(&self.grid, p.beta, p.g, &prev.phi, &values);
        let h = Distribution::from_values(self.grid.clone(), Role::Steady, p.beta, values)?;
        let rho = moment_density(&h);
        let phi = self.poisson.solve(&rho, p.eta)?;
        let wg = self.boundary.weighted_sup(p.beta);
        let density_lhs = rho.values().iter().enumerate().fold(0.0f64, |m, (s, r)| {
            m.max(r.abs() * (p.beta * p.g * self.grid.spatial.position(s)[2]).exp())
        });
        let bounds = UniformBounds {
            h: BoundCheck {
                lhs: h.sup(),
                rhs: self.boundary.sup(),
            },
            weighted_h: BoundCheck {
                lhs: weighted_h,
                rhs: wg,
            },
            density: BoundCheck {
                lhs: density_lhs,
                rhs: (PI / p.beta).powf(1.5) * wg,
            },
            gradient: BoundCheck {
                lhs: phi.gradient_sup(),
                rhs: p.g / 2.0,
            },
        };
        Ok(SteadyIterate {
            index: prev.index + 1,
            h,
            rho,
            phi,
            bounds: Some(bounds),
            difference: Some(difference),
        })
    }

    /// Iterates from the configured seed until the half-weighted difference
    /// drops below `tol_fix` or `max_iter` is reached.
    pub fn solve(&self) -> Result<SteadySolution> {
        self.solve_from(self.seed(self.config.seed)?)
    }

    pub fn solve_from(&self, seed: SteadyIterate) -> Result<SteadySolution> {
        let mut current = seed;
        let mut history: Vec<IterateSummary> = Vec::new();
        let mut converged = false;
        // Ratios below this difference measure rounding, not contraction.
        let floor = 1e3 * f64::EPSILON * self.boundary.weighted_sup(self.params.beta).max(1e-300);
        for _ in 0..self.config.max_iter {
            let next = self.picard_iterate(&current)?;
            let d = next.difference.unwrap_or(f64::INFINITY);
            let ratio = history
                .last()
                .and_then(|prev| (prev.difference > floor).then(|| d / prev.difference));
            history.push(IterateSummary {
                index: next.index,
                difference: d,
                ratio,
                bounds: next.bounds.expect("iterates carry bounds"),
                gradient_sup: next.phi.gradient_sup(),
            });
            current = next;
            if d < self.config.tol_fix {
                converged = true;
                break;
            }
        }
        let contraction = history.iter().rev().find_map(|s| s.ratio);
        Ok(SteadySolution {
            params: self.params,
            boundary: self.boundary.clone(),
            step: self.config.step,
            h: current.h,
            rho: current.rho,
            phi: current.phi,
            history,
            converged,
            contraction,
        })
    }
}

/// Builds the solver and runs it.
pub fn solve_steady(
    boundary: &BoundaryDatum,
    params: &Params,
    grid: &PhaseGrid,
    config: &SteadyConfig,
) -> Result<SteadySolution> {
    SteadySolver::new(*params, grid.clone(), boundary.clone(), config.clone())?.solve()
}

/// `(∇_x h, ∇_v h)` at one point, with a flag for the finite-difference
/// fallback used near the grazing set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradH {
    pub grad_x: [f64; 3],
    pub grad_v: [f64; 3],
    pub grazing: bool,
}

fn chain(d: &ExitDerivatives, boundary: &BoundaryDatum) -> GradH {
    let s = boundary.sample(d.record.x_b[0], d.record.x_b[1], &d.record.v_b);
    let mut g = [0.0; 6];
    for (j, gj) in g.iter_mut().enumerate() {
        *gj = s.grad_x[0] * d.dx_b[0][j]
            + s.grad_x[1] * d.dx_b[1][j]
            + s.grad_v[0] * d.dv_b[0][j]
            + s.grad_v[1] * d.dv_b[1][j]
            + s.grad_v[2] * d.dv_b[2][j];
    }
    GradH {
        grad_x: [g[0], g[1], g[2]],
        grad_v: [g[3], g[4], g[5]],
        grazing: false,
    }
}

/// Horizontally homogeneous force: derivatives at `(x∥, v∥)` from those
/// computed at `x∥ = v∥ = 0`.
fn shift_horizontal(base: &ExitDerivatives, z: &PhasePoint) -> ExitDerivatives {
    let mut d = *base;
    let t_b = base.record.t_b;
    d.record.x_b = [
        wrap(z.x[0] - t_b * z.v[0]),
        wrap(z.x[1] - t_b * z.v[1]),
        0.0,
    ];
    d.record.v_b = [z.v[0], z.v[1], base.record.v_b[2]];
    for a in 0..2 {
        for j in 0..6 {
            d.dx_b[a][j] -= z.v[a] * base.dt_b[j];
        }
    }
    d
}

const FD_STEP: f64 = 1e-5;

/// One-sided differences of the backtraced `h`, stepping into the domain in
/// `x3` and toward incoming velocities in `v3`.
fn grad_h_fallback<F: ForceField + ?Sized>(
    z: &PhasePoint,
    force: &F,
    boundary: &BoundaryDatum,
    rule: StepRule,
) -> Result<GradH> {
    let h0 = evaluate_h_backtrace(z, force, boundary, rule)?;
    let mut g = [0.0; 6];
    for (j, gj) in g.iter_mut().enumerate() {
        let mut p = *z;
        if j < 3 {
            p.x[j] += FD_STEP;
        } else {
            p.v[j - 3] += FD_STEP;
        }
        let p = PhasePoint::new(p.x, p.v)?;
        *gj = (evaluate_h_backtrace(&p, force, boundary, rule)? - h0) / FD_STEP;
    }
    Ok(GradH {
        grad_x: [g[0], g[1], g[2]],
        grad_v: [g[3], g[4], g[5]],
        grazing: true,
    })
}

/// `∇_{x,v} h = ∇_{x,v} x_b · ∇_{x∥} G + ∇_{x,v} v_b · ∇_v G`.
pub fn grad_h(sol: &SteadySolution, z: &PhasePoint) -> Result<GradH> {
    let force = PotentialForce::steady(sol.params.g, &sol.phi)?;
    match exit_derivatives(z, &force, sol.step) {
        Ok(d) => Ok(chain(&d, &sol.boundary)),
        Err(Error::Grazing { .. }) => grad_h_fallback(z, &force, &sol.boundary, sol.step),
        Err(e) => Err(e),
    }
}

/// `∇_x h` and `∇_v h` at every phase node.
#[derive(Clone, Debug, PartialEq)]
pub struct GradHTable {
    pub grad_x: Vec<[f64; 3]>,
    pub grad_v: Vec<[f64; 3]>,
    /// Nodes that used the finite-difference fallback.
    pub grazing: Vec<usize>,
}

impl GradHTable {
    /// `max w_β |∇_v h|` with the weight of `phi`.
    pub fn weighted_grad_v_sup(&self, grid: &PhaseGrid, beta: f64, g: f64, phi: &Field) -> f64 {
        let norms: Vec<f64> = self
            .grad_v
            .iter()
            .map(|d| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
            .collect();
        weighted_sup_with(grid, beta, g, phi, &norms)
    }
}

pub fn grad_h_table(sol: &SteadySolution) -> Result<GradHTable> {
    let grid = sol.grid();
    let n = grid.len();
    if sol.boundary.is_vacuum() {
        return Ok(GradHTable {
            grad_x: vec![[0.0; 3]; n],
            grad_v: vec![[0.0; 3]; n],
            grazing: Vec::new(),
        });
    }
    let force = PotentialForce::steady(sol.params.g, &sol.phi)?;
    let sp = &grid.spatial;
    let vg = &grid.velocity;
    let m3 = vg.counts()[2];
    let per_node: Vec<GradH> = if force.is_vertical() {
        let z = sp.heights();
        let base: Vec<Option<ExitDerivatives>> = (0..sp.n3() * m3)
            .into_par_iter()
            .map(|p| {
                let pt = PhasePoint {
                    x: [0.0, 0.0, z[p / m3]],
                    v: [0.0, 0.0, vg.axis_node(2, p % m3)],
                };
                match exit_derivatives(&pt, &force, sol.step) {
                    Ok(d) => Ok(Some(d)),
                    Err(Error::Grazing { .. }) => Ok(None),
                    Err(e) => Err(Error::Node {
                        node: p,
                        source: Box::new(e),
                    }),
                }
            })
            .collect::<Result<_>>()?;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let (s, j) = grid.split(i);
                let k = sp.split(s).2;
                let j3 = vg.split(j).2;
                let pt = grid.point(i);
                match &base[k * m3 + j3] {
                    Some(b) => Ok(chain(&shift_horizontal(b, &pt), &sol.boundary)),
                    None => grad_h_fallback(&pt, &force, &sol.boundary, sol.step),
                }
            })
            .collect::<Result<_>>()?
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let pt = grid.point(i);
                match exit_derivatives(&pt, &force, sol.step) {
                    Ok(d) => Ok(chain(&d, &sol.boundary)),
                    Err(Error::Grazing { .. }) => {
                        grad_h_fallback(&pt, &force, &sol.boundary, sol.step)
                    }
                    Err(e) => Err(Error::Node {
                        node: i,
                        source: Box::new(e),
                    }),
                }
            })
            .collect::<Result<_>>()?
    };
    let grazing = per_node
        .iter()
        .enumerate()
        .filter(|(_, g)| g.grazing)
        .map(|(i, _)| i)
        .collect();
    Ok(GradHTable {
        grad_x: per_node.iter().map(|g| g.grad_x).collect(),
        grad_v: per_node.iter().map(|g| g.grad_v).collect(),
        grazing,
    })
}

/// Least-squares fit `y ≈ c0 + c1 s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub samples: usize,
}

pub fn linear_fit(s: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = s.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let ms = s.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = s.iter().map(|a| (a - ms) * (a - ms)).sum();
    let sxy: f64 = s.iter().zip(y).map(|(a, b)| (a - ms) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LinearFit {
        intercept: my - slope * ms,
        slope,
        r_squared,
        samples: n,
    })
}

/// Fitted shape constants of the regularity estimates; nothing here is a
/// hard bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    /// `|∂x3ρ| ≈ C1 + C2 |ln(x3² + g x3)|` for `0 < x3 ≤ 1`.
    pub rho_log_fit: Option<LinearFit>,
    /// `max e^{β̃ g x3/2} |∂x3ρ|` over `x3 ≥ 1`, and over the top half of
    /// the grid.
    pub rho_far_envelope: (f64, f64),
    /// `max |∇∥ρ|`.
    pub rho_horizontal_sup: f64,
    /// `max e^{β̃/2(|v|²+g x3)} |∂x3 h| / (1 + 1/α)` over non-grazing nodes.
    pub h_x_constant: f64,
    /// `max e^{β̃/2(|v|²+g x3)} |∇_v h|`.
    pub h_v_weighted_sup: f64,
}

/// Nonuniform three-point derivative of a column at interior index `k`.
fn column_derivative(z: &[f64], f: &[f64], k: usize) -> f64 {
    let (h0, h1) = (z[k] - z[k - 1], z[k + 1] - z[k]);
    (-h1 / (h0 * (h0 + h1))) * f[k - 1]
        + ((h1 - h0) / (h0 * h1)) * f[k]
        + (h0 / (h1 * (h0 + h1))) * f[k + 1]
}

pub fn regularity_diagnostics(sol: &SteadySolution, table: &GradHTable) -> RegularityReport {
    let p = &sol.params;
    let grid = sol.grid();
    let sp = &grid.spatial;
    let z = sp.heights();
    let n3 = sp.n3();
    let rho = sol.rho.values();
    let (mut s, mut y) = (Vec::new(), Vec::new());
    let (mut near, mut far) = (0.0f64, 0.0f64);
    let mut horizontal = 0.0f64;
    for col in 0..sp.n1() * sp.n2() {
        let f = &rho[col * n3..(col + 1) * n3];
        for k in 1..n3 - 1 {
            let d = column_derivative(z, f, k).abs();
            if z[k] <= 1.0 {
                s.push((z[k] * z[k] + p.g * z[k]).ln().abs());
                y.push(d);
            } else {
                near = near.max((p.beta_tilde * p.g * z[k] / 2.0).exp() * d);
            }
            if z[k] >= 0.5 * sp.l3() {
                far = far.max((p.beta_tilde * p.g * z[k] / 2.0).exp() * d);
            }
        }
    }
    let (n1, n2) = (sp.n1(), sp.n2());
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for k in 0..n3 {
                let c = rho[sp.index(i1, i2, k)];
                let dx1 = (rho[sp.index((i1 + 1) % n1, i2, k)] - c) * n1 as f64;
                let dx2 = (rho[sp.index(i1, (i2 + 1) % n2, k)] - c) * n2 as f64;
                horizontal = horizontal.max(dx1.hypot(dx2));
            }
        }
    }
    let bt = p.beta_tilde;
    let (hx, hv) = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let pt = grid.point(i);
            let w = (0.5 * bt * (pt.speed_squared() + p.g * pt.x[2])).exp();
            let gv = table.grad_v[i];
            let hv = w * (gv[0] * gv[0] + gv[1] * gv[1] + gv[2] * gv[2]).sqrt();
            let s = grid.split(i).0;
            let trace = sol.phi.node_gradient()[s - s % sp.n3()][2];
            let hx = match kinetic_distance_with_trace(p.g, trace, pt.x[2], pt.v[2]) {
                Ok(a) if a > 0.0 => w * table.grad_x[i][2].abs() / (1.0 + 1.0 / a),
                _ => 0.0,
            };
            (hx, hv)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    RegularityReport {
        rho_log_fit: linear_fit(&s, &y),
        rho_far_envelope: (near, far),
        rho_horizontal_sup: horizontal,
        h_x_constant: hx,
        h_v_weighted_sup: hv,
    }
}

#[derive(Clone, Debug)]
pub struct UniquenessReport {
    /// Half-weighted sup distance between the two fixed points.
    pub distance: f64,
    pub first: SteadySolution,
    pub second: SteadySolution,
}

/// Solves from the zero potential and from `second_seed`, and measures how
/// far apart the two fixed points are.
pub fn uniqueness_probe(
    solver: &SteadySolver,
    second_seed: SteadySeed,
) -> Result<UniquenessReport> {
    let first = solver.solve_from(solver.seed(SteadySeed::Zero)?)?;
    let second = solver.solve_from(solver.seed(second_seed)?)?;
    let p = solver.params();
    let distance = half_weighted_distance(
        solver.grid(),
        p.beta,
        p.g,
        first.h.values(),
        second.h.values(),
    );
    Ok(UniquenessReport {
        distance,
        first,
        second,
    })
}
