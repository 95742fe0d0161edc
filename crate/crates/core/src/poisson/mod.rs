//! Dirichlet Poisson problem `ΔΦ = ηρ` on `T² × (0, ∞)`.
//!
//! Each horizontal Fourier mode is solved by integrating the exact vertical
//! Green kernel against the density profile, so the wall condition and the
//! decay at infinity need no artificial far-field boundary.

mod green;
mod kernel;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub use green::{elliptic_constant_sweep, green_selftest, EllipticSweep, GreenSelfTest};
pub use kernel::ModeKernel;

use crate::distribution::{check_same_grid, DensityField, FluxField};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::model::{wrap, Sign};
use crate::quadrature::{hermite5, VerticalQuadrature};

/// Scalar data on the spatial grid.
pub type ScalarField = DensityField;

/// Two-dimensional FFT over the horizontal nodes of one vertical level.
struct Fft2 {
    n1: usize,
    n2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n1: usize, n2: usize) -> Fft2 {
        let mut planner = FftPlanner::new();
        Fft2 {
            n1,
            n2,
            fwd1: planner.plan_fft_forward(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv1: planner.plan_fft_inverse(n1),
            inv2: planner.plan_fft_inverse(n2),
        }
    }

    fn run(&self, buf: &mut [Complex64], forward: bool) {
        let (f1, f2) = if forward {
            (&self.fwd1, &self.fwd2)
        } else {
            (&self.inv1, &self.inv2)
        };
        if self.n2 > 1 {
            for row in buf.chunks_mut(self.n2) {
                f2.process(row);
            }
        }
        if self.n1 > 1 {
            let mut col = vec![Complex64::new(0.0, 0.0); self.n1];
            for j in 0..self.n2 {
                for i in 0..self.n1 {
                    col[i] = buf[i * self.n2 + j];
                }
                f1.process(&mut col);
                for i in 0..self.n1 {
                    buf[i * self.n2 + j] = col[i];
                }
            }
        }
    }
}

fn signed(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Vertical profiles of one horizontal Fourier mode.
#[derive(Clone, Debug, PartialEq)]
struct ModeProfile {
    m: [i64; 2],
    /// `2π m`.
    wave: [f64; 2],
    value: Vec<Complex64>,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
}

/// A potential with its gradient and Hessian.
///
/// Node tables back the norms; off-grid evaluation uses the spectral
/// representation horizontally and quintic Hermite interpolation of the mode
/// profiles vertically, so the force is exactly the gradient of the
/// interpolated potential.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    eta: f64,
    modes: Vec<ModeProfile>,
    phi: Vec<f64>,
    grad: Vec<[f64; 3]>,
    /// `[∂11, ∂12, ∂13, ∂22, ∂23, ∂33]`.
    hess: Vec<[f64; 6]>,
}

/// Potential, gradient and Hessian at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldSample {
    pub phi: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

impl Field {
    /// The identically zero field on `grid`.
    pub fn zero(grid: SpatialGrid) -> Field {
        let n = grid.len();
        Field {
            eta: 1.0,
            modes: Vec::new(),
            phi: vec![0.0; n],
            grad: vec![[0.0; 3]; n],
            hess: vec![[0.0; 6]; n],
            grid,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// No horizontal dependence at all.
    pub fn is_horizontally_homogeneous(&self) -> bool {
        self.modes.iter().all(|m| m.m == [0, 0])
    }

    pub fn node_potential(&self) -> &[f64] {
        &self.phi
    }

    pub fn node_gradient(&self) -> &[[f64; 3]] {
        &self.grad
    }

    /// Node Hessians, packed as `[∂11, ∂12, ∂13, ∂22, ∂23, ∂33]`.
    pub fn node_hessian(&self) -> &[[f64; 6]] {
        &self.hess
    }

    /// Retained modes and their potential profiles.
    pub fn mode_profile(&self, m: [i64; 2]) -> Option<&[Complex64]> {
        self.modes
            .iter()
            .find(|p| p.m == m)
            .map(|p| p.value.as_slice())
    }

    pub fn potential_sup(&self) -> f64 {
        self.phi.iter().fold(0.0f64, |a, p| a.max(p.abs()))
    }

    /// `max |∇Φ|` over the nodes.
    pub fn gradient_sup(&self) -> f64 {
        self.grad.iter().fold(0.0f64, |a, g| a.max(norm3(g)))
    }

    /// `max |∂33Φ|` over the nodes.
    pub fn d33_sup(&self) -> f64 {
        self.hess.iter().fold(0.0f64, |a, h| a.max(h[5].abs()))
    }

    /// `max ‖∇²Φ‖` (operator norm) over the nodes.
    pub fn hessian_sup(&self) -> f64 {
        self.hess
            .par_iter()
            .map(|h| {
                let m = Matrix3::new(h[0], h[1], h[2], h[1], h[3], h[4], h[2], h[4], h[5]);
                m.symmetric_eigenvalues()
                    .iter()
                    .fold(0.0f64, |a, e| a.max(e.abs()))
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max |∇∥∂3Φ|` over the boundary nodes.
    pub fn boundary_mixed_sup(&self) -> f64 {
        let n3 = self.grid.n3();
        self.hess
            .iter()
            .step_by(n3)
            .fold(0.0f64, |a, h| a.max((h[2] * h[2] + h[4] * h[4]).sqrt()))
    }

    /// `∂3Φ(x∥, 0)`.
    pub fn boundary_normal_derivative(&self, x1: f64, x2: f64) -> f64 {
        let mut acc = 0.0;
        for p in &self.modes {
            let e = phase(p, x1, x2);
            acc += (p.d1[0] * e).re;
        }
        acc
    }

    pub fn potential(&self, x: &[f64; 3]) -> f64 {
        self.sample(x).phi
    }

    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        self.sample(x).grad
    }

    /// Evaluates the interpolated field at `x` (with `x3 ≥ 0`).
    ///
    /// Above the truncation height the density is zero, so each mode continues
    /// as its exact source-free solution.
    pub fn sample(&self, x: &[f64; 3]) -> FieldSample {
        let mut s = FieldSample::default();
        if self.modes.is_empty() {
            return s;
        }
        let x3 = x[2].max(0.0);
        let l3 = self.grid.l3();
        let z = self.grid.heights();
        let n3 = z.len();
        let located = if x3 <= l3 {
            Some(self.grid.locate_vertical(x3))
        } else {
            None
        };
        let (x1, x2) = (wrap(x[0]), wrap(x[1]));
        for p in &self.modes {
            let [c, c1, c2] = match located {
                Some((k, t)) => {
                    let ends = [
                        [p.value[k], p.d1[k], p.d2[k]],
                        [p.value[k + 1], p.d1[k + 1], p.d2[k + 1]],
                    ];
                    hermite5(ends, z[k + 1] - z[k], t)
                }
                None => {
                    let top = p.value[n3 - 1];
                    let kk = (p.wave[0] * p.wave[0] + p.wave[1] * p.wave[1]).sqrt();
                    if kk == 0.0 {
                        [
                            top + p.d1[n3 - 1] * (x3 - l3),
                            p.d1[n3 - 1],
                            Complex64::new(0.0, 0.0),
                        ]
                    } else {
                        let v = top * (-kk * (x3 - l3)).exp();
                        [v, v * -kk, v * (kk * kk)]
                    }
                }
            };
            let e = phase(p, x1, x2);
            let ce = c * e;
            let c1e = c1 * e;
            let [a, b] = p.wave;
            s.phi += ce.re;
            s.grad[0] -= a * ce.im;
            s.grad[1] -= b * ce.im;
            s.grad[2] += c1e.re;
            s.hess[0][0] -= a * a * ce.re;
            s.hess[0][1] -= a * b * ce.re;
            s.hess[1][1] -= b * b * ce.re;
            s.hess[0][2] -= a * c1e.im;
            s.hess[1][2] -= b * c1e.im;
            s.hess[2][2] += (c2 * e).re;
        }
        s.hess[1][0] = s.hess[0][1];
        s.hess[2][0] = s.hess[0][2];
        s.hess[2][1] = s.hess[1][2];
        s
    }

    /// `a + b` for fields on the same grid.
    pub fn sum(a: &Field, b: &Field) -> Result<Field> {
        check_same_grid(&a.grid, &b.grid)?;
        if b.modes.is_empty() {
            return Ok(a.clone());
        }
        if a.modes.is_empty() {
            return Ok(b.clone());
        }
        let mut out = a.clone();
        for pb in &b.modes {
            match out.modes.iter_mut().find(|p| p.m == pb.m) {
                Some(pa) => {
                    for (x, y) in pa.value.iter_mut().zip(&pb.value) {
                        *x += y;
                    }
                    for (x, y) in pa.d1.iter_mut().zip(&pb.d1) {
                        *x += y;
                    }
                    for (x, y) in pa.d2.iter_mut().zip(&pb.d2) {
                        *x += y;
                    }
                }
                None => out.modes.push(pb.clone()),
            }
        }
        for (x, y) in out.phi.iter_mut().zip(&b.phi) {
            *x += y;
        }
        for (x, y) in out.grad.iter_mut().zip(&b.grad) {
            for c in 0..3 {
                x[c] += y[c];
            }
        }
        for (x, y) in out.hess.iter_mut().zip(&b.hess) {
            for c in 0..6 {
                x[c] += y[c];
            }
        }
        Ok(out)
    }
}

#[inline]
fn phase(p: &ModeProfile, x1: f64, x2: f64) -> Complex64 {
    if p.m == [0, 0] {
        return Complex64::new(1.0, 0.0);
    }
    let (s, c) = (p.wave[0] * x1 + p.wave[1] * x2).sin_cos();
    Complex64::new(c, s)
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Reusable solver for one spatial grid.
pub struct PoissonSolver {
    grid: SpatialGrid,
    quad: VerticalQuadrature,
    fft: Fft2,
    /// `(spectrum slot, signed mode)` of every retained mode.
    modes: Vec<(usize, [i64; 2])>,
}

impl PoissonSolver {
    /// `mode_cut` bounds `max(|m1|, |m2|)`; `None` keeps every mode the grid resolves.
    pub fn new(grid: &SpatialGrid, mode_cut: Option<usize>) -> Result<PoissonSolver> {
        let (n1, n2) = (grid.n1(), grid.n2());
        let nyquist = (n1 / 2).max(n2 / 2);
        if let Some(cut) = mode_cut {
            if cut > nyquist {
                return Err(Error::Config(format!(
                    "mode cutoff {cut} exceeds the grid Nyquist index {nyquist}"
                )));
            }
        }
        let cut = mode_cut.unwrap_or(nyquist) as i64;
        let mut modes = Vec::new();
        for j1 in 0..n1 {
            for j2 in 0..n2 {
                let m = [signed(j1, n1), signed(j2, n2)];
                if m[0].abs() <= cut && m[1].abs() <= cut {
                    modes.push((j1 * n2 + j2, m));
                }
            }
        }
        Ok(PoissonSolver {
            grid: grid.clone(),
            quad: VerticalQuadrature::new(grid.heights()),
            fft: Fft2::new(n1, n2),
            modes,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Horizontal Fourier coefficients `(1/N) Σ f e^{−i2πm·x}` of each level.
    ///
    /// Returns one profile per retained mode.
    fn forward(&self, values: &[f64]) -> Vec<Vec<Complex64>> {
        let (n1, n2, n3) = (self.grid.n1(), self.grid.n2(), self.grid.n3());
        let norm = 1.0 / (n1 * n2) as f64;
        let mut out = vec![vec![Complex64::new(0.0, 0.0); n3]; self.modes.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n1 * n2];
        for k in 0..n3 {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    buf[i1 * n2 + i2] = Complex64::new(values[self.grid.index(i1, i2, k)], 0.0);
                }
            }
            self.fft.run(&mut buf, true);
            for (mi, &(slot, m)) in self.modes.iter().enumerate() {
                // Nodes start at x = −1/2, which contributes (−1)^m.
                let sign = if (m[0] + m[1]).rem_euclid(2) == 0 {
                    norm
                } else {
                    -norm
                };
                out[mi][k] = buf[slot] * sign;
            }
        }
        out
    }

    /// Real part of `Σ_m c_m(x3) e^{i2πm·x}` at the nodes for each requested
    /// coefficient map.
    fn inverse<F>(&self, count: usize, coeff: F) -> Vec<Vec<f64>>
    where
        F: Fn(usize, usize) -> [Complex64; 10],
    {
        let (n1, n2, n3) = (self.grid.n1(), self.grid.n2(), self.grid.n3());
        let mut out = vec![vec![0.0; self.grid.len()]; count];
        let mut bufs = vec![vec![Complex64::new(0.0, 0.0); n1 * n2]; count];
        for k in 0..n3 {
            for b in bufs.iter_mut() {
                b.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            }
            for (mi, &(slot, m)) in self.modes.iter().enumerate() {
                let sign = if (m[0] + m[1]).rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                };
                let c = coeff(mi, k);
                for (b, cv) in bufs.iter_mut().zip(c.iter()) {
                    b[slot] = cv * sign;
                }
            }
            for (b, o) in bufs.iter_mut().zip(out.iter_mut()) {
                self.fft.run(b, false);
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        o[self.grid.index(i1, i2, k)] = b[i1 * n2 + i2].re;
                    }
                }
            }
        }
        out
    }

    /// Solves `ΔΦ = ηρ`, `Φ = 0` on the wall, with derivatives up to second order.
    pub fn solve(&self, rho: &DensityField, eta: Sign) -> Result<Field> {
        check_same_grid(&self.grid, &rho.grid)?;
        let eta = eta.value();
        if rho.values().iter().all(|&r| r == 0.0) {
            let mut f = Field::zero(self.grid.clone());
            f.eta = eta;
            return Ok(f);
        }
        let rho_hat = self.forward(rho.values());
        let profiles: Vec<ModeProfile> = self
            .modes
            .par_iter()
            .zip(rho_hat.par_iter())
            .map(|(&(_, m), r)| {
                let kern = ModeKernel::new(m);
                let ints = kernel::kernel_integrals(&self.quad, kern, r);
                let value: Vec<Complex64> = ints.value.iter().map(|v| v * eta).collect();
                let d1: Vec<Complex64> = ints.dx.iter().map(|v| v * eta).collect();
                let d2: Vec<Complex64> = value
                    .iter()
                    .zip(r)
                    .map(|(v, r)| v * (kern.k * kern.k) + r * eta)
                    .collect();
                ModeProfile {
                    m,
                    wave: [2.0 * PI * m[0] as f64, 2.0 * PI * m[1] as f64],
                    value,
                    d1,
                    d2,
                }
            })
            .collect();
        let i = Complex64::new(0.0, 1.0);
        let tables = self.inverse(10, |mi, k| {
            let p = &profiles[mi];
            let [a, b] = p.wave;
            let (c, c1, c2) = (p.value[k], p.d1[k], p.d2[k]);
            [
                c,
                c * i * a,
                c * i * b,
                c1,
                c * -(a * a),
                c * -(a * b),
                c * -(b * b),
                c1 * i * a,
                c1 * i * b,
                c2,
            ]
        });
        let n = self.grid.len();
        let n3 = self.grid.n3();
        let mut phi = tables[0].clone();
        for v in phi.iter_mut().step_by(n3) {
            *v = 0.0;
        }
        let grad = (0..n)
            .map(|j| [tables[1][j], tables[2][j], tables[3][j]])
            .collect();
        let hess = (0..n)
            .map(|j| {
                [
                    tables[4][j],
                    tables[5][j],
                    tables[7][j],
                    tables[6][j],
                    tables[8][j],
                    tables[9][j],
                ]
            })
            .collect();
        Ok(Field {
            grid: self.grid.clone(),
            eta,
            modes: profiles,
            phi,
            grad,
            hess,
        })
    }

    /// `Δ₀⁻¹(∇·b) = −∫ b(y)·∇_y G(x, y) dy`, evaluated mode by mode.
    pub fn flux_potential(&self, b: &FluxField) -> Result<ScalarField> {
        check_same_grid(&self.grid, &b.grid)?;
        if b.values().iter().all(|v| v == &[0.0; 3]) {
            return Ok(DensityField::zeros(self.grid.clone()));
        }
        let hats: Vec<Vec<Vec<Complex64>>> =
            (0..3).map(|a| self.forward(&b.component(a))).collect();
        let i = Complex64::new(0.0, 1.0);
        let profiles: Vec<Vec<Complex64>> = self
            .modes
            .par_iter()
            .enumerate()
            .map(|(mi, &(_, m))| {
                let kern = ModeKernel::new(m);
                let wave = [2.0 * PI * m[0] as f64, 2.0 * PI * m[1] as f64];
                let vertical = kernel::kernel_integrals(&self.quad, kern, &hats[2][mi]).dy;
                let mut out: Vec<Complex64> = vertical.iter().map(|v| -v).collect();
                for axis in 0..2 {
                    if wave[axis] != 0.0 {
                        let horiz =
                            kernel::kernel_integrals(&self.quad, kern, &hats[axis][mi]).value;
                        for (o, h) in out.iter_mut().zip(&horiz) {
                            *o += h * i * wave[axis];
                        }
                    }
                }
                out
            })
            .collect();
        let zero = Complex64::new(0.0, 0.0);
        let table = self.inverse(1, |mi, k| {
            let mut c = [zero; 10];
            c[0] = profiles[mi][k];
            c
        });
        DensityField::from_values(
            self.grid.clone(),
            table.into_iter().next().unwrap_or_default(),
        )
    }
}

/// One-shot [`PoissonSolver::solve`] keeping every resolved mode.
pub fn solve_dirichlet(rho: &DensityField, eta: Sign) -> Result<Field> {
    PoissonSolver::new(&rho.grid, None)?.solve(rho, eta)
}

/// One-shot [`PoissonSolver::flux_potential`].
pub fn flux_potential(b: &FluxField) -> Result<ScalarField> {
    PoissonSolver::new(&b.grid, None)?.flux_potential(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_gives_zero_field() {
        let grid = SpatialGrid::new(4, 2, 10, 3.0, 1.0).unwrap();
        let f = solve_dirichlet(&DensityField::zeros(grid), Sign::Plus).unwrap();
        assert_eq!(f.potential_sup(), 0.0);
        assert_eq!(f.gradient_sup(), 0.0);
        assert_eq!(f.sample(&[0.1, 0.2, 0.5]), FieldSample::default());
    }

    #[test]
    fn mode_cut_beyond_nyquist_is_rejected() {
        let grid = SpatialGrid::new(4, 4, 10, 3.0, 1.0).unwrap();
        assert!(PoissonSolver::new(&grid, Some(3)).is_err());
        assert!(PoissonSolver::new(&grid, Some(2)).is_ok());
    }

    #[test]
    fn node_tables_agree_with_pointwise_evaluation() {
        let grid = SpatialGrid::new(6, 4, 24, 4.0, 1.03).unwrap();
        let rho = DensityField::from_fn(grid.clone(), |x| {
            (-x[2]).exp()
                * (1.0
                    + 0.3 * (2.0 * PI * x[0]).cos()
                    + 0.2 * (2.0 * PI * (x[0] + 2.0 * x[1])).sin())
        })
        .unwrap();
        let f = solve_dirichlet(&rho, Sign::Minus).unwrap();
        for idx in [0, 5, 77, 300, grid.len() - 1] {
            let x = grid.position(idx);
            let s = f.sample(&x);
            assert!((s.phi - f.node_potential()[idx]).abs() < 1e-12);
            for a in 0..3 {
                assert!((s.grad[a] - f.node_gradient()[idx][a]).abs() < 1e-12);
            }
            assert!((s.hess[2][2] - f.node_hessian()[idx][5]).abs() < 1e-12);
            assert!((s.hess[0][1] - f.node_hessian()[idx][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_gradient_is_derivative_of_sample_potential() {
        let grid = SpatialGrid::new(4, 4, 16, 3.0, 1.0).unwrap();
        let rho = DensityField::from_fn(grid.clone(), |x| {
            (-2.0 * x[2]).exp() * (1.2 + (2.0 * PI * x[1]).cos())
        })
        .unwrap();
        let f = solve_dirichlet(&rho, Sign::Plus).unwrap();
        let x = [0.13, -0.31, 0.77];
        let h = 1e-6;
        let s = f.sample(&x);
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (f.potential(&xp) - f.potential(&xm)) / (2.0 * h);
            assert!(
                (fd - s.grad[a]).abs() < 1e-7,
                "axis {a}: {fd} vs {}",
                s.grad[a]
            );
            let gp = f.gradient(&xp);
            let gm = f.gradient(&xm);
            for b in 0..3 {
                let fd2 = (gp[b] - gm[b]) / (2.0 * h);
                assert!(
                    (fd2 - s.hess[a][b]).abs() < 1e-6,
                    "hess {a}{b}: {fd2} vs {}",
                    s.hess[a][b]
                );
            }
        }
    }
}
