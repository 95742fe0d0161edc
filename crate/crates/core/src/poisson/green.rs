//! Numerical checks of the half-space Green function.

use std::f64::consts::{E, PI};

use rayon::prelude::*;

use super::kernel::ModeKernel;
use super::solve_dirichlet;
use crate::distribution::DensityField;
use crate::error::Result;
use crate::grid::SpatialGrid;
use crate::model::{wrap, Sign};

/// Report of [`green_selftest`].
#[derive(Clone, Debug)]
pub struct GreenSelfTest {
    /// `π^{-3/2} Γ(3/2)`.
    pub c2: f64,
    pub c2_error: f64,
    /// Largest `|G(x, y)|` with both points on the wall.
    pub dirichlet_max: f64,
    /// Largest `|b0|` at separations in `[0.05, 1]`.
    pub remainder_near_max: f64,
    /// Bound on the omitted part of the truncated mode sums.
    pub tail_estimate: f64,
    /// `max |b0(d)| e^{d}` over `d ∈ [1, 5]`.
    pub decay_constant: f64,
    /// `|b0(1)| / |b0(3)|`.
    pub decay_factor: f64,
    /// `(d, b0(d))` along the vertical decay line.
    pub decay_samples: Vec<(f64, f64)>,
    pub elliptic: EllipticSweep,
    /// `(Hölder seminorm of ρ, max ‖∇²Φ‖)` for increasingly oscillatory densities.
    pub hessian_growth: Vec<(f64, f64)>,
    pub passed: bool,
}

/// Empirical constant of the elliptic decay estimate.
#[derive(Clone, Debug)]
pub struct EllipticSweep {
    /// `(A, B, max ratio)` per sample.
    pub samples: Vec<(f64, f64, f64)>,
    pub constant: f64,
}

const TAIL_TOL: f64 = 1e-13;

/// `G(x, y)` by the mode sum with `max(|m1|, |m2|) ≤ limit`, plus a bound
/// on the omitted terms.
pub fn green_mode_sum(x: &[f64; 3], y: &[f64; 3], limit: usize) -> (f64, f64) {
    let d1 = wrap(x[0] - y[0]);
    let d2 = wrap(x[1] - y[1]);
    let lim = limit as i64;
    let mut acc = -x[2].min(y[2]);
    for m1 in -lim..=lim {
        for m2 in -lim..=lim {
            if m1 == 0 && m2 == 0 {
                continue;
            }
            let k = ModeKernel::new([m1, m2]);
            acc += k.value(x[2], y[2]) * (2.0 * PI * (m1 as f64 * d1 + m2 as f64 * d2)).cos();
        }
    }
    let sep = (x[2] - y[2]).abs();
    let tail = if sep == 0.0 && x[2] != 0.0 {
        f64::INFINITY
    } else if sep == 0.0 {
        0.0
    } else {
        // Σ_{|m|>M} e^{−2π|m|d}/(4π|m|) ≈ e^{−2πMd}/(4πd); doubled for lattice effects.
        let k = 2.0 * PI * limit as f64;
        2.0 * (-k * sep).exp() / (4.0 * PI * sep)
    };
    (acc, tail)
}

/// `|x3−y3|/2 − |x3+y3|/2 − (C2/4)(1/|x−y| − 1/|x̃−y|)`, with the minimal
/// horizontal image.
pub fn green_singular_part(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    let c2 = 1.0 / (2.0 * PI);
    let big_c2 = 2.0 * c2;
    let d1 = wrap(x[0] - y[0]);
    let d2 = wrap(x[1] - y[1]);
    let h2 = d1 * d1 + d2 * d2;
    let r = (h2 + (x[2] - y[2]).powi(2)).sqrt();
    let r_img = (h2 + (x[2] + y[2]).powi(2)).sqrt();
    0.5 * (x[2] - y[2]).abs() - 0.5 * (x[2] + y[2]).abs() - big_c2 / 4.0 * (1.0 / r - 1.0 / r_img)
}

fn limit_for(sep: f64) -> usize {
    ((-TAIL_TOL.ln()) / (2.0 * PI * sep)).ceil() as usize + 2
}

fn remainder(x: &[f64; 3], y: &[f64; 3], cap: Option<usize>) -> (f64, f64) {
    let sep = (x[2] - y[2]).abs();
    let limit = cap.unwrap_or_else(|| limit_for(sep.max(1e-3)));
    let (g, tail) = green_mode_sum(x, y, limit);
    (g - green_singular_part(x, y), tail)
}

/// Sweeps `ρ = A e^{−B x3}(1 + cos 2πx1)/2` and records
/// `max_j |∂_jΦ| / (A(1 + 1/B + δ_{3j} e^{−B x3}/B))`.
pub fn elliptic_constant_sweep(amplitudes: &[f64], rates: &[f64]) -> Result<EllipticSweep> {
    let mut samples = Vec::new();
    for &b in rates {
        let grid = SpatialGrid::new(8, 1, 256, 30.0 / b, 1.0)?;
        for &a in amplitudes {
            let rho = DensityField::from_fn(grid.clone(), |x| {
                a * (-b * x[2]).exp() * 0.5 * (1.0 + (2.0 * PI * x[0]).cos())
            })?;
            let field = solve_dirichlet(&rho, Sign::Plus)?;
            let mut worst = 0.0f64;
            for (idx, g) in field.node_gradient().iter().enumerate() {
                let x3 = grid.position(idx)[2];
                for (j, gj) in g.iter().enumerate() {
                    let extra = if j == 2 { (-b * x3).exp() / b } else { 0.0 };
                    worst = worst.max(gj.abs() / (a * (1.0 + 1.0 / b + extra)));
                }
            }
            samples.push((a, b, worst));
        }
    }
    let constant = samples.iter().fold(0.0f64, |m, s| m.max(s.2));
    Ok(EllipticSweep { samples, constant })
}

fn hessian_growth() -> Result<Vec<(f64, f64)>> {
    let grid = SpatialGrid::new(32, 1, 160, 16.0, 1.0)?;
    let mut out = Vec::new();
    for j in [1.0, 2.0, 4.0, 8.0] {
        let rho = DensityField::from_fn(grid.clone(), |x| {
            (-x[2]).exp() * (1.0 + 0.5 * (2.0 * PI * j * x[0]).cos())
        })?;
        let field = solve_dirichlet(&rho, Sign::Plus)?;
        // Hölder-1/2 seminorm of the oscillating factor.
        let seminorm = 0.5 * (2.0 * PI * j).sqrt();
        out.push((seminorm, field.hessian_sup()));
    }
    Ok(out)
}

/// Runs every Green-function check with automatically chosen truncations.
pub fn green_selftest() -> Result<GreenSelfTest> {
    green_selftest_with(None)
}

/// As [`green_selftest`], with the mode sums capped at `max(|m1|,|m2|) ≤ cap`.
pub fn green_selftest_with(cap: Option<usize>) -> Result<GreenSelfTest> {
    let c2 = libm::tgamma(1.5) / PI.powf(1.5);
    let c2_error = (c2 - 1.0 / (2.0 * PI)).abs();

    let mut dirichlet_max = 0.0f64;
    for (a, b) in [(0.1, 0.3), (-0.4, 0.2), (0.25, -0.45)] {
        let (g, _) = green_mode_sum(&[a, b, 0.0], &[0.0, 0.0, 0.0], cap.unwrap_or(50));
        dirichlet_max = dirichlet_max.max(g.abs());
    }

    let near: Vec<([f64; 3], [f64; 3])> = [0.05, 0.1, 0.2, 0.4, 0.7, 1.0]
        .iter()
        .flat_map(|&sep| [0.05, 0.5, 1.5].map(move |y3| ([0.11, -0.07, y3 + sep], [0.0, 0.0, y3])))
        .collect();
    let near_vals: Vec<(f64, f64)> = near.par_iter().map(|(x, y)| remainder(x, y, cap)).collect();
    let remainder_near_max = near_vals.iter().fold(0.0f64, |m, v| m.max(v.0.abs()));
    let mut tail_estimate = near_vals.iter().fold(0.0f64, |m, v| m.max(v.1));

    let y = [0.0, 0.0, 0.5];
    let line: Vec<f64> = (0..=20).map(|i| 1.0 + 0.2 * i as f64).collect();
    let decay: Vec<(f64, (f64, f64))> = line
        .par_iter()
        .map(|&d| (d, remainder(&[0.2, 0.1, y[2] + d], &y, cap)))
        .collect();
    tail_estimate = decay.iter().fold(tail_estimate, |m, v| m.max(v.1 .1));
    let decay_samples: Vec<(f64, f64)> = decay.iter().map(|(d, v)| (*d, v.0)).collect();
    let decay_constant = decay_samples
        .iter()
        .fold(0.0f64, |m, (d, b)| m.max(b.abs() * d.exp()));
    let at = |d: f64| {
        decay_samples
            .iter()
            .find(|s| (s.0 - d).abs() < 1e-12)
            .map(|s| s.1.abs())
            .unwrap_or(f64::NAN)
    };
    let decay_factor = at(1.0) / at(3.0);

    let elliptic = elliptic_constant_sweep(&[0.5, 1.0, 2.0], &[0.5, 1.0, 2.0, 4.0])?;
    let hessian_growth = hessian_growth()?;

    let passed = c2_error < 1e-14
        && dirichlet_max < 1e-12
        && remainder_near_max.is_finite()
        && tail_estimate < 1e-9
        && decay_factor >= E * E / 2.0;
    Ok(GreenSelfTest {
        c2,
        c2_error,
        dirichlet_max,
        remainder_near_max,
        tail_estimate,
        decay_constant,
        decay_factor,
        decay_samples,
        elliptic,
        hessian_growth,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_sum_vanishes_on_the_wall() {
        let (g, _) = green_mode_sum(&[0.3, 0.1, 0.0], &[0.0, 0.0, 0.7], 20);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn remainder_is_bounded_near_the_diagonal() {
        let y = [0.0, 0.0, 0.8];
        let mut prev: Option<f64> = None;
        for sep in [0.2, 0.1, 0.05] {
            let (b, tail) = remainder(&[0.0, 0.0, 0.8 + sep], &y, None);
            assert!(tail < 1e-10);
            if let Some(p) = prev {
                // Bounded: no 1/sep growth as the points approach.
                assert!((b - p).abs() < 0.05, "{b} vs {p}");
            }
            prev = Some(b);
        }
    }

    #[test]
    fn truncation_too_coarse_reports_large_tail() {
        let (_, tail) = remainder(&[0.0, 0.0, 0.55], &[0.0, 0.0, 0.5], Some(2));
        assert!(tail > 1e-3);
    }
}
