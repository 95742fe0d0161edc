//! Inflow data `G(x∥, v)` on `γ− = {x3 = 0, v3 > 0}`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::grid::VelocityGrid;
use crate::model::wrap;

/// Tabulated inflow data on horizontal nodes × velocity nodes.
///
/// Values are stored with the horizontal index outermost, like a
/// distribution restricted to `x3 = 0`. Nodes with `v3 ≤ 0` are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTable {
    pub n1: usize,
    pub n2: usize,
    pub velocity: VelocityGrid,
    values: Vec<f64>,
}

impl BoundaryTable {
    pub fn new(
        n1: usize,
        n2: usize,
        velocity: VelocityGrid,
        values: Vec<f64>,
    ) -> Result<BoundaryTable> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("boundary table needs at least one horizontal node"));
        }
        if values.len() != n1 * n2 * velocity.len() {
            return Err(invalid(format!(
                "boundary table has {} values, expected {}",
                values.len(),
                n1 * n2 * velocity.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid(
                "boundary table values must be finite and nonnegative",
            ));
        }
        Ok(BoundaryTable {
            n1,
            n2,
            velocity,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Multilinear value and gradient `(∂x1, ∂x2, ∂v1, ∂v2, ∂v3)`; zero
    /// outside the velocity cube.
    fn eval(&self, x1: f64, x2: f64, v: &[f64; 3]) -> (f64, [f64; 5]) {
        let vmax = self.velocity.vmax();
        if v.iter().any(|c| !(c.abs() <= vmax)) {
            return (0.0, [0.0; 5]);
        }
        let dv = self.velocity.spacing();
        let m = self.velocity.counts();
        // (lower index, upper index, fraction, 1/spacing) per axis.
        let mut axes = [(0usize, 0usize, 0.0f64, 0.0f64); 5];
        for (a, (x, n)) in [(x1, self.n1), (x2, self.n2)].into_iter().enumerate() {
            let t = (wrap(x) + 0.5) * n as f64;
            let i0 = (t.floor() as usize).min(n - 1);
            axes[a] = (i0, (i0 + 1) % n, t - i0 as f64, n as f64);
            if n == 1 {
                axes[a] = (0, 0, 0.0, 0.0);
            }
        }
        for c in 0..3 {
            let t = (v[c] + vmax) / dv[c];
            let j = (t.floor() as usize).min(m[c] - 2);
            axes[2 + c] = (j, j + 1, (t - j as f64).clamp(0.0, 1.0), 1.0 / dv[c]);
        }
        let vlen = self.velocity.len();
        let mut value = 0.0;
        let mut grad = [0.0; 5];
        for corner in 0..32u32 {
            let mut idx = [0usize; 5];
            let mut w = [0.0; 5];
            let mut dw = [0.0; 5];
            for a in 0..5 {
                let (lo, hi, t, inv) = axes[a];
                if corner >> a & 1 == 1 {
                    idx[a] = hi;
                    w[a] = t;
                    dw[a] = inv;
                } else {
                    idx[a] = lo;
                    w[a] = 1.0 - t;
                    dw[a] = -inv;
                }
            }
            let j = self.velocity.index(idx[2], idx[3], idx[4]);
            let f = self.values[(idx[0] * self.n2 + idx[1]) * vlen + j];
            if f == 0.0 {
                continue;
            }
            let all: f64 = w.iter().product();
            value += all * f;
            for a in 0..5 {
                let others: f64 = (0..5).filter(|&b| b != a).map(|b| w[b]).product();
                grad[a] += dw[a] * others * f;
            }
        }
        (value, grad)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryKind {
    /// `G = A (1 + r cos 2πx1) e^{−β_G |v|²}`.
    Maxwellian {
        amplitude: f64,
        decay: f64,
        ripple: f64,
    },
    Tabulated(BoundaryTable),
}

/// Inflow datum with its evaluators.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDatum {
    pub kind: BoundaryKind,
}

/// Value and gradient of `G` at one boundary point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundarySample {
    pub value: f64,
    /// `(∂x1, ∂x2)`.
    pub grad_x: [f64; 2],
    pub grad_v: [f64; 3],
}

impl BoundaryDatum {
    pub fn maxwellian(amplitude: f64, decay: f64) -> Result<BoundaryDatum> {
        BoundaryDatum::modulated(amplitude, decay, 0.0)
    }

    pub fn modulated(amplitude: f64, decay: f64, ripple: f64) -> Result<BoundaryDatum> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(invalid(format!(
                "inflow amplitude must be nonnegative, got {amplitude}"
            )));
        }
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(invalid(format!(
                "inflow decay must be positive, got {decay}"
            )));
        }
        if !(ripple.abs() <= 1.0) {
            return Err(invalid(format!(
                "inflow ripple must lie in [-1, 1], got {ripple}"
            )));
        }
        Ok(BoundaryDatum {
            kind: BoundaryKind::Maxwellian {
                amplitude,
                decay,
                ripple,
            },
        })
    }

    pub fn vacuum() -> BoundaryDatum {
        BoundaryDatum {
            kind: BoundaryKind::Maxwellian {
                amplitude: 0.0,
                decay: 1.0,
                ripple: 0.0,
            },
        }
    }

    pub fn tabulated(table: BoundaryTable) -> BoundaryDatum {
        BoundaryDatum {
            kind: BoundaryKind::Tabulated(table),
        }
    }

    pub fn is_vacuum(&self) -> bool {
        match &self.kind {
            BoundaryKind::Maxwellian { amplitude, .. } => *amplitude == 0.0,
            BoundaryKind::Tabulated(t) => t.values.iter().all(|v| *v == 0.0),
        }
    }

    /// No dependence on `x∥`.
    pub fn is_horizontally_uniform(&self) -> bool {
        match &self.kind {
            BoundaryKind::Maxwellian { ripple, .. } => *ripple == 0.0,
            BoundaryKind::Tabulated(t) => t.n1 == 1 && t.n2 == 1,
        }
    }

    pub fn value(&self, x1: f64, x2: f64, v: &[f64; 3]) -> f64 {
        match &self.kind {
            BoundaryKind::Maxwellian {
                amplitude,
                decay,
                ripple,
            } => {
                let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                let modulation = if *ripple == 0.0 {
                    1.0
                } else {
                    1.0 + ripple * (2.0 * PI * x1).cos()
                };
                amplitude * modulation * (-decay * s).exp()
            }
            BoundaryKind::Tabulated(t) => t.eval(x1, x2, v).0,
        }
    }

    pub fn sample(&self, x1: f64, x2: f64, v: &[f64; 3]) -> BoundarySample {
        match &self.kind {
            BoundaryKind::Maxwellian {
                amplitude,
                decay,
                ripple,
            } => {
                let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                let (sin, cos) = (2.0 * PI * x1).sin_cos();
                let base = amplitude * (-decay * s).exp();
                let value = base * (1.0 + ripple * cos);
                BoundarySample {
                    value,
                    grad_x: [-base * ripple * 2.0 * PI * sin, 0.0],
                    grad_v: v.map(|c| -2.0 * decay * c * value),
                }
            }
            BoundaryKind::Tabulated(t) => {
                let (value, g) = t.eval(x1, x2, v);
                BoundarySample {
                    value,
                    grad_x: [g[0], g[1]],
                    grad_v: [g[2], g[3], g[4]],
                }
            }
        }
    }

    /// `‖G‖∞` on `γ−`.
    pub fn sup(&self) -> f64 {
        match &self.kind {
            BoundaryKind::Maxwellian {
                amplitude, ripple, ..
            } => amplitude * (1.0 + ripple.abs()),
            BoundaryKind::Tabulated(t) => t.incoming_max(|_, _| 1.0),
        }
    }

    /// `‖e^{β|v|²} G‖∞` on `γ−`; infinite when `G` decays slower than the weight.
    pub fn weighted_sup(&self, beta: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Maxwellian {
                amplitude,
                decay,
                ripple,
            } => {
                if *amplitude == 0.0 {
                    0.0
                } else if beta <= *decay {
                    amplitude * (1.0 + ripple.abs())
                } else {
                    f64::INFINITY
                }
            }
            BoundaryKind::Tabulated(t) => t.incoming_max(|v2, _| (beta * v2).exp()),
        }
    }

    /// `‖e^{β̃|v|²} ∇_{x∥,v} G‖∞` on `γ−`.
    pub fn weighted_gradient_sup(&self, beta_tilde: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Maxwellian {
                amplitude,
                decay,
                ripple,
            } => {
                if *amplitude == 0.0 {
                    return 0.0;
                }
                if beta_tilde >= *decay {
                    return f64::INFINITY;
                }
                // Maximise e^{−2c u}(a² + b² u), the squared weighted norm, over
                // u = |v|² ≥ 0, then over the phase.
                let c = decay - beta_tilde;
                let mut best = 0.0f64;
                for i in 0..=720 {
                    let theta = 2.0 * PI * i as f64 / 720.0;
                    let a = 2.0 * PI * ripple * theta.sin();
                    let b = 2.0 * decay * (1.0 + ripple * theta.cos());
                    let (a2, b2) = (a * a, b * b);
                    let u = if b2 > 0.0 {
                        (0.5 / c - a2 / b2).max(0.0)
                    } else {
                        0.0
                    };
                    best = best.max((-2.0 * c * u).exp() * (a2 + b2 * u));
                }
                amplitude * best.sqrt()
            }
            BoundaryKind::Tabulated(t) => {
                let vlen = t.velocity.len();
                let mut best = 0.0f64;
                for i in 0..t.n1 * t.n2 {
                    let x1 = -0.5 + (i / t.n2) as f64 / t.n1 as f64;
                    let x2 = -0.5 + (i % t.n2) as f64 / t.n2 as f64;
                    for j in 0..vlen {
                        let v = t.velocity.node(j);
                        if v[2] <= 0.0 {
                            continue;
                        }
                        let s = self.sample(x1, x2, &v);
                        let n2 = s.grad_x.iter().chain(&s.grad_v).map(|c| c * c).sum::<f64>();
                        let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                        best = best.max(n2.sqrt() * (beta_tilde * v2).exp());
                    }
                }
                best
            }
        }
    }

    /// `β_G` when `G` is an analytic Maxwellian.
    pub fn maxwellian_parameters(&self) -> Option<(f64, f64, f64)> {
        match &self.kind {
            BoundaryKind::Maxwellian {
                amplitude,
                decay,
                ripple,
            } => Some((*amplitude, *decay, *ripple)),
            BoundaryKind::Tabulated(_) => None,
        }
    }
}

impl BoundaryTable {
    fn incoming_max<W: Fn(f64, usize) -> f64>(&self, weight: W) -> f64 {
        let vlen = self.velocity.len();
        let mut best = 0.0f64;
        for (i, f) in self.values.iter().enumerate() {
            let j = i % vlen;
            let v = self.velocity.node(j);
            if v[2] > 0.0 && *f != 0.0 {
                best = best.max(f.abs() * weight(v[0] * v[0] + v[1] * v[1] + v[2] * v[2], j));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxwellian_gradient_matches_finite_differences() {
        let g = BoundaryDatum::modulated(1.3, 0.8, 0.4).unwrap();
        let (x1, v) = (0.17, [0.3, -0.2, 0.9]);
        let s = g.sample(x1, 0.0, &v);
        let d = 1e-6;
        let fd = (g.value(x1 + d, 0.0, &v) - g.value(x1 - d, 0.0, &v)) / (2.0 * d);
        assert!((fd - s.grad_x[0]).abs() < 1e-8);
        for c in 0..3 {
            let (mut p, mut m) = (v, v);
            p[c] += d;
            m[c] -= d;
            let fd = (g.value(x1, 0.0, &p) - g.value(x1, 0.0, &m)) / (2.0 * d);
            assert!((fd - s.grad_v[c]).abs() < 1e-8);
        }
    }

    #[test]
    fn weighted_gradient_sup_dominates_samples() {
        let g = BoundaryDatum::modulated(1.0, 2.0, 0.5).unwrap();
        let bt = 0.7;
        let sup = g.weighted_gradient_sup(bt);
        let mut seen = 0.0f64;
        for i in 0..50 {
            for k in 0..60 {
                let x1 = -0.5 + i as f64 / 50.0;
                let v = [0.0, 0.0, 0.05 * k as f64];
                let s = g.sample(x1, 0.0, &v);
                let n = (s.grad_x[0].powi(2) + s.grad_v.iter().map(|c| c * c).sum::<f64>()).sqrt();
                seen = seen.max(n * (bt * v[2] * v[2]).exp());
            }
        }
        assert!(seen <= sup * (1.0 + 1e-9));
        assert!(seen >= 0.98 * sup);
    }

    #[test]
    fn table_reproduces_multilinear_data() {
        let vg = VelocityGrid::new([3, 3, 5], 1.0).unwrap();
        let n1 = 4;
        let mut values = Vec::new();
        for i in 0..n1 {
            for j in 0..vg.len() {
                let v = vg.node(j);
                values.push(2.0 + 0.5 * v[2] + 0.25 * v[0] + 0.1 * i as f64);
            }
        }
        let t = BoundaryTable::new(n1, 1, vg, values).unwrap();
        let g = BoundaryDatum::tabulated(t);
        let s = g.sample(-0.5 + 0.125, 0.3, &[0.1, 0.2, 0.35]);
        assert!((s.value - (2.0 + 0.175 + 0.025 + 0.05)).abs() < 1e-12);
        assert!((s.grad_v[2] - 0.5).abs() < 1e-12);
        assert!((s.grad_x[0] - 0.4).abs() < 1e-12);
    }
}
