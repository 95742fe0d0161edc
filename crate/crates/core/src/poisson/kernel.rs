//! Vertical Green kernels of `d²/dx3² − (2π|m|)²` with a Dirichlet wall.

use num_complex::Complex64;

use crate::quadrature::{VerticalQuadrature, POINTS_PER_CELL};

/// `K_m(x3, y3) = w_m(x3 − y3) − w_m(x3 + y3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeKernel {
    /// `2π|m|`.
    pub k: f64,
}

impl ModeKernel {
    pub fn new(m: [i64; 2]) -> ModeKernel {
        let r = ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
        ModeKernel {
            k: 2.0 * std::f64::consts::PI * r,
        }
    }

    /// `w_0(s) = |s|/2`, `w_m(s) = −e^{−k|s|}/(2k)`.
    pub fn w(&self, s: f64) -> f64 {
        if self.k == 0.0 {
            0.5 * s.abs()
        } else {
            -(-self.k * s.abs()).exp() / (2.0 * self.k)
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        if self.k == 0.0 {
            -x.min(y)
        } else {
            let k = self.k;
            -((-k * (x - y).abs()).exp() - (-k * (x + y)).exp()) / (2.0 * k)
        }
    }

    /// `∂K/∂x3`, one-sided at `x3 = y3`.
    pub fn dx(&self, x: f64, y: f64) -> f64 {
        let sgn = if x > y { 1.0 } else { -1.0 };
        if self.k == 0.0 {
            if y > x {
                -1.0
            } else {
                0.0
            }
        } else {
            let k = self.k;
            0.5 * (sgn * (-k * (x - y).abs()).exp() - (-k * (x + y)).exp())
        }
    }

    /// `∂K/∂y3`, one-sided at `x3 = y3`.
    pub fn dy(&self, x: f64, y: f64) -> f64 {
        let sgn = if x > y { 1.0 } else { -1.0 };
        if self.k == 0.0 {
            if y < x {
                -1.0
            } else {
                0.0
            }
        } else {
            let k = self.k;
            -0.5 * (sgn * (-k * (x - y).abs()).exp() + (-k * (x + y)).exp())
        }
    }
}

/// `∫ K q`, `∫ ∂x K q` and `∫ ∂y K q` at every vertical node.
pub(crate) struct KernelIntegrals {
    pub value: Vec<Complex64>,
    pub dx: Vec<Complex64>,
    pub dy: Vec<Complex64>,
}

/// Integrates the kernel against the piecewise-cubic reconstruction of `nodal`.
///
/// The exponential kernel is split into running sums from below and above,
/// so the cost is linear in the number of nodes and nothing overflows.
pub(crate) fn kernel_integrals(
    quad: &VerticalQuadrature,
    kernel: ModeKernel,
    nodal: &[Complex64],
) -> KernelIntegrals {
    let z = quad.heights();
    let n = z.len();
    let q = quad.reconstruct(nodal);
    let zero = Complex64::new(0.0, 0.0);
    let mut value = vec![zero; n];
    let mut dx = vec![zero; n];
    let mut dy = vec![zero; n];
    let k = kernel.k;
    if k == 0.0 {
        // Cumulative ∫_0^x q, ∫_0^x y q; the upper integral follows from the total.
        let mut below = vec![zero; n];
        let mut first = vec![zero; n];
        for c in 0..n - 1 {
            let (mut s0, mut s1) = (zero, zero);
            for p in 0..POINTS_PER_CELL {
                let w = quad.weights[c][p];
                s0 += q[c][p] * w;
                s1 += q[c][p] * (w * quad.points[c][p]);
            }
            below[c + 1] = below[c] + s0;
            first[c + 1] = first[c] + s1;
        }
        let total = below[n - 1];
        for i in 0..n {
            let above = total - below[i];
            value[i] = -(first[i] + above * z[i]);
            dx[i] = -above;
            dy[i] = -below[i];
        }
    } else {
        let mut lower = vec![zero; n];
        let mut upper = vec![zero; n];
        let mut total = zero;
        for c in 0..n - 1 {
            let decay = (-k * (z[c + 1] - z[c])).exp();
            let (mut from_top, mut from_bottom) = (zero, zero);
            for p in 0..POINTS_PER_CELL {
                let y = quad.points[c][p];
                let qw = q[c][p] * quad.weights[c][p];
                from_top += qw * (-k * (z[c + 1] - y)).exp();
                from_bottom += qw * (-k * (y - z[c])).exp();
                total += qw * (-k * y).exp();
            }
            lower[c + 1] = lower[c] * decay + from_top;
            upper[c] = from_bottom;
        }
        for c in (0..n - 2).rev() {
            let decay = (-k * (z[c + 1] - z[c])).exp();
            upper[c] = upper[c] + upper[c + 1] * decay;
        }
        upper[n - 1] = zero;
        for i in 0..n {
            let e = total * (-k * z[i]).exp();
            value[i] = -(lower[i] + upper[i] - e) / (2.0 * k);
            dx[i] = (lower[i] - upper[i] - e) * 0.5;
            dy[i] = -(lower[i] - upper[i] + e) * 0.5;
        }
    }
    value[0] = zero;
    KernelIntegrals { value, dx, dy }
}
