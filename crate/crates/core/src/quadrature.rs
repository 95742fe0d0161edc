//! Vertical quadrature: piecewise-cubic reconstruction integrated by
//! Gauss–Legendre, and quintic Hermite evaluation of mode profiles.

use std::ops::{Add, Mul};

/// Six-point Gauss–Legendre rule on `[-1, 1]`.
const GL_NODES: [f64; 6] = [
    -0.932_469_514_203_152,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152,
];
const GL_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_3,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691,
    0.467_913_934_572_691,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_3,
];

pub const POINTS_PER_CELL: usize = GL_NODES.len();

/// Quadrature points on every vertical cell together with the Lagrange
/// weights that reconstruct a nodal profile there.
///
/// Each cell uses the cubic through four neighbouring nodes, so the scheme
/// is fourth order on smooth profiles and handles nonuniform spacing.
#[derive(Clone, Debug)]
pub struct VerticalQuadrature {
    z: Vec<f64>,
    /// `(cell, point)` positions.
    pub points: Vec<[f64; POINTS_PER_CELL]>,
    /// `(cell, point)` weights, cell length included.
    pub weights: Vec<[f64; POINTS_PER_CELL]>,
    stencil_start: Vec<usize>,
    lagrange: Vec<[[f64; 4]; POINTS_PER_CELL]>,
}

impl VerticalQuadrature {
    pub fn new(z: &[f64]) -> VerticalQuadrature {
        let n = z.len();
        assert!(n >= 4, "cubic reconstruction needs four nodes");
        let cells = n - 1;
        let mut points = Vec::with_capacity(cells);
        let mut weights = Vec::with_capacity(cells);
        let mut stencil_start = Vec::with_capacity(cells);
        let mut lagrange = Vec::with_capacity(cells);
        for c in 0..cells {
            let (a, b) = (z[c], z[c + 1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let p = GL_NODES.map(|t| mid + half * t);
            let w = GL_WEIGHTS.map(|w| half * w);
            let s = c.saturating_sub(1).min(n - 4);
            let nodes = [z[s], z[s + 1], z[s + 2], z[s + 3]];
            let l = p.map(|y| lagrange_basis(&nodes, y));
            points.push(p);
            weights.push(w);
            stencil_start.push(s);
            lagrange.push(l);
        }
        VerticalQuadrature {
            z: z.to_vec(),
            points,
            weights,
            stencil_start,
            lagrange,
        }
    }

    pub fn heights(&self) -> &[f64] {
        &self.z
    }

    pub fn cells(&self) -> usize {
        self.points.len()
    }

    /// Values of the reconstructed profile at every quadrature point.
    pub fn reconstruct<T>(&self, nodal: &[T]) -> Vec<[T; POINTS_PER_CELL]>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        assert_eq!(nodal.len(), self.z.len());
        (0..self.cells())
            .map(|c| {
                let s = self.stencil_start[c];
                let mut out = [T::default(); POINTS_PER_CELL];
                for (q, o) in out.iter_mut().enumerate() {
                    let l = &self.lagrange[c][q];
                    *o = nodal[s] * l[0]
                        + nodal[s + 1] * l[1]
                        + nodal[s + 2] * l[2]
                        + nodal[s + 3] * l[3];
                }
                out
            })
            .collect()
    }

    /// `∫_0^{L3}` of a nodal profile.
    pub fn integrate(&self, nodal: &[f64]) -> f64 {
        self.reconstruct(nodal)
            .iter()
            .zip(&self.weights)
            .map(|(vals, w)| vals.iter().zip(w).map(|(v, w)| v * w).sum::<f64>())
            .sum()
    }
}

fn lagrange_basis(nodes: &[f64; 4], y: f64) -> [f64; 4] {
    let mut l = [1.0; 4];
    for (i, li) in l.iter_mut().enumerate() {
        for (j, zj) in nodes.iter().enumerate() {
            if i != j {
                *li *= (y - zj) / (nodes[i] - zj);
            }
        }
    }
    l
}

/// Quintic Hermite interpolant on one cell from values, first and second
/// derivatives at both ends. Returns the value and two derivatives at
/// fraction `t` of a cell of length `h`.
#[inline]
pub fn hermite5<T>(ends: [[T; 3]; 2], h: f64, t: f64) -> [T; 3]
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let [[p0, d0, s0], [p1, d1, s1]] = ends;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        -60.0 * t + 180.0 * t2 - 120.0 * t3,
    ];
    let h1 = [
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        -36.0 * t + 96.0 * t2 - 60.0 * t3,
    ];
    let h2 = [
        0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
        t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4,
        1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3,
    ];
    let h3 = [
        0.5 * t3 - t4 + 0.5 * t5,
        1.5 * t2 - 4.0 * t3 + 2.5 * t4,
        3.0 * t - 12.0 * t2 + 10.0 * t3,
    ];
    let h4 = [
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        -24.0 * t + 84.0 * t2 - 60.0 * t3,
    ];
    let h5 = [
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        60.0 * t - 180.0 * t2 + 120.0 * t3,
    ];
    let scale = [1.0, 1.0 / h, 1.0 / (h * h)];
    let hh = h * h;
    let mut out = [p0 * 0.0; 3];
    for r in 0..3 {
        let v = p0 * h0[r]
            + d0 * (h * h1[r])
            + s0 * (hh * h2[r])
            + s1 * (hh * h3[r])
            + d1 * (h * h4[r])
            + p1 * h5[r];
        out[r] = v * scale[r];
    }
    out
}
