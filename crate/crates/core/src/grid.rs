//! Truncated phase-space grids and multilinear interpolation stencils.

use crate::error::{domain, invalid, Result};
use crate::model::{wrap, PhasePoint};

/// Spatial grid on `T² × [0, L3]`.
///
/// Horizontal nodes sit at `-1/2 + i/n`. Vertical nodes run from `0` to `L3`
/// with spacing growing geometrically by `refinement` (1 means uniform).
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    n1: usize,
    n2: usize,
    l3: f64,
    refinement: f64,
    z: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(n1: usize, n2: usize, n3: usize, l3: f64, refinement: f64) -> Result<SpatialGrid> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("horizontal node counts must be at least 1"));
        }
        if n3 < 4 {
            return Err(invalid(format!("n3 must be at least 4, got {n3}")));
        }
        if !(l3 > 0.0 && l3.is_finite()) {
            return Err(invalid(format!("L3 must be positive, got {l3}")));
        }
        if !(refinement >= 1.0 && refinement.is_finite()) {
            return Err(invalid(format!(
                "vertical refinement must be >= 1, got {refinement}"
            )));
        }
        let cells = n3 - 1;
        let mut z = Vec::with_capacity(n3);
        if refinement == 1.0 {
            z.extend((0..n3).map(|k| l3 * k as f64 / cells as f64));
        } else {
            let total = (refinement.powi(cells as i32) - 1.0) / (refinement - 1.0);
            let first = l3 / total;
            let mut acc = 0.0;
            let mut step = first;
            z.push(0.0);
            for _ in 1..cells {
                acc += step;
                step *= refinement;
                z.push(acc);
            }
            z.push(l3);
        }
        Ok(SpatialGrid {
            n1,
            n2,
            l3,
            refinement,
            z,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn n3(&self) -> usize {
        self.z.len()
    }

    pub fn l3(&self) -> f64 {
        self.l3
    }

    pub fn refinement(&self) -> f64 {
        self.refinement
    }

    pub fn heights(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2 * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// One node horizontally, so only the vertical direction is resolved.
    pub fn is_homogeneous(&self) -> bool {
        self.n1 == 1 && self.n2 == 1
    }

    pub fn x1(&self, i: usize) -> f64 {
        -0.5 + i as f64 / self.n1 as f64
    }

    pub fn x2(&self, i: usize) -> f64 {
        -0.5 + i as f64 / self.n2 as f64
    }

    pub fn index(&self, i1: usize, i2: usize, k: usize) -> usize {
        (i1 * self.n2 + i2) * self.z.len() + k
    }

    /// Inverse of [`SpatialGrid::index`].
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let n3 = self.z.len();
        let k = idx % n3;
        let rest = idx / n3;
        (rest / self.n2, rest % self.n2, k)
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i1, i2, k) = self.split(idx);
        [self.x1(i1), self.x2(i2), self.z[k]]
    }

    /// Cell `k` and fraction `t` with `x3 = z_k + t (z_{k+1} - z_k)`.
    ///
    /// Requires `0 <= x3 <= L3`.
    pub fn locate_vertical(&self, x3: f64) -> (usize, f64) {
        let n3 = self.z.len();
        let k = match self.z.partition_point(|&z| z <= x3) {
            0 => 0,
            p => (p - 1).min(n3 - 2),
        };
        let t = (x3 - self.z[k]) / (self.z[k + 1] - self.z[k]);
        (k, t.clamp(0.0, 1.0))
    }

    /// Checks that the vertical truncation leaves a tail `e^{-βg L3/2}` below `tol`.
    pub fn check_tail(&self, beta: f64, g: f64, tol: f64) -> Result<()> {
        let tail = (-beta * g * self.l3 / 2.0).exp();
        if tail < tol {
            Ok(())
        } else {
            Err(invalid(format!(
                "vertical truncation tail e^(-beta g L3/2) = {tail:e} exceeds tolerance {tol:e}"
            )))
        }
    }
}

/// Periodic linear interpolation weights along one horizontal axis.
#[inline]
fn horizontal(c: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let t = (wrap(c) + 0.5) * n as f64;
    let i0 = (t.floor() as usize).min(n - 1);
    let frac = t - i0 as f64;
    (i0, (i0 + 1) % n, frac)
}

/// Uniform velocity grid on `[-vmax, vmax]³` including the endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    m: [usize; 3],
    vmax: f64,
    dv: [f64; 3],
}

impl VelocityGrid {
    pub fn new(m: [usize; 3], vmax: f64) -> Result<VelocityGrid> {
        if m.iter().any(|&c| c < 2) {
            return Err(invalid(format!(
                "velocity node counts must be at least 2, got {m:?}"
            )));
        }
        if !(vmax > 0.0 && vmax.is_finite()) {
            return Err(invalid(format!("vmax must be positive, got {vmax}")));
        }
        let dv = m.map(|c| 2.0 * vmax / (c - 1) as f64);
        Ok(VelocityGrid { m, vmax, dv })
    }

    pub fn counts(&self) -> [usize; 3] {
        self.m
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.dv
    }

    pub fn len(&self) -> usize {
        self.m[0] * self.m[1] * self.m[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis_node(&self, axis: usize, j: usize) -> f64 {
        if j + 1 == self.m[axis] {
            self.vmax
        } else {
            -self.vmax + j as f64 * self.dv[axis]
        }
    }

    pub fn index(&self, j1: usize, j2: usize, j3: usize) -> usize {
        (j1 * self.m[1] + j2) * self.m[2] + j3
    }

    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let j3 = idx % self.m[2];
        let rest = idx / self.m[2];
        (rest / self.m[1], rest % self.m[1], j3)
    }

    pub fn node(&self, idx: usize) -> [f64; 3] {
        let (j1, j2, j3) = self.split(idx);
        [
            self.axis_node(0, j1),
            self.axis_node(1, j2),
            self.axis_node(2, j3),
        ]
    }

    fn axis_weight(&self, axis: usize, j: usize) -> f64 {
        if j == 0 || j + 1 == self.m[axis] {
            0.5 * self.dv[axis]
        } else {
            self.dv[axis]
        }
    }

    /// Trapezoid weight of node `idx`.
    pub fn weight(&self, idx: usize) -> f64 {
        let (j1, j2, j3) = self.split(idx);
        self.axis_weight(0, j1) * self.axis_weight(1, j2) * self.axis_weight(2, j3)
    }

    /// Mass of `e^{-β|v|²}` outside the truncation cube.
    pub fn gaussian_tail_mass(&self, beta: f64) -> f64 {
        let inside = libm::erf(beta.sqrt() * self.vmax);
        (std::f64::consts::PI / beta).powf(1.5) * (1.0 - inside * inside * inside)
    }

    pub fn check_tail(&self, beta: f64, tol: f64) -> Result<()> {
        let tail = (-beta * self.vmax * self.vmax).exp();
        if tail < tol {
            Ok(())
        } else {
            Err(invalid(format!(
                "velocity truncation tail e^(-beta vmax^2) = {tail:e} exceeds tolerance {tol:e}"
            )))
        }
    }

    pub(crate) fn locate(&self, axis: usize, c: f64) -> Option<(usize, f64)> {
        if !(c >= -self.vmax && c <= self.vmax) {
            return None;
        }
        let t = (c + self.vmax) / self.dv[axis];
        let j = (t.floor() as usize).min(self.m[axis] - 2);
        Some((j, (t - j as f64).clamp(0.0, 1.0)))
    }
}

/// Corner indices and weights of a multilinear interpolation.
#[derive(Clone, Debug)]
pub struct Stencil {
    idx: [usize; 64],
    w: [f64; 64],
    len: usize,
    /// The query fell outside the truncated domain; the value is the analytic tail 0.
    pub tail: bool,
}

impl Stencil {
    fn empty_tail() -> Stencil {
        Stencil {
            idx: [0; 64],
            w: [0.0; 64],
            len: 0,
            tail: true,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx[..self.len]
            .iter()
            .copied()
            .zip(self.w[..self.len].iter().copied())
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        self.iter().map(|(i, w)| w * values[i]).sum()
    }

    pub fn apply3(&self, values: &[[f64; 3]]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, w) in self.iter() {
            for (o, c) in out.iter_mut().zip(values[i]) {
                *o += w * c;
            }
        }
        out
    }
}

/// Collects the tensor product of per-axis `(index, weight)` pairs, skipping zero weights.
fn tensor(axes: &[[(usize, f64); 2]], strides: &[usize]) -> Stencil {
    let mut s = Stencil {
        idx: [0; 64],
        w: [0.0; 64],
        len: 1,
        tail: false,
    };
    s.w[0] = 1.0;
    for (pairs, &stride) in axes.iter().zip(strides) {
        let n = s.len;
        let mut len = 0;
        let mut idx = [0usize; 64];
        let mut w = [0.0f64; 64];
        for &(i, wi) in pairs.iter().filter(|p| p.1 != 0.0) {
            for c in 0..n {
                idx[len] = s.idx[c] + i * stride;
                w[len] = s.w[c] * wi;
                len += 1;
            }
        }
        s.idx = idx;
        s.w = w;
        s.len = len;
    }
    s
}

fn pair(i0: usize, i1: usize, t: f64) -> [(usize, f64); 2] {
    [(i0, 1.0 - t), (i1, t)]
}

/// Spatial × velocity grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub spatial: SpatialGrid,
    pub velocity: VelocityGrid,
}

impl PhaseGrid {
    pub fn new(spatial: SpatialGrid, velocity: VelocityGrid) -> PhaseGrid {
        PhaseGrid { spatial, velocity }
    }

    pub fn len(&self) -> usize {
        self.spatial.len() * self.velocity.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, spatial: usize, velocity: usize) -> usize {
        spatial * self.velocity.len() + velocity
    }

    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.velocity.len(), idx % self.velocity.len())
    }

    pub fn point(&self, idx: usize) -> PhasePoint {
        let (s, j) = self.split(idx);
        PhasePoint {
            x: self.spatial.position(s),
            v: self.velocity.node(j),
        }
    }

    /// Multilinear stencil at `(x, v)`; horizontal directions are periodic.
    pub fn stencil(&self, x: &[f64; 3], v: &[f64; 3]) -> Result<Stencil> {
        if x[2] < 0.0 {
            return Err(domain(format!(
                "interpolation below the boundary at x3 = {}",
                x[2]
            )));
        }
        if x[2] > self.spatial.l3() {
            return Ok(Stencil::empty_tail());
        }
        let mut vel = [(0usize, 0.0f64); 3];
        for axis in 0..3 {
            match self.velocity.locate(axis, v[axis]) {
                Some(p) => vel[axis] = p,
                None => return Ok(Stencil::empty_tail()),
            }
        }
        let sp = &self.spatial;
        let (a0, a1, ta) = horizontal(x[0], sp.n1());
        let (b0, b1, tb) = horizontal(x[1], sp.n2());
        let (k, tk) = sp.locate_vertical(x[2]);
        let [m1, m2, m3] = self.velocity.counts();
        let vlen = self.velocity.len();
        let n3 = sp.n3();
        let axes = [
            pair(a0, a1, ta),
            pair(b0, b1, tb),
            pair(k, k + 1, tk),
            pair(vel[0].0, vel[0].0 + 1, vel[0].1),
            pair(vel[1].0, vel[1].0 + 1, vel[1].1),
            pair(vel[2].0, vel[2].0 + 1, vel[2].1),
        ];
        let strides = [sp.n2() * n3 * vlen, n3 * vlen, vlen, m2 * m3, m3, 1];
        debug_assert_eq!(m1 * m2 * m3, vlen);
        Ok(tensor(&axes, &strides))
    }

    /// Trilinear stencil on the spatial grid alone.
    pub fn spatial_stencil(spatial: &SpatialGrid, x: &[f64; 3]) -> Result<Stencil> {
        if x[2] < 0.0 {
            return Err(domain(format!(
                "interpolation below the boundary at x3 = {}",
                x[2]
            )));
        }
        if x[2] > spatial.l3() {
            return Ok(Stencil::empty_tail());
        }
        let (a0, a1, ta) = horizontal(x[0], spatial.n1());
        let (b0, b1, tb) = horizontal(x[1], spatial.n2());
        let (k, tk) = spatial.locate_vertical(x[2]);
        let n3 = spatial.n3();
        let axes = [pair(a0, a1, ta), pair(b0, b1, tb), pair(k, k + 1, tk)];
        Ok(tensor(&axes, &[spatial.n2() * n3, n3, 1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_heights_span_interval() {
        let g = SpatialGrid::new(1, 1, 50, 3.0, 1.05).unwrap();
        let z = g.heights();
        assert_eq!(z[0], 0.0);
        assert_eq!(*z.last().unwrap(), 3.0);
        for w in z.windows(3) {
            let (d0, d1) = (w[1] - w[0], w[2] - w[1]);
            assert!(d1 > d0);
            assert!((d1 / d0 - 1.05).abs() < 1e-9);
        }
    }

    #[test]
    fn locate_vertical_brackets() {
        let g = SpatialGrid::new(1, 1, 20, 2.0, 1.1).unwrap();
        for &x in &[0.0, 1e-3, 0.7, 1.999, 2.0] {
            let (k, t) = g.locate_vertical(x);
            let z = g.heights();
            let back = z[k] + t * (z[k + 1] - z[k]);
            assert!((back - x).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_weights_sum_to_volume() {
        let v = VelocityGrid::new([5, 6, 7], 2.0).unwrap();
        let total: f64 = (0..v.len()).map(|i| v.weight(i)).sum();
        assert!((total - 64.0).abs() < 1e-12);
    }

    #[test]
    fn node_stencil_is_a_single_corner() {
        let sp = SpatialGrid::new(4, 3, 6, 1.0, 1.0).unwrap();
        let pg = PhaseGrid::new(sp, VelocityGrid::new([3, 4, 5], 1.0).unwrap());
        for idx in [0, 17, 911, pg.len() - 1] {
            let z = pg.point(idx);
            let s = pg.stencil(&z.x, &z.v).unwrap();
            let corners: Vec<_> = s.iter().collect();
            assert_eq!(corners, vec![(idx, 1.0)]);
        }
    }

    #[test]
    fn above_truncation_is_tail() {
        let sp = SpatialGrid::new(1, 1, 6, 1.0, 1.0).unwrap();
        let pg = PhaseGrid::new(sp, VelocityGrid::new([3, 3, 3], 1.0).unwrap());
        let s = pg.stencil(&[0.0, 0.0, 2.0], &[0.0; 3]).unwrap();
        assert!(s.tail);
        assert_eq!(s.iter().count(), 0);
        assert!(pg.stencil(&[0.0, 0.0, -0.1], &[0.0; 3]).is_err());
    }
}
