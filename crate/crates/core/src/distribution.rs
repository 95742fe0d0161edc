//! Phase-space distributions and their velocity moments.

use rayon::prelude::*;

use crate::error::{domain, invalid, Result};
use crate::grid::{PhaseGrid, SpatialGrid};
use crate::model::PhasePoint;

/// Which density a [`Distribution`] stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Steady,
    Perturbation,
    Total,
}

impl Role {
    pub fn tag(self) -> &'static str {
        match self {
            Role::Steady => "steady",
            Role::Perturbation => "perturbation",
            Role::Total => "total",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Role> {
        match tag {
            "steady" => Some(Role::Steady),
            "perturbation" => Some(Role::Perturbation),
            "total" => Some(Role::Total),
            _ => None,
        }
    }
}

/// Values on the phase grid, spatial index outermost.
///
/// `beta` is the Gaussian decay rate assumed beyond the velocity cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub grid: PhaseGrid,
    pub role: Role,
    pub beta: f64,
    values: Vec<f64>,
}

/// Interpolated value with the truncation flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interpolated {
    pub value: f64,
    pub tail: bool,
}

impl Distribution {
    pub fn zeros(grid: PhaseGrid, role: Role, beta: f64) -> Distribution {
        let values = vec![0.0; grid.len()];
        Distribution {
            grid,
            role,
            beta,
            values,
        }
    }

    pub fn from_values(
        grid: PhaseGrid,
        role: Role,
        beta: f64,
        values: Vec<f64>,
    ) -> Result<Distribution> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "distribution has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("distribution contains non-finite values"));
        }
        Ok(Distribution {
            grid,
            role,
            beta,
            values,
        })
    }

    /// Samples `f` at every node in parallel.
    pub fn from_fn<F>(grid: PhaseGrid, role: Role, beta: f64, f: F) -> Result<Distribution>
    where
        F: Fn(&PhasePoint) -> f64 + Sync,
    {
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.point(i)))
            .collect();
        Distribution::from_values(grid, role, beta, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interpolate(&self, z: &PhasePoint) -> Result<Interpolated> {
        let s = self.grid.stencil(&z.x, &z.v)?;
        Ok(Interpolated {
            value: s.apply(&self.values),
            tail: s.tail,
        })
    }

    /// `max |f| e^{β|v|²}` over the nodes, used for the tail bound.
    fn gaussian_envelope(&self) -> f64 {
        let vlen = self.grid.velocity.len();
        let exps: Vec<f64> = (0..vlen)
            .map(|j| {
                let v = self.grid.velocity.node(j);
                (self.beta * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).exp()
            })
            .collect();
        self.values
            .par_chunks(vlen)
            .map(|block| {
                block
                    .iter()
                    .zip(&exps)
                    .fold(0.0f64, |m, (f, e)| m.max(f.abs() * e))
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Weighted sup-norm `max |f| w(x, v)` over the nodes.
    pub fn weighted_sup<W>(&self, weight: W) -> f64
    where
        W: Fn(&PhasePoint) -> f64 + Sync,
    {
        self.values
            .par_iter()
            .enumerate()
            .map(|(i, f)| {
                if *f == 0.0 {
                    0.0
                } else {
                    f.abs() * weight(&self.grid.point(i))
                }
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, f| m.max(f.abs()))
    }
}

/// Scalar field on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub grid: SpatialGrid,
    values: Vec<f64>,
    /// Bound on the mass omitted by the velocity truncation, per node.
    pub tail_bound: f64,
}

impl DensityField {
    pub fn zeros(grid: SpatialGrid) -> DensityField {
        let values = vec![0.0; grid.len()];
        DensityField {
            grid,
            values,
            tail_bound: 0.0,
        }
    }

    pub fn from_values(grid: SpatialGrid, values: Vec<f64>) -> Result<DensityField> {
        if values.len() != grid.len() {
            return Err(invalid("density has the wrong number of values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("density contains non-finite values"));
        }
        Ok(DensityField {
            grid,
            values,
            tail_bound: 0.0,
        })
    }

    pub fn from_fn<F: Fn(&[f64; 3]) -> f64>(grid: SpatialGrid, f: F) -> Result<DensityField> {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        DensityField::from_values(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, f| m.max(f.abs()))
    }

    pub fn interpolate(&self, x: &[f64; 3]) -> Result<Interpolated> {
        let s = PhaseGrid::spatial_stencil(&self.grid, x)?;
        Ok(Interpolated {
            value: s.apply(&self.values),
            tail: s.tail,
        })
    }
}

/// Vector field on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField {
    pub grid: SpatialGrid,
    values: Vec<[f64; 3]>,
}

impl FluxField {
    pub fn zeros(grid: SpatialGrid) -> FluxField {
        let values = vec![[0.0; 3]; grid.len()];
        FluxField { grid, values }
    }

    pub fn from_fn<F: Fn(&[f64; 3]) -> [f64; 3]>(grid: SpatialGrid, f: F) -> Result<FluxField> {
        let values: Vec<[f64; 3]> = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        if values.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("flux contains non-finite values"));
        }
        Ok(FluxField { grid, values })
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn component(&self, axis: usize) -> Vec<f64> {
        self.values.iter().map(|b| b[axis]).collect()
    }
}

/// `ρ(x) = ∫ f dv` by the trapezoid rule on the velocity grid.
pub fn moment_density(dist: &Distribution) -> DensityField {
    let grid = &dist.grid;
    let vlen = grid.velocity.len();
    let weights: Vec<f64> = (0..vlen).map(|j| grid.velocity.weight(j)).collect();
    let values: Vec<f64> = dist
        .values
        .par_chunks(vlen)
        .map(|block| block.iter().zip(&weights).map(|(f, w)| f * w).sum())
        .collect();
    let tail_bound = if dist.beta > 0.0 {
        dist.gaussian_envelope() * grid.velocity.gaussian_tail_mass(dist.beta)
    } else {
        f64::INFINITY
    };
    DensityField {
        grid: grid.spatial.clone(),
        values,
        tail_bound,
    }
}

/// `b(x) = ∫ v f dv` by the trapezoid rule.
pub fn moment_flux(dist: &Distribution) -> FluxField {
    let grid = &dist.grid;
    let vlen = grid.velocity.len();
    let weighted: Vec<[f64; 3]> = (0..vlen)
        .map(|j| {
            let w = grid.velocity.weight(j);
            grid.velocity.node(j).map(|c| c * w)
        })
        .collect();
    let values: Vec<[f64; 3]> = dist
        .values
        .par_chunks(vlen)
        .map(|block| {
            let mut b = [0.0; 3];
            for (f, wv) in block.iter().zip(&weighted) {
                for a in 0..3 {
                    b[a] += f * wv[a];
                }
            }
            b
        })
        .collect();
    FluxField {
        grid: grid.spatial.clone(),
        values,
    }
}

/// `max e^{c(|v|² + g x3)} |f|` over the nodes.
pub fn energy_weighted_sup(grid: &PhaseGrid, c: f64, g: f64, values: &[f64]) -> f64 {
    let vlen = grid.velocity.len();
    let vw: Vec<f64> = (0..vlen)
        .map(|j| {
            let v = grid.velocity.node(j);
            (c * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).exp()
        })
        .collect();
    values
        .par_chunks(vlen)
        .enumerate()
        .map(|(s, row)| {
            let xw = (c * g * grid.spatial.position(s)[2]).exp();
            row.iter().zip(&vw).fold(0.0f64, |m, (f, w)| {
                if *f == 0.0 {
                    m
                } else {
                    m.max(f.abs() * w * xw)
                }
            })
        })
        .reduce(|| 0.0, f64::max)
}

pub(crate) fn check_same_grid(a: &SpatialGrid, b: &SpatialGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(domain("fields live on different spatial grids"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VelocityGrid;

    fn grid(m: usize, vmax: f64) -> PhaseGrid {
        PhaseGrid::new(
            SpatialGrid::new(2, 1, 5, 1.0, 1.0).unwrap(),
            VelocityGrid::new([m, m, m], vmax).unwrap(),
        )
    }

    #[test]
    fn flux_of_even_distribution_vanishes() {
        let d = Distribution::from_fn(grid(9, 3.0), Role::Steady, 1.0, |z| {
            (-(z.speed_squared())).exp() * (1.0 + z.x[2])
        })
        .unwrap();
        let b = moment_flux(&d);
        assert!(b.values().iter().flatten().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn density_tail_bound_is_reported() {
        let d = Distribution::from_fn(grid(25, 3.0), Role::Steady, 1.0, |z| {
            (-z.speed_squared()).exp()
        })
        .unwrap();
        let rho = moment_density(&d);
        let exact = std::f64::consts::PI.powf(1.5);
        let err = (rho.values()[0] - exact).abs();
        assert!(rho.tail_bound > 0.0);
        // Endpoint correction: 3 axes * pi * (h^2/12) * 2|f'(vmax)|.
        let h: f64 = 0.25;
        let endpoint = 3.0 * std::f64::consts::PI * h * h / 12.0 * 12.0 * (-9.0f64).exp();
        assert!(
            err <= rho.tail_bound + 1.1 * endpoint,
            "err {err} bound {}",
            rho.tail_bound
        );
        assert!(err >= rho.tail_bound * 0.9);
    }
}
