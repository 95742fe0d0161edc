//! Characteristics of the transport operator: trajectories under gravity plus
//! a self-consistent potential, boundary exits, and their sensitivities.

mod flow;
mod jacobian;
mod lemma;
mod rk4;

pub use flow::{backward_exit, exit_record, integrate_flow, ExitRecord, Trajectory};
pub use jacobian::{
    exit_derivatives, flow_with_jacobian, ExitDerivatives, JacobianState, GRAZING_THRESHOLD,
};
pub use lemma::{velocity_lemma_check, weight_drift, FieldNorms, VelocityLemmaReport};

use crate::error::{invalid, Result};
use crate::poisson::{Field, FieldSample};

/// Acceleration field `a(x) = −∇(potential)(x) − g e3`.
///
/// `sample` returns the self-consistent part only; gravity is added by
/// [`ForceField::accel`].
pub trait ForceField: Sync {
    fn g(&self) -> f64;

    fn sample(&self, x: &[f64; 3]) -> FieldSample;

    /// The potential depends on `x3` alone, so horizontal motion is free.
    fn is_vertical(&self) -> bool {
        false
    }

    /// `∂3` of the potential on the wall.
    fn boundary_normal_derivative(&self, x1: f64, x2: f64) -> f64 {
        self.sample(&[x1, x2, 0.0]).grad[2]
    }

    fn accel(&self, x: &[f64; 3]) -> [f64; 3] {
        let s = self.sample(x);
        [-s.grad[0], -s.grad[1], -s.grad[2] - self.g()]
    }
}

/// Gravity alone. With `g = 0` this is the zero force.
#[derive(Clone, Copy, Debug)]
pub struct FreeFall {
    g: f64,
}

impl FreeFall {
    pub fn new(g: f64) -> Result<FreeFall> {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(invalid(format!("g must be nonnegative, got {g}")));
        }
        Ok(FreeFall { g })
    }
}

impl ForceField for FreeFall {
    fn g(&self) -> f64 {
        self.g
    }

    fn sample(&self, _x: &[f64; 3]) -> FieldSample {
        FieldSample::default()
    }

    fn is_vertical(&self) -> bool {
        true
    }

    fn boundary_normal_derivative(&self, _x1: f64, _x2: f64) -> f64 {
        0.0
    }
}

/// Gravity plus a weighted sum of solved potentials, frozen in time.
///
/// The steady force uses `Φ` alone; a dynamic step uses `Φ + Ψ(t_n)`.
#[derive(Clone, Debug)]
pub struct PotentialForce<'a> {
    g: f64,
    parts: Vec<(f64, &'a Field)>,
    vertical: bool,
}

impl<'a> PotentialForce<'a> {
    pub fn new(g: f64, parts: Vec<(f64, &'a Field)>) -> Result<PotentialForce<'a>> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid(format!("g must be positive, got {g}")));
        }
        let vertical = parts.iter().all(|(_, f)| f.is_horizontally_homogeneous());
        Ok(PotentialForce { g, parts, vertical })
    }

    pub fn steady(g: f64, phi: &'a Field) -> Result<PotentialForce<'a>> {
        PotentialForce::new(g, vec![(1.0, phi)])
    }

    /// `Φ + Ψ` with `Ψ` frozen at the start of a step.
    pub fn frozen(g: f64, phi: &'a Field, psi: &'a Field) -> Result<PotentialForce<'a>> {
        PotentialForce::new(g, vec![(1.0, phi), (1.0, psi)])
    }
}

impl ForceField for PotentialForce<'_> {
    fn g(&self) -> f64 {
        self.g
    }

    fn sample(&self, x: &[f64; 3]) -> FieldSample {
        let mut acc = FieldSample::default();
        for (c, f) in &self.parts {
            let s = f.sample(x);
            acc.phi += c * s.phi;
            for i in 0..3 {
                acc.grad[i] += c * s.grad[i];
                for j in 0..3 {
                    acc.hess[i][j] += c * s.hess[i][j];
                }
            }
        }
        acc
    }

    fn is_vertical(&self) -> bool {
        self.vertical
    }

    fn boundary_normal_derivative(&self, x1: f64, x2: f64) -> f64 {
        self.parts
            .iter()
            .map(|(c, f)| c * f.boundary_normal_derivative(x1, x2))
            .sum()
    }
}

/// Gravity plus a potential given in closed form.
pub struct AnalyticForce<F> {
    g: f64,
    potential: F,
    vertical: bool,
}

impl<F: Fn(&[f64; 3]) -> FieldSample + Sync> AnalyticForce<F> {
    /// `vertical` must be true only if `potential` ignores `x1, x2`.
    pub fn new(g: f64, vertical: bool, potential: F) -> AnalyticForce<F> {
        AnalyticForce {
            g,
            potential,
            vertical,
        }
    }
}

impl<F: Fn(&[f64; 3]) -> FieldSample + Sync> ForceField for AnalyticForce<F> {
    fn g(&self) -> f64 {
        self.g
    }

    fn sample(&self, x: &[f64; 3]) -> FieldSample {
        (self.potential)(x)
    }

    fn is_vertical(&self) -> bool {
        self.vertical
    }
}

/// How the fixed RK4 step is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// `h = fraction · (2/g) √(v3² + g x3)`, the exit-time scale.
    Relative(f64),
    Absolute(f64),
}

impl Default for StepRule {
    fn default() -> StepRule {
        StepRule::Relative(1e-3)
    }
}

impl StepRule {
    pub fn validate(self) -> Result<StepRule> {
        let h = match self {
            StepRule::Relative(h) | StepRule::Absolute(h) => h,
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("ODE step must be positive, got {h}")));
        }
        Ok(self)
    }

    /// Step for a trajectory starting at height `x3` with vertical speed `v3`.
    /// Zero means the exit scale itself vanishes.
    pub fn step(self, g: f64, x3: f64, v3: f64) -> Result<f64> {
        match self {
            StepRule::Absolute(h) => Ok(h),
            StepRule::Relative(frac) => {
                if g <= 0.0 {
                    return Err(invalid("a relative ODE step needs g > 0"));
                }
                Ok(frac * (2.0 / g) * (v3 * v3 + g * x3).sqrt())
            }
        }
    }
}

/// Direction of integration in the characteristic time `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Backward,
    Forward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Backward => -1.0,
            Direction::Forward => 1.0,
        }
    }
}

/// Upper bound on the exit time in the given direction when `‖∇Φ‖ ≤ g/2`:
/// `(2/g)(√(v3² + g x3) ∓ v3)`.
pub fn exit_time_bound(g: f64, x3: f64, v3: f64, direction: Direction) -> f64 {
    let r = (v3 * v3 + g * x3).sqrt();
    // r − |v3| = g x3 / (r + |v3|) avoids cancellation.
    let toward = match direction {
        Direction::Backward => v3,
        Direction::Forward => -v3,
    };
    if toward > 0.0 {
        2.0 * x3 / (r + toward)
    } else {
        (2.0 / g) * (r - toward)
    }
}

/// Free-fall exit times, for reference: `t_b = (√(v3² + 2g x3) − v3)/g`.
pub fn free_fall_exit_time(g: f64, x3: f64, v3: f64) -> f64 {
    let r = (v3 * v3 + 2.0 * g * x3).sqrt();
    if v3 > 0.0 {
        2.0 * x3 / (r + v3)
    } else {
        (r - v3) / g
    }
}
