//! Physical parameters, phase points and the energy weights.

use crate::error::{domain, invalid, Error, Result};
use crate::poisson::Field;

/// Sign of the coupling in `ΔΦ = ηρ`.
///
/// `Plus` is the attractive (gravitational) case, `Minus` the repulsive
/// (plasma) case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl TryFrom<f64> for Sign {
    type Error = Error;

    fn try_from(eta: f64) -> Result<Sign> {
        if eta == 1.0 {
            Ok(Sign::Plus)
        } else if eta == -1.0 {
            Ok(Sign::Minus)
        } else {
            Err(invalid(format!("eta must be +1 or -1, got {eta}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    /// Gravitational acceleration, pointing down.
    pub g: f64,
    pub eta: Sign,
    /// Exponent of the energy weight used by every sup-norm.
    pub beta: f64,
    /// Exponent of the regularity weight.
    pub beta_tilde: f64,
}

impl Params {
    pub fn new(g: f64, eta: Sign, beta: f64, beta_tilde: f64) -> Result<Params> {
        for (name, value) in [("g", g), ("beta", beta), ("beta_tilde", beta_tilde)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(Params {
            g,
            eta,
            beta,
            beta_tilde,
        })
    }

    pub fn with_g(self, g: f64) -> Result<Params> {
        Params::new(g, self.eta, self.beta, self.beta_tilde)
    }
}

/// Wrap a horizontal coordinate into `[-1/2, 1/2)`.
#[inline]
pub fn wrap(c: f64) -> f64 {
    let w = c - (c + 0.5).floor();
    // (c + 0.5).floor() can round so that w lands exactly on 1/2.
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// A point `(x, v)` of `T² × [0, ∞) × R³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: [f64; 3],
    pub v: [f64; 3],
}

impl PhasePoint {
    /// Builds a phase point, wrapping the horizontal position into the cell.
    pub fn new(x: [f64; 3], v: [f64; 3]) -> Result<PhasePoint> {
        if !(x[2] >= 0.0) {
            return Err(domain(format!("x3 must be nonnegative, got {}", x[2])));
        }
        if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(domain("phase point has a non-finite coordinate"));
        }
        Ok(PhasePoint {
            x: [wrap(x[0]), wrap(x[1]), x[2]],
            v,
        })
    }

    pub fn speed_squared(&self) -> f64 {
        self.v.iter().map(|c| c * c).sum()
    }

    /// On the incoming boundary `γ−`.
    pub fn is_incoming(&self) -> bool {
        self.x[2] == 0.0 && self.v[2] > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    /// `w_β = exp(β(|v|² + 2Φ + 2g x3))`.
    Steady,
    /// `𝔴_β = exp(β(|v|² + 2Φ + 2Ψ + 2g x3))`.
    Dynamic,
}

/// Energy weight at `z`. On the boundary this is `e^{β|v|²}` exactly.
pub fn evaluate_weight(
    params: &Params,
    kind: WeightKind,
    z: &PhasePoint,
    phi: &Field,
    psi: Option<&Field>,
) -> Result<f64> {
    if z.x[2] < 0.0 {
        return Err(domain("weight evaluated below the boundary"));
    }
    let psi_value = match (kind, psi) {
        (WeightKind::Steady, None) => 0.0,
        (WeightKind::Dynamic, Some(psi)) => psi.potential(&z.x),
        (WeightKind::Steady, Some(_)) => {
            return Err(Error::Precondition("steady weight takes no Ψ".into()))
        }
        (WeightKind::Dynamic, None) => {
            return Err(Error::Precondition("dynamic weight needs Ψ".into()))
        }
    };
    if z.x[2] == 0.0 {
        return Ok((params.beta * z.speed_squared()).exp());
    }
    let energy =
        z.speed_squared() + 2.0 * phi.potential(&z.x) + 2.0 * psi_value + 2.0 * params.g * z.x[2];
    Ok((params.beta * energy).exp())
}

/// Kinetic distance `α`; equals `|v3|` on the boundary and vanishes only on
/// the grazing set.
pub fn kinetic_distance(params: &Params, z: &PhasePoint, phi: &Field) -> Result<f64> {
    let x3 = z.x[2];
    if x3 < 0.0 {
        return Err(domain("kinetic distance below the boundary"));
    }
    let trace = phi.boundary_normal_derivative(z.x[0], z.x[1]);
    kinetic_distance_with_trace(params.g, trace, x3, z.v[2])
}

pub(crate) fn kinetic_distance_with_trace(g: f64, trace: f64, x3: f64, v3: f64) -> Result<f64> {
    let radicand = v3 * v3 + x3 * x3 + 2.0 * trace * x3 + 2.0 * g * x3;
    if radicand < 0.0 {
        return Err(Error::Precondition(format!(
            "kinetic distance radicand {radicand:e} is negative; the field gradient exceeds g"
        )));
    }
    Ok(radicand.sqrt())
}
