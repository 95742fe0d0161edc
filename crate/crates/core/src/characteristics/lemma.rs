//! Along-trajectory diagnostics: weight invariance and the velocity lemma.

use super::flow::{exit_limit, integrate_flow, Trajectory};
use super::{Direction, ForceField, StepRule};
use crate::error::Result;
use crate::model::{kinetic_distance_with_trace, PhasePoint};
use crate::poisson::Field;

/// Sup-norms of a steady potential entering the velocity lemma.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldNorms {
    /// `‖∇Φ‖∞`.
    pub gradient: f64,
    /// `‖∇²Φ‖∞`.
    pub hessian: f64,
    /// `‖∂33Φ‖∞`.
    pub d33: f64,
    /// `‖∇∥∂3Φ‖` on the wall.
    pub boundary_mixed: f64,
}

impl FieldNorms {
    pub fn of(phi: &Field) -> FieldNorms {
        FieldNorms {
            gradient: phi.gradient_sup(),
            hessian: phi.hessian_sup(),
            d33: phi.d33_sup(),
            boundary_mixed: phi.boundary_mixed_sup(),
        }
    }
}

/// Margins of the two-sided exponential envelope on `α` along the backward
/// trajectory, as log-ratios; nonnegative means the bound holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityLemmaReport {
    pub samples: usize,
    pub t_b: f64,
    pub upper_margin: f64,
    pub lower_margin: f64,
    /// Margin of the closed lower bound on `|v_b3|` in terms of `|v_b|`.
    pub exit_speed_margin: f64,
}

fn backward_to_wall<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    rule: StepRule,
) -> Result<Trajectory> {
    let limit = exit_limit(field.g(), z, Direction::Backward)?.unwrap_or(0.0);
    integrate_flow(z, field, limit, Direction::Backward, rule)
}

/// Checks `α(Z(s))` against `α(z) exp(±[(1 + ‖∂33Φ‖)|s| + ‖∇∥∂3Φ‖/g ∫|V∥|])`
/// for `s ∈ [−t_b, 0]`, and the resulting lower bound on `|v_b3|`.
///
/// Grazing starting points (`α = 0`) are vacuous and report zero margins.
pub fn velocity_lemma_check<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    norms: &FieldNorms,
    rule: StepRule,
) -> Result<VelocityLemmaReport> {
    let g = field.g();
    let alpha = |s: &[f64; 6]| -> Result<f64> {
        let trace = field.boundary_normal_derivative(s[0], s[1]);
        kinetic_distance_with_trace(g, trace, s[2].max(0.0), s[5])
    };
    let traj = backward_to_wall(z, field, rule)?;
    let first = traj.states[0];
    let alpha0 = alpha(&first)?;
    let last = traj.states[traj.states.len() - 1];
    let t_b = -traj.times[traj.times.len() - 1];
    let mut report = VelocityLemmaReport {
        samples: traj.states.len(),
        t_b,
        upper_margin: 0.0,
        lower_margin: 0.0,
        exit_speed_margin: 0.0,
    };
    if alpha0 == 0.0 {
        return Ok(report);
    }
    let ln0 = alpha0.ln();
    let (mut upper, mut lower) = (f64::INFINITY, f64::INFINITY);
    let mut path = 0.0;
    let speed = |s: &[f64; 6]| s[3].hypot(s[4]);
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        if i > 0 {
            let dt = traj.times[i - 1] - t;
            path += 0.5 * dt * (speed(s) + speed(&traj.states[i - 1]));
        }
        let exponent = (1.0 + norms.d33) * t.abs() + norms.boundary_mixed / g * path;
        let ln_a = alpha(s)?.ln();
        upper = upper.min(ln0 + exponent - ln_a);
        lower = lower.min(ln_a - (ln0 - exponent));
    }
    report.upper_margin = upper;
    report.lower_margin = lower;
    let vb2 = last[3] * last[3] + last[4] * last[4] + last[5] * last[5];
    let ln_floor = ln0
        - 4.0 / g * (1.0 + norms.hessian) * last[5].abs()
        - 4.0 / (g * g) * norms.hessian * (1.0 + 2.0 / g * norms.gradient) * vb2;
    report.exit_speed_margin = last[5].abs().ln() - ln_floor;
    Ok(report)
}

/// Largest relative change of the steady weight `e^{β(|V|² + 2Φ(X) + 2g X3)}`
/// along the backward characteristic from `z` to the wall.
pub fn weight_drift<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    beta: f64,
    rule: StepRule,
) -> Result<f64> {
    let g = field.g();
    let energy = |s: &[f64; 6]| {
        let phi = field.sample(&[s[0], s[1], s[2]]).phi;
        s[3] * s[3] + s[4] * s[4] + s[5] * s[5] + 2.0 * phi + 2.0 * g * s[2]
    };
    let traj = backward_to_wall(z, field, rule)?;
    let e0 = energy(&traj.states[0]);
    Ok(traj.states.iter().fold(0.0f64, |a, s| {
        a.max((beta * (energy(s) - e0)).exp_m1().abs())
    }))
}

#[cfg(test)]
mod tests {
    use super::super::FreeFall;
    use super::*;

    #[test]
    fn free_fall_lemma_holds() {
        let f = FreeFall::new(1.0).unwrap();
        let z = PhasePoint::new([0.0, 0.0, 0.7], [0.4, -0.3, 0.2]).unwrap();
        let r = velocity_lemma_check(&z, &f, &FieldNorms::default(), StepRule::default()).unwrap();
        assert!(r.upper_margin >= 0.0 && r.lower_margin >= 0.0, "{r:?}");
        assert!(r.exit_speed_margin >= 0.0, "{r:?}");
    }

    #[test]
    fn boundary_start_has_equality_at_zero() {
        let f = FreeFall::new(1.0).unwrap();
        let z = PhasePoint::new([0.0, 0.0, 0.0], [0.0, 0.0, 0.8]).unwrap();
        let r = velocity_lemma_check(&z, &f, &FieldNorms::default(), StepRule::default()).unwrap();
        assert_eq!(r.t_b, 0.0);
        assert_eq!(r.upper_margin, 0.0);
        assert_eq!(r.lower_margin, 0.0);
    }

    #[test]
    fn free_fall_weight_is_invariant() {
        let f = FreeFall::new(2.0).unwrap();
        let z = PhasePoint::new([0.0, 0.0, 1.3], [0.5, 0.1, 0.4]).unwrap();
        assert!(weight_drift(&z, &f, 1.0, StepRule::Absolute(1e-3)).unwrap() < 1e-12);
    }
}
