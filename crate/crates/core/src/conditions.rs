//! Smallness and compatibility conditions under which the bounds hold.
//!
//! Every condition is evaluated with an explicit margin. A condition whose
//! inputs are missing is reported as unchecked, never as passing.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use crate::model::Params;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Unchecked,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Unchecked => "unchecked",
        })
    }
}

/// One evaluated condition. `margin ≥ 0` exactly when it passes.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub margin: Option<f64>,
    pub status: Status,
}

impl Condition {
    /// `lhs ≤ rhs`.
    fn at_most(name: &'static str, lhs: Option<f64>, rhs: Option<f64>) -> Condition {
        Condition::with_margin(name, lhs, rhs, |l, r| r - l)
    }

    /// `lhs ≥ rhs`.
    fn at_least(name: &'static str, lhs: Option<f64>, rhs: Option<f64>) -> Condition {
        Condition::with_margin(name, lhs, rhs, |l, r| l - r)
    }

    fn with_margin(
        name: &'static str,
        lhs: Option<f64>,
        rhs: Option<f64>,
        m: fn(f64, f64) -> f64,
    ) -> Condition {
        let margin = match (lhs, rhs) {
            (Some(l), Some(r)) => Some(m(l, r)),
            _ => None,
        };
        let status = match margin {
            Some(m) if m >= 0.0 => Status::Pass,
            Some(_) => Status::Fail,
            None => Status::Unchecked,
        };
        Condition {
            name,
            lhs,
            rhs,
            margin,
            status,
        }
    }
}

/// Precomputed norms. `None` marks a norm that was not supplied.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionInputs {
    /// Green-function constant `𝔠` of the elliptic estimate.
    pub green_constant: f64,
    /// `‖e^{β|v|²} G‖` on `γ−`.
    pub weighted_g: Option<f64>,
    /// `‖e^{β̃|v|²} ∇_{x∥,v} G‖` on `γ−`.
    pub weighted_grad_g: Option<f64>,
    /// `‖∇Φ‖∞`.
    pub grad_phi: Option<f64>,
    /// `sup_t ‖∇Ψ(t)‖∞`.
    pub grad_psi: Option<f64>,
    /// `sup_t ‖e^{β/2 (|v|² + g x3)} f(t)‖∞`.
    pub half_weighted_f: Option<f64>,
    /// `‖w_β h‖∞`.
    pub weighted_h: Option<f64>,
    /// `‖𝔴_{β,0} F0‖∞` with `F0 = h + f0`.
    pub weighted_total0: Option<f64>,
    /// `‖𝔴_{β̃,0} ∇_{x,v} F0‖∞`.
    pub weighted_grad_total0: Option<f64>,
    /// `‖w_β̄ ∇_v h‖∞` together with `β̄`.
    pub weighted_grad_v_h: Option<(f64, f64)>,
    /// `ε` in the uniqueness smallness condition.
    pub uniqueness_epsilon: f64,
    /// Factor standing in for "much less than".
    pub much_less_factor: f64,
}

impl Default for ConditionInputs {
    fn default() -> ConditionInputs {
        ConditionInputs {
            green_constant: 4.0,
            weighted_g: None,
            weighted_grad_g: None,
            grad_phi: None,
            grad_psi: None,
            half_weighted_f: None,
            weighted_h: None,
            weighted_total0: None,
            weighted_grad_total0: None,
            weighted_grad_v_h: None,
            uniqueness_epsilon: 0.01,
            much_less_factor: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub conditions: Vec<Condition>,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn passes(&self, name: &str) -> bool {
        self.get(name).is_some_and(|c| c.status == Status::Pass)
    }
}

/// Right-hand side of the construction condition on `β`:
/// `(8π^{3/2} 𝔠)^{2/5} ‖e^{β|v|²}G‖^{2/5} g^{-4/5}`.
pub fn beta_threshold(g: f64, green_constant: f64, weighted_g: f64) -> f64 {
    (8.0 * PI.powf(1.5) * green_constant).powf(0.4) * weighted_g.powf(0.4) * g.powf(-0.8)
}

/// Smallness threshold on `sup_t ‖e^{β/2(|v|²+g x3)} f‖`.
pub fn bootstrap_f_threshold(g: f64, beta: f64) -> f64 {
    LN_2.sqrt() * g.sqrt() * beta.powf(1.5) / (64.0 * PI * (1.0 + 1.0 / (beta * g)))
}

/// Threshold on `M` for global dynamic construction.
pub fn choice_g_threshold(g: f64, beta: f64) -> f64 {
    LN_2.sqrt() / (2f64.powf(8.5) * PI) * g.powf(1.5) * beta.powf(2.5)
}

pub fn check_conditions(params: &Params, inputs: &ConditionInputs) -> ConditionReport {
    let Params {
        g,
        beta,
        beta_tilde: bt,
        ..
    } = *params;
    let mut out = Vec::new();

    let threshold = inputs
        .weighted_g
        .map(|w| beta_threshold(g, inputs.green_constant, w));
    out.push(Condition::at_least("condition:beta", Some(beta), threshold));

    let lhs_g = match (inputs.weighted_g, inputs.weighted_grad_g, inputs.grad_phi) {
        (Some(w), Some(dw), Some(dphi)) => {
            let a = (1.0 + dphi / g + 1.0 / (g * g * bt)) / (g * bt * bt);
            let b = (1.0 + bt.sqrt() * dphi) / bt.powf(1.5);
            Some(w * (std::f64::consts::E + (a + b) * dw).ln())
        }
        _ => None,
    };
    out.push(Condition::at_most(
        "condition:G",
        lhs_g,
        Some(g * g * bt * beta.powf(1.5) / 16.0),
    ));

    let lhs_boot = match (inputs.grad_phi, inputs.grad_psi) {
        (Some(a), Some(b)) => Some(a + b),
        _ => None,
    };
    out.push(Condition::at_most("Bootstrap", lhs_boot, Some(g / 2.0)));
    out.push(Condition::at_most(
        "Bootstrap_f",
        inputs.half_weighted_f,
        Some(bootstrap_f_threshold(g, beta)),
    ));

    let m = match (inputs.weighted_h, inputs.weighted_total0, inputs.weighted_g) {
        (Some(h), Some(f0), Some(w)) => Some(h.max(f0 + w)),
        _ => None,
    };
    out.push(Condition::at_most(
        "choice:g",
        m,
        Some(choice_g_threshold(g, beta)),
    ));

    let k = inputs.much_less_factor;
    let m_cap = k * (g * bt.sqrt() * beta.powf(1.5)).min(g * beta.powf(2.5));
    out.push(Condition::at_most("choice_ML:M", m, Some(m_cap)));
    let l = match (inputs.weighted_grad_total0, inputs.weighted_grad_g) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    let l_cap = k * bt.powf(1.5).min(g * g * bt.powf(2.5));
    out.push(Condition::at_most("choice_ML:L", l, Some(l_cap)));

    let (lhs_u, rhs_u) = match inputs.weighted_grad_v_h {
        Some((norm, bar)) => (
            Some(norm),
            Some(inputs.uniqueness_epsilon * g * g * bar.powi(3)),
        ),
        None => (None, None),
    };
    out.push(Condition::at_most("condition_unique", lhs_u, rhs_u));

    ConditionReport { conditions: out }
}
