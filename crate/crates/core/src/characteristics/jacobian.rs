//! Variational equations along characteristics and derivatives of the exit
//! map.

use nalgebra::Matrix6;

use super::flow::{exit_limit, missing_exit, ExitRecord};
use super::rk4::March;
use super::{Direction, ForceField, StepRule};
use crate::error::{Error, Result};
use crate::model::{wrap, PhasePoint};

/// Below this `|v_b3|` the exit derivatives are treated as singular.
pub const GRAZING_THRESHOLD: f64 = 1e-6;

/// State and phase-space Jacobian `∂(X, V)/∂(x, v)` at the end of a flow.
///
/// Blocks are indexed `[i][j] = ∂X_i/∂x_j` and so on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianState {
    /// Signed characteristic time reached.
    pub s: f64,
    pub state: [f64; 6],
    pub exited: bool,
    pub dx_dx: [[f64; 3]; 3],
    pub dx_dv: [[f64; 3]; 3],
    pub dv_dx: [[f64; 3]; 3],
    pub dv_dv: [[f64; 3]; 3],
}

impl JacobianState {
    /// Row `i` of the 6×6 Jacobian, `i < 3` for `X`, `i ≥ 3` for `V`.
    pub fn row(&self, i: usize) -> [f64; 6] {
        let (l, r) = if i < 3 {
            (&self.dx_dx[i], &self.dx_dv[i])
        } else {
            (&self.dv_dx[i - 3], &self.dv_dv[i - 3])
        };
        [l[0], l[1], l[2], r[0], r[1], r[2]]
    }

    pub fn matrix(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|i, j| self.row(i)[j])
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }

    fn from_full(s: f64, exited: bool, y: &[f64; 42]) -> JacobianState {
        let m = |i: usize, j: usize| y[6 + 6 * i + j];
        let block = |r: usize, c: usize| {
            let mut b = [[0.0; 3]; 3];
            for (i, row) in b.iter_mut().enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    *e = m(r + i, c + j);
                }
            }
            b
        };
        JacobianState {
            s,
            state: [y[0], y[1], y[2], y[3], y[4], y[5]],
            exited,
            dx_dx: block(0, 0),
            dx_dv: block(0, 3),
            dv_dx: block(3, 0),
            dv_dv: block(3, 3),
        }
    }

    /// Horizontal motion is free: only the vertical 2×2 block is nontrivial.
    fn from_vertical(z: &PhasePoint, s: f64, exited: bool, y: &[f64; 6]) -> JacobianState {
        let diag = |a: f64, b: f64, c: f64| [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]];
        JacobianState {
            s,
            state: [
                z.x[0] + s * z.v[0],
                z.x[1] + s * z.v[1],
                y[0],
                z.v[0],
                z.v[1],
                y[1],
            ],
            exited,
            dx_dx: diag(1.0, 1.0, y[2]),
            dx_dv: diag(s, s, y[3]),
            dv_dx: diag(0.0, 0.0, y[4]),
            dv_dv: diag(1.0, 1.0, y[5]),
        }
    }
}

fn full_rhs<F: ForceField + ?Sized>(field: &F) -> impl Fn(&[f64; 42]) -> [f64; 42] + '_ {
    move |y: &[f64; 42]| {
        let s = field.sample(&[y[0], y[1], y[2]]);
        let mut out = [0.0; 42];
        out[..3].copy_from_slice(&y[3..6]);
        out[3] = -s.grad[0];
        out[4] = -s.grad[1];
        out[5] = -s.grad[2] - field.g();
        for j in 0..6 {
            for i in 0..3 {
                out[6 + 6 * i + j] = y[6 + 6 * (i + 3) + j];
                let mut acc = 0.0;
                for k in 0..3 {
                    acc -= s.hess[i][k] * y[6 + 6 * k + j];
                }
                out[6 + 6 * (i + 3) + j] = acc;
            }
        }
        out
    }
}

/// `[x3, v3, ∂x3/∂x3, ∂x3/∂v3, ∂v3/∂x3, ∂v3/∂v3]`.
fn vertical_rhs<F: ForceField + ?Sized>(field: &F) -> impl Fn(&[f64; 6]) -> [f64; 6] + '_ {
    move |y: &[f64; 6]| {
        let s = field.sample(&[0.0, 0.0, y[0]]);
        let h = -s.hess[2][2];
        [y[1], -s.grad[2] - field.g(), y[4], y[5], h * y[2], h * y[3]]
    }
}

fn identity42(z: &PhasePoint) -> [f64; 42] {
    let mut y = [0.0; 42];
    y[..3].copy_from_slice(&z.x);
    y[3..6].copy_from_slice(&z.v);
    for i in 0..6 {
        y[6 + 7 * i] = 1.0;
    }
    y
}

fn run<F: ForceField + ?Sized>(z: &PhasePoint, field: &F, march: March) -> Result<JacobianState> {
    let sign = march.sign;
    if field.is_vertical() {
        let y0 = [z.x[2], z.v[2], 1.0, 0.0, 0.0, 1.0];
        let end = march.run(&vertical_rhs(field), y0, &mut |_, _| {})?;
        Ok(JacobianState::from_vertical(
            z,
            sign * end.elapsed,
            end.hit,
            &end.state,
        ))
    } else {
        let march = March { height: 2, ..march };
        let end = march.run(&full_rhs(field), identity42(z), &mut |_, _| {})?;
        Ok(JacobianState::from_full(
            sign * end.elapsed,
            end.hit,
            &end.state,
        ))
    }
}

/// Flow map and its Jacobian over `duration`, stopping early on the wall.
pub fn flow_with_jacobian<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    duration: f64,
    direction: Direction,
    rule: StepRule,
) -> Result<JacobianState> {
    if !(duration >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be nonnegative, got {duration}"
        )));
    }
    let h = rule.step(field.g(), z.x[2], z.v[2])?;
    let h = if h > 0.0 {
        h
    } else {
        duration.max(f64::MIN_POSITIVE)
    };
    run(
        z,
        field,
        March {
            sign: direction.sign(),
            h,
            limit: duration,
            height: 0,
            stop_at_wall: true,
        },
    )
}

/// Derivatives of the backward exit map with respect to `(x, v)`.
///
/// Columns are ordered `(x1, x2, x3, v1, v2, v3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitDerivatives {
    pub record: ExitRecord,
    pub dt_b: [f64; 6],
    pub dx_b: [[f64; 6]; 3],
    pub dv_b: [[f64; 6]; 3],
}

/// Differentiates `(t_b, x_b, v_b)` through the variational flow:
/// `∂t_b = ∂X3(−t_b)/v_b3`, `∂x_b = ∂X(−t_b) − v_b ∂t_b` and
/// `∂v_b = ∂V(−t_b) − a(x_b) ∂t_b`, where `a` is the full acceleration
/// including gravity.
pub fn exit_derivatives<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    rule: StepRule,
) -> Result<ExitDerivatives> {
    let jac = match exit_limit(field.g(), z, Direction::Backward)? {
        None => run(
            z,
            field,
            March {
                sign: -1.0,
                h: 1.0,
                limit: 0.0,
                height: 0,
                stop_at_wall: true,
            },
        )?,
        Some(limit) => {
            let h = rule.step(field.g(), z.x[2], z.v[2])?;
            let j = run(
                z,
                field,
                March {
                    sign: -1.0,
                    h,
                    limit,
                    height: 0,
                    stop_at_wall: true,
                },
            )?;
            if !j.exited {
                return Err(missing_exit(z, limit));
            }
            j
        }
    };
    let mut state = jac.state;
    state[2] = 0.0;
    let v_b3 = state[5];
    if v_b3.abs() < GRAZING_THRESHOLD {
        return Err(Error::Grazing { v_b3 });
    }
    let x3_row = jac.row(2);
    let dt_b = x3_row.map(|d| d / v_b3);
    let x_b = [state[0], state[1], 0.0];
    let a_b = field.accel(&x_b);
    let mut dx_b = [[0.0; 6]; 3];
    let mut dv_b = [[0.0; 6]; 3];
    for i in 0..3 {
        let rx = jac.row(i);
        let rv = jac.row(i + 3);
        for j in 0..6 {
            dx_b[i][j] = rx[j] - state[3 + i] * dt_b[j];
            dv_b[i][j] = rv[j] - a_b[i] * dt_b[j];
        }
    }
    // The wall is flat, so this row vanishes up to rounding.
    dx_b[2] = [0.0; 6];
    let record = ExitRecord {
        t_b: 0.0 - jac.s,
        x_b: [wrap(x_b[0]), wrap(x_b[1]), 0.0],
        v_b: [state[3], state[4], state[5]],
        t_f: None,
        steps: 0,
        error_estimate: 0.0,
    };
    Ok(ExitDerivatives {
        record,
        dt_b,
        dx_b,
        dv_b,
    })
}
