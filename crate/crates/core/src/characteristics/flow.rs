use super::rk4::March;
use super::{exit_time_bound, Direction, ForceField, StepRule};
use crate::error::{Error, Result};
use crate::model::{wrap, PhasePoint};

/// Slack on the analytic exit-time bound before a missing crossing is
/// reported as a contract violation.
const EXIT_BOUND_SAFETY: f64 = 0.5;

/// Sampled characteristic `s ↦ (X(s), V(s))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Signed characteristic times, starting at 0.
    pub times: Vec<f64>,
    /// `[X1, X2, X3, V1, V2, V3]`, horizontal position unwrapped.
    pub states: Vec<[f64; 6]>,
    /// Ended on the wall before the requested duration.
    pub exited: bool,
    pub error_estimate: f64,
}

/// Backward (and optionally forward) exit data of one phase point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitRecord {
    pub t_b: f64,
    /// Exit position, horizontally wrapped, with `x_b[2] = 0`.
    pub x_b: [f64; 3],
    pub v_b: [f64; 3],
    pub t_f: Option<f64>,
    pub steps: usize,
    pub error_estimate: f64,
}

/// True when `z` sits on the wall and leaves the domain immediately in
/// `direction`; such points exit at time zero.
pub(crate) fn leaves_at_once(x3: f64, v3: f64, direction: Direction) -> bool {
    x3 == 0.0
        && match direction {
            Direction::Backward => v3 >= 0.0,
            Direction::Forward => v3 <= 0.0,
        }
}

pub(crate) fn full_rhs<F: ForceField + ?Sized>(field: &F) -> impl Fn(&[f64; 6]) -> [f64; 6] + '_ {
    move |y: &[f64; 6]| {
        let a = field.accel(&[y[0], y[1], y[2]]);
        [y[3], y[4], y[5], a[0], a[1], a[2]]
    }
}

pub(crate) fn vertical_rhs<F: ForceField + ?Sized>(
    field: &F,
) -> impl Fn(&[f64; 2]) -> [f64; 2] + '_ {
    move |y: &[f64; 2]| [y[1], field.accel(&[0.0, 0.0, y[0]])[2]]
}

#[inline]
fn lift(z: &PhasePoint, sign: f64, elapsed: f64, y: &[f64; 2]) -> [f64; 6] {
    let s = sign * elapsed;
    [
        z.x[0] + s * z.v[0],
        z.x[1] + s * z.v[1],
        y[0],
        z.v[0],
        z.v[1],
        y[1],
    ]
}

/// Integrates the characteristic through `z` for `duration` in `direction`,
/// stopping early on the wall.
pub fn integrate_flow<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    duration: f64,
    direction: Direction,
    rule: StepRule,
) -> Result<Trajectory> {
    if !(duration >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be nonnegative, got {duration}"
        )));
    }
    let sign = direction.sign();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        exited: false,
        error_estimate: 0.0,
    };
    if leaves_at_once(z.x[2], z.v[2], direction) {
        traj.times.push(0.0);
        traj.states
            .push([z.x[0], z.x[1], z.x[2], z.v[0], z.v[1], z.v[2]]);
        traj.exited = duration > 0.0;
        return Ok(traj);
    }
    let h = rule.step(field.g(), z.x[2], z.v[2])?;
    let march = March {
        sign,
        h,
        limit: duration,
        height: 0,
        stop_at_wall: true,
    };
    let end = if field.is_vertical() {
        let mut push = |e: f64, y: &[f64; 2]| {
            traj.times.push(sign * e);
            traj.states.push(lift(z, sign, e, y));
        };
        let end = march.run(&vertical_rhs(field), [z.x[2], z.v[2]], &mut push)?;
        (end.hit, end.error_estimate)
    } else {
        let march = March { height: 2, ..march };
        let mut push = |e: f64, y: &[f64; 6]| {
            traj.times.push(sign * e);
            traj.states.push(*y);
        };
        let y0 = [z.x[0], z.x[1], z.x[2], z.v[0], z.v[1], z.v[2]];
        let end = march.run(&full_rhs(field), y0, &mut push)?;
        (end.hit, end.error_estimate)
    };
    traj.exited = end.0;
    traj.error_estimate = end.1;
    Ok(traj)
}

pub(crate) struct Exit {
    pub time: f64,
    pub state: [f64; 6],
    pub steps: usize,
    pub error_estimate: f64,
}

/// Exit limit for the crossing search, or `None` when `z` leaves at once.
pub(crate) fn exit_limit(g: f64, z: &PhasePoint, direction: Direction) -> Result<Option<f64>> {
    if leaves_at_once(z.x[2], z.v[2], direction) {
        return Ok(None);
    }
    if !(g > 0.0) {
        return Err(Error::Precondition(
            "exit times are only bounded for g > 0".into(),
        ));
    }
    Ok(Some(
        exit_time_bound(g, z.x[2], z.v[2], direction) * (1.0 + EXIT_BOUND_SAFETY),
    ))
}

pub(crate) fn missing_exit(z: &PhasePoint, limit: f64) -> Error {
    Error::Contract(format!(
        "no wall crossing from x3 = {}, v3 = {} within {limit:e}; the field gradient bound is breached",
        z.x[2], z.v[2]
    ))
}

pub(crate) fn find_exit<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    direction: Direction,
    rule: StepRule,
) -> Result<Exit> {
    let y0 = [z.x[0], z.x[1], z.x[2], z.v[0], z.v[1], z.v[2]];
    let limit = match exit_limit(field.g(), z, direction)? {
        None => {
            return Ok(Exit {
                time: 0.0,
                state: y0,
                steps: 0,
                error_estimate: 0.0,
            })
        }
        Some(l) => l,
    };
    let sign = direction.sign();
    let h = rule.step(field.g(), z.x[2], z.v[2])?;
    let march = March {
        sign,
        h,
        limit,
        height: 0,
        stop_at_wall: true,
    };
    let (hit, elapsed, state, steps, err) = if field.is_vertical() {
        let end = march.run(&vertical_rhs(field), [z.x[2], z.v[2]], &mut |_, _| {})?;
        (
            end.hit,
            end.elapsed,
            lift(z, sign, end.elapsed, &end.state),
            end.steps,
            end.error_estimate,
        )
    } else {
        let march = March { height: 2, ..march };
        let end = march.run(&full_rhs(field), y0, &mut |_, _| {})?;
        (
            end.hit,
            end.elapsed,
            end.state,
            end.steps,
            end.error_estimate,
        )
    };
    if !hit {
        return Err(missing_exit(z, limit));
    }
    Ok(Exit {
        time: elapsed,
        state,
        steps,
        error_estimate: err,
    })
}

/// Backward exit time, position and velocity of `z`.
///
/// Points on the wall with `v3 ≥ 0` exit at time zero. `t_f` is left empty.
pub fn backward_exit<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    rule: StepRule,
) -> Result<ExitRecord> {
    let e = find_exit(z, field, Direction::Backward, rule)?;
    Ok(ExitRecord {
        t_b: e.time,
        x_b: [wrap(e.state[0]), wrap(e.state[1]), 0.0],
        v_b: [e.state[3], e.state[4], e.state[5]],
        t_f: None,
        steps: e.steps,
        error_estimate: e.error_estimate,
    })
}

/// Backward exit plus the forward exit time.
pub fn exit_record<F: ForceField + ?Sized>(
    z: &PhasePoint,
    field: &F,
    rule: StepRule,
) -> Result<ExitRecord> {
    let mut rec = backward_exit(z, field, rule)?;
    let f = find_exit(z, field, Direction::Forward, rule)?;
    rec.t_f = Some(f.time);
    rec.steps += f.steps;
    rec.error_estimate = rec.error_estimate.max(f.error_estimate);
    Ok(rec)
}
