//! Fixed-step RK4 on small state vectors, with boundary-crossing refinement.

use crate::error::{Error, Result};

#[inline]
pub(crate) fn rk4_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k1 = f(y);
    let y2 = axpy(y, 0.5 * h, &k1);
    let k2 = f(&y2);
    let y3 = axpy(y, 0.5 * h, &k2);
    let k3 = f(&y3);
    let y4 = axpy(y, h, &k3);
    let k4 = f(&y4);
    let mut out = *y;
    let c = h / 6.0;
    for i in 0..N {
        out[i] += c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

pub(crate) struct MarchEnd<const N: usize> {
    /// Elapsed time, always nonnegative.
    pub elapsed: f64,
    pub state: [f64; N],
    /// Stopped on the wall rather than at the time limit.
    pub hit: bool,
    pub steps: usize,
    /// Step-doubling estimate of the first step's error times the step count.
    pub error_estimate: f64,
}

pub(crate) struct March {
    /// `+1` forward, `−1` backward.
    pub sign: f64,
    pub h: f64,
    pub limit: f64,
    /// Index of the height coordinate in the state.
    pub height: usize,
    /// Stop at the first time the height drops to zero.
    pub stop_at_wall: bool,
}

impl March {
    /// Integrates from `y0`, calling `observe(elapsed, state)` at the start,
    /// after every step, and at the final state.
    pub fn run<const N: usize, F, O>(
        &self,
        rhs: &F,
        y0: [f64; N],
        observe: &mut O,
    ) -> Result<MarchEnd<N>>
    where
        F: Fn(&[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N]),
    {
        observe(0.0, &y0);
        let mut end = MarchEnd {
            elapsed: 0.0,
            state: y0,
            hit: false,
            steps: 0,
            error_estimate: 0.0,
        };
        if self.limit <= 0.0 {
            return Ok(end);
        }
        if !(self.h > 0.0) {
            return Err(Error::Integration(format!(
                "nonpositive ODE step {}",
                self.h
            )));
        }
        let scale = 1.0 + y0[self.height].abs();
        let mut per_step_error = 0.0;
        let mut s = 0.0;
        let mut y = y0;
        while s < self.limit {
            let remaining = self.limit - s;
            let last = self.h >= remaining;
            let step = if last { remaining } else { self.h };
            let next = rk4_step(rhs, &y, self.sign * step);
            if end.steps == 0 {
                let half = rk4_step(rhs, &y, 0.5 * self.sign * step);
                let twice = rk4_step(rhs, &half, 0.5 * self.sign * step);
                per_step_error = next
                    .iter()
                    .zip(&twice)
                    .fold(0.0f64, |a, (p, q)| a.max((p - q).abs()))
                    / 15.0;
            }
            end.steps += 1;
            if self.stop_at_wall && next[self.height] <= 0.0 {
                let (tau, state) = self.refine(rhs, &y, next, step, s, scale)?;
                end.elapsed = s + tau;
                end.state = state;
                end.hit = true;
                end.error_estimate = per_step_error * end.steps as f64;
                observe(end.elapsed, &end.state);
                return Ok(end);
            }
            s = if last { self.limit } else { s + step };
            y = next;
            observe(s, &y);
        }
        end.elapsed = s;
        end.state = y;
        end.error_estimate = per_step_error * end.steps as f64;
        Ok(end)
    }

    /// Locates the wall crossing inside one step by Illinois regula falsi on
    /// a single RK4 substep, falling back to bisection.
    fn refine<const N: usize, F>(
        &self,
        rhs: &F,
        y: &[f64; N],
        y_end: [f64; N],
        step: f64,
        s: f64,
        scale: f64,
    ) -> Result<(f64, [f64; N])>
    where
        F: Fn(&[f64; N]) -> [f64; N],
    {
        let k = self.height;
        let tol = 4.0 * f64::EPSILON * scale;
        let (mut a, mut fa) = (0.0, y[k]);
        let (mut b, mut fb, mut yb) = (step, y_end[k], y_end);
        let mut side = 0i8;
        for _ in 0..300 {
            if fb.abs() <= tol {
                break;
            }
            let mut c = if fa > 0.0 && fb < 0.0 {
                (a * fb - b * fa) / (fb - fa)
            } else {
                0.5 * (a + b)
            };
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let yc = rk4_step(rhs, y, self.sign * c);
            let fc = yc[k];
            if fc.abs() <= tol {
                let mut out = yc;
                out[k] = 0.0;
                return Ok((c, out));
            }
            if fc > 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                yb = yc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
            if b - a <= 2.0 * f64::EPSILON * (s + b) {
                let mut out = yb;
                out[k] = 0.0;
                return Ok((b, out));
            }
        }
        if fb.abs() <= tol {
            let mut out = yb;
            out[k] = 0.0;
            return Ok((b, out));
        }
        Err(Error::Integration(format!(
            "wall crossing did not converge; bracket [{a:e}, {b:e}] after {s:e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_exact_on_a_parabola() {
        let g = 9.81;
        let f = |y: &[f64; 2]| [y[1], -g];
        let y = rk4_step(&f, &[1.0, 0.5], 0.3);
        assert!((y[0] - (1.0 + 0.15 - 0.5 * g * 0.09)).abs() < 1e-15);
        assert!((y[1] - (0.5 - g * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn rk4_fourth_order_on_oscillator() {
        let f = |y: &[f64; 2]| [y[1], -y[0]];
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = [1.0, 0.0];
            for _ in 0..n {
                y = rk4_step(&f, &y, h);
            }
            (y[0] - 1f64.cos()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn crossing_is_refined_to_the_wall() {
        let f = |y: &[f64; 2]| [y[1], -1.0];
        let m = March {
            sign: 1.0,
            h: 0.25,
            limit: 10.0,
            height: 0,
            stop_at_wall: true,
        };
        let end = m.run(&f, [1.0, 0.0], &mut |_, _| {}).unwrap();
        assert!(end.hit);
        assert_eq!(end.state[0], 0.0);
        assert!((end.elapsed - 2f64.sqrt()).abs() < 1e-14);
    }
}
