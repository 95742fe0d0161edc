//! Independent reference solutions shared by the integration tests and the
//! acceptance target. Nothing here calls into the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `Φ'' = e^{−x3}`, `Φ(0) = 0`, `Φ' → 0`.
pub fn poisson_mode0(x3: f64) -> f64 {
    (-x3).exp() - 1.0
}

/// Profile of the `cos 2πx1` mode for `ρ = e^{−x3} cos 2πx1`.
pub fn poisson_mode1(x3: f64) -> f64 {
    ((-x3).exp() - (-2.0 * PI * x3).exp()) / (1.0 - 4.0 * PI * PI)
}

/// Backward exit time of a free fall under `−g e3`.
pub fn free_fall_exit(g: f64, x3: f64, v3: f64) -> f64 {
    ((v3 * v3 + 2.0 * g * x3).sqrt() - v3) / g
}

/// Steady potential for a uniform Maxwellian inflow, from the first integral
/// `u'²/2 + η ρ0 e^{−2βu}/(2β) = g²/2` of `u = Φ + g x3`.
pub fn closed_form(eta: f64, rho0: f64, beta: f64, g: f64, x: f64) -> f64 {
    let k = eta * rho0 / (beta * g * g);
    assert!(k < 1.0);
    let q = (1.0 + (1.0 - k).sqrt()) * (g * beta * x).exp();
    ((q * q + k) / (2.0 * q)).ln() / beta - g * x
}

/// Shooting for `Φ'' = η ρ0 e^{−2β(Φ + g x3)}`, `Φ(0) = 0`, `Φ' → 0`, over
/// slopes with `u'(0) ≥ 0`: too steep a slope leaves `Φ'` positive far out,
/// too shallow sends it negative.
pub fn shooting(eta: f64, rho0: f64, beta: f64, g: f64, xs: &[f64]) -> Vec<f64> {
    let rhs = |y: [f64; 2], x: f64| [y[1], eta * rho0 * (-2.0 * beta * (y[0] + g * x)).exp()];
    let run = |s: f64, record: Option<&mut Vec<f64>>| -> f64 {
        let h = 1e-4;
        let x_end = 12.0;
        let mut y = [0.0, s];
        let mut x = 0.0;
        let mut out = record;
        let mut next = 0;
        while x < x_end {
            if let Some(o) = out.as_deref_mut() {
                while next < xs.len() && xs[next] <= x + 0.5 * h {
                    o.push(y[0] + (xs[next] - x) * y[1]);
                    next += 1;
                }
            }
            let k1 = rhs(y, x);
            let k2 = rhs(
                [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]],
                x + 0.5 * h,
            );
            let k3 = rhs(
                [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]],
                x + 0.5 * h,
            );
            let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]], x + h);
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            x += h;
            if !y[1].is_finite() || y[1].abs() > 1e6 {
                return y[1].signum() * f64::INFINITY;
            }
        }
        if let Some(o) = out {
            while o.len() < xs.len() {
                o.push(y[0]);
            }
        }
        y[1]
    };
    let (mut lo, mut hi) = (-g, 10.0 * g);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if run(mid, None) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut out = Vec::new();
    run(0.5 * (lo + hi), Some(&mut out));
    out
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
