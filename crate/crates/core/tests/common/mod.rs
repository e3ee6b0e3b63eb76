//! Test-side oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;

use statrs::function::gamma::gamma;

/// Tanh-sinh quadrature on `[a, b]`; robust to algebraic endpoint singularities.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let h = 1.0 / 64.0;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for k in -256..=256 {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let x = u.tanh();
        let w = 0.5 * PI * t.cosh() / u.cosh().powi(2);
        // Distance to the nearer endpoint, computed without cancellation.
        let gap = half / (u.abs().exp() * u.cosh());
        if gap <= 0.0 || !w.is_finite() {
            continue;
        }
        let point = if x < 0.0 {
            a + gap
        } else if x > 0.0 {
            b - gap
        } else {
            mid
        };
        if point <= a || point >= b {
            continue;
        }
        sum += w * f(point);
    }
    sum * h * half
}

/// Piecewise tanh-sinh over `[a, b]` split at `breaks`.
pub fn tanh_sinh_breaks<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    points.push(a);
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.windows(2).map(|w| tanh_sinh(&f, w[0], w[1])).sum()
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// `κ_d`, the normalising constant of the Poisson kernel.
pub fn poisson_kappa(d: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    gamma(h) / PI.powf(h)
}

/// The Poisson kernel at time 1.
pub fn poisson_p1(d: usize, r: f64) -> f64 {
    poisson_kappa(d) / (1.0 + r * r).powf((d as f64 + 1.0) / 2.0)
}

/// `C_{α,d}`, the coefficient of `|x|^{-d-α}` in the stable tail.
pub fn stable_tail_constant(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    alpha
        * 2f64.powf(alpha - 1.0)
        * PI.powf(-1.0 - df / 2.0)
        * (PI * alpha / 2.0).sin()
        * gamma((df + alpha) / 2.0)
        * gamma(alpha / 2.0)
}

/// `∫_0^∞ r^d p_1(r) dr` for the stable kernel with `α ∈ (1, 2)`.
pub fn stable_first_moment(alpha: f64, d: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    gamma(h) * PI.powf(-h) * gamma(1.0 - 1.0 / alpha)
}

/// Covariance of the unit disk at distance `a`: the lens area.
pub fn disk_covariance(a: f64) -> f64 {
    if a >= 2.0 {
        return 0.0;
    }
    2.0 * (a / 2.0).acos() - 0.5 * a * (4.0 - a * a).sqrt()
}

/// Covariance of the unit ball in `R^3` at distance `a`.
pub fn ball3_covariance(a: f64) -> f64 {
    if a >= 2.0 {
        return 0.0;
    }
    PI / 12.0 * (4.0 + a) * (2.0 - a).powi(2)
}

/// Covariance of an axis-aligned box.
pub fn box_covariance(sides: &[f64], y: &[f64]) -> f64 {
    sides.iter().zip(y).map(|(l, v)| (l - v.abs()).max(0.0)).product()
}

/// Writes one status line past the test harness output capture.
pub fn report(id: u32, name: &str, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    let line = format!("[{status}] criterion {id:>2}: {name}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}
