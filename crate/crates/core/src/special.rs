//! Special functions: ball/sphere constants, Gamma, and Hankel functions of
//! the first kind in the upper half plane.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Volume of the unit ball in `R^d`, `π^{d/2} / Γ(1 + d/2)`.
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::domain("unit_ball_volume requires d >= 1"));
    }
    Ok(unit_ball_volume_unchecked(d))
}

pub(crate) fn unit_ball_volume_unchecked(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    // Γ(1 + d/2) by recurrence keeps integer and half-integer cases exact to rounding.
    let mut g = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() / 2.0 };
    let mut k = if d.is_multiple_of(2) { 1.0 } else { 1.5 };
    while k < half + 1.0 - 1e-9 {
        k += 1.0;
        g *= k - 1.0;
    }
    PI.powf(half) / g
}

/// Surface area of the unit sphere `S^{d-1}`, `A_d = d·w_d`.
pub fn unit_sphere_area(d: usize) -> Result<f64> {
    Ok(d as f64 * unit_ball_volume(d)?)
}

pub(crate) fn unit_sphere_area_unchecked(d: usize) -> f64 {
    d as f64 * unit_ball_volume_unchecked(d)
}

/// `exp(w) - 1` without cancellation for small `|w|`.
pub fn expm1_complex(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let half_sin = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * half_sin * half_sin, a.exp() * b.sin())
}

/// Hankel function `H_ν^{(1)}(z)` for `0 < arg z < π`.
///
/// Half-integer orders use the terminating spherical form; other orders use
/// the trapezoid rule on `H_ν(z) = (2 e^{-iνπ/2} / (πi)) ∫_0^∞ e^{iz cosh t} cosh(νt) dt`,
/// which converges geometrically because the integrand is entire and decays
/// doubly exponentially.
pub fn hankel1(nu: f64, z: Complex64) -> Complex64 {
    let twice = 2.0 * nu;
    if (twice - twice.round()).abs() < 1e-12 && (twice.round() as i64) % 2 != 0 && nu > 0.0 {
        return hankel1_half_integer((nu - 0.5).round() as usize, z);
    }
    if (nu - nu.round()).abs() < 1e-12 && nu >= 0.0 && z.norm() < 3.0 {
        return hankel1_integer_series(nu.round() as usize, z);
    }
    if z.norm() >= 20.0 + nu * nu {
        if let Some(h) = hankel1_asymptotic(nu, z) {
            return h;
        }
    }
    hankel1_trapezoid(nu, z)
}

/// Ascending series `J_n + i Y_n` for integer order and small `|z|`.
fn hankel1_integer_series(n: usize, z: Complex64) -> Complex64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let half = z / 2.0;
    let q = -(half * half);
    let n_factorial: f64 = (1..=n).map(|j| j as f64).product();
    let half_pow_n = half.powu(n as u32);
    // ψ(k+1) = -γ + H_k
    let mut psi_k = -EULER_GAMMA;
    let mut psi_nk = -EULER_GAMMA + (1..=n).map(|j| 1.0 / j as f64).sum::<f64>();
    let mut term = Complex64::new(1.0 / n_factorial, 0.0);
    let mut j_sum = term;
    let mut y_sum = term * (psi_k + psi_nk);
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (n as f64 + kf));
        psi_k += 1.0 / kf;
        psi_nk += 1.0 / (n as f64 + kf);
        j_sum += term;
        y_sum += term * (psi_k + psi_nk);
        if term.norm() < 1e-18 * j_sum.norm().max(1e-300) {
            break;
        }
    }
    let j = half_pow_n * j_sum;
    let mut finite = Complex64::new(0.0, 0.0);
    if n > 0 {
        let mut factor = Complex64::new((1..n).map(|j| j as f64).product::<f64>(), 0.0);
        let w = half * half;
        for k in 0..n {
            if k > 0 {
                factor *= w / (k as f64 * (n - k) as f64);
            }
            finite += factor;
        }
        finite /= half_pow_n;
    }
    let y = (2.0 / PI) * j * half.ln() - finite / PI - half_pow_n * y_sum / PI;
    j + Complex64::i() * y
}

/// Hankel's large-argument expansion, summed until the terms stop decreasing.
fn hankel1_asymptotic(nu: f64, z: Complex64) -> Option<Complex64> {
    let mu = 4.0 * nu * nu;
    let step = Complex64::i() / (8.0 * z);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * step * ((mu - odd * odd) / kf);
        if next.norm() > term.norm() {
            return None;
        }
        sum += next;
        term = next;
        if term.norm() < 1e-17 * sum.norm() {
            let phase = (Complex64::i() * (z - (nu / 2.0 + 0.25) * PI)).exp();
            return Some((2.0 / (PI * z)).sqrt() * phase * sum);
        }
    }
    None
}

fn hankel1_half_integer(n: usize, z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let inv = i / (2.0 * z);
    for k in 0..=n {
        if k > 0 {
            // (n+k)!/(k!(n-k)!) ratio update
            let kf = k as f64;
            term *= inv * ((n as f64 + kf) * (n as f64 - kf + 1.0) / kf);
        }
        sum += term;
    }
    let phase = (i * (z - (n as f64 + 1.0) * FRAC_PI_2)).exp();
    (2.0 / (PI * z)).sqrt() * phase * sum
}

fn hankel1_trapezoid(nu: f64, z: Complex64) -> Complex64 {
    let arg = z.arg();
    let modulus = z.norm();
    let phi = arg.min(PI - arg).max(1e-3);
    // Half-width of the analyticity strip used for the error estimate. On the
    // shifted lines the exponent is bounded below by |z| sqrt(sin(φ-δ) sin(φ+δ)).
    let delta = 0.5 * phi.min(1.0);
    let loss = modulus * (phi.sin() - ((phi - delta).sin() * (phi + delta).sin()).sqrt());
    let h = 2.0 * PI * delta / (40.0 + loss);
    let damping = modulus * arg.sin();
    // Truncate where the integrand has fallen by e^{-45} relative to t = 0.
    let t0 = (1.0 + 45.0 / damping).acosh();
    let t_max = (1.0 + (45.0 + nu.abs() * (t0 + 1.0)) / damping).acosh() + h;
    let steps = (t_max / h).ceil() as usize;
    let iz = Complex64::i() * z;
    let mut sum = 0.5 * iz.exp();
    for k in 1..=steps {
        let t = k as f64 * h;
        sum += (iz * t.cosh()).exp() * (nu * t).cosh();
    }
    let prefactor = 2.0 * (Complex64::new(0.0, -nu * FRAC_PI_2)).exp() / (PI * Complex64::i());
    prefactor * sum * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1).unwrap() - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2).unwrap() - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4).unwrap() - PI * PI / 2.0).abs() < 1e-14);
        assert!(unit_ball_volume(0).is_err());
    }

    #[test]
    fn ball_volume_matches_gamma_formula() {
        for d in 1..=12 {
            let via_gamma = PI.powf(d as f64 / 2.0) / gamma(1.0 + d as f64 / 2.0);
            let v = unit_ball_volume(d).unwrap();
            assert!((v - via_gamma).abs() < 1e-13 * v, "d={d}");
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3).unwrap() - 4.0 * PI).abs() < 1e-14);
        for d in 1..=10 {
            let ratio = unit_sphere_area(d).unwrap() / (d as f64 * unit_ball_volume(d).unwrap());
            assert_eq!(ratio, 1.0);
        }
        assert!(unit_sphere_area(0).is_err());
    }

    #[test]
    fn expm1_small_argument() {
        let w = Complex64::new(1e-12, -2e-12);
        let e = expm1_complex(w);
        // e^a cos b - 1 = a + a²/2 - b²/2 + O(|w|^3)
        assert!((e.re - (1e-12 - 1.5e-24)).abs() < 1e-27);
        assert!((e.im - (-2e-12 - 2e-24)).abs() < 1e-27);
        let w = Complex64::new(0.3, 1.1);
        let direct = w.exp() - 1.0;
        assert!((expm1_complex(w) - direct).norm() < 1e-15);
    }

    // K_0 reference values (Abramowitz & Stegun table 9.8).
    #[test]
    fn hankel_zero_on_imaginary_axis_is_k0() {
        for (x, k0) in [(0.5, 0.924_419_071_2), (1.0, 0.421_024_438_2), (2.0, 0.113_893_872_7)] {
            let h = hankel1(0.0, Complex64::new(0.0, x));
            let expected = Complex64::new(0.0, -2.0 / PI * k0);
            assert!((h - expected).norm() < 1e-9, "x={x}: {h}");
        }
    }

    #[test]
    fn trapezoid_matches_half_integer_closed_form() {
        for &(r, th) in &[(0.01, 0.4), (0.7, 0.5), (3.0, 0.3), (25.0, 0.8), (1e-6, 1.2)] {
            let z = Complex64::from_polar(r, th);
            for nu in [0.5, 1.5] {
                let exact = hankel1(nu, z);
                let quad = hankel1_trapezoid(nu, z);
                assert!(
                    (exact - quad).norm() <= 1e-12 * exact.norm(),
                    "nu={nu} z={z}: {exact} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn series_matches_trapezoid() {
        for &(r, th) in &[(1e-4, 0.4), (0.3, 1.0), (1.0, 0.2), (2.9, 2.5), (2.5, 0.5)] {
            let z = Complex64::from_polar(r, th);
            for n in [0usize, 1, 2, 3] {
                let a = hankel1_integer_series(n, z);
                let q = hankel1_trapezoid(n as f64, z);
                assert!((a - q).norm() <= 1e-12 * q.norm(), "n={n} z={z}: {a} vs {q}");
            }
        }
    }

    #[test]
    fn asymptotic_matches_trapezoid() {
        for &(r, th) in &[(20.0, 0.4), (45.0, 1.0), (300.0, 0.2), (25.0, 2.5)] {
            let z = Complex64::from_polar(r, th);
            for nu in [0.0, 1.0, 2.0, 0.3] {
                let a = hankel1_asymptotic(nu, z).unwrap();
                let q = hankel1_trapezoid(nu, z);
                assert!((a - q).norm() <= 1e-12 * q.norm(), "nu={nu} z={z}: {a} vs {q}");
            }
        }
    }

    #[test]
    fn hankel_recurrence() {
        // H_{ν-1} + H_{ν+1} = (2ν/z) H_ν
        let z = Complex64::from_polar(2.3, 0.6);
        let lhs = hankel1(0.0, z) + hankel1(2.0, z);
        let rhs = 2.0 / z * hankel1(1.0, z);
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }
}
