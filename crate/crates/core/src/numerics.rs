//! Small numerical building blocks: limit extrapolation, interpolation, fits.

use crate::error::{Error, Result};

/// Neville's algorithm: value at `x = 0` of the polynomial through `(xs[i], ys[i])`.
/// Returns the extrapolated value and the difference between the last two
/// tableau diagonals as an error estimate.
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len().min(ys.len());
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mut p = ys[..n].to_vec();
    let mut previous = p[n - 1];
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
        if level < n - 1 {
            previous = p[0];
        }
    }
    (p[0], (p[0] - previous).abs())
}

/// Least-squares line `y = a + b·x`; returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::domain("linear fit needs at least two points"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("linear fit with identical abscissae"));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::domain("PCHIP needs at least two matching samples"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("PCHIP abscissae must be strictly increasing"));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        slopes[0] = end_slope(
            h[0],
            h.get(1).copied().unwrap_or(h[0]),
            delta[0],
            delta.get(1).copied().unwrap_or(delta[0]),
        );
        slopes[n - 1] = end_slope(
            h[n - 2],
            if n > 2 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n > 2 { delta[n - 3] } else { delta[n - 2] },
        );
        Ok(Self { xs, ys, slopes })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (h00, h10, h01, h11) = hermite_basis(s);
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

/// Cubic spline on a uniform grid with a prescribed first derivative at the
/// left end and a natural right end.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl UniformSpline {
    pub fn new(x0: f64, h: f64, ys: Vec<f64>, left_slope: f64) -> Result<Self> {
        let n = ys.len();
        if n < 3 || !(h > 0.0) {
            return Err(Error::domain("spline needs at least three samples and a positive step"));
        }
        // Tridiagonal system for the second derivatives.
        let mut diag = vec![4.0; n];
        let mut rhs = vec![0.0; n];
        let upper = vec![1.0; n];
        let lower = vec![1.0; n];
        diag[0] = 2.0;
        rhs[0] = 6.0 * ((ys[1] - ys[0]) / h - left_slope) / h;
        for i in 1..n - 1 {
            rhs[i] = 6.0 * (ys[i + 1] - 2.0 * ys[i] + ys[i - 1]) / (h * h);
        }
        diag[n - 1] = 1.0;
        rhs[n - 1] = 0.0;
        let mut lower = lower;
        lower[n - 1] = 0.0;
        // Thomas algorithm.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = upper[0] / diag[0];
        d[0] = rhs[0] / diag[0];
        for i in 1..n {
            let up = if i < n - 1 { upper[i] } else { 0.0 };
            let m = diag[i] - lower[i] * c[i - 1];
            c[i] = up / m;
            d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
        }
        let mut second = vec![0.0; n];
        second[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            second[i] = d[i] - c[i] * second[i + 1];
        }
        Ok(Self { x0, h, ys, second })
    }

    pub fn end(&self) -> f64 {
        self.x0 + self.h * (self.ys.len() - 1) as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.ys.len();
        let u = ((x - self.x0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        let s = u - i as f64;
        let a = 1.0 - s;
        let h2 = self.h * self.h / 6.0;
        a * self.ys[i]
            + s * self.ys[i + 1]
            + ((a * a * a - a) * self.second[i] + (s * s * s - s) * self.second[i + 1]) * h2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neville_recovers_polynomial_limit() {
        let xs = [0.1, 0.05, 0.025, 0.0125];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x + 0.5 * x * x).collect();
        let (v, e) = neville_at_zero(&xs, &ys);
        assert!((v - 3.0).abs() < 1e-12);
        assert!(e < 1e-10);
    }

    #[test]
    fn line_fit_is_exact_on_lines() {
        let (a, b) = linear_fit(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]).unwrap();
        assert!((a - 1.0).abs() < 1e-14 && (b - 2.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn pchip_preserves_monotone_data() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.min(1.0)).collect();
        let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
        let mut last = -1.0;
        for k in 0..=300 {
            let v = p.eval(k as f64 * 0.009);
            assert!(v >= last - 1e-15 && v <= 1.0 + 1e-15);
            last = v;
        }
        for (x, y) in xs.iter().zip(&ys) {
            assert!((p.eval(*x) - y).abs() < 1e-15);
        }
    }

    #[test]
    fn spline_accuracy() {
        let h = 0.01;
        let ys: Vec<f64> = (0..300).map(|i| (i as f64 * h).cos()).collect();
        let s = UniformSpline::new(0.0, h, ys, 0.0).unwrap();
        for k in 0..250 {
            let x = k as f64 * 0.0113;
            assert!((s.eval(x) - x.cos()).abs() < 1e-9, "x={x}");
        }
    }
}
