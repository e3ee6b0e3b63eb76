//! Radial heat kernels `p_t(x) = t^β p_1(t^{-γ} x)`.
//!
//! Four families are supported: the Gaussian kernel, the Poisson (Cauchy)
//! kernel, general rotationally invariant α-stable kernels, and the
//! algebraic family `κ / (1 + |x|^n)^m` with `d - n·m = -1`.
//!
//! Stable densities have no closed form for `α != 1`. They are evaluated by
//! reducing the `d`-dimensional Fourier inversion of `exp(-|ξ|^α)` to the
//! Hankel-type integral
//!
//! ```text
//! p_1(r) = (2π)^{-d/2} r^{1-d/2} ∫_0^∞ k^{d/2} exp(-k^α) J_{d/2-1}(kr) dk
//! ```
//!
//! and integrating along a ray `k = u·e^{iθ}` in the upper half plane, where
//! `J_ν = Re H_ν^{(1)}` on the real axis and `H_ν^{(1)}(kr)` decays
//! exponentially. For `r >= 1` the constant part of `exp(-k^α) = 1 + (exp(-k^α) - 1)`
//! is dropped (its contribution is purely imaginary), which keeps full
//! relative precision in the power-law tail.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_breaks, integrate_fallible, QuadResult, QuadratureConfig, Tolerance};
use crate::special::{expm1_complex, gamma, hankel1, unit_sphere_area_unchecked};

/// Heat kernel family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Poisson,
    Stable {
        alpha: f64,
    },
    PolyFamily {
        kappa: f64,
        n: f64,
        m: f64,
        beta: f64,
        gamma: f64,
    },
}

/// A validated kernel: family plus ambient dimension `d >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub dimension: usize,
}

/// Exponents of the scaling law `p_t(x) = t^β p_1(t^{-γ}x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub beta: f64,
    pub gamma: f64,
}

impl ScalingExponents {
    /// `β + dγ`, the exponent of `‖p_t‖_1 / ‖p_1‖_1`.
    pub fn mass_exponent(&self, d: usize) -> f64 {
        self.beta + d as f64 * self.gamma
    }
}

/// Leading large-`r` behaviour `p_1(r) ≈ coefficient · r^{-d-decay}`; the
/// next correction is smaller by a factor `r^{-gap}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailLaw {
    pub coefficient: f64,
    pub decay: f64,
    pub gap: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dimension: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::domain(format!("kernel dimension must be >= 2, got {dimension}")));
        }
        match family {
            KernelFamily::Stable { alpha } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(Error::domain(format!("stable index must lie in (0, 2), got {alpha}")));
                }
            }
            KernelFamily::PolyFamily {
                kappa,
                n,
                m,
                gamma,
                beta,
            } => {
                if !(kappa > 0.0 && n > 0.0 && m > 0.0 && gamma > 0.0) || !beta.is_finite() {
                    return Err(Error::domain("poly family requires kappa, n, m, gamma > 0"));
                }
                if (dimension as f64 - n * m + 1.0).abs() > 1e-12 {
                    return Err(Error::domain(format!(
                        "poly family requires d - n·m = -1, got d={dimension}, n·m={}",
                        n * m
                    )));
                }
            }
            KernelFamily::Gaussian | KernelFamily::Poisson => {}
        }
        Ok(Self { family, dimension })
    }

    pub fn gaussian(d: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, d)
    }

    pub fn poisson(d: usize) -> Result<Self> {
        Self::new(KernelFamily::Poisson, d)
    }

    pub fn stable(alpha: f64, d: usize) -> Result<Self> {
        Self::new(KernelFamily::Stable { alpha }, d)
    }

    pub fn poly_family(d: usize, kappa: f64, n: f64, m: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(
            KernelFamily::PolyFamily {
                kappa,
                n,
                m,
                beta,
                gamma,
            },
            d,
        )
    }

    /// The Poisson kernel written as a member of the algebraic family.
    pub fn poisson_as_poly_family(d: usize) -> Result<Self> {
        let df = d as f64;
        Self::poly_family(d, poisson_constant(d)?, 2.0, (df + 1.0) / 2.0, -df, 1.0)
    }

    /// Stability index: 2 for Gaussian, 1 for Poisson, `None` for the algebraic family.
    pub fn alpha(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian => Some(2.0),
            KernelFamily::Poisson => Some(1.0),
            KernelFamily::Stable { alpha } => Some(alpha),
            KernelFamily::PolyFamily { .. } => None,
        }
    }

    pub fn scaling(&self) -> ScalingExponents {
        let d = self.dimension as f64;
        match self.family {
            KernelFamily::PolyFamily { beta, gamma, .. } => ScalingExponents { beta, gamma },
            _ => {
                let alpha = self.alpha().unwrap_or(2.0);
                ScalingExponents {
                    beta: -d / alpha,
                    gamma: 1.0 / alpha,
                }
            }
        }
    }

    /// Closed-form `‖p_1‖_1`.
    pub fn l1_norm_closed_form(&self) -> f64 {
        match self.family {
            KernelFamily::PolyFamily { kappa, n, m, .. } => {
                let d = self.dimension as f64;
                let a = d / n;
                let b = m - a;
                unit_sphere_area_unchecked(self.dimension) * kappa * gamma(a) * gamma(b) / gamma(a + b) / n
            }
            _ => 1.0,
        }
    }

    pub fn tail_law(&self) -> Option<TailLaw> {
        let d = self.dimension as f64;
        match self.family {
            KernelFamily::Gaussian => None,
            KernelFamily::Poisson => Some(TailLaw {
                coefficient: poisson_constant_unchecked(self.dimension),
                decay: 1.0,
                gap: 2.0,
            }),
            KernelFamily::Stable { alpha } => Some(TailLaw {
                coefficient: stable_tail_constant_unchecked(alpha, self.dimension),
                decay: alpha,
                gap: alpha,
            }),
            KernelFamily::PolyFamily { kappa, n, m, .. } => Some(TailLaw {
                coefficient: kappa,
                decay: n * m - d,
                gap: n,
            }),
        }
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.family, KernelFamily::Stable { .. })
    }

    pub fn label(&self) -> String {
        match self.family {
            KernelFamily::Gaussian => format!("gaussian(d={})", self.dimension),
            KernelFamily::Poisson => format!("poisson(d={})", self.dimension),
            KernelFamily::Stable { alpha } => format!("stable(alpha={alpha}, d={})", self.dimension),
            KernelFamily::PolyFamily { kappa, n, m, .. } => {
                format!("poly(kappa={kappa}, n={n}, m={m}, d={})", self.dimension)
            }
        }
    }
}

/// `κ_d = Γ((d+1)/2) / π^{(d+1)/2}`, the Poisson kernel normalisation.
pub fn poisson_constant(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain("poisson_constant requires d >= 2"));
    }
    Ok(poisson_constant_unchecked(d))
}

fn poisson_constant_unchecked(d: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    gamma(h) / PI.powf(h)
}

/// `C_{α,d} = α 2^{α-1} π^{-1-d/2} sin(πα/2) Γ((d+α)/2) Γ(α/2)`, the constant in
/// `p_t(x) / t → C_{α,d} |x|^{-d-α}` as `t → 0`.
pub fn stable_tail_constant(alpha: f64, d: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain(format!("stable index must lie in (0, 2), got {alpha}")));
    }
    if d < 2 {
        return Err(Error::domain("stable_tail_constant requires d >= 2"));
    }
    Ok(stable_tail_constant_unchecked(alpha, d))
}

fn stable_tail_constant_unchecked(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    alpha
        * 2f64.powf(alpha - 1.0)
        * PI.powf(-1.0 - df / 2.0)
        * (PI * alpha / 2.0).sin()
        * gamma((df + alpha) / 2.0)
        * gamma(alpha / 2.0)
}

/// A density value together with its quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityValue {
    pub value: f64,
    pub error: f64,
    /// A slightly negative Fourier value was clamped to zero.
    pub clamped: bool,
}

/// `p_1(r·e_d)`.
pub fn eval_p1(spec: &KernelSpec, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(eval_p1_detailed(spec, r, cfg)?.value)
}

pub fn eval_p1_detailed(spec: &KernelSpec, r: f64, cfg: &QuadratureConfig) -> Result<DensityValue> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("radius must be nonnegative, got {r}")));
    }
    let d = spec.dimension as f64;
    let exact = |value: f64| DensityValue {
        value,
        error: 0.0,
        clamped: false,
    };
    match spec.family {
        KernelFamily::Gaussian => Ok(exact((4.0 * PI).powf(-d / 2.0) * (-r * r / 4.0).exp())),
        KernelFamily::Poisson => {
            let kappa = poisson_constant_unchecked(spec.dimension);
            Ok(exact(kappa * (1.0 + r * r).powf(-(d + 1.0) / 2.0)))
        }
        KernelFamily::PolyFamily { kappa, n, m, .. } => Ok(exact(kappa * (1.0 + r.powf(n)).powf(-m))),
        KernelFamily::Stable { alpha } => stable_density(alpha, spec.dimension, r, cfg),
    }
}

/// `p_t(r·e_d) = t^β p_1(t^{-γ} r)`.
pub fn eval_pt(spec: &KernelSpec, t: f64, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("time must be positive, got {t}")));
    }
    let s = spec.scaling();
    Ok(t.powf(s.beta) * eval_p1(spec, t.powf(-s.gamma) * r, cfg)?)
}

fn stable_density_at_origin(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    unit_sphere_area_unchecked(d) * (2.0 * PI).powf(-df) * gamma(df / alpha) / alpha
}

/// Two-sided envelope `min(p_1(0), C r^{-d-α})` used to scale absolute tolerances.
fn stable_envelope(alpha: f64, d: usize, r: f64) -> f64 {
    let at_origin = stable_density_at_origin(alpha, d);
    if r == 0.0 {
        return at_origin;
    }
    at_origin.min(stable_tail_constant_unchecked(alpha, d) * r.powf(-(d as f64) - alpha))
}

fn stable_density(alpha: f64, d: usize, r: f64, cfg: &QuadratureConfig) -> Result<DensityValue> {
    if r == 0.0 {
        return Ok(DensityValue {
            value: stable_density_at_origin(alpha, d),
            error: 0.0,
            clamped: false,
        });
    }
    let df = d as f64;
    let envelope = stable_envelope(alpha, d, r);
    let rel = (cfg.rel_tol * 1e-2).max(1e-13);
    let abs_density = cfg.abs_tol * envelope;
    let log_budget = -(cfg.abs_tol.min(1e-3)).ln() + 30.0;

    let result = if d == 3 && r < 0.25 {
        // Real axis, elementary Bessel function: p = (2π² r)^{-1} ∫ k e^{-k^α} sin(kr) dk.
        let prefactor = 1.0 / (2.0 * PI * PI * r);
        let cutoff = cfg
            .oscillatory_truncation
            .unwrap_or_else(|| log_budget.powf(1.0 / alpha));
        let tol = Tolerance::new(abs_density / prefactor, rel);
        let periods = (cutoff * r / (2.0 * PI)).ceil().max(1.0) as usize;
        let breaks: Vec<f64> = (1..periods.min(512))
            .map(|j| j as f64 * cutoff / periods.min(512) as f64)
            .collect();
        integrate_breaks(
            |k: f64| k * (-k.powf(alpha)).exp() * (k * r).sin(),
            0.0,
            cutoff,
            &breaks,
            tol,
            cfg.max_subdivisions,
        )
        .scaled(prefactor)
    } else {
        let nu = df / 2.0 - 1.0;
        let theta = (PI / 3.0).min(PI / (4.0 * alpha));
        let rotation = Complex64::from_polar(1.0, theta);
        let subtract = r >= 1.0;
        let damping = r * theta.sin();
        let mut cutoff = (45.0 + nu.abs() * 2.0) / damping;
        if !subtract {
            let spectral = cfg
                .oscillatory_truncation
                .unwrap_or_else(|| (log_budget / (alpha * theta).cos()).powf(1.0 / alpha));
            cutoff = cutoff.min(spectral);
        }
        let prefactor = (2.0 * PI).powf(-df / 2.0) * r.powf(1.0 - df / 2.0);
        let tol = Tolerance::new(abs_density / prefactor, rel);
        let alpha_phase = Complex64::from_polar(1.0, alpha * theta);
        let half_d_phase = Complex64::from_polar(1.0, df * theta / 2.0);
        let integrand = |u: f64| -> f64 {
            if u == 0.0 {
                return 0.0;
            }
            let k = rotation * u;
            let w = -(alpha_phase * u.powf(alpha));
            let spectral = if subtract { expm1_complex(w) } else { w.exp() };
            let power = half_d_phase * u.powf(df / 2.0);
            (rotation * power * spectral * hankel1(nu, k * r)).re
        };
        // Breaks at the decay scales of both factors help the first subdivision.
        let breaks = [1.0 / damping, 0.1 / damping, 1.0, 0.1];
        integrate_breaks(integrand, 0.0, cutoff, &breaks, tol, cfg.max_subdivisions).scaled(prefactor)
    };

    let result = result.require("stable density Fourier inversion")?;
    let mut value = result.value;
    let mut clamped = false;
    if value < 0.0 {
        if value >= -10.0 * abs_density {
            value = 0.0;
            clamped = true;
        } else {
            return Err(Error::NegativeDensity { r, value });
        }
    }
    Ok(DensityValue {
        value,
        error: result.error,
        clamped,
    })
}

/// `∫_0^∞ r^power p_1(r) dr`, split at `tail_split_radius`, continued in `ln r`
/// and closed with the leading power law of the tail.
pub(crate) fn radial_moment(spec: &KernelSpec, power: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    let head_end = cfg.tail_split_radius;
    let head = radial_segment(spec, power, 0.0, head_end, cfg)?;
    Ok(head.combine(radial_tail(spec, power, head_end, cfg)?))
}

/// `∫_from^∞ r^power p_1(r) dr`.
pub(crate) fn radial_tail(spec: &KernelSpec, power: f64, from: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    let d = spec.dimension as f64;
    match spec.tail_law() {
        None => {
            // Gaussian: negligible beyond r = 60.
            let end = 60f64.max(from);
            radial_segment_log(spec, power, from, end, cfg)
        }
        Some(law) => {
            let exponent = d + law.decay - power - 1.0;
            if exponent <= 0.0 {
                return Err(Error::DivergentMoment(format!(
                    "r^{power} p_1(r) decays like r^{} at infinity",
                    -(exponent + 1.0)
                )));
            }
            let far = from.max((1e2 / cfg.rel_tol.min(1e-6)).powf(1.0 / law.gap));
            let body = radial_segment_log(spec, power, from, far, cfg)?;
            let remainder = law.coefficient * far.powf(-exponent) / exponent;
            // The neglected correction is O(far^{-gap}) relative to the remainder.
            let remainder_err = remainder.abs() * far.powf(-law.gap) * 10.0;
            Ok(body.combine(QuadResult {
                value: remainder,
                error: remainder_err,
                evaluations: 0,
                intervals: 0,
                converged: true,
            }))
        }
    }
}

fn radial_segment(spec: &KernelSpec, power: f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    integrate_fallible(
        |r| Ok(r.powf(power) * eval_p1(spec, r, cfg)?),
        a,
        b,
        &[0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
        Tolerance::new(cfg.abs_tol * 1e-2, cfg.rel_tol * 1e-1),
        cfg.max_subdivisions,
        "radial kernel integral",
    )
}

fn radial_segment_log(spec: &KernelSpec, power: f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    if b <= a {
        return Ok(QuadResult::zero());
    }
    let (la, lb) = (a.ln(), b.ln());
    let pieces = ((lb - la) / 2.0).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (1..pieces).map(|j| la + (lb - la) * j as f64 / pieces as f64).collect();
    integrate_fallible(
        |s| {
            let r = s.exp();
            Ok(r.powf(power + 1.0) * eval_p1(spec, r, cfg)?)
        },
        la,
        lb,
        &breaks,
        Tolerance::new(cfg.abs_tol * 1e-4, cfg.rel_tol * 1e-1),
        cfg.max_subdivisions,
        "radial kernel tail integral",
    )
}

/// `‖p_1‖_1 = A_d ∫_0^∞ r^{d-1} p_1(r) dr` by quadrature.
pub fn l1_norm(spec: &KernelSpec, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(l1_norm_detailed(spec, cfg)?.value)
}

pub fn l1_norm_detailed(spec: &KernelSpec, cfg: &QuadratureConfig) -> Result<QuadResult> {
    cfg.validate()?;
    let area = unit_sphere_area_unchecked(spec.dimension);
    Ok(radial_moment(spec, spec.dimension as f64 - 1.0, cfg)?.scaled(area))
}

fn ensure_finite_moment(spec: &KernelSpec) -> Result<()> {
    match spec.family {
        KernelFamily::Gaussian => Ok(()),
        KernelFamily::Stable { alpha } if alpha > 1.0 => Ok(()),
        KernelFamily::Stable { alpha } => Err(Error::DivergentMoment(format!(
            "stable index {alpha} <= 1: r^d p_1(r) is not integrable"
        ))),
        KernelFamily::Poisson => Err(Error::DivergentMoment("Poisson kernel (index 1)".into())),
        KernelFamily::PolyFamily { .. } => Err(Error::DivergentMoment(
            "algebraic family with d - n·m = -1 decays like r^{-1}".into(),
        )),
    }
}

/// `∫_0^∞ r^d p_1(r e_d) dr` by quadrature. Finite only for Gaussian and
/// stable kernels with index in (1, 2).
pub fn moment_d(spec: &KernelSpec, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(moment_d_detailed(spec, cfg)?.value)
}

pub fn moment_d_detailed(spec: &KernelSpec, cfg: &QuadratureConfig) -> Result<QuadResult> {
    cfg.validate()?;
    ensure_finite_moment(spec)?;
    radial_moment(spec, spec.dimension as f64, cfg)
}

/// Closed form `Γ((d+1)/2) π^{-(d+1)/2} Γ(1 - 1/α)` of the same moment.
pub fn moment_d_closed_form(spec: &KernelSpec) -> Result<f64> {
    ensure_finite_moment(spec)?;
    let alpha = spec.alpha().unwrap_or(2.0);
    let h = (spec.dimension as f64 + 1.0) / 2.0;
    Ok(gamma(h) * PI.powf(-h) * gamma(1.0 - 1.0 / alpha))
}

/// Small-time tail behaviour of a stable kernel on sampled `(t, r)` points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundReport {
    pub alpha: f64,
    pub dimension: usize,
    pub tail_constant: f64,
    pub smallest_t: f64,
    /// `(r, p_t(r) / (t C r^{-d-α}))` at the smallest `t`.
    pub limit_ratios: Vec<(f64, f64)>,
    pub max_limit_deviation: f64,
    /// Smallest `c` with `c^{-1} E <= p_t <= c E` on all samples, `E = min(t^{-d/α}, t r^{-d-α})`.
    pub envelope_constant: f64,
}

pub fn tail_bound_check(
    spec: &KernelSpec,
    t_grid: &[f64],
    r_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<TailBoundReport> {
    let KernelFamily::Stable { alpha } = spec.family else {
        return Err(Error::regime("tail_bound_check applies to stable kernels only"));
    };
    if t_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::domain("tail_bound_check needs nonempty grids"));
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::domain("tail_bound_check needs positive t and r"));
    }
    let d = spec.dimension as f64;
    let c = stable_tail_constant_unchecked(alpha, spec.dimension);
    let smallest_t = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let mut limit_ratios = Vec::with_capacity(r_grid.len());
    let mut envelope_constant: f64 = 1.0;
    for &r in r_grid {
        for &t in t_grid {
            let p = eval_pt(spec, t, r, cfg)?;
            let envelope = t.powf(-d / alpha).min(t * r.powf(-d - alpha));
            if p > 0.0 {
                envelope_constant = envelope_constant.max(p / envelope).max(envelope / p);
            } else {
                envelope_constant = f64::INFINITY;
            }
            if t == smallest_t {
                limit_ratios.push((r, p / (t * c * r.powf(-d - alpha))));
            }
        }
    }
    let max_limit_deviation = limit_ratios.iter().map(|(_, q)| (q - 1.0).abs()).fold(0.0, f64::max);
    Ok(TailBoundReport {
        alpha,
        dimension: spec.dimension,
        tail_constant: c,
        smallest_t,
        limit_ratios,
        max_limit_deviation,
        envelope_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::stable(0.0, 2).is_err());
        assert!(KernelSpec::stable(2.0, 2).is_err());
        assert!(KernelSpec::stable(1.5, 1).is_err());
        assert!(KernelSpec::poly_family(2, 1.0, 2.0, 1.0, -2.0, 1.0).is_err());
        assert!(KernelSpec::poly_family(2, 1.0, 2.0, 1.5, -2.0, 1.0).is_ok());
    }

    #[test]
    fn scaling_exponents_of_stable_family() {
        for (alpha, d) in [(0.5, 2), (1.0, 3), (1.7, 4)] {
            let s = KernelSpec::stable(alpha, d).unwrap().scaling();
            assert!((s.beta + d as f64 / alpha).abs() < 1e-15);
            assert!((s.gamma - 1.0 / alpha).abs() < 1e-15);
            assert!(s.mass_exponent(d).abs() < 1e-14);
        }
    }

    #[test]
    fn poisson_constants() {
        assert!((poisson_constant(2).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((poisson_constant(3).unwrap() - 1.0 / (PI * PI)).abs() < 1e-15);
        assert!(poisson_constant(1).is_err());
        for d in [2, 3, 5] {
            let prod = poisson_constant(d).unwrap() * crate::special::unit_ball_volume_unchecked(d - 1);
            assert!((prod - 1.0 / PI).abs() < 1e-14, "d={d}");
        }
    }

    #[test]
    fn tail_constant_matches_poisson_at_index_one() {
        for d in [2, 3, 5] {
            let c = stable_tail_constant(1.0, d).unwrap();
            assert!((c - poisson_constant(d).unwrap()).abs() < 1e-12 * c);
        }
        for alpha in [0.3, 0.9, 1.7] {
            for d in [2, 3] {
                assert!(stable_tail_constant(alpha, d).unwrap() > 0.0);
            }
        }
        assert!(stable_tail_constant(2.0, 2).is_err());
    }

    #[test]
    fn closed_form_values() {
        let g = KernelSpec::gaussian(2).unwrap();
        assert!((eval_p1(&g, 0.0, &cfg()).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);
        let v = eval_pt(&g, 0.25, 1.0, &cfg()).unwrap();
        assert!((v - (-1f64).exp() / PI).abs() < 1e-15);
        let p = KernelSpec::poisson(2).unwrap();
        assert!((eval_p1(&p, 0.0, &cfg()).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((eval_pt(&p, 2.0, 0.0, &cfg()).unwrap() - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert!(eval_pt(&p, 0.0, 1.0, &cfg()).is_err());
        assert!(eval_p1(&p, -1.0, &cfg()).is_err());
    }

    #[test]
    fn stable_at_index_one_matches_poisson() {
        let s = KernelSpec::stable(1.0, 2).unwrap();
        let p = KernelSpec::poisson(2).unwrap();
        for r in [0.0, 0.5, 1.0, 2.0, 7.5, 20.0] {
            let a = eval_p1(&s, r, &cfg()).unwrap();
            let b = eval_p1(&p, r, &cfg()).unwrap();
            assert!((a - b).abs() < 1e-10, "r={r}: {a} vs {b}");
        }
        let s3 = KernelSpec::stable(1.0, 3).unwrap();
        let p3 = KernelSpec::poisson(3).unwrap();
        for r in [0.0, 0.1, 0.3, 1.0, 4.0, 1e3] {
            let a = eval_p1(&s3, r, &cfg()).unwrap();
            let b = eval_p1(&p3, r, &cfg()).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.max(1e-3), "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn stable_tail_has_relative_precision() {
        // Far out, the Poisson closed form is known to full relative precision.
        let s = KernelSpec::stable(1.0, 2).unwrap();
        let p = KernelSpec::poisson(2).unwrap();
        for r in [1e2, 1e5, 1e9] {
            let a = eval_p1(&s, r, &cfg()).unwrap();
            let b = eval_p1(&p, r, &cfg()).unwrap();
            assert!(((a - b) / b).abs() < 1e-8, "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn near_gaussian_index() {
        let s = KernelSpec::stable(1.999, 2).unwrap();
        let g = KernelSpec::gaussian(2).unwrap();
        for r in [0.0, 1.0, 2.0, 3.0] {
            let a = eval_p1(&s, r, &cfg()).unwrap();
            let b = eval_p1(&g, r, &cfg()).unwrap();
            assert!(((a - b) / b).abs() < 0.01, "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn moments() {
        let g = KernelSpec::gaussian(2).unwrap();
        let m = moment_d(&g, &cfg()).unwrap();
        assert!((m - gamma(1.5) / PI).abs() < 1e-9);
        assert!((moment_d_closed_form(&g).unwrap() - gamma(1.5) / PI).abs() < 1e-15);
        let s = KernelSpec::stable(1.5, 2).unwrap();
        let closed = moment_d_closed_form(&s).unwrap();
        assert!((closed - gamma(1.0 / 3.0) / (2.0 * PI)).abs() < 1e-14);
        assert!(matches!(
            moment_d(&KernelSpec::stable(0.8, 2).unwrap(), &cfg()),
            Err(Error::DivergentMoment(_))
        ));
        assert!(matches!(
            moment_d(&KernelSpec::poisson(2).unwrap(), &cfg()),
            Err(Error::DivergentMoment(_))
        ));
    }

    #[test]
    fn l1_norms_of_closed_forms() {
        for spec in [KernelSpec::gaussian(2).unwrap(), KernelSpec::poisson(3).unwrap()] {
            let n = l1_norm(&spec, &cfg()).unwrap();
            assert!((n - 1.0).abs() < 1e-8, "{}: {n}", spec.label());
        }
        let poly = KernelSpec::poisson_as_poly_family(2).unwrap();
        assert!((l1_norm(&poly, &cfg()).unwrap() - 1.0).abs() < 1e-8);
        assert!((poly.l1_norm_closed_form() - 1.0).abs() < 1e-13);
        for r in [0.0, 0.3, 2.0, 40.0] {
            let a = eval_p1(&poly, r, &cfg()).unwrap();
            let b = eval_p1(&KernelSpec::poisson(2).unwrap(), r, &cfg()).unwrap();
            assert!((a - b).abs() <= 1e-15 * b.max(1e-300) * 10.0);
        }
    }

    #[test]
    fn closed_form_monotone_in_radius() {
        for spec in [
            KernelSpec::gaussian(3).unwrap(),
            KernelSpec::poisson(2).unwrap(),
            KernelSpec::poly_family(3, 0.7, 2.0, 2.0, -3.0, 1.0).unwrap(),
        ] {
            let mut last = f64::INFINITY;
            for i in 0..200 {
                let v = eval_p1(&spec, i as f64 * 0.05, &cfg()).unwrap();
                assert!(v < last);
                last = v;
            }
        }
    }

    #[test]
    fn tail_check_rejects_closed_forms() {
        let g = KernelSpec::gaussian(2).unwrap();
        assert!(tail_bound_check(&g, &[0.1], &[1.0], &cfg()).is_err());
    }

    #[test]
    fn poisson_tail_limit() {
        // p_t(1)/t = κ_2 / (t² + 1)^{3/2}
        let s = KernelSpec::stable(1.0, 2).unwrap();
        let rep = tail_bound_check(&s, &[1e-1, 1e-2, 1e-3, 1e-4], &[1.0, 2.0], &cfg()).unwrap();
        assert!(rep.max_limit_deviation < 1e-6, "{rep:?}");
        assert!((rep.tail_constant - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }
}
