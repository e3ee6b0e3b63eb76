//! Heat content `H_Ω(t) = ∫_Ω∫_Ω p_t(x - y) dx dy` through the covariance
//! representation, its small-time asymptotics, and the non-asymptotic bounds.
//!
//! Everything is computed from the deficit
//!
//! ```text
//! t^{-(β+dγ)} (‖p_t‖_1|Ω| - H(t)) = ∫_0^∞ r^{d-1} p_1(r) D(t^γ r) dr,   D = A_d|Ω| - ĝ,
//! ```
//!
//! whose integrand is nonnegative, so small deficits keep their relative
//! precision. Beyond `r = ℓ_Ω t^{-γ}` the profile term is constant and the
//! integral reduces to the kernel's radial tail mass.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    alpha_perimeter, default_rho_grid, diameter, perimeter, perimeter_via_directional, radial_profile, theta,
    AngularConfig, CovarianceProfile, Shape, SphereConfig,
};
use crate::kernel::{
    eval_p1, moment_d_closed_form, poisson_constant, radial_tail, stable_tail_constant, KernelFamily, KernelSpec,
};
use crate::numerics::linear_fit;
use crate::quadrature::{integrate_fallible, QuadResult, QuadratureConfig, Tolerance};
use crate::report::csv_table;
use crate::special::{gamma, unit_ball_volume_unchecked, unit_sphere_area_unchecked};

/// One heat content evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatContentResult {
    pub t: f64,
    #[serde(rename = "H")]
    pub heat: f64,
    pub deficit: f64,
    pub quad_error: f64,
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be positive, got {t}")));
    }
    Ok(())
}

fn check_profile(spec: &KernelSpec, profile: &CovarianceProfile) -> Result<()> {
    if spec.dimension != profile.dimension {
        return Err(Error::domain(format!(
            "kernel dimension {} does not match profile dimension {}",
            spec.dimension, profile.dimension
        )));
    }
    Ok(())
}

/// Radii where the integrand `r ↦ D(σr)` has kinks.
fn kink_radii(profile: &CovarianceProfile, sigma: f64) -> Vec<f64> {
    profile.kinks().iter().map(|k| k / sigma).collect()
}

/// `∫_0^∞ r^{d-1} p_1(r) D(σr) dr`.
fn scaled_deficit_integral(
    spec: &KernelSpec,
    profile: &CovarianceProfile,
    sigma: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    let d = spec.dimension as f64;
    let full = profile.full_mass();
    let edge = profile.support_radius / sigma;
    let tol = Tolerance::new(cfg.abs_tol * 1e-3 * full, cfg.rel_tol);
    let integrand = |r: f64| -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(r.powf(d - 1.0) * eval_p1(spec, r, cfg)? * profile.deficit(sigma * r)?)
    };
    // Gaussian mass beyond r = 60 is below 1e-300.
    let far_end = if spec.tail_law().is_none() {
        edge.min(60.0)
    } else {
        edge
    };
    let split = far_end.min(cfg.tail_split_radius);
    let kinks = kink_radii(profile, sigma);
    let mut breaks: Vec<f64> = vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    breaks.extend(kinks.iter().copied());
    let head = integrate_fallible(
        integrand,
        0.0,
        split,
        &breaks,
        tol,
        cfg.max_subdivisions,
        "heat content deficit (near field)",
    )?;
    let mut total = head;
    if far_end > split {
        let (la, lb) = (split.ln(), far_end.ln());
        let pieces = ((lb - la) / 1.5).ceil().max(1.0) as usize;
        let mut log_breaks: Vec<f64> = (1..pieces).map(|j| la + (lb - la) * j as f64 / pieces as f64).collect();
        log_breaks.extend(kinks.iter().filter(|&&k| k > split && k < far_end).map(|k| k.ln()));
        let far = integrate_fallible(
            |s: f64| {
                let r = s.exp();
                Ok(r * integrand(r)?)
            },
            la,
            lb,
            &log_breaks,
            tol,
            cfg.max_subdivisions,
            "heat content deficit (far field)",
        )?;
        total = total.combine(far);
    }
    total = total.combine(radial_tail(spec, d - 1.0, far_end, cfg)?.scaled(full));
    Ok(total)
}

/// `H(t)` and the deficit `‖p_t‖_1|Ω| - H(t)`.
pub fn heat_content(
    spec: &KernelSpec,
    profile: &CovarianceProfile,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<HeatContentResult> {
    check_time(t)?;
    check_profile(spec, profile)?;
    cfg.validate()?;
    let s = spec.scaling();
    let mass_factor = t.powf(s.mass_exponent(spec.dimension));
    let sigma = t.powf(s.gamma);
    let integral = scaled_deficit_integral(spec, profile, sigma, cfg)?;
    let l1 = spec.l1_norm_closed_form();
    let deficit = mass_factor * integral.value;
    let interpolation = profile.interpolation_error * l1 / unit_sphere_area_unchecked(spec.dimension);
    Ok(HeatContentResult {
        t,
        heat: mass_factor * l1 * profile.volume - deficit,
        deficit,
        quad_error: mass_factor * (integral.error + interpolation),
    })
}

/// `‖p_t‖_1|Ω| - H(t) = ∫ p_t(z)(|Ω| - g_Ω(z)) dz`.
pub fn deficit(spec: &KernelSpec, profile: &CovarianceProfile, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(heat_content(spec, profile, t, cfg)?.deficit)
}

/// `H(t) = t^{β+dγ} ∫_0^{ℓ t^{-γ}} r^{d-1} p_1(r) ĝ(t^γ r) dr`, integrating the
/// covariance itself instead of the deficit. Loses relative precision as
/// `t → 0`; used as an independent route at moderate `t`.
pub fn heat_content_direct(
    spec: &KernelSpec,
    profile: &CovarianceProfile,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    check_time(t)?;
    check_profile(spec, profile)?;
    let s = spec.scaling();
    let sigma = t.powf(s.gamma);
    let d = spec.dimension as f64;
    let edge = profile.support_radius / sigma;
    let mut breaks = vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
    breaks.extend(kink_radii(profile, sigma));
    let res = integrate_fallible(
        |r: f64| {
            if r == 0.0 {
                return Ok(0.0);
            }
            Ok(r.powf(d - 1.0) * eval_p1(spec, r, cfg)? * profile.ghat(sigma * r)?)
        },
        0.0,
        edge,
        &breaks,
        Tolerance::new(cfg.abs_tol * 1e-2, cfg.rel_tol),
        cfg.max_subdivisions,
        "heat content (covariance form)",
    )?;
    Ok(res.scaled(t.powf(s.mass_exponent(spec.dimension))))
}

/// Small-time regime of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    AlphaGt1,
    AlphaEq1,
    AlphaLt1,
    Gaussian,
    PolyFamily,
}

impl Regime {
    pub fn of(spec: &KernelSpec) -> Regime {
        match spec.family {
            KernelFamily::Gaussian => Regime::Gaussian,
            KernelFamily::Poisson => Regime::AlphaEq1,
            KernelFamily::PolyFamily { .. } => Regime::PolyFamily,
            KernelFamily::Stable { alpha } if alpha > 1.0 => Regime::AlphaGt1,
            KernelFamily::Stable { alpha: 1.0 } => Regime::AlphaEq1,
            KernelFamily::Stable { .. } => Regime::AlphaLt1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Regime::AlphaGt1 => "alpha_gt_1",
            Regime::AlphaEq1 => "alpha_eq_1",
            Regime::AlphaLt1 => "alpha_lt_1",
            Regime::Gaussian => "gaussian",
            Regime::PolyFamily => "poly_family",
        }
    }

    pub fn is_logarithmic(&self) -> bool {
        matches!(self, Regime::AlphaEq1 | Regime::PolyFamily)
    }
}

/// `s(t)`: `t^{1/α}`, `t ln(1/t)`, `t`, `√t` or `t^γ ln(1/t)` by regime.
pub fn regime_scaling(spec: &KernelSpec, t: f64) -> f64 {
    let s = spec.scaling();
    match Regime::of(spec) {
        Regime::AlphaGt1 => t.powf(s.gamma),
        Regime::AlphaEq1 => t * (1.0 / t).ln(),
        Regime::AlphaLt1 => t,
        Regime::Gaussian => t.sqrt(),
        Regime::PolyFamily => t.powf(s.gamma) * (1.0 / t).ln(),
    }
}

/// Abscissa against which scaled deficits are fitted linearly; the limit is
/// the intercept. These follow the leading correction of each regime.
fn extrapolation_abscissa(spec: &KernelSpec, t: f64) -> f64 {
    match (Regime::of(spec), spec.alpha()) {
        (Regime::AlphaEq1 | Regime::PolyFamily, _) => 1.0 / (1.0 / t).ln(),
        (Regime::AlphaGt1, Some(alpha)) => t.powf(1.0 - 1.0 / alpha),
        (Regime::AlphaLt1, Some(alpha)) => t.powf((1.0 / alpha - 1.0).min(1.0)),
        _ => t.sqrt(),
    }
}

/// `Γ(1 - 1/α)/π`, the factor multiplying the perimeter for `α ∈ (1, 2]`.
pub fn stable_perimeter_factor(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::regime(format!(
            "perimeter factor Γ(1-1/α)/π needs α in (1, 2], got {alpha}"
        )));
    }
    Ok(gamma(1.0 - 1.0 / alpha) / PI)
}

/// Limit constant of `deficit(t)/s(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoreticalConstant {
    pub value: f64,
    pub regime: Regime,
    /// The constant is only an upper bound for the limit superior.
    pub upper_bound_only: bool,
}

/// Perimeter from the closed form when available, else from directional variations.
pub fn shape_perimeter(shape: &Shape) -> Result<f64> {
    match shape {
        Shape::Indicator(_) => perimeter_via_directional(shape, &SphereConfig::default()),
        _ => perimeter(shape),
    }
}

/// The small-time constant of the deficit for this kernel and shape.
pub fn theoretical_constant(spec: &KernelSpec, shape: &Shape, cfg: &QuadratureConfig) -> Result<TheoreticalConstant> {
    if spec.dimension != shape.dimension() {
        return Err(Error::domain("kernel and shape dimensions differ"));
    }
    let regime = Regime::of(spec);
    let d = spec.dimension;
    let (value, upper_bound_only) = match (regime, spec.family) {
        (Regime::Gaussian, _) => (shape_perimeter(shape)? / PI.sqrt(), false),
        (Regime::AlphaGt1, KernelFamily::Stable { alpha }) => {
            (stable_perimeter_factor(alpha)? * shape_perimeter(shape)?, false)
        }
        (Regime::AlphaEq1, _) => (shape_perimeter(shape)? / PI, !matches!(shape, Shape::Ball { .. })),
        (Regime::AlphaLt1, KernelFamily::Stable { alpha }) => {
            let profile = default_profile(shape)?;
            let p_alpha = alpha_perimeter(shape, alpha, &profile, Tolerance::new(cfg.abs_tol * 1e-2, cfg.rel_tol))?;
            (stable_tail_constant(alpha, d)? * p_alpha, false)
        }
        (Regime::PolyFamily, KernelFamily::PolyFamily { kappa, gamma, .. }) => (
            kappa * unit_ball_volume_unchecked(d - 1) * shape_perimeter(shape)? * gamma,
            true,
        ),
        _ => return Err(Error::regime("inconsistent kernel family and regime")),
    };
    Ok(TheoreticalConstant {
        value,
        regime,
        upper_bound_only,
    })
}

/// Profile with default resolution: exact for balls, quadrature for boxes,
/// Monte Carlo for indicator shapes.
pub fn default_profile(shape: &Shape) -> Result<CovarianceProfile> {
    radial_profile(
        shape,
        &default_rho_grid(diameter(shape), 129),
        &AngularConfig::default(),
    )
}

/// A small-time law `deficit(t)/φ(t) → Λ = ∫ J(z)(|Ω| - g_Ω(z)) dz` driven by a
/// radial jump kernel `J`.
pub trait JumpLaw: Sync {
    fn dimension(&self) -> usize;
    /// The normalising function `φ(t)`.
    fn phi(&self, t: f64) -> f64;
    /// Radial profile of `J`.
    fn jump_kernel(&self, r: f64) -> f64;
    /// `∫_R^∞ r^{d-1} J(r) dr`.
    fn tail_mass(&self, radius: f64) -> f64;
}

/// The stable instance for `α ∈ (0, 1)`: `φ(t) = t`, `J = C_{α,d}|x|^{-d-α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableJumpLaw {
    alpha: f64,
    dimension: usize,
    constant: f64,
}

impl StableJumpLaw {
    pub fn new(alpha: f64, dimension: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::regime(format!("the jump law needs α in (0, 1), got {alpha}")));
        }
        Ok(Self {
            alpha,
            dimension,
            constant: stable_tail_constant(alpha, dimension)?,
        })
    }
}

impl JumpLaw for StableJumpLaw {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn phi(&self, t: f64) -> f64 {
        t
    }

    fn jump_kernel(&self, r: f64) -> f64 {
        self.constant * r.powf(-(self.dimension as f64) - self.alpha)
    }

    fn tail_mass(&self, radius: f64) -> f64 {
        self.constant * radius.powf(-self.alpha) / self.alpha
    }
}

/// `Λ = ∫_0^∞ r^{d-1} J(r) D(r) dr` for a jump law.
pub fn jump_limit(law: &dyn JumpLaw, profile: &CovarianceProfile, cfg: &QuadratureConfig) -> Result<f64> {
    if law.dimension() != profile.dimension {
        return Err(Error::domain("jump law and profile dimensions differ"));
    }
    let d = profile.dimension as f64;
    let ell = profile.support_radius;
    let breaks: Vec<f64> = (1..40)
        .map(|k| ell * 0.5f64.powi(k))
        .chain(profile.kinks().iter().copied())
        .collect();
    let body = integrate_fallible(
        |r: f64| {
            if r == 0.0 {
                return Ok(0.0);
            }
            Ok(r.powf(d - 1.0) * law.jump_kernel(r) * profile.deficit(r)?)
        },
        0.0,
        ell,
        &breaks,
        Tolerance::new(cfg.abs_tol * 1e-2, cfg.rel_tol),
        cfg.max_subdivisions,
        "jump-law limit",
    )?;
    Ok(body.value + profile.full_mass() * law.tail_mass(ell))
}

/// One row of an asymptotic sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepEntry {
    pub t: f64,
    #[serde(rename = "H")]
    pub heat: f64,
    pub deficit: f64,
    pub scaled_deficit: f64,
    pub quad_error: f64,
    pub rel_error: f64,
}

/// Small-time sweep of `deficit(t)/s(t)` against the limit constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub kernel: String,
    pub shape: String,
    pub regime: Regime,
    pub t_grid: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub scaled_deficits: Vec<f64>,
    pub extrapolated_limit: f64,
    pub theoretical_constant: f64,
    pub upper_bound_only: bool,
    pub rel_error_at_smallest_t: f64,
    pub extrapolated_rel_error: f64,
    /// The last scaled deficits are not monotone in `t`.
    pub monotone_warning: bool,
    pub logarithmic: bool,
    /// For bound-only regimes: the extrapolated limit does not exceed the constant.
    pub bound_satisfied: Option<bool>,
}

impl AsymptoticReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Output(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .entries
            .iter()
            .map(|e| {
                vec![
                    e.t.to_string(),
                    e.heat.to_string(),
                    e.deficit.to_string(),
                    e.scaled_deficit.to_string(),
                    self.theoretical_constant.to_string(),
                    e.rel_error.to_string(),
                ]
            })
            .collect();
        csv_table(
            &[
                "t",
                "H",
                "deficit",
                "scaled_deficit",
                "theoretical_constant",
                "rel_error",
            ],
            &rows,
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "kernel  {}\nshape   {}\nregime  {}",
            self.kernel,
            self.shape,
            self.regime.tag()
        );
        let _ = writeln!(
            out,
            "{:>12} {:>22} {:>22} {:>22} {:>12}",
            "t", "H", "deficit", "scaled_deficit", "rel_error"
        );
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:>12.3e} {:>22.15e} {:>22.15e} {:>22.15e} {:>12.3e}",
                e.t, e.heat, e.deficit, e.scaled_deficit, e.rel_error
            );
        }
        let relation = if self.upper_bound_only {
            "upper bound"
        } else {
            "constant"
        };
        let _ = writeln!(out, "extrapolated limit  {:.10}", self.extrapolated_limit);
        let _ = writeln!(out, "theoretical {relation}  {:.10}", self.theoretical_constant);
        let _ = writeln!(out, "rel. error at smallest t  {:.3e}", self.rel_error_at_smallest_t);
        if self.monotone_warning {
            let _ = writeln!(out, "warning: scaled deficits are not monotone at the finest t");
        }
        out
    }
}

fn check_t_grid(t_grid: &[f64], spec: &KernelSpec, ell: f64) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::domain("t grid is empty"));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::domain("t grid values must be positive"));
    }
    if t_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::domain("t grid must be strictly decreasing"));
    }
    let gamma = spec.scaling().gamma;
    if let Some(&t) = t_grid.iter().find(|&&t| t.powf(gamma) >= ell) {
        return Err(Error::regime(format!("t = {t} violates t^γ < ℓ_Ω = {ell}")));
    }
    Ok(())
}

/// Heat content at every grid time, in grid order.
pub fn heat_content_grid(
    spec: &KernelSpec,
    profile: &CovarianceProfile,
    t_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<HeatContentResult>> {
    t_grid
        .par_iter()
        .map(|&t| heat_content(spec, profile, t, cfg))
        .collect()
}

/// Runs the sweep with a default-resolution profile.
pub fn asymptotic_sweep(
    spec: &KernelSpec,
    shape: &Shape,
    t_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<AsymptoticReport> {
    let profile = default_profile(shape)?;
    asymptotic_sweep_with_profile(spec, shape, &profile, t_grid, cfg)
}

pub fn asymptotic_sweep_with_profile(
    spec: &KernelSpec,
    shape: &Shape,
    profile: &CovarianceProfile,
    t_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<AsymptoticReport> {
    check_t_grid(t_grid, spec, diameter(shape))?;
    let constant = theoretical_constant(spec, shape, cfg)?;
    let results = heat_content_grid(spec, profile, t_grid, cfg)?;
    let entries: Vec<SweepEntry> = results
        .iter()
        .map(|r| {
            let scaled = r.deficit / regime_scaling(spec, r.t);
            SweepEntry {
                t: r.t,
                heat: r.heat,
                deficit: r.deficit,
                scaled_deficit: scaled,
                quad_error: r.quad_error,
                rel_error: (scaled - constant.value).abs() / constant.value,
            }
        })
        .collect();
    let scaled: Vec<f64> = entries.iter().map(|e| e.scaled_deficit).collect();
    let k = entries.len().min(3);
    let tail = &entries[entries.len() - k..];
    let extrapolated_limit = if k >= 2 {
        let xs: Vec<f64> = tail.iter().map(|e| extrapolation_abscissa(spec, e.t)).collect();
        let ys: Vec<f64> = tail.iter().map(|e| e.scaled_deficit).collect();
        linear_fit(&xs, &ys)?.0
    } else {
        scaled[scaled.len() - 1]
    };
    let diffs: Vec<f64> = tail
        .windows(2)
        .map(|w| w[1].scaled_deficit - w[0].scaled_deficit)
        .collect();
    let monotone_warning = diffs.iter().any(|&x| x > 0.0) && diffs.iter().any(|&x| x < 0.0);
    let regime = constant.regime;
    Ok(AsymptoticReport {
        kernel: spec.label(),
        shape: shape.label(),
        regime,
        t_grid: t_grid.to_vec(),
        rel_error_at_smallest_t: entries[entries.len() - 1].rel_error,
        extrapolated_rel_error: (extrapolated_limit - constant.value).abs() / constant.value,
        entries,
        scaled_deficits: scaled,
        extrapolated_limit,
        theoretical_constant: constant.value,
        upper_bound_only: constant.upper_bound_only,
        monotone_warning,
        logarithmic: regime.is_logarithmic(),
        bound_satisfied: constant
            .upper_bound_only
            .then_some(extrapolated_limit <= constant.value * (1.0 + 1e-9)),
    })
}

/// One time of a bound check: `lhs <= rhs + slack`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEntry {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Result of the limit superior comparison in the algebraic-family bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimsupCheck {
    pub t: f64,
    pub ratio: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub check: String,
    pub kernel: String,
    pub shape: String,
    pub entries: Vec<BoundEntry>,
    pub all_passed: bool,
    /// Times at which the inequality failed.
    pub failures: Vec<f64>,
    pub lambda: Option<f64>,
    pub limsup: Option<LimsupCheck>,
}

impl BoundReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Output(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}: {} on {}", self.check, self.kernel, self.shape);
        let _ = writeln!(
            out,
            "{:>12} {:>22} {:>22} {:>12} {:>6}",
            "t", "lhs", "rhs", "slack", "pass"
        );
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:>12.3e} {:>22.15e} {:>22.15e} {:>12.3e} {:>6}",
                e.t, e.lhs, e.rhs, e.slack, e.passed
            );
        }
        if let Some(l) = self.lambda {
            let _ = writeln!(out, "lambda  {l:.12}");
        }
        if let Some(l) = &self.limsup {
            let _ = writeln!(
                out,
                "limsup ratio at t={:.3e}: {:.6} vs bound {:.6} (+{:.0}%): {}",
                l.t,
                l.ratio,
                l.bound,
                l.tolerance * 100.0,
                l.passed
            );
        }
        out
    }
}

fn finish_report(check: &str, spec: &KernelSpec, shape: &Shape, entries: Vec<BoundEntry>) -> BoundReport {
    let failures: Vec<f64> = entries.iter().filter(|e| !e.passed).map(|e| e.t).collect();
    BoundReport {
        check: check.to_string(),
        kernel: spec.label(),
        shape: shape.label(),
        all_passed: failures.is_empty(),
        entries,
        failures,
        lambda: None,
        limsup: None,
    }
}

/// Checks `t^{-(β+dγ)} deficit(t) <= t^γ w_{d-1} Per(Ω) ∫_0^∞ r^d p_1(r) dr` at every grid time.
pub fn bound_check_part_i(
    spec: &KernelSpec,
    shape: &Shape,
    t_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<BoundReport> {
    let profile = default_profile(shape)?;
    bound_check_part_i_with_profile(spec, shape, &profile, t_grid, cfg)
}

pub fn bound_check_part_i_with_profile(
    spec: &KernelSpec,
    shape: &Shape,
    profile: &CovarianceProfile,
    t_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<BoundReport> {
    let moment = moment_d_closed_form(spec).map_err(|e| {
        Error::regime(format!(
            "the first-moment bound needs a kernel with finite first moment: {e}"
        ))
    })?;
    let d = spec.dimension;
    let coefficient = unit_ball_volume_unchecked(d - 1) * shape_perimeter(shape)? * moment;
    let s = spec.scaling();
    let results = heat_content_grid(spec, profile, t_grid, cfg)?;
    let entries = results
        .iter()
        .map(|r| {
            let norm = r.t.powf(-s.mass_exponent(d));
            let lhs = r.deficit * norm;
            let rhs = r.t.powf(s.gamma) * coefficient;
            let slack = 2.0 * r.quad_error * norm;
            BoundEntry {
                t: r.t,
                lhs,
                rhs,
                slack,
                passed: lhs <= rhs + slack,
            }
        })
        .collect();
    Ok(finish_report("first-moment bound", spec, shape, entries))
}

fn poly_parameters(spec: &KernelSpec) -> Result<(f64, f64, f64, f64)> {
    match spec.family {
        KernelFamily::PolyFamily { kappa, n, m, gamma, .. } => Ok((kappa, n, m, gamma)),
        KernelFamily::Poisson => {
            let d = spec.dimension as f64;
            Ok((poisson_constant(spec.dimension)?, 2.0, (d + 1.0) / 2.0, 1.0))
        }
        _ => Err(Error::regime(
            "the logarithmic bound applies to the algebraic kernel family",
        )),
    }
}

/// `λ(Ω) = |Ω| ℓ^{-1} A_d κ + κ w_{d-1} Per(Ω) (ln ℓ + ∫_0^1 r^d (1+r^n)^{-m} dr)`.
pub fn part_ii_lambda(spec: &KernelSpec, shape: &Shape) -> Result<f64> {
    let (kappa, n, m, _) = poly_parameters(spec)?;
    let d = spec.dimension;
    let volume = shape
        .volume()
        .ok_or_else(|| Error::UnsupportedShape("λ(Ω) needs an exact volume".into()))?;
    let ell = diameter(shape);
    let df = d as f64;
    let inner = integrate_fallible(
        |r: f64| Ok(r.powf(df) * (1.0 + r.powf(n)).powf(-m)),
        0.0,
        1.0,
        &[],
        Tolerance::new(1e-15, 1e-13),
        200,
        "λ integral",
    )?;
    let lower = unit_ball_volume_unchecked(d - 1);
    Ok(volume / ell * unit_sphere_area_unchecked(d) * kappa
        + kappa * lower * shape_perimeter(shape)? * (ell.ln() + inner.value))
}

/// Checks `t^{-(β+dγ)} deficit(t) <= t^γ (λ(Ω) + κ w_{d-1} Per(Ω) γ ln(1/t))` for
/// the algebraic family, plus the limit superior at the smallest time
/// against `κ w_{d-1} Per(Ω) γ` with 10% tolerance.
pub fn bound_check_part_ii(
    spec: &KernelSpec,
    shape: &Shape,
    t_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<BoundReport> {
    let profile = default_profile(shape)?;
    bound_check_part_ii_with_profile(spec, shape, &profile, t_grid, cfg)
}

pub fn bound_check_part_ii_with_profile(
    spec: &KernelSpec,
    shape: &Shape,
    profile: &CovarianceProfile,
    t_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<BoundReport> {
    let (kappa, _, _, gamma) = poly_parameters(spec)?;
    let ell = diameter(shape);
    if t_grid.iter().any(|&t| !(t > 0.0) || t.powf(gamma) >= ell) {
        return Err(Error::regime(format!(
            "the logarithmic bound needs 0 < t^γ < ℓ_Ω = {ell} at every grid time"
        )));
    }
    let d = spec.dimension;
    let lambda = part_ii_lambda(spec, shape)?;
    let log_coefficient = kappa * unit_ball_volume_unchecked(d - 1) * shape_perimeter(shape)? * gamma;
    let s = spec.scaling();
    let results = heat_content_grid(spec, profile, t_grid, cfg)?;
    let entries: Vec<BoundEntry> = results
        .iter()
        .map(|r| {
            let norm = r.t.powf(-s.mass_exponent(d));
            let lhs = r.deficit * norm;
            let rhs = r.t.powf(gamma) * (lambda + log_coefficient * (1.0 / r.t).ln());
            let slack = 2.0 * r.quad_error * norm;
            BoundEntry {
                t: r.t,
                lhs,
                rhs,
                slack,
                passed: lhs <= rhs + slack,
            }
        })
        .collect();
    let limsup = results
        .iter()
        .min_by(|a, b| a.t.total_cmp(&b.t))
        .filter(|r| r.t < 1.0)
        .map(|r| {
            let ratio = r.deficit * r.t.powf(-s.mass_exponent(d)) / (r.t.powf(gamma) * (1.0 / r.t).ln());
            LimsupCheck {
                t: r.t,
                ratio,
                bound: log_coefficient,
                tolerance: 0.1,
                passed: ratio <= log_coefficient * 1.1,
            }
        });
    let mut report = finish_report("logarithmic bound", spec, shape, entries);
    report.lambda = Some(lambda);
    report.limsup = limsup;
    Ok(report)
}

/// The two integrals of the Poisson-kernel heat content of the unit ball,
/// `H_B(t) = N_1(t) - (Per(B)/π) t N_2(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallPoissonDecomposition {
    pub t: f64,
    pub n1: f64,
    pub n2: f64,
    pub n1_error: f64,
    pub n2_error: f64,
}

impl BallPoissonDecomposition {
    /// `N_1 - (Per(B)/π) t N_2` for the unit ball in dimension `d`.
    pub fn heat_content(&self, d: usize) -> f64 {
        self.n1 - unit_sphere_area_unchecked(d) / PI * self.t * self.n2
    }
}

/// Splits `[0, end]` into a linear part up to `min(end, 20)` and a logarithmic
/// part beyond, with `end` itself as the only possible singular point.
fn integrate_to_edge<F: Fn(f64) -> Result<f64>>(
    f: F,
    end: f64,
    tol: Tolerance,
    cfg: &QuadratureConfig,
    context: &str,
) -> Result<QuadResult> {
    let split = end.min(20.0);
    let mut total = integrate_fallible(
        &f,
        0.0,
        split,
        &[0.5, 1.0, 2.0, 5.0, 10.0],
        tol,
        cfg.max_subdivisions,
        context,
    )?;
    if end > split {
        let (la, lb) = (split.ln(), end.ln());
        let pieces = ((lb - la) / 1.5).ceil().max(1.0) as usize;
        let breaks: Vec<f64> = (1..pieces).map(|j| la + (lb - la) * j as f64 / pieces as f64).collect();
        let far = integrate_fallible(
            |s: f64| {
                let r = s.exp();
                Ok(r * f(r)?)
            },
            la,
            lb,
            &breaks,
            tol,
            cfg.max_subdivisions,
            context,
        )?;
        total = total.combine(far);
    }
    Ok(total)
}

pub fn ball_poisson_decomposition(d: usize, t: f64, cfg: &QuadratureConfig) -> Result<BallPoissonDecomposition> {
    if d < 2 {
        return Err(Error::domain("the decomposition needs d >= 2"));
    }
    if !(t > 0.0 && t < 2.0) {
        return Err(Error::domain(format!("the decomposition needs 0 < t < 2, got {t}")));
    }
    let df = d as f64;
    let kappa = poisson_constant(d)?;
    let end = 2.0 / t;
    let tol = Tolerance::new(cfg.abs_tol * 1e-3, cfg.rel_tol * 1e-2);
    let n1_integral = integrate_to_edge(
        |r| {
            let z = (1.0 - t * t * r * r / 4.0).max(0.0).sqrt();
            Ok(r.powf(df - 1.0) * (1.0 + r * r).powf(-(df + 1.0) / 2.0) * theta(d, z.min(1.0))?)
        },
        end,
        tol,
        cfg,
        "N1 integral",
    )?;
    let n1_factor = 2.0 * unit_sphere_area_unchecked(d) * unit_sphere_area_unchecked(d - 1) * kappa;
    let n2 = integrate_to_edge(
        |r| {
            let w = (1.0 - t * t * r * r / 4.0).max(0.0);
            Ok(r.powf(df) * (1.0 + r * r).powf(-(df + 1.0) / 2.0) * w.powf((df - 1.0) / 2.0))
        },
        end,
        tol,
        cfg,
        "N2 integral",
    )?;
    Ok(BallPoissonDecomposition {
        t,
        n1: n1_factor * n1_integral.value,
        n2: n2.value,
        n1_error: n1_factor * n1_integral.error,
        n2_error: n2.error,
    })
}
