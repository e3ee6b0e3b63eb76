//! Shapes, set covariance `g_Ω(y) = |Ω ∩ (Ω + y)|`, its angular average
//! `ĝ(ρ) = ∫_{S^{d-1}} g_Ω(ρu) du`, perimeters and α-perimeters.
//!
//! Balls are centred at the origin and boxes occupy `[0, L_1] × … × [0, L_d]`.
//! Wherever `|Ω| - g_Ω` is needed it is computed directly rather than as a
//! difference, so small-`ρ` values keep their relative precision.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{neville_at_zero, Pchip};
use crate::quadrature::{gauss_legendre, gauss_legendre_integral, integrate_fallible, Tolerance};
use crate::report::csv_table;
use crate::sampling::{run_chunked, uniform_direction, uniform_in_box, McEstimate, Moments};
use crate::special::{unit_ball_volume_unchecked, unit_sphere_area_unchecked};

/// Membership test of a generic indicator shape.
pub type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A set given by a membership predicate inside an axis-aligned bounding box.
#[derive(Clone)]
pub struct Indicator {
    dimension: usize,
    membership: Membership,
    lower: Vec<f64>,
    upper: Vec<f64>,
    volume: Option<f64>,
    label: String,
}

impl fmt::Debug for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Indicator")
            .field("label", &self.label)
            .field("dimension", &self.dimension)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("volume", &self.volume)
            .finish()
    }
}

impl Indicator {
    pub fn contains(&self, x: &[f64]) -> bool {
        (self.membership)(x)
    }
}

/// A bounded domain `Ω ⊂ R^d`.
#[derive(Debug, Clone)]
pub enum Shape {
    Ball { radius: f64, dimension: usize },
    Box { sides: Vec<f64> },
    Indicator(Indicator),
}

impl Shape {
    pub fn ball(dimension: usize, radius: f64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::domain("shapes need dimension >= 2"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Shape::Ball { radius, dimension })
    }

    pub fn cuboid(sides: &[f64]) -> Result<Self> {
        if sides.len() < 2 {
            return Err(Error::domain("shapes need dimension >= 2"));
        }
        if sides.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::domain("box sides must be positive"));
        }
        Ok(Shape::Box { sides: sides.to_vec() })
    }

    /// A generic set. `volume` is the exact volume when known; it is otherwise
    /// estimated by Monte Carlo wherever it is needed.
    pub fn indicator(
        label: impl Into<String>,
        lower: &[f64],
        upper: &[f64],
        volume: Option<f64>,
        membership: Membership,
    ) -> Result<Self> {
        let dimension = lower.len();
        if dimension < 2 || upper.len() != dimension {
            return Err(Error::domain(
                "indicator bounding box must have matching corners in dimension >= 2",
            ));
        }
        if lower.iter().zip(upper).any(|(a, b)| !(b > a)) {
            return Err(Error::domain("indicator bounding box must have positive extent"));
        }
        if let Some(v) = volume {
            let box_volume: f64 = lower.iter().zip(upper).map(|(a, b)| b - a).product();
            if !(v > 0.0 && v <= box_volume * (1.0 + 1e-12)) {
                return Err(Error::domain(
                    "indicator volume must be positive and fit in its bounding box",
                ));
            }
        }
        Ok(Shape::Indicator(Indicator {
            dimension,
            membership,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            volume,
            label: label.into(),
        }))
    }

    pub fn dimension(&self) -> usize {
        match self {
            Shape::Ball { dimension, .. } => *dimension,
            Shape::Box { sides } => sides.len(),
            Shape::Indicator(ind) => ind.dimension,
        }
    }

    /// Exact volume, when known.
    pub fn volume(&self) -> Option<f64> {
        match self {
            Shape::Ball { radius, dimension } => {
                Some(unit_ball_volume_unchecked(*dimension) * radius.powi(*dimension as i32))
            }
            Shape::Box { sides } => Some(sides.iter().product()),
            Shape::Indicator(ind) => ind.volume,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Ball { radius, .. } => x.iter().map(|v| v * v).sum::<f64>() < radius * radius,
            Shape::Box { sides } => x.iter().zip(sides).all(|(&v, &l)| v > 0.0 && v < l),
            Shape::Indicator(ind) => ind.contains(x),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Shape::Ball { radius, dimension } => (vec![-radius; *dimension], vec![*radius; *dimension]),
            Shape::Box { sides } => (vec![0.0; sides.len()], sides.clone()),
            Shape::Indicator(ind) => (ind.lower.clone(), ind.upper.clone()),
        }
    }

    pub fn bounding_box_volume(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| b - a).product()
    }

    pub fn label(&self) -> String {
        match self {
            Shape::Ball { radius, dimension } => format!("ball(d={dimension}, R={radius})"),
            Shape::Box { sides } => {
                let s: Vec<String> = sides.iter().map(|l| l.to_string()).collect();
                format!("box({})", s.join("x"))
            }
            Shape::Indicator(ind) => format!("indicator({})", ind.label),
        }
    }

    /// Sharp interior breakpoints of `ρ ↦ ĝ(ρ)` (besides the diameter).
    pub fn profile_kinks(&self) -> Vec<f64> {
        match self {
            Shape::Box { sides } => {
                let mut k: Vec<f64> = sides.clone();
                for i in 0..sides.len() {
                    for j in i + 1..sides.len() {
                        k.push(sides[i].hypot(sides[j]));
                    }
                }
                k.sort_by(f64::total_cmp);
                k.dedup();
                k
            }
            _ => Vec::new(),
        }
    }
}

fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(40))
}

/// `Θ(z) = ∫_0^{arcsin z} sin^{d-2}θ cos²θ dθ`.
pub fn theta(d: usize, z: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain("theta requires d >= 2"));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!("theta argument must lie in [0, 1], got {z}")));
    }
    let k = (d - 2) as i32;
    Ok(gauss_legendre_integral(
        |th: f64| th.sin().powi(k) * th.cos().powi(2),
        0.0,
        z.asin(),
        gl_rule(),
    ))
}

/// `∫_a^b cos^d φ dφ` on `[0, π/2]`.
fn cos_power_integral(d: usize, a: f64, b: f64) -> f64 {
    gauss_legendre_integral(|phi: f64| phi.cos().powi(d as i32), a, b, gl_rule())
}

fn check_ball_args(d: usize, radius: f64, a: f64) -> Result<()> {
    if d < 2 {
        return Err(Error::domain("ball covariance requires d >= 2"));
    }
    if !(radius > 0.0) {
        return Err(Error::domain("ball radius must be positive"));
    }
    if !(a >= 0.0) {
        return Err(Error::domain(format!(
            "covariance distance must be nonnegative, got {a}"
        )));
    }
    Ok(())
}

/// `g_B(a e_d)` for the ball of radius `R` in `R^d`: twice the volume of the
/// cap of height `R - a/2`.
pub fn covariance_ball(d: usize, radius: f64, a: f64) -> Result<f64> {
    check_ball_args(d, radius, a)?;
    let s = a / radius;
    if s >= 2.0 {
        return Ok(0.0);
    }
    let lower = unit_ball_volume_unchecked(d - 1);
    Ok(radius.powi(d as i32) * 2.0 * lower * cos_power_integral(d, (s / 2.0).asin(), FRAC_PI_2))
}

/// `|B_R| - g_B(a e_d)`, the volume of `B_R \ (B_R + a e_d)`.
pub fn covariance_ball_deficit(d: usize, radius: f64, a: f64) -> Result<f64> {
    check_ball_args(d, radius, a)?;
    let s = a / radius;
    if s >= 2.0 {
        return Ok(unit_ball_volume_unchecked(d) * radius.powi(d as i32));
    }
    let lower = unit_ball_volume_unchecked(d - 1);
    Ok(radius.powi(d as i32) * 2.0 * lower * cos_power_integral(d, 0.0, (s / 2.0).asin()))
}

/// `∏ max(0, L_i - |y_i|)`.
pub fn covariance_box(sides: &[f64], y: &[f64]) -> Result<f64> {
    if sides.len() != y.len() {
        return Err(Error::domain(format!(
            "dimension mismatch: box has {} sides, point has {} coordinates",
            sides.len(),
            y.len()
        )));
    }
    if sides.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::domain("box sides must be positive"));
    }
    Ok(sides.iter().zip(y).map(|(l, v)| (l - v.abs()).max(0.0)).product())
}

/// `∏ L_i - ∏ (L_i - |y_i|)^+` as a telescoping sum of nonnegative terms.
fn box_deficit(sides: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut shrunk_prefix = 1.0;
    for i in 0..sides.len() {
        let shift = y[i].abs().min(sides[i]);
        let rest: f64 = sides[i + 1..].iter().product();
        total += shrunk_prefix * shift * rest;
        shrunk_prefix *= sides[i] - shift;
    }
    total
}

/// Exact covariance for balls and boxes.
pub fn covariance(shape: &Shape, y: &[f64]) -> Result<f64> {
    if y.len() != shape.dimension() {
        return Err(Error::domain("dimension mismatch between shape and displacement"));
    }
    match shape {
        Shape::Ball { radius, dimension } => covariance_ball(*dimension, *radius, norm(y)),
        Shape::Box { sides } => covariance_box(sides, y),
        Shape::Indicator(_) => Err(Error::UnsupportedShape(
            "indicator shapes have no closed-form covariance; use covariance_mc".into(),
        )),
    }
}

/// `g_Ω(0) - g_Ω(y)` computed without cancellation for balls and boxes.
pub fn covariance_deficit(shape: &Shape, y: &[f64]) -> Result<f64> {
    if y.len() != shape.dimension() {
        return Err(Error::domain("dimension mismatch between shape and displacement"));
    }
    match shape {
        Shape::Ball { radius, dimension } => covariance_ball_deficit(*dimension, *radius, norm(y)),
        Shape::Box { sides } => Ok(box_deficit(sides, y)),
        Shape::Indicator(_) => Err(Error::UnsupportedShape(
            "indicator shapes have no closed-form covariance".into(),
        )),
    }
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Monte Carlo estimate of `|Ω ∩ (Ω + y)|` from uniform points in the bounding box.
pub fn covariance_mc(shape: &Shape, y: &[f64], samples: u64, seed: u64) -> Result<McEstimate> {
    let d = shape.dimension();
    if y.len() != d {
        return Err(Error::domain("dimension mismatch between shape and displacement"));
    }
    let (lower, upper) = shape.bounding_box();
    let box_volume = shape.bounding_box_volume();
    let m = run_chunked(samples, seed, 0, |rng, n| {
        let mut x = vec![0.0; d];
        let mut shifted = vec![0.0; d];
        let mut acc = Moments::default();
        for _ in 0..n {
            uniform_in_box(rng, &lower, &upper, &mut x);
            for k in 0..d {
                shifted[k] = x[k] - y[k];
            }
            let hit = shape.contains(&x) && shape.contains(&shifted);
            acc.push(if hit { 1.0 } else { 0.0 });
        }
        Ok(acc)
    })?;
    Ok(McEstimate {
        value: box_volume * m.mean(),
        stderr: box_volume * m.stderr(),
        samples,
        seed,
    })
}

/// Monte Carlo volume from the bounding box.
pub fn volume_mc(shape: &Shape, samples: u64, seed: u64) -> Result<McEstimate> {
    let d = shape.dimension();
    let (lower, upper) = shape.bounding_box();
    let box_volume = shape.bounding_box_volume();
    let m = run_chunked(samples, seed, 1, |rng, n| {
        let mut x = vec![0.0; d];
        let mut acc = Moments::default();
        for _ in 0..n {
            uniform_in_box(rng, &lower, &upper, &mut x);
            acc.push(if shape.contains(&x) { 1.0 } else { 0.0 });
        }
        Ok(acc)
    })?;
    Ok(McEstimate {
        value: box_volume * m.mean(),
        stderr: box_volume * m.stderr(),
        samples,
        seed,
    })
}

/// `ℓ_Ω`. For indicator shapes this is the bounding-box diagonal, an upper bound.
pub fn diameter(shape: &Shape) -> f64 {
    match shape {
        Shape::Ball { radius, .. } => 2.0 * radius,
        Shape::Box { sides } => sides.iter().map(|l| l * l).sum::<f64>().sqrt(),
        Shape::Indicator(ind) => ind
            .lower
            .iter()
            .zip(&ind.upper)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt(),
    }
}

/// Whether [`diameter`] is exact rather than an upper bound.
pub fn diameter_is_exact(shape: &Shape) -> bool {
    !matches!(shape, Shape::Indicator(_))
}

/// Closed-form perimeter of balls and boxes.
pub fn perimeter(shape: &Shape) -> Result<f64> {
    match shape {
        Shape::Ball { radius, dimension } => {
            Ok(unit_sphere_area_unchecked(*dimension) * radius.powi(*dimension as i32 - 1))
        }
        Shape::Box { sides } => {
            let total: f64 = (0..sides.len())
                .map(|i| {
                    sides
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, l)| l)
                        .product::<f64>()
                })
                .sum();
            Ok(2.0 * total)
        }
        Shape::Indicator(_) => Err(Error::UnsupportedShape(
            "indicator perimeter has no closed form; use perimeter_via_directional".into(),
        )),
    }
}

/// How `ĝ` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngularMethod {
    ExactRadial,
    AngularQuadrature,
    SphereMc,
}

impl AngularMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            AngularMethod::ExactRadial => "exact-radial",
            AngularMethod::AngularQuadrature => "angular-quadrature",
            AngularMethod::SphereMc => "sphere-MC",
        }
    }
}

/// Settings for angular averaging of non-radial shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularConfig {
    /// Relative tolerance of the angular integrals for boxes.
    pub rel_tol: f64,
    /// Joint (point, direction) samples per radius for indicator shapes.
    pub mc_samples: u64,
    /// Samples for the volume of indicator shapes without a declared volume.
    pub volume_samples: u64,
    pub seed: u64,
}

impl Default for AngularConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            mc_samples: 200_000,
            volume_samples: 1_000_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
enum ProfileSource {
    Ball { radius: f64 },
    Box { sides: Vec<f64>, rel_tol: f64 },
    Table { deficits: Pchip },
}

/// The angular average `ĝ(ρ)` of a shape's covariance, sampled on a grid and
/// evaluable at any radius.
#[derive(Debug, Clone)]
pub struct CovarianceProfile {
    pub rho_grid: Vec<f64>,
    pub ghat_values: Vec<f64>,
    pub support_radius: f64,
    pub volume: f64,
    pub angular_method: AngularMethod,
    pub dimension: usize,
    /// Uncertainty of interpolated values (Monte Carlo profiles only).
    pub interpolation_error: f64,
    kinks: Vec<f64>,
    source: ProfileSource,
}

impl CovarianceProfile {
    /// `ĝ(0) = A_d |Ω|`.
    pub fn full_mass(&self) -> f64 {
        unit_sphere_area_unchecked(self.dimension) * self.volume
    }

    /// `A_d|Ω| - ĝ(ρ)`, nonnegative and equal to `A_d|Ω|` beyond the support.
    pub fn deficit(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(Error::domain(format!("profile radius must be nonnegative, got {rho}")));
        }
        if rho >= self.support_radius {
            return Ok(self.full_mass());
        }
        match &self.source {
            ProfileSource::Ball { radius } => {
                Ok(unit_sphere_area_unchecked(self.dimension) * covariance_ball_deficit(self.dimension, *radius, rho)?)
            }
            ProfileSource::Box { sides, rel_tol } => box_profile_deficit(sides, rho, *rel_tol),
            ProfileSource::Table { deficits } => Ok(deficits.eval(rho).clamp(0.0, self.full_mass())),
        }
    }

    pub fn ghat(&self, rho: f64) -> Result<f64> {
        Ok(self.full_mass() - self.deficit(rho)?)
    }

    /// Interior radii where `ĝ` is not smooth.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .rho_grid
            .iter()
            .zip(&self.ghat_values)
            .map(|(r, g)| vec![r.to_string(), g.to_string(), self.angular_method.tag().to_string()])
            .collect();
        csv_table(&["rho", "ghat", "method"], &rows)
    }
}

/// `A_2 L_1 L_2 - ĝ(ρ)` for a rectangle, by exact angular integration.
fn rectangle_profile_deficit(l1: f64, l2: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let full = 2.0 * PI * l1 * l2;
    let phi_lo = if rho > l1 { (l1 / rho).acos() } else { 0.0 };
    let phi_hi = if rho > l2 { (l2 / rho).asin() } else { FRAC_PI_2 };
    if phi_lo >= phi_hi {
        return full;
    }
    let (s_lo, c_lo) = phi_lo.sin_cos();
    let (s_hi, c_hi) = phi_hi.sin_cos();
    let d = 4.0
        * (l1 * l2 * (FRAC_PI_2 - phi_hi + phi_lo) + rho * l1 * (c_lo - c_hi) + rho * l2 * (s_hi - s_lo)
            - 0.5 * rho * rho * (s_hi * s_hi - s_lo * s_lo));
    d.clamp(0.0, full)
}

fn box_profile_deficit(sides: &[f64], rho: f64, rel_tol: f64) -> Result<f64> {
    match sides.len() {
        2 => Ok(rectangle_profile_deficit(sides[0], sides[1], rho)),
        3 => cuboid_profile_deficit(sides, rho, rel_tol),
        d => Err(Error::UnsupportedShape(format!(
            "box angular averaging is implemented for d = 2, 3, not {d}"
        ))),
    }
}

/// `4π L_1L_2L_3 - ĝ(ρ)` with the polar axis along the third side:
/// `8 ∫_0^{π/2} sinθ [min(L_3, ρcosθ)(π/2)L_1L_2 + (L_3 - ρcosθ)^+ q(ρ sinθ)] dθ`,
/// where `q` is a quarter of the rectangle deficit.
fn cuboid_profile_deficit(sides: &[f64], rho: f64, rel_tol: f64) -> Result<f64> {
    let (l1, l2, l3) = (sides[0], sides[1], sides[2]);
    let full = 4.0 * PI * l1 * l2 * l3;
    if rho <= 0.0 {
        return Ok(0.0);
    }
    if rho * rho >= l1 * l1 + l2 * l2 + l3 * l3 {
        return Ok(full);
    }
    // ∫_0^1 min(L_3, ρc) dc
    let slab = if rho <= l3 {
        rho / 2.0
    } else {
        l3 - l3 * l3 / (2.0 * rho)
    };
    let first = 8.0 * FRAC_PI_2 * l1 * l2 * slab;
    let theta_min = if rho > l3 { (l3 / rho).acos() } else { 0.0 };
    let breaks: Vec<f64> = [l1, l2, l1.hypot(l2)]
        .iter()
        .filter(|&&x| x < rho)
        .map(|&x| (x / rho).asin())
        .collect();
    let second = integrate_fallible(
        |th: f64| {
            let (s, c) = th.sin_cos();
            Ok(s * (l3 - rho * c).max(0.0) * 0.25 * rectangle_profile_deficit(l1, l2, rho * s))
        },
        theta_min,
        FRAC_PI_2,
        &breaks,
        Tolerance::new(full * 1e-15, rel_tol),
        400,
        "box angular average",
    )?;
    Ok((first + 8.0 * second.value).clamp(0.0, full))
}

/// Samples `ĝ` on `rho_grid`. Balls are exact, boxes use angular quadrature and
/// indicator shapes use joint Monte Carlo over points and directions.
pub fn radial_profile(shape: &Shape, rho_grid: &[f64], angular: &AngularConfig) -> Result<CovarianceProfile> {
    if rho_grid.is_empty() {
        return Err(Error::domain("profile grid is empty"));
    }
    if rho_grid.iter().any(|&r| !(r >= 0.0)) || rho_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(
            "profile grid must be nonnegative and strictly increasing",
        ));
    }
    let d = shape.dimension();
    let area = unit_sphere_area_unchecked(d);
    let support_radius = diameter(shape);
    match shape {
        Shape::Ball { radius, .. } => {
            let volume = shape.volume().unwrap_or_default();
            let mut profile = CovarianceProfile {
                rho_grid: rho_grid.to_vec(),
                ghat_values: Vec::new(),
                support_radius,
                volume,
                angular_method: AngularMethod::ExactRadial,
                dimension: d,
                interpolation_error: 0.0,
                kinks: Vec::new(),
                source: ProfileSource::Ball { radius: *radius },
            };
            profile.ghat_values = rho_grid.iter().map(|&r| profile.ghat(r)).collect::<Result<_>>()?;
            Ok(profile)
        }
        Shape::Box { sides } => {
            if !(2..=3).contains(&d) {
                return Err(Error::UnsupportedShape(format!(
                    "box angular averaging is implemented for d = 2, 3, not {d}"
                )));
            }
            let mut profile = CovarianceProfile {
                rho_grid: rho_grid.to_vec(),
                ghat_values: Vec::new(),
                support_radius,
                volume: sides.iter().product(),
                angular_method: AngularMethod::AngularQuadrature,
                dimension: d,
                interpolation_error: 0.0,
                kinks: shape
                    .profile_kinks()
                    .into_iter()
                    .filter(|&k| k < support_radius)
                    .collect(),
                source: ProfileSource::Box {
                    sides: sides.clone(),
                    rel_tol: angular.rel_tol,
                },
            };
            profile.ghat_values = rho_grid.iter().map(|&r| profile.ghat(r)).collect::<Result<_>>()?;
            Ok(profile)
        }
        Shape::Indicator(_) => {
            let (volume, volume_err) = match shape.volume() {
                Some(v) => (v, 0.0),
                None => {
                    let est = volume_mc(shape, angular.volume_samples, angular.seed)?;
                    (est.value, est.stderr)
                }
            };
            let full = area * volume;
            let mut nodes = vec![0.0];
            let mut deficits = vec![0.0];
            let mut worst_err = area * volume_err;
            for (i, &rho) in rho_grid.iter().enumerate() {
                if rho == 0.0 {
                    continue;
                }
                if rho >= support_radius {
                    break;
                }
                let est = indicator_deficit_mc(shape, rho, angular.mc_samples, angular.seed, i as u64 + 2)?;
                nodes.push(rho);
                deficits.push((area * est.value).min(full));
                worst_err = worst_err.max(area * est.stderr);
            }
            nodes.push(support_radius);
            deficits.push(full);
            let table = Pchip::new(nodes, deficits)?;
            let mut profile = CovarianceProfile {
                rho_grid: rho_grid.to_vec(),
                ghat_values: Vec::new(),
                support_radius,
                volume,
                angular_method: AngularMethod::SphereMc,
                dimension: d,
                interpolation_error: worst_err,
                kinks: Vec::new(),
                source: ProfileSource::Table { deficits: table },
            };
            profile.ghat_values = rho_grid.iter().map(|&r| profile.ghat(r)).collect::<Result<_>>()?;
            Ok(profile)
        }
    }
}

/// Estimates `|Ω| - E_u g(ρu)` as `E[1_Ω(x)(1 - 1_Ω(x - ρu))]` over uniform `x`
/// in the bounding box and uniform directions `u`.
fn indicator_deficit_mc(shape: &Shape, rho: f64, samples: u64, seed: u64, task: u64) -> Result<McEstimate> {
    let d = shape.dimension();
    let (lower, upper) = shape.bounding_box();
    let box_volume = shape.bounding_box_volume();
    let m = run_chunked(samples, seed, task, |rng, n| {
        let mut x = vec![0.0; d];
        let mut u = vec![0.0; d];
        let mut acc = Moments::default();
        for _ in 0..n {
            uniform_in_box(rng, &lower, &upper, &mut x);
            uniform_direction(rng, &mut u);
            let inside = shape.contains(&x);
            let mut hit = 0.0;
            if inside {
                for k in 0..d {
                    u[k] = x[k] - rho * u[k];
                }
                if !shape.contains(&u) {
                    hit = 1.0;
                }
            }
            acc.push(hit);
        }
        Ok(acc)
    })?;
    Ok(McEstimate {
        value: box_volume * m.mean(),
        stderr: box_volume * m.stderr(),
        samples,
        seed,
    })
}

/// Default graded grid on `[0, ℓ]`: dense near 0 where the Lipschitz kink lives.
pub fn default_rho_grid(support_radius: f64, points: usize) -> Vec<f64> {
    let n = points.max(3);
    (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            support_radius * s * s
        })
        .collect()
}

/// Settings for directional variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalConfig {
    /// Step sizes as multiples of the diameter, used for extrapolation.
    pub h_factors: Vec<f64>,
    /// Lines sampled for indicator shapes.
    pub lines: u64,
    /// Membership probes per line for indicator shapes.
    pub steps_per_line: usize,
    pub seed: u64,
}

impl Default for DirectionalConfig {
    fn default() -> Self {
        Self {
            h_factors: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            lines: 20_000,
            steps_per_line: 2_000,
            seed: 1,
        }
    }
}

/// `V_u(Ω)` together with the difference quotients it was extrapolated from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalVariation {
    pub value: f64,
    pub error_estimate: f64,
    /// `(h, (g(0) - g(hu))/h)`.
    pub quotients: Vec<(f64, f64)>,
    /// Quotients were not monotone in `h`.
    pub warning: bool,
}

/// `V_u(Ω) = 2 lim_{h→0+} (g(0) - g(hu))/h`.
///
/// Balls and boxes extrapolate closed-form difference quotients over the
/// step grid. Indicator shapes use `V_u = ∫_{u^⊥} #(∂Ω ∩ line) dy`, counting
/// membership changes along random lines through the bounding box.
pub fn directional_variation(shape: &Shape, u: &[f64], cfg: &DirectionalConfig) -> Result<DirectionalVariation> {
    if u.len() != shape.dimension() {
        return Err(Error::domain("direction has the wrong dimension"));
    }
    if (norm(u) - 1.0).abs() > 1e-9 {
        return Err(Error::domain("direction must be a unit vector"));
    }
    if let Shape::Indicator(_) = shape {
        return indicator_directional_variation(shape, u, cfg);
    }
    if cfg.h_factors.is_empty() || cfg.h_factors.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::domain("step factors must be positive"));
    }
    let ell = diameter(shape);
    let mut quotients = Vec::with_capacity(cfg.h_factors.len());
    for &f in &cfg.h_factors {
        let h = f * ell;
        let y: Vec<f64> = u.iter().map(|v| v * h).collect();
        quotients.push((h, covariance_deficit(shape, &y)? / h));
    }
    let hs: Vec<f64> = quotients.iter().map(|q| q.0).collect();
    let qs: Vec<f64> = quotients.iter().map(|q| q.1).collect();
    let (limit, err) = neville_at_zero(&hs, &qs);
    let mut order: Vec<usize> = (0..hs.len()).collect();
    order.sort_by(|&a, &b| hs[a].total_cmp(&hs[b]));
    let diffs: Vec<f64> = order.windows(2).map(|w| qs[w[1]] - qs[w[0]]).collect();
    let scale = qs.iter().map(|q| q.abs()).fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let warning = diffs.iter().any(|&x| x > tol) && diffs.iter().any(|&x| x < -tol);
    Ok(DirectionalVariation {
        value: 2.0 * limit,
        error_estimate: 2.0 * err,
        quotients,
        warning,
    })
}

fn indicator_directional_variation(shape: &Shape, u: &[f64], cfg: &DirectionalConfig) -> Result<DirectionalVariation> {
    let d = shape.dimension();
    let (lower, upper) = shape.bounding_box();
    let box_volume = shape.bounding_box_volume();
    let steps = cfg.steps_per_line.max(2);
    let m = run_chunked(cfg.lines, cfg.seed, 3, |rng, n| {
        let mut x = vec![0.0; d];
        let mut p = vec![0.0; d];
        let mut acc = Moments::default();
        for _ in 0..n {
            uniform_in_box(rng, &lower, &upper, &mut x);
            // Parameter range of the line x + s·u inside the box.
            let (mut s0, mut s1) = (f64::NEG_INFINITY, f64::INFINITY);
            for k in 0..d {
                if u[k].abs() > 1e-300 {
                    let a = (lower[k] - x[k]) / u[k];
                    let b = (upper[k] - x[k]) / u[k];
                    s0 = s0.max(a.min(b));
                    s1 = s1.min(a.max(b));
                }
            }
            let length = s1 - s0;
            if !(length > 0.0) {
                acc.push(0.0);
                continue;
            }
            let offset: f64 = rng.random();
            let mut crossings = 0u32;
            let mut last = false;
            for j in 0..steps {
                let s = s0 + length * (j as f64 + offset) / steps as f64;
                for k in 0..d {
                    p[k] = x[k] + s * u[k];
                }
                let inside = shape.contains(&p);
                if j > 0 && inside != last {
                    crossings += 1;
                }
                last = inside;
            }
            // Lines are drawn with density proportional to their length.
            acc.push(crossings as f64 / length);
        }
        Ok(acc)
    })?;
    Ok(DirectionalVariation {
        value: box_volume * m.mean(),
        error_estimate: box_volume * m.stderr(),
        quotients: Vec::new(),
        warning: false,
    })
}

/// Quadrature over directions for [`perimeter_via_directional`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereConfig {
    /// Trapezoid nodes on the circle (d = 2).
    pub circle_nodes: usize,
    /// Gauss–Legendre nodes in `cosθ` per hemisphere (d = 3).
    pub polar_nodes: usize,
    /// Trapezoid nodes in azimuth (d = 3).
    pub azimuth_nodes: usize,
    pub directional: DirectionalConfig,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self {
            circle_nodes: 360,
            polar_nodes: 24,
            azimuth_nodes: 72,
            directional: DirectionalConfig::default(),
        }
    }
}

/// `Per(Ω) = (2w_{d-1})^{-1} ∫_{S^{d-1}} V_u(Ω) du`.
pub fn perimeter_via_directional(shape: &Shape, cfg: &SphereConfig) -> Result<f64> {
    let d = shape.dimension();
    let denominator = 2.0 * unit_ball_volume_unchecked(d - 1);
    let integral = match d {
        2 => {
            let n = cfg.circle_nodes.max(4);
            let mut sum = 0.0;
            for k in 0..n {
                let phi = 2.0 * PI * k as f64 / n as f64;
                sum += directional_variation(shape, &[phi.cos(), phi.sin()], &cfg.directional)?.value;
            }
            sum * 2.0 * PI / n as f64
        }
        3 => {
            let rule = gauss_legendre(cfg.polar_nodes.max(2));
            let m = cfg.azimuth_nodes.max(4);
            let mut total = 0.0;
            // Hemispheres separately: boxes have a kink at the equator.
            for (a, b) in [(-1.0, 0.0), (0.0, 1.0)] {
                for (x, w) in rule.0.iter().zip(&rule.1) {
                    let c = 0.5 * (b - a) * x + 0.5 * (a + b);
                    let s = (1.0 - c * c).sqrt();
                    let mut ring = 0.0;
                    for k in 0..m {
                        let phi = 2.0 * PI * k as f64 / m as f64;
                        ring +=
                            directional_variation(shape, &[s * phi.cos(), s * phi.sin(), c], &cfg.directional)?.value;
                    }
                    total += 0.5 * (b - a) * w * ring * 2.0 * PI / m as f64;
                }
            }
            total
        }
        _ => match shape {
            // Rotation invariance: V_u is the same in every direction.
            Shape::Ball { .. } => {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                directional_variation(shape, &e, &cfg.directional)?.value * unit_sphere_area_unchecked(d)
            }
            _ => {
                return Err(Error::UnsupportedShape(format!(
                    "spherical quadrature is implemented for d = 2, 3, not {d}"
                )))
            }
        },
    };
    Ok(integral / denominator)
}

/// `P_α(Ω) = ∫_0^∞ ρ^{-1-α} (A_d|Ω| - ĝ(ρ)) dρ` for `α ∈ (0, 1)`.
///
/// The part beyond the support is `A_d|Ω| ℓ^{-α}/α`. On `[0, ℓ]` the
/// substitution `ρ = s^{1/(1-α)}` removes the `ρ^{-α}` endpoint singularity.
pub fn alpha_perimeter(shape: &Shape, alpha: f64, profile: &CovarianceProfile, tol: Tolerance) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::regime(format!(
            "the α-perimeter of a set with finite perimeter is finite only for α in (0, 1), got {alpha}"
        )));
    }
    let ell = diameter(shape);
    if profile.dimension != shape.dimension() || (profile.support_radius - ell).abs() > 1e-12 * ell {
        return Err(Error::domain("covariance profile does not belong to this shape"));
    }
    if let Some(v) = shape.volume() {
        if (profile.volume - v).abs() > 1e-12 * v {
            return Err(Error::domain("covariance profile volume does not match the shape"));
        }
    }
    let full = profile.full_mass();
    let tail = full * ell.powf(-alpha) / alpha;
    let q = 1.0 - alpha;
    let s_end = ell.powf(q);
    let breaks: Vec<f64> = profile.kinks().iter().map(|k| k.powf(q)).collect();
    let body = integrate_fallible(
        |s: f64| {
            if s <= 0.0 {
                return Ok(0.0);
            }
            let rho = s.powf(1.0 / q);
            Ok(profile.deficit(rho)? / rho / q)
        },
        0.0,
        s_end,
        &breaks,
        Tolerance::new(tol.abs * full, tol.rel),
        2000,
        "alpha-perimeter",
    )?;
    Ok(body.value + tail)
}

/// Length of the chord of a convex shape through `x` (inside) in direction `u`.
/// Indicator shapes are located by bisection and assumed convex.
pub(crate) fn chord_length(shape: &Shape, x: &[f64], u: &[f64]) -> f64 {
    match shape {
        Shape::Ball { radius, .. } => {
            let b: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
            let c: f64 = x.iter().map(|v| v * v).sum::<f64>() - radius * radius;
            2.0 * (b * b - c).max(0.0).sqrt()
        }
        Shape::Box { sides } => {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for k in 0..sides.len() {
                if u[k].abs() > 0.0 {
                    let a = -x[k] / u[k];
                    let b = (sides[k] - x[k]) / u[k];
                    lo = lo.max(a.min(b));
                    hi = hi.min(a.max(b));
                }
            }
            hi - lo
        }
        Shape::Indicator(_) => {
            let ell = diameter(shape);
            exit_distance(shape, x, u, ell) + exit_distance(shape, x, &u.iter().map(|v| -v).collect::<Vec<_>>(), ell)
        }
    }
}

fn exit_distance(shape: &Shape, x: &[f64], u: &[f64], ell: f64) -> f64 {
    let mut p = x.to_vec();
    let (mut inside, mut outside) = (0.0, ell);
    for _ in 0..60 {
        let mid = 0.5 * (inside + outside);
        for k in 0..x.len() {
            p[k] = x[k] + mid * u[k];
        }
        if shape.contains(&p) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_validate() {
        assert!(Shape::ball(1, 1.0).is_err());
        assert!(Shape::ball(2, 0.0).is_err());
        assert!(Shape::cuboid(&[1.0]).is_err());
        assert!(Shape::cuboid(&[1.0, -2.0]).is_err());
        let disk: Membership = Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0);
        assert!(Shape::indicator("disk", &[-1.0, -1.0], &[1.0, 1.0], Some(PI), disk.clone()).is_ok());
        assert!(Shape::indicator("disk", &[-1.0, -1.0], &[1.0, 1.0], Some(5.0), disk).is_err());
    }

    #[test]
    fn theta_values() {
        assert!((theta(2, 1.0).unwrap() - PI / 4.0).abs() < 1e-14);
        assert!((theta(3, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(theta(4, 0.0).unwrap(), 0.0);
        assert!(theta(2, 1.1).is_err());
        for d in 2..=7 {
            let expected = unit_ball_volume_unchecked(d) / (2.0 * unit_sphere_area_unchecked(d - 1));
            assert!((theta(d, 1.0).unwrap() - expected).abs() < 1e-13, "d={d}");
        }
    }

    #[test]
    fn lens_area() {
        let v = covariance_ball(2, 1.0, 1.0).unwrap();
        assert!((v - (2.0 * PI / 3.0 - 3f64.sqrt() / 2.0)).abs() < 1e-13);
        assert!((covariance_ball(2, 1.0, 0.0).unwrap() - PI).abs() < 1e-13);
        assert_eq!(covariance_ball(3, 1.0, 2.0).unwrap(), 0.0);
        assert!(covariance_ball(2, 1.0, -0.1).is_err());
    }

    #[test]
    fn ball_covariance_matches_theta_form() {
        for d in [2usize, 3, 4, 6] {
            for a in [0.0f64, 0.3, 1.0, 1.7, 1.99] {
                let z = (1.0 - a * a / 4.0).sqrt();
                let lower_area = unit_sphere_area_unchecked(d - 1);
                let lower_vol = unit_ball_volume_unchecked(d - 1);
                let via_theta = 2.0 * lower_area * theta(d, z).unwrap() - a * lower_vol * z.powi(d as i32 - 1);
                let direct = covariance_ball(d, 1.0, a).unwrap();
                assert!((direct - via_theta).abs() < 1e-13, "d={d} a={a}");
            }
        }
    }

    #[test]
    fn ball_dilation_and_deficit() {
        for (d, r, a) in [(2usize, 2.0f64, 1.5f64), (3, 0.5, 0.2), (5, 1.3, 2.0)] {
            let scaled = r.powi(d as i32) * covariance_ball(d, 1.0, a / r).unwrap();
            assert!((covariance_ball(d, r, a).unwrap() - scaled).abs() < 1e-13);
            let vol = unit_ball_volume_unchecked(d) * r.powi(d as i32);
            let sum = covariance_ball(d, r, a).unwrap() + covariance_ball_deficit(d, r, a).unwrap();
            assert!((sum - vol).abs() < 1e-13 * vol);
        }
    }

    #[test]
    fn box_covariance() {
        assert_eq!(covariance_box(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(covariance_box(&[1.0, 1.0], &[0.5, 0.0]).unwrap(), 0.5);
        assert_eq!(covariance_box(&[2.0, 3.0], &[2.0, 0.0]).unwrap(), 0.0);
        assert!(covariance_box(&[1.0, 1.0], &[0.5]).is_err());
        let sides = [1.0, 2.0, 3.0];
        for y in [[0.1, -0.5, 2.0], [1.5, 0.0, 0.0], [0.0, 0.0, 0.0]] {
            let g = covariance_box(&sides, &y).unwrap();
            assert!((g + box_deficit(&sides, &y) - 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rectangle_profile_against_direct_quadrature() {
        for (l1, l2) in [(1.0, 1.0), (1.0, 2.0)] {
            for rho in [0.0, 0.2, 0.9, 1.0, 1.3, 2.1] {
                let direct = crate::quadrature::integrate_breaks(
                    |phi: f64| covariance_box(&[l1, l2], &[rho * phi.cos(), rho * phi.sin()]).unwrap(),
                    0.0,
                    2.0 * PI,
                    &[FRAC_PI_2, PI, 1.5 * PI],
                    Tolerance::new(1e-13, 1e-13),
                    2000,
                )
                .value;
                let exact = 2.0 * PI * l1 * l2 - rectangle_profile_deficit(l1, l2, rho);
                assert!(
                    (direct - exact).abs() < 1e-10,
                    "L=({l1},{l2}) rho={rho}: {direct} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn perimeters() {
        assert!((perimeter(&Shape::ball(2, 1.0).unwrap()).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert_eq!(perimeter(&Shape::cuboid(&[1.0, 1.0]).unwrap()).unwrap(), 4.0);
        assert_eq!(perimeter(&Shape::cuboid(&[1.0, 2.0, 3.0]).unwrap()).unwrap(), 22.0);
        assert_eq!(diameter(&Shape::cuboid(&[3.0, 4.0]).unwrap()), 5.0);
    }

    #[test]
    fn directional_variation_closed_forms() {
        let cfg = DirectionalConfig::default();
        let square = Shape::cuboid(&[1.0, 2.0]).unwrap();
        let v = directional_variation(&square, &[1.0, 0.0], &cfg).unwrap();
        assert!((v.value - 4.0).abs() < 1e-8);
        let unit = Shape::cuboid(&[1.0, 1.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = directional_variation(&unit, &[h, h], &cfg).unwrap();
        assert!((v.value - 2.0 * 2f64.sqrt()).abs() < 1e-8);
        let disk = Shape::ball(2, 1.0).unwrap();
        let v = directional_variation(&disk, &[0.6, 0.8], &cfg).unwrap();
        assert!((v.value - 4.0).abs() < 1e-8, "{v:?}");
        assert!(directional_variation(&disk, &[1.0, 1.0], &cfg).is_err());
    }

    #[test]
    fn alpha_perimeter_rejects_bad_index() {
        let disk = Shape::ball(2, 1.0).unwrap();
        let profile = radial_profile(&disk, &[0.0, 1.0], &AngularConfig::default()).unwrap();
        let tol = Tolerance::new(1e-12, 1e-10);
        assert!(matches!(
            alpha_perimeter(&disk, 1.3, &profile, tol),
            Err(Error::Regime(_))
        ));
        let other = Shape::ball(2, 2.0).unwrap();
        assert!(matches!(
            alpha_perimeter(&other, 0.5, &profile, tol),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn chords() {
        let disk = Shape::ball(2, 1.0).unwrap();
        assert!((chord_length(&disk, &[0.0, 0.0], &[1.0, 0.0]) - 2.0).abs() < 1e-15);
        let square = Shape::cuboid(&[1.0, 2.0]).unwrap();
        assert!((chord_length(&square, &[0.5, 0.5], &[0.0, 1.0]) - 2.0).abs() < 1e-15);
        let member: Membership = Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0);
        let ind = Shape::indicator("disk", &[-1.0, -1.0], &[1.0, 1.0], Some(PI), member).unwrap();
        let c = chord_length(&ind, &[0.5, 0.0], &[0.0, 1.0]);
        assert!((c - 2.0 * 0.75f64.sqrt()).abs() < 1e-12);
    }
}
