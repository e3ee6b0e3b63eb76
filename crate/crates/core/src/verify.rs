//! The built-in verification battery: seventeen numbered checks of the
//! kernels, covariance geometry, heat content asymptotics, bounds and the
//! Monte Carlo oracle.

use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    alpha_perimeter, covariance, covariance_ball, covariance_mc, diameter, perimeter_via_directional, Shape,
    SphereConfig,
};
use crate::heat_content::{
    asymptotic_sweep_with_profile, ball_poisson_decomposition, bound_check_part_i_with_profile,
    bound_check_part_ii_with_profile, default_profile, heat_content, part_ii_lambda, regime_scaling,
    stable_perimeter_factor, theoretical_constant,
};
use crate::kernel::{eval_p1, moment_d, moment_d_closed_form, poisson_constant, stable_tail_constant, KernelSpec};
use crate::oracle::{mc_alpha_perimeter, mc_heat_content};
use crate::quadrature::{integrate_fallible, QuadratureConfig, Tolerance};
use crate::report::csv_table_with_metadata;
use crate::special::{gamma, unit_ball_volume_unchecked};

/// Number of checks in the battery.
pub const CRITERIA: u32 = 17;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    /// Reduced Monte Carlo sample counts.
    pub quick: bool,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            quick: false,
            seed: 20240611,
            quadrature: QuadratureConfig::default(),
        }
    }
}

impl VerifyConfig {
    fn mc_samples(&self) -> u64 {
        if self.quick {
            100_000
        } else {
            1_000_000
        }
    }
}

/// One compared quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Metric {
    fn abs(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            tolerance,
            passed: (value - reference).abs() <= tolerance,
        }
    }

    fn rel(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            tolerance,
            passed: (value - reference).abs() <= tolerance * reference.abs(),
        }
    }

    /// `value <= bound + slack`.
    fn upper(name: impl Into<String>, value: f64, bound: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference: bound,
            tolerance: slack,
            passed: value <= bound + slack,
        }
    }

    /// `value >= bound`.
    fn lower(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference: bound,
            tolerance: 0.0,
            passed: value >= bound,
        }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            reference: 1.0,
            tolerance: 0.0,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    /// Set when the check could not be computed.
    pub error: Option<String>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub quick: bool,
    pub all_passed: bool,
    pub failures: Vec<u32>,
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Output(e.to_string()))
    }

    /// One row per metric; timings are left out so reruns compare byte for byte.
    pub fn to_csv(&self) -> Result<String> {
        csv_rows(
            &self.criteria,
            &[("seed", self.seed.to_string()), ("quick", self.quick.to_string())],
        )
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.criteria.iter().map(summary_line).collect()
    }
}

pub fn summary_line(c: &CriterionResult) -> String {
    let status = if c.passed { "PASS" } else { "FAIL" };
    let mut line = format!("[{status}] {:>2}. {} ({:.2}s)", c.id, c.name, c.seconds);
    if let Some(e) = &c.error {
        line.push_str(&format!(": {e}"));
    } else if let Some(m) = c.metrics.iter().find(|m| !m.passed) {
        line.push_str(&format!(
            ": {} = {:.6e} vs {:.6e} (tol {:.1e})",
            m.name, m.value, m.reference, m.tolerance
        ));
    }
    line
}

fn csv_rows(criteria: &[CriterionResult], metadata: &[(&str, String)]) -> Result<String> {
    let mut rows = Vec::new();
    for c in criteria {
        if let Some(e) = &c.error {
            rows.push(vec![
                c.id.to_string(),
                c.name.clone(),
                "error".into(),
                e.clone(),
                String::new(),
                String::new(),
                "false".into(),
            ]);
        }
        for m in &c.metrics {
            rows.push(vec![
                c.id.to_string(),
                c.name.clone(),
                m.name.clone(),
                m.value.to_string(),
                m.reference.to_string(),
                m.tolerance.to_string(),
                m.passed.to_string(),
            ]);
        }
    }
    csv_table_with_metadata(
        &["id", "criterion", "metric", "value", "reference", "tolerance", "passed"],
        &rows,
        metadata,
    )
}

fn criterion_name(id: u32) -> &'static str {
    match id {
        1 => "stable kernel at alpha=1 matches the Poisson kernel",
        2 => "first radial moment quadrature matches its closed form",
        3 => "covariance invariants for balls and boxes",
        4 => "lens volume and Monte Carlo ball covariance",
        5 => "perimeter from directional variations",
        6 => "alpha=1.5 ball limit",
        7 => "alpha=1 ball logarithmic law",
        8 => "alpha=0.5 ball limit and alpha-perimeter cross-check",
        9 => "Gaussian perimeter law",
        10 => "first-moment bound",
        11 => "logarithmic bound with lambda",
        12 => "Poisson ball decomposition",
        13 => "constant identities",
        14 => "Monte Carlo heat content cross-check",
        15 => "alpha-perimeter scaling",
        16 => "regime errors",
        17 => "determinism",
        _ => "unknown",
    }
}

fn budget(id: u32) -> f64 {
    match id {
        1 => 5.0,
        13 | 16 => 1.0,
        3 => 60.0,
        9 | 12 => 60.0,
        6 | 7 | 8 | 10 | 14 => 120.0,
        17 => 240.0,
        _ => 30.0,
    }
}

/// Runs one criterion by number.
pub fn run_criterion(id: u32, cfg: &VerifyConfig) -> Result<CriterionResult> {
    if !(1..=CRITERIA).contains(&id) {
        return Err(Error::domain(format!(
            "criteria are numbered 1 to {CRITERIA}, got {id}"
        )));
    }
    let start = Instant::now();
    let outcome = match id {
        1 => kernel_equivalence(cfg),
        2 => moment_identity(cfg),
        3 => covariance_invariants(cfg),
        4 => lens_and_mc(cfg),
        5 => perimeter_identity(),
        6 => stable_limit(cfg),
        7 => logarithmic_law(cfg),
        8 => subcritical_limit(cfg),
        9 => gaussian_law(cfg),
        10 => first_moment_bound(cfg),
        11 => logarithmic_bound(cfg),
        12 => decomposition(cfg),
        13 => constants(),
        14 => oracle_cross_check(cfg),
        15 => perimeter_scaling(cfg),
        16 => regime_errors(cfg),
        _ => determinism(cfg),
    };
    let seconds = start.elapsed().as_secs_f64();
    let budget_seconds = budget(id);
    let (metrics, error) = match outcome {
        Ok(m) => (m, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    Ok(CriterionResult {
        id,
        name: criterion_name(id).to_string(),
        passed: error.is_none() && !metrics.is_empty() && metrics.iter().all(|m| m.passed) && seconds <= budget_seconds,
        metrics,
        error,
        seconds,
        budget_seconds,
    })
}

/// Runs the whole battery in order.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let criteria = (1..=CRITERIA)
        .map(|id| run_criterion(id, cfg))
        .collect::<Result<Vec<_>>>()?;
    let failures: Vec<u32> = criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    Ok(VerifyReport {
        seed: cfg.seed,
        quick: cfg.quick,
        all_passed: failures.is_empty(),
        failures,
        criteria,
    })
}

fn kernel_equivalence(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let stable = KernelSpec::stable(1.0, 2)?;
    let poisson = KernelSpec::poisson(2)?;
    let mut worst = (0.0, 0.0);
    for k in 0..=80 {
        let r = 0.25 * k as f64;
        let diff = (eval_p1(&stable, r, &cfg.quadrature)? - eval_p1(&poisson, r, &cfg.quadrature)?).abs();
        if diff >= worst.1 {
            worst = (r, diff);
        }
    }
    Ok(vec![Metric::abs(
        format!("max |p_stable - p_poisson| (at r={})", worst.0),
        worst.1,
        0.0,
        1e-8,
    )])
}

fn moment_identity(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for alpha in [1.2, 1.5, 1.8] {
        for d in [2usize, 3] {
            let spec = KernelSpec::stable(alpha, d)?;
            let h = (d as f64 + 1.0) / 2.0;
            let closed = gamma(h) * PI.powf(-h) * gamma(1.0 - 1.0 / alpha);
            out.push(Metric::rel(
                format!("moment alpha={alpha} d={d}"),
                moment_d(&spec, &cfg.quadrature)?,
                closed,
                1e-6,
            ));
        }
    }
    Ok(out)
}

/// `∫_{R^d} g_Ω = ∫_0^ℓ r^{d-1} ĝ(r) dr`.
fn covariance_mass(shape: &Shape, cfg: &QuadratureConfig) -> Result<f64> {
    let profile = default_profile(shape)?;
    let d = shape.dimension() as f64;
    let res = integrate_fallible(
        |r| Ok(r.powf(d - 1.0) * profile.ghat(r)?),
        0.0,
        profile.support_radius,
        profile.kinks(),
        Tolerance::new(1e-12, 1e-12),
        cfg.max_subdivisions,
        "covariance mass",
    )?;
    Ok(res.value)
}

fn covariance_invariants(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let shapes = [
        Shape::ball(2, 1.0)?,
        Shape::ball(3, 1.0)?,
        Shape::cuboid(&[1.0, 2.0])?,
        Shape::cuboid(&[1.0, 2.0, 3.0])?,
    ];
    let mut out = Vec::new();
    for (i, shape) in shapes.iter().enumerate() {
        let label = shape.label();
        let d = shape.dimension();
        let volume = shape.volume().unwrap_or(f64::NAN);
        let probes: Vec<Vec<f64>> = [[0.3, 0.2, 0.1], [-0.7, 0.4, 0.5], [1.1, -0.2, 0.3]]
            .iter()
            .map(|p| p[..d].to_vec())
            .collect();
        let mut symmetric = true;
        let mut bounded = true;
        for y in &probes {
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            let (a, b) = (covariance(shape, y)?, covariance(shape, &neg)?);
            symmetric &= (a - b).abs() <= 1e-14 * volume;
            bounded &= (0.0..=volume).contains(&a);
        }
        out.push(Metric::flag(format!("{label}: g(y) = g(-y)"), symmetric));
        out.push(Metric::flag(format!("{label}: 0 <= g <= |Omega|"), bounded));
        out.push(Metric::abs(
            format!("{label}: g(0)"),
            covariance(shape, &vec![0.0; d])?,
            volume,
            1e-12 * volume,
        ));
        let ell = diameter(shape);
        let outside: Vec<f64> = (0..d).map(|_| 1.0001 * ell / (d as f64).sqrt()).collect();
        out.push(Metric::abs(
            format!("{label}: g beyond the diameter"),
            covariance(shape, &outside)?,
            0.0,
            0.0,
        ));
        out.push(Metric::abs(
            format!("{label}: integral of g"),
            covariance_mass(shape, &cfg.quadrature)?,
            volume * volume,
            1e-6,
        ));
        let y = &probes[0];
        let est = covariance_mc(shape, y, cfg.mc_samples(), cfg.seed.wrapping_add(i as u64))?;
        out.push(Metric::abs(
            format!("{label}: Monte Carlo g at {y:?}"),
            est.value,
            covariance(shape, y)?,
            3.0 * est.stderr,
        ));
    }
    Ok(out)
}

fn lens_and_mc(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let mut out = vec![Metric::abs(
        "lens volume a=1",
        covariance_ball(2, 1.0, 1.0)?,
        2.0 * PI / 3.0 - 3f64.sqrt() / 2.0,
        1e-10,
    )];
    let disk = Shape::ball(2, 1.0)?;
    for (k, a) in [0.25, 0.75, 1.0, 1.5, 1.9].into_iter().enumerate() {
        let est = covariance_mc(
            &disk,
            &[a, 0.0],
            cfg.mc_samples(),
            cfg.seed.wrapping_add(100 + k as u64),
        )?;
        out.push(Metric::abs(
            format!("Monte Carlo disk covariance a={a}"),
            est.value,
            covariance_ball(2, 1.0, a)?,
            3.0 * est.stderr,
        ));
    }
    Ok(out)
}

fn perimeter_identity() -> Result<Vec<Metric>> {
    let sphere = SphereConfig::default();
    Ok(vec![
        Metric::rel(
            "unit disk",
            perimeter_via_directional(&Shape::ball(2, 1.0)?, &sphere)?,
            2.0 * PI,
            0.01,
        ),
        Metric::rel(
            "unit square",
            perimeter_via_directional(&Shape::cuboid(&[1.0, 1.0])?, &sphere)?,
            4.0,
            0.01,
        ),
        Metric::rel(
            "box 1x2x3",
            perimeter_via_directional(&Shape::cuboid(&[1.0, 2.0, 3.0])?, &sphere)?,
            22.0,
            0.01,
        ),
    ])
}

const SMALL_TIMES: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

fn stable_limit(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let disk = Shape::ball(2, 1.0)?;
    let profile = default_profile(&disk)?;
    let report = asymptotic_sweep_with_profile(
        &KernelSpec::stable(1.5, 2)?,
        &disk,
        &profile,
        &SMALL_TIMES,
        &cfg.quadrature,
    )?;
    Ok(vec![Metric::rel(
        "extrapolated limit",
        report.extrapolated_limit,
        2.0 * gamma(1.0 / 3.0),
        0.05,
    )])
}

fn logarithmic_law(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let disk = Shape::ball(2, 1.0)?;
    let profile = default_profile(&disk)?;
    let spec = KernelSpec::poisson(2)?;
    let mut out = Vec::new();
    for &t in &SMALL_TIMES {
        let r = heat_content(&spec, &profile, t, &cfg.quadrature)?;
        let scale = regime_scaling(&spec, t);
        let scaled = r.deficit / scale;
        if t == 1e-5 {
            out.push(Metric::rel("deficit/(t ln(1/t)) at t=1e-5", scaled, 2.0, 0.1));
        }
        let slack = 2.0 * r.quad_error / r.deficit;
        out.push(Metric::upper(
            format!("deficit/(t ln(1/t)) <= 2(1+slack) at t={t:e}"),
            scaled,
            2.0,
            2.0 * slack,
        ));
    }
    Ok(out)
}

fn subcritical_limit(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let disk = Shape::ball(2, 1.0)?;
    let profile = default_profile(&disk)?;
    let alpha = 0.5;
    let p_quad = alpha_perimeter(&disk, alpha, &profile, Tolerance::new(1e-12, 1e-11))?;
    let est = mc_alpha_perimeter(&disk, alpha, cfg.mc_samples(), cfg.seed)?;
    let constant = stable_tail_constant(alpha, 2)? * p_quad;
    let report = asymptotic_sweep_with_profile(
        &KernelSpec::stable(alpha, 2)?,
        &disk,
        &profile,
        &SMALL_TIMES,
        &cfg.quadrature,
    )?;
    Ok(vec![
        Metric::rel(
            "extrapolated limit vs C P_0.5",
            report.extrapolated_limit,
            constant,
            0.05,
        ),
        Metric::abs(
            "Monte Carlo P_0.5 vs radial quadrature",
            est.value,
            p_quad,
            3.0 * est.stderr,
        ),
    ])
}

fn gaussian_law(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let spec = KernelSpec::gaussian(2)?;
    let t = 1e-6;
    let mut out = Vec::new();
    for (shape, per) in [(Shape::ball(2, 1.0)?, 2.0 * PI), (Shape::cuboid(&[1.0, 1.0])?, 4.0)] {
        let r = heat_content(&spec, &default_profile(&shape)?, t, &cfg.quadrature)?;
        out.push(Metric::rel(
            format!("{}: deficit/sqrt(t)", shape.label()),
            r.deficit / t.sqrt(),
            per / PI.sqrt(),
            0.02,
        ));
    }
    Ok(out)
}

fn first_moment_bound(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let grid = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut out = Vec::new();
    for d in [2usize, 3] {
        for shape in [Shape::ball(d, 1.0)?, Shape::cuboid(&vec![1.0; d])?] {
            let profile = default_profile(&shape)?;
            for alpha in [1.2, 1.8] {
                let report = bound_check_part_i_with_profile(
                    &KernelSpec::stable(alpha, d)?,
                    &shape,
                    &profile,
                    &grid,
                    &cfg.quadrature,
                )?;
                for e in &report.entries {
                    out.push(Metric::upper(
                        format!("{} alpha={alpha} t={:e}", shape.label(), e.t),
                        e.lhs,
                        e.rhs,
                        e.slack,
                    ));
                }
            }
        }
    }
    Ok(out)
}

fn logarithmic_bound(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let disk = Shape::ball(2, 1.0)?;
    let spec = KernelSpec::poisson(2)?;
    let kappa = 1.0 / (2.0 * PI);
    let inner = (1.0 + 2f64.sqrt()).ln() - 1.0 / 2f64.sqrt();
    let lambda_closed = PI / 2.0 * 2.0 * PI * kappa + kappa * 2.0 * 2.0 * PI * (2f64.ln() + inner);
    let mut out = vec![Metric::abs(
        "lambda(B)",
        part_ii_lambda(&spec, &disk)?,
        lambda_closed,
        1e-8,
    )];
    let report = bound_check_part_ii_with_profile(
        &spec,
        &disk,
        &default_profile(&disk)?,
        &[0.5, 0.1, 1e-3],
        &cfg.quadrature,
    )?;
    for e in &report.entries {
        out.push(Metric::upper(format!("bound at t={:e}", e.t), e.lhs, e.rhs, e.slack));
    }
    Ok(out)
}

fn decomposition(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for d in [2usize, 3] {
        let ball = Shape::ball(d, 1.0)?;
        let profile = default_profile(&ball)?;
        let spec = KernelSpec::poisson(d)?;
        let volume = unit_ball_volume_unchecked(d);
        for t in [0.5, 0.1, 0.01] {
            let dec = ball_poisson_decomposition(d, t, &cfg.quadrature)?;
            let h = heat_content(&spec, &profile, t, &cfg.quadrature)?;
            out.push(Metric::abs(
                format!("d={d} t={t}: N1 - (Per/pi) t N2 vs H"),
                dec.heat_content(d),
                h.heat,
                1e-6,
            ));
            out.push(Metric::upper(format!("d={d} t={t}: N1 <= |B|"), dec.n1, volume, 0.0));
        }
        let ratios = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&t| Ok(ball_poisson_decomposition(d, t, &cfg.quadrature)?.n2 / (1.0 / t).ln()))
            .collect::<Result<Vec<f64>>>()?;
        let last = ratios[ratios.len() - 1];
        out.push(Metric::lower(format!("d={d}: N2/ln(1/t) at t=1e-6"), last, 0.9));
        out.push(Metric::flag(
            format!("d={d}: N2/ln(1/t) increases as t decreases"),
            ratios.windows(2).all(|w| w[1] > w[0]),
        ));
    }
    Ok(out)
}

fn constants() -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for d in [2usize, 3, 5] {
        out.push(Metric::abs(
            format!("C(1,{d}) vs kappa_{d}"),
            stable_tail_constant(1.0, d)?,
            poisson_constant(d)?,
            1e-12,
        ));
        out.push(Metric::abs(
            format!("kappa_{d} w_{} vs 1/pi", d - 1),
            poisson_constant(d)? * unit_ball_volume_unchecked(d - 1),
            1.0 / PI,
            1e-12,
        ));
    }
    out.push(Metric::abs(
        "alpha=2 perimeter factor vs 1/sqrt(pi)",
        stable_perimeter_factor(2.0)?,
        1.0 / PI.sqrt(),
        1e-15,
    ));
    let square = Shape::cuboid(&[1.0, 1.0])?;
    let gaussian = theoretical_constant(&KernelSpec::gaussian(2)?, &square, &QuadratureConfig::default())?;
    out.push(Metric::abs(
        "Gaussian unit square constant vs 4/sqrt(pi)",
        gaussian.value,
        4.0 / PI.sqrt(),
        1e-14,
    ));
    Ok(out)
}

fn oracle_cross_check(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    let shapes = [Shape::ball(2, 1.0)?, Shape::cuboid(&[1.0, 1.0])?];
    let mut stream = 0u64;
    for shape in &shapes {
        let profile = default_profile(shape)?;
        for alpha in [1.0, 1.5] {
            let spec = KernelSpec::stable(alpha, 2)?;
            for t in [0.1, 0.01] {
                let quad = heat_content(&spec, &profile, t, &cfg.quadrature)?;
                let est = mc_heat_content(&spec, shape, t, cfg.mc_samples(), cfg.seed.wrapping_add(stream))?;
                stream += 1;
                out.push(Metric::abs(
                    format!("{} alpha={alpha} t={t}", shape.label()),
                    est.value,
                    quad.heat,
                    3.0 * est.stderr + quad.quad_error,
                ));
            }
        }
    }
    Ok(out)
}

fn perimeter_scaling(_cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let alpha = 0.5;
    let tol = Tolerance::new(1e-12, 1e-11);
    let unit = Shape::ball(2, 1.0)?;
    let double = Shape::ball(2, 2.0)?;
    let p1 = alpha_perimeter(&unit, alpha, &default_profile(&unit)?, tol)?;
    let p2 = alpha_perimeter(&double, alpha, &default_profile(&double)?, tol)?;
    Ok(vec![Metric::rel(
        "P(2B) vs 2^(d-alpha) P(B)",
        p2,
        2f64.powf(2.0 - alpha) * p1,
        1e-3,
    )])
}

fn regime_errors(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let moment = moment_d(&KernelSpec::stable(0.8, 2)?, &cfg.quadrature);
    let closed = moment_d_closed_form(&KernelSpec::stable(0.8, 2)?);
    let disk = Shape::ball(2, 1.0)?;
    let perimeter = alpha_perimeter(&disk, 1.3, &default_profile(&disk)?, Tolerance::new(1e-10, 1e-10));
    Ok(vec![
        Metric::flag(
            "moment at alpha=0.8 is a regime error",
            moment.is_err_and(|e| e.is_regime()),
        ),
        Metric::flag(
            "closed-form moment at alpha=0.8 is a regime error",
            closed.is_err_and(|e| e.is_regime()),
        ),
        Metric::flag(
            "alpha-perimeter at alpha=1.3 is a regime error",
            perimeter.is_err_and(|e| e.is_regime()),
        ),
    ])
}

/// Reruns the randomized and quadrature-heavy cheap checks and compares their
/// CSV output byte for byte.
fn determinism(cfg: &VerifyConfig) -> Result<Vec<Metric>> {
    let sub = VerifyConfig {
        quick: true,
        ..cfg.clone()
    };
    let run = || -> Result<String> {
        let criteria = [4u32, 13, 15, 16]
            .iter()
            .map(|&id| run_criterion(id, &sub))
            .collect::<Result<Vec<_>>>()?;
        csv_rows(&criteria, &[])
    };
    let (a, b) = (run()?, run()?);
    let c = mc_heat_content(
        &KernelSpec::stable(1.5, 2)?,
        &Shape::ball(2, 1.0)?,
        0.1,
        50_000,
        cfg.seed,
    )?;
    let d = mc_heat_content(
        &KernelSpec::stable(1.5, 2)?,
        &Shape::ball(2, 1.0)?,
        0.1,
        50_000,
        cfg.seed,
    )?;
    Ok(vec![
        Metric::flag("repeated sub-battery CSV is byte-identical", a == b),
        Metric::flag(
            "repeated Monte Carlo estimate is bit-identical",
            c.value.to_bits() == d.value.to_bits(),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_criteria_pass() {
        let cfg = VerifyConfig {
            quick: true,
            ..VerifyConfig::default()
        };
        for id in [13, 16, 15] {
            let r = run_criterion(id, &cfg).unwrap();
            assert!(r.passed, "{}", summary_line(&r));
        }
        assert!(run_criterion(0, &cfg).is_err());
        assert!(run_criterion(18, &cfg).is_err());
    }

    #[test]
    fn csv_has_schema_and_no_timings() {
        let cfg = VerifyConfig::default();
        let r = run_criterion(13, &cfg).unwrap();
        let csv = csv_rows(&[r], &[]).unwrap();
        assert!(csv.starts_with("# heatlab-schema v1\n"));
        assert!(csv.lines().nth(1).unwrap().starts_with("id,criterion,metric"));
    }
}
