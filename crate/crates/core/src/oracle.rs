//! Brute-force Monte Carlo estimators of the headline quantities, kept apart
//! from the covariance and quadrature pipeline they are used to check.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{chord_length, diameter, Shape};
use crate::kernel::{eval_p1, KernelSpec};
use crate::numerics::UniformSpline;
use crate::quadrature::QuadratureConfig;
use crate::sampling::{run_chunked, uniform_direction, uniform_in_box, Moments};
use crate::special::unit_sphere_area_unchecked;

pub use crate::sampling::McEstimate;

const HEAT_TASK: u64 = 10;
const PERIMETER_TASK: u64 = 11;
const CALIBRATION_TASK: u64 = 12;

/// Rejection sampling below this acceptance rate is refused.
pub const MIN_EFFICIENCY: f64 = 1e-3;

/// An estimate tagged for the JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub source: &'static str,
    pub quantity: String,
    #[serde(flatten)]
    pub estimate: McEstimate,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, estimate: McEstimate) -> Self {
        Self {
            source: "oracle",
            quantity: quantity.into(),
            estimate,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Output(e.to_string()))
    }
}

/// `p_t` as a function of `|z|`. Stable densities without a closed form are
/// tabulated once per call as `ln p_1` against `ln(1 + r)` on a uniform grid.
enum TimeKernel {
    Exact { spec: KernelSpec, cfg: QuadratureConfig },
    Table { spline: UniformSpline, end: f64 },
}

impl TimeKernel {
    fn new(spec: &KernelSpec, t: f64, reach: f64) -> Result<Self> {
        let cfg = QuadratureConfig::default();
        if spec.has_closed_form() {
            return Ok(TimeKernel::Exact { spec: *spec, cfg });
        }
        let r_max = reach / t.powf(spec.scaling().gamma) * (1.0 + 1e-9);
        let end = r_max.ln_1p();
        let nodes = ((end / 0.005).ceil() as usize).clamp(600, 20_000);
        let h = end / (nodes - 1) as f64;
        let logs: Vec<f64> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let r = (i as f64 * h).exp_m1();
                eval_p1(spec, r, &cfg).map(|p| p.max(f64::MIN_POSITIVE).ln())
            })
            .collect::<Result<_>>()?;
        Ok(TimeKernel::Table {
            spline: UniformSpline::new(0.0, h, logs, 0.0)?,
            end,
        })
    }

    /// `p_1(r)`.
    fn unit(&self, r: f64) -> Result<f64> {
        match self {
            TimeKernel::Exact { spec, cfg } => eval_p1(spec, r, cfg),
            TimeKernel::Table { spline, end } => {
                let s = r.ln_1p();
                if s > *end * (1.0 + 1e-12) {
                    return Err(Error::domain(format!(
                        "tabulated kernel queried beyond its range at r = {r}"
                    )));
                }
                Ok(spline.eval(s).exp())
            }
        }
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::domain("Monte Carlo needs at least one sample"));
    }
    Ok(())
}

fn efficiency(shape: &Shape) -> Option<f64> {
    shape.volume().map(|v| v / shape.bounding_box_volume())
}

fn check_efficiency(shape: &Shape) -> Result<()> {
    if let Some(e) = efficiency(shape) {
        if e < MIN_EFFICIENCY {
            return Err(Error::Inefficient { efficiency: e });
        }
    }
    Ok(())
}

/// Uniform point of `Ω` by rejection from the bounding box.
fn sample_in_shape(
    rng: &mut rand_chacha::ChaCha8Rng,
    shape: &Shape,
    lower: &[f64],
    upper: &[f64],
    out: &mut [f64],
) -> Result<()> {
    // Far more attempts than any admissible efficiency needs.
    for _ in 0..1_000_000 {
        uniform_in_box(rng, lower, upper, out);
        if shape.contains(out) {
            return Ok(());
        }
    }
    Err(Error::Inefficient { efficiency: 0.0 })
}

/// `H(t) = ∫_Ω∫_Ω p_t(x - y) dx dy` by plain pair sampling.
///
/// With a known volume, `x` and `y` are drawn uniformly from `Ω` and the mean
/// of `p_t(x - y)` is multiplied by `|Ω|²`. Indicator shapes without a volume
/// draw both points from the bounding box and weight by membership instead.
pub fn mc_heat_content(spec: &KernelSpec, shape: &Shape, t: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be positive, got {t}")));
    }
    let d = shape.dimension();
    if spec.dimension != d {
        return Err(Error::domain("kernel and shape dimensions differ"));
    }
    check_efficiency(shape)?;
    let kernel = TimeKernel::new(spec, t, diameter(shape))?;
    let sigma = t.powf(spec.scaling().gamma);
    let mass = t.powf(spec.scaling().beta);
    let (lower, upper) = shape.bounding_box();
    let volume = shape.volume();
    let box_volume = shape.bounding_box_volume();
    let m = run_chunked(samples, seed, HEAT_TASK, |rng, n| {
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        let mut acc = Moments::default();
        for _ in 0..n {
            let weight = match volume {
                Some(_) => {
                    sample_in_shape(rng, shape, &lower, &upper, &mut x)?;
                    sample_in_shape(rng, shape, &lower, &upper, &mut y)?;
                    1.0
                }
                None => {
                    uniform_in_box(rng, &lower, &upper, &mut x);
                    uniform_in_box(rng, &lower, &upper, &mut y);
                    if shape.contains(&x) && shape.contains(&y) {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            if weight == 0.0 {
                acc.push(0.0);
                continue;
            }
            let r = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            acc.push(mass * kernel.unit(r / sigma)?);
        }
        Ok(acc)
    })?;
    let scale = match volume {
        Some(v) => v * v,
        None => box_volume * box_volume,
    };
    Ok(McEstimate {
        value: scale * m.mean(),
        stderr: scale * m.stderr(),
        samples,
        seed,
    })
}

/// Calibration hook: the pair estimator with `p_t` replaced by the constant
/// `1/|Ω|`, whose expectation is exactly `|Ω|`. Pairs are drawn from the
/// bounding box so the standard error decays like `n^{-1/2}`.
pub fn mc_constant_kernel_calibration(shape: &Shape, samples: u64, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    let volume = shape
        .volume()
        .ok_or_else(|| Error::UnsupportedShape("the calibration hook needs an exact volume".into()))?;
    check_efficiency(shape)?;
    let d = shape.dimension();
    let (lower, upper) = shape.bounding_box();
    let box_volume = shape.bounding_box_volume();
    let m = run_chunked(samples, seed, CALIBRATION_TASK, |rng, n| {
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        let mut acc = Moments::default();
        for _ in 0..n {
            uniform_in_box(rng, &lower, &upper, &mut x);
            uniform_in_box(rng, &lower, &upper, &mut y);
            acc.push(if shape.contains(&x) && shape.contains(&y) {
                1.0
            } else {
                0.0
            });
        }
        Ok(acc)
    })?;
    let scale = box_volume * box_volume / volume;
    Ok(McEstimate {
        value: scale * m.mean(),
        stderr: scale * m.stderr(),
        samples,
        seed,
    })
}

/// `P_α(Ω) = ∫_Ω∫_{Ω^c} |x - y|^{-d-α} dy dx` for a convex `Ω` and `α ∈ (0, 1)`.
///
/// Integrating `|x - y|^{-d-α}` over `Ω^c` along each ray from `x` and then
/// averaging the exit distance along the chord through `x` gives
/// `P_α = (α(1-α))^{-1} ∫_{S^{d-1}}∫_Ω L(x, u)^{-α} dx du` with `L` the full
/// chord length. The estimator averages `|Ω| A_d L^{-α}/(α(1-α))` over uniform
/// `x ∈ Ω` and uniform directions `u`; unlike the raw pair form it has finite
/// variance for every `α < 1`.
pub fn mc_alpha_perimeter(shape: &Shape, alpha: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::regime(format!("the α-perimeter needs α in (0, 1), got {alpha}")));
    }
    let volume = shape
        .volume()
        .ok_or_else(|| Error::UnsupportedShape("the α-perimeter estimator needs an exact volume".into()))?;
    check_efficiency(shape)?;
    let d = shape.dimension();
    let (lower, upper) = shape.bounding_box();
    let scale = volume * unit_sphere_area_unchecked(d) / (alpha * (1.0 - alpha));
    let m = run_chunked(samples, seed, PERIMETER_TASK, |rng, n| {
        let (mut x, mut u) = (vec![0.0; d], vec![0.0; d]);
        let mut acc = Moments::default();
        for _ in 0..n {
            sample_in_shape(rng, shape, &lower, &upper, &mut x)?;
            uniform_direction(rng, &mut u);
            let chord = chord_length(shape, &x, &u);
            acc.push(if chord > 0.0 { chord.powf(-alpha) } else { 0.0 });
        }
        Ok(acc)
    })?;
    Ok(McEstimate {
        value: scale * m.mean(),
        stderr: scale * m.stderr(),
        samples,
        seed,
    })
}
