//! Property tests for kernel scaling, covariance structure and heat content.

mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use common::*;
use heatlab::geometry::{covariance, covariance_ball, perimeter, Shape};
use heatlab::heat_content::{default_profile, heat_content};
use heatlab::kernel::{eval_p1, eval_pt, KernelSpec};
use heatlab::quadrature::QuadratureConfig;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn shapes() -> Vec<Shape> {
    vec![
        Shape::ball(2, 1.0).unwrap(),
        Shape::ball(3, 0.7).unwrap(),
        Shape::cuboid(&[1.0, 2.0]).unwrap(),
        Shape::cuboid(&[0.5, 1.0, 1.5]).unwrap(),
    ]
}

fn point(d: usize, raw: &[f64; 3]) -> Vec<f64> {
    raw[..d].to_vec()
}

proptest! {
    #[test]
    fn gaussian_matches_closed_form(d in 2usize..5, t in 1e-3f64..10.0, r in 0.0f64..5.0) {
        let value = eval_pt(&KernelSpec::gaussian(d).unwrap(), t, r, &cfg()).unwrap();
        let reference = (4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r * r / (4.0 * t)).exp();
        prop_assert!((value - reference).abs() <= 1e-12 * reference + 1e-300);
    }

    #[test]
    fn poisson_matches_closed_form(d in 2usize..5, t in 1e-3f64..10.0, r in 0.0f64..50.0) {
        let value = eval_pt(&KernelSpec::poisson(d).unwrap(), t, r, &cfg()).unwrap();
        let reference = poisson_kappa(d) * t / (t * t + r * r).powf((d as f64 + 1.0) / 2.0);
        prop_assert!((value - reference).abs() <= 1e-12 * reference);
    }

    #[test]
    fn stable_self_similarity(alpha in 0.3f64..2.0, d in 2usize..4, t in 1e-2f64..10.0, r in 0.0f64..5.0) {
        let spec = KernelSpec::stable(alpha, d).unwrap();
        let pt = eval_pt(&spec, t, r, &cfg()).unwrap();
        let gamma = 1.0 / alpha;
        let scaled = t.powf(-(d as f64) * gamma) * eval_p1(&spec, r * t.powf(-gamma), &cfg()).unwrap();
        prop_assert!((pt - scaled).abs() <= 1e-8 * scaled.abs() + 1e-14, "{} vs {}", pt, scaled);
    }

    #[test]
    fn covariance_symmetric_and_bounded(index in 0usize..4, raw in prop::array::uniform3(-3.0f64..3.0)) {
        let shape = &shapes()[index];
        let y = point(shape.dimension(), &raw);
        let g = covariance(shape, &y).unwrap();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert_eq!(g, covariance(shape, &neg).unwrap());
        prop_assert!(g >= 0.0 && g <= shape.volume().unwrap() * (1.0 + 1e-14));
        let at_origin = covariance(shape, &vec![0.0; y.len()]).unwrap();
        prop_assert!((at_origin - shape.volume().unwrap()).abs() <= 1e-14 * at_origin);
    }

    #[test]
    fn covariance_vanishes_beyond_diameter(index in 0usize..4, raw in prop::array::uniform3(-1.0f64..1.0), stretch in 1.0f64..3.0) {
        let shape = &shapes()[index];
        let y = point(shape.dimension(), &raw);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let diameter = heatlab::geometry::diameter(shape);
        let far: Vec<f64> = y.iter().map(|v| v / norm * diameter * stretch * 1.0001).collect();
        prop_assert_eq!(covariance(shape, &far).unwrap(), 0.0);
    }

    #[test]
    fn covariance_lipschitz(index in 0usize..4, a in prop::array::uniform3(-2.0f64..2.0), b in prop::array::uniform3(-2.0f64..2.0)) {
        let shape = &shapes()[index];
        let d = shape.dimension();
        let (y, z) = (point(d, &a), point(d, &b));
        let dist = y.iter().zip(&z).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let gap = (covariance(shape, &y).unwrap() - covariance(shape, &z).unwrap()).abs();
        let bound = perimeter(shape).unwrap() / 2.0 * dist;
        prop_assert!(gap <= bound * (1.0 + 1e-10) + 1e-14, "{} > {}", gap, bound);
    }

    #[test]
    fn ball_dilation(d in 2usize..6, radius in 0.1f64..5.0, a in 0.0f64..2.5) {
        let scaled = covariance_ball(d, radius, a * radius).unwrap();
        let unit = radius.powi(d as i32) * covariance_ball(d, 1.0, a).unwrap();
        prop_assert!((scaled - unit).abs() <= 1e-12 * radius.powi(d as i32));
    }

    #[test]
    fn disk_and_ball_closed_forms(a in 0.0f64..2.0) {
        prop_assert!((covariance_ball(2, 1.0, a).unwrap() - disk_covariance(a)).abs() < 1e-12);
        prop_assert!((covariance_ball(3, 1.0, a).unwrap() - ball3_covariance(a)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_content_monotone_and_bounded(
        index in 0usize..4,
        family in 0usize..3,
        t1 in 1e-4f64..0.5,
        factor in 1.1f64..10.0,
    ) {
        let shape = &shapes()[index];
        let d = shape.dimension();
        let spec = match family {
            0 => KernelSpec::gaussian(d).unwrap(),
            1 => KernelSpec::poisson(d).unwrap(),
            _ => KernelSpec::stable(1.5, d).unwrap(),
        };
        let profile = default_profile(shape).unwrap();
        let early = heat_content(&spec, &profile, t1, &cfg()).unwrap();
        let late = heat_content(&spec, &profile, t1 * factor, &cfg()).unwrap();
        let volume = shape.volume().unwrap();
        let slack = early.quad_error + late.quad_error;
        prop_assert!(late.heat <= early.heat + slack, "H({}) = {} > H({}) = {}", t1 * factor, late.heat, t1, early.heat);
        for h in [&early, &late] {
            prop_assert!(h.heat >= -h.quad_error && h.heat <= volume + h.quad_error);
        }
    }
}

#[test]
fn heat_content_tends_to_volume() {
    let disk = Shape::ball(2, 1.0).unwrap();
    let profile = default_profile(&disk).unwrap();
    let h = heat_content(&KernelSpec::gaussian(2).unwrap(), &profile, 1e-10, &cfg()).unwrap();
    assert_relative_eq!(h.heat, PI, max_relative = 1e-4);
}
