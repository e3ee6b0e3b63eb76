//! Statistical checks of the Monte Carlo estimators.

mod common;

use common::*;
use heatlab::geometry::{covariance_mc, Shape};
use heatlab::kernel::KernelSpec;
use heatlab::oracle::{mc_alpha_perimeter, mc_constant_kernel_calibration, mc_heat_content};
use heatlab::sampling::McEstimate;

/// Ratio of the empirical variance across seeds to the mean reported variance.
fn variance_ratio(estimates: &[McEstimate]) -> f64 {
    let n = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.value).sum::<f64>() / n;
    let empirical = estimates.iter().map(|e| (e.value - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let reported = estimates.iter().map(|e| e.stderr * e.stderr).sum::<f64>() / n;
    empirical / reported
}

#[test]
fn estimates_repeat_bit_for_bit() {
    let disk = Shape::ball(2, 1.0).unwrap();
    let spec = KernelSpec::stable(1.5, 2).unwrap();
    let a = mc_heat_content(&spec, &disk, 0.05, 50_000, 7).unwrap();
    let b = mc_heat_content(&spec, &disk, 0.05, 50_000, 7).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    let c = mc_heat_content(&spec, &disk, 0.05, 50_000, 8).unwrap();
    assert_ne!(a.value, c.value);
}

#[test]
fn estimates_ignore_thread_count() {
    let square = Shape::cuboid(&[1.0, 1.0]).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| covariance_mc(&square, &[0.3, 0.1], 100_000, 3).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.value.to_bits(), four.value.to_bits());
    assert_eq!(one.stderr.to_bits(), four.stderr.to_bits());
}

#[test]
fn reported_error_matches_seed_spread() {
    let disk = Shape::ball(2, 1.0).unwrap();
    let covariance: Vec<McEstimate> = (0..40)
        .map(|s| covariance_mc(&disk, &[0.5, 0.0], 20_000, 1000 + s).unwrap())
        .collect();
    let ratio = variance_ratio(&covariance);
    assert!((0.5..=2.0).contains(&ratio), "covariance variance ratio {ratio}");

    let spec = KernelSpec::poisson(2).unwrap();
    let heat: Vec<McEstimate> = (0..40)
        .map(|s| mc_heat_content(&spec, &disk, 0.1, 20_000, 2000 + s).unwrap())
        .collect();
    let ratio = variance_ratio(&heat);
    assert!((0.5..=2.0).contains(&ratio), "heat content variance ratio {ratio}");
}

#[test]
fn calibration_error_decays_at_root_n() {
    let ball = Shape::ball(3, 1.0).unwrap();
    let sizes = [1_000u64, 10_000, 100_000, 1_000_000];
    let points: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| {
            let e = mc_constant_kernel_calibration(&ball, n, 11).unwrap();
            assert!(e.agrees_with(ball_volume(3), 4.0), "n={n}: {} +- {}", e.value, e.stderr);
            ((n as f64).ln(), e.stderr.ln())
        })
        .collect();
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
}

#[test]
fn covariance_estimates_match_closed_forms() {
    let disk = Shape::ball(2, 1.0).unwrap();
    let e = covariance_mc(&disk, &[0.8, 0.6], 200_000, 5).unwrap();
    assert!(e.agrees_with(disk_covariance(1.0), 4.0));
    let ball = Shape::ball(3, 1.0).unwrap();
    let e = covariance_mc(&ball, &[0.0, 1.2, 0.0], 200_000, 6).unwrap();
    assert!(e.agrees_with(ball3_covariance(1.2), 4.0));
    let sides = [1.0, 2.0, 3.0];
    let cuboid = Shape::cuboid(&sides).unwrap();
    let e = covariance_mc(&cuboid, &[0.5, -1.0, 2.0], 200_000, 7).unwrap();
    assert!(e.agrees_with(box_covariance(&sides, &[0.5, -1.0, 2.0]), 4.0));
}

#[test]
fn alpha_perimeter_estimate_scales() {
    let alpha = 0.5;
    let unit = mc_alpha_perimeter(&Shape::ball(2, 1.0).unwrap(), alpha, 200_000, 9).unwrap();
    let double = mc_alpha_perimeter(&Shape::ball(2, 2.0).unwrap(), alpha, 200_000, 10).unwrap();
    let factor = 2f64.powf(2.0 - alpha);
    let gap = (double.value - factor * unit.value).abs();
    let spread = (double.stderr.powi(2) + (factor * unit.stderr).powi(2)).sqrt();
    assert!(gap <= 4.0 * spread, "{} vs {}", double.value, factor * unit.value);
}

#[test]
fn invalid_requests_are_rejected() {
    let disk = Shape::ball(2, 1.0).unwrap();
    let spec = KernelSpec::gaussian(2).unwrap();
    assert!(mc_heat_content(&spec, &disk, 0.1, 0, 1).is_err());
    assert!(mc_heat_content(&spec, &disk, -1.0, 10, 1).is_err());
    assert!(mc_heat_content(&KernelSpec::gaussian(3).unwrap(), &disk, 0.1, 10, 1).is_err());
    assert!(mc_alpha_perimeter(&disk, 1.5, 10, 1).is_err());
}
