//! Deterministic parallel Monte Carlo plumbing.
//!
//! Samples are drawn in fixed-size chunks. Chunk `j` of task `k` uses the
//! ChaCha8 stream `(k << 32) | j` of the user seed, and chunk sums are
//! reduced in chunk order, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const CHUNK: u64 = 1 << 14;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// `|value - reference| <= k·stderr`.
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        (self.value - reference).abs() <= k * self.stderr
    }
}

/// Running first and second moments of a sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(self, other: Moments) -> Moments {
        Moments {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

pub(crate) fn rng_for(seed: u64, task: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((task << 32) | chunk);
    rng
}

/// Runs `samples` draws in parallel chunks; `draw` produces one chunk's moments.
pub(crate) fn run_chunked<F>(samples: u64, seed: u64, task: u64, draw: F) -> Result<Moments>
where
    F: Fn(&mut ChaCha8Rng, u64) -> Result<Moments> + Sync,
{
    if samples == 0 {
        return Err(Error::domain("Monte Carlo needs at least one sample"));
    }
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let n = CHUNK.min(samples - j * CHUNK);
            let mut rng = rng_for(seed, task, j);
            draw(&mut rng, n)
        })
        .collect();
    let mut total = Moments::default();
    for p in parts {
        total = total.merge(p?);
    }
    Ok(total)
}

pub(crate) fn uniform_in_box(rng: &mut ChaCha8Rng, lower: &[f64], upper: &[f64], out: &mut [f64]) {
    for ((o, &a), &b) in out.iter_mut().zip(lower).zip(upper) {
        *o = a + (b - a) * rng.random::<f64>();
    }
}

/// Uniform direction on `S^{d-1}` from Box–Muller normals.
pub(crate) fn uniform_direction(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        let mut i = 0;
        while i < out.len() {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random::<f64>();
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = 2.0 * std::f64::consts::PI * u2;
            out[i] = radius * angle.cos();
            if i + 1 < out.len() {
                out[i + 1] = radius * angle.sin();
            }
            i += 2;
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 {
            out.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_runs_are_reproducible() {
        let draw = |rng: &mut ChaCha8Rng, n: u64| {
            let mut m = Moments::default();
            for _ in 0..n {
                m.push(rng.random::<f64>());
            }
            Ok(m)
        };
        let a = run_chunked(100_000, 7, 0, draw).unwrap();
        let b = run_chunked(100_000, 7, 0, draw).unwrap();
        assert_eq!(a, b);
        let c = run_chunked(100_000, 8, 0, draw).unwrap();
        assert_ne!(a.sum, c.sum);
        assert!((a.mean() - 0.5).abs() < 5.0 * a.stderr());
        assert!(run_chunked(0, 7, 0, draw).is_err());
    }

    #[test]
    fn directions_are_unit_and_centered() {
        let mut rng = rng_for(1, 0, 0);
        let mut u = [0.0; 3];
        let mut mean = [0.0; 3];
        for _ in 0..20_000 {
            uniform_direction(&mut rng, &mut u);
            let n: f64 = u.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
            for k in 0..3 {
                mean[k] += u[k] / 20_000.0;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.03));
    }
}
