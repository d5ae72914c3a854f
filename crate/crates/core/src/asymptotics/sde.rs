//! Euler–Maruyama sampling of the limiting diffusion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::DiffusionSpec;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug)]
pub struct SdeOptions {
    /// Infinitesimal variance; `None` uses `2μ`. Zero gives the drift ODE.
    pub variance: Option<f64>,
    /// Keep every `thin`-th point.
    pub thin: usize,
}

impl Default for SdeOptions {
    fn default() -> Self {
        SdeOptions {
            variance: None,
            thin: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiffusionPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DiffusionPath {
    /// Values observed at or after `t0`.
    pub fn after(&self, t0: f64) -> &[f64] {
        let start = self.times.partition_point(|&t| t < t0);
        &self.values[start..]
    }
}

pub fn simulate_limit_diffusion(
    spec: &DiffusionSpec,
    q0_hat: f64,
    horizon: f64,
    step: f64,
    seed: u64,
    opts: SdeOptions,
) -> Result<DiffusionPath> {
    if !(step > 0.0) || !(horizon > 0.0) || !q0_hat.is_finite() {
        return Err(invalid("step and horizon must be positive and q0 finite"));
    }
    let thin = opts.thin.max(1);
    let var = opts.variance.unwrap_or(2.0 * spec.mu);
    if var < 0.0 {
        return Err(invalid("variance must be non-negative"));
    }
    let sd = (var * step).sqrt();
    let n = (horizon / step).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(n / thin + 1);
    let mut values = Vec::with_capacity(n / thin + 1);
    let mut x = q0_hat;
    times.push(0.0);
    values.push(x);
    for i in 1..=n {
        let z: f64 = if sd > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
        x += spec.drift(x) * step + sd * z;
        if i % thin == 0 {
            times.push(i as f64 * step);
            values.push(x);
        }
    }
    Ok(DiffusionPath { times, values })
}
