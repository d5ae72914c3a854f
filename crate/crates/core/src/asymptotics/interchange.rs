//! Exact finite-`r` steady states against the diffusion limit.

use serde::Serialize;

use super::DiffusionSpec;
use crate::error::{invalid, Result};
use crate::exactss::steady_state;
use crate::model::{provision, QedParams, Regime};

/// Kolmogorov distance at one fleet size.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InterchangePoint {
    pub r: u64,
    pub b: u64,
    pub f: u64,
    pub distance: f64,
}

/// For each `r`, provisions a single station, solves its exact steady state,
/// rescales by `(k − λr/μ)/sqrt(λr/μ)` and measures the sup distance to the
/// limiting distribution function. Both one-sided limits are checked at
/// every atom, so the distance is exact.
pub fn interchange_check(
    lambda: f64,
    mu: f64,
    beta: f64,
    gamma: f64,
    r_grid: &[u64],
) -> Result<Vec<InterchangePoint>> {
    if r_grid.is_empty() || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("r_grid must be non-empty and strictly increasing"));
    }
    let qed = QedParams::new(beta, gamma, Regime::LimitedChargers)?;
    let spec = DiffusionSpec::new(lambda, mu, beta, gamma, Regime::LimitedChargers)?;
    r_grid
        .iter()
        .map(|&r| {
            let cap = provision(lambda, mu, r, &qed, &[1.0], &[None])
                .map_err(|e| invalid(format!("r = {r}: {e}")))?[0];
            let f = cap.f.expect("limited regime has finite F");
            let dist = steady_state(cap.b, f, r, lambda, mu)?;
            let load = lambda * r as f64 / mu;
            let root = load.sqrt();
            let mut prev = 0.0;
            let mut sup: f64 = 0.0;
            for (k, c) in dist.cdf().into_iter().enumerate() {
                let limit = spec.cdf((k as f64 - load) / root);
                sup = sup.max((c - limit).abs()).max((prev - limit).abs());
                prev = c;
            }
            Ok(InterchangePoint {
                r,
                b: cap.b,
                f,
                distance: sup,
            })
        })
        .collect()
}
