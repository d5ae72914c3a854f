//! Exact stationary distribution of the single-station birth–death chain.
//!
//! The chain counts batteries in need of charging. From state `k` it moves
//! up at rate `λ(r − (k−B)⁺)` and down at rate `μ·min(k, F)`. Factorial
//! closed forms overflow for realistic fleet sizes, so the distribution is
//! built from log ratios and normalised with log-sum-exp.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::normal::log_sum_exp;

/// Log-space stationary distribution over `k = 0..=B+r`.
#[derive(Clone, Debug, Serialize)]
pub struct SteadyStateDist {
    pub log_pi: Vec<f64>,
    pub b: u64,
    /// `None` means a charging point for every battery.
    pub f: Option<u64>,
    pub r: u64,
    pub lambda: f64,
    pub mu: f64,
}

fn check_rates(lambda: f64, mu: f64, r: u64) -> Result<()> {
    if !(lambda > 0.0 && mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
        return Err(invalid("lambda and mu must be positive and finite"));
    }
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    Ok(())
}

fn build(b: u64, f: Option<u64>, r: u64, lambda: f64, mu: f64) -> SteadyStateDist {
    let n = (b + r) as usize;
    let mut log_pi = Vec::with_capacity(n + 1);
    log_pi.push(0.0);
    let (ln_l, ln_m) = (lambda.ln(), mu.ln());
    for k in 0..n as u64 {
        let drivers = r - k.saturating_sub(b);
        let servers = match f {
            Some(f) => (k + 1).min(f),
            None => k + 1,
        };
        let step = ln_l + (drivers as f64).ln() - ln_m - (servers as f64).ln();
        let prev = *log_pi.last().expect("non-empty");
        log_pi.push(prev + step);
    }
    let z = log_sum_exp(&log_pi);
    assert!(z.is_finite(), "normalisation constant is not finite");
    for v in &mut log_pi {
        *v -= z;
    }
    SteadyStateDist {
        log_pi,
        b,
        f,
        r,
        lambda,
        mu,
    }
}

/// Stationary distribution with `F` charging points.
///
/// Any `F >= 1` is accepted; `F > B` arises when swap servers do not bind.
pub fn steady_state(b: u64, f: u64, r: u64, lambda: f64, mu: f64) -> Result<SteadyStateDist> {
    check_rates(lambda, mu, r)?;
    if f == 0 {
        return Err(invalid("F must be at least 1"));
    }
    Ok(build(b, Some(f), r, lambda, mu))
}

/// Stationary distribution when every battery can charge at once.
pub fn steady_state_infinite_f(b: u64, r: u64, lambda: f64, mu: f64) -> Result<SteadyStateDist> {
    check_rates(lambda, mu, r)?;
    Ok(build(b, None, r, lambda, mu))
}

impl SteadyStateDist {
    /// Number of states, `B + r + 1`.
    pub fn len(&self) -> usize {
        self.log_pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_pi.is_empty()
    }

    pub fn pi(&self, k: usize) -> f64 {
        self.log_pi.get(k).map_or(0.0, |v| v.exp())
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_pi.iter().map(|v| v.exp()).collect()
    }

    pub fn mean(&self) -> f64 {
        self.log_pi
            .iter()
            .enumerate()
            .map(|(k, v)| k as f64 * v.exp())
            .sum()
    }

    /// Smallest `k` with `P(Q <= k) >= q`.
    pub fn quantile(&self, q: f64) -> usize {
        let mut acc = 0.0;
        for (k, v) in self.log_pi.iter().enumerate() {
            acc += v.exp();
            if acc >= q {
                return k;
            }
        }
        self.len() - 1
    }

    /// `P(Q <= k)` for every `k`.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.log_pi
            .iter()
            .map(|v| {
                acc += v.exp();
                acc.min(1.0)
            })
            .collect()
    }
}

/// Stationary probability that no fully charged battery is on hand,
/// `Σ_{k >= B} π_k`.
///
/// This is a time average. Arrivals see it only asymptotically because the
/// arrival rate depends on the state.
pub fn wait_probability_exact(dist: &SteadyStateDist, b: u64) -> Result<f64> {
    let b = b as usize;
    if b >= dist.len() {
        return Err(invalid(format!(
            "B = {b} is outside the state space 0..{}",
            dist.len()
        )));
    }
    Ok(log_sum_exp(&dist.log_pi[b..]).exp().min(1.0))
}

/// Mean number of waiting EVs `E[(Q−B)⁺]` and, by Little's law, the mean
/// wait `E_QW / (λ (r − E_QW))`.
pub fn expected_waiting(dist: &SteadyStateDist, b: u64, lambda: f64, r: u64) -> Result<(f64, f64)> {
    let b = b as usize;
    let e_qw: f64 = dist
        .log_pi
        .iter()
        .enumerate()
        .skip(b + 1)
        .map(|(k, v)| (k - b) as f64 * v.exp())
        .sum();
    let r = r as f64;
    assert!(e_qw < r, "mean number of waiting EVs reached the fleet size");
    Ok((e_qw, e_qw / (lambda * (r - e_qw))))
}
