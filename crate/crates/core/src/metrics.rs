//! Diffusion scaling, collapse gaps and replication estimators.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::model::Network;
use crate::sim::{SimPath, WaitTally};

const Z_95: f64 = 1.959_963_984_540_054;

/// Per-station diffusion-scaled queues and their `p`-weighted aggregate.
#[derive(Clone, Debug, Serialize)]
pub struct ScaledPath {
    pub times: Vec<f64>,
    /// `qhat[k][j] = (Q_j − p_j λr/μ) / (p_j sqrt(λr/μ))` at `times[k]`.
    pub qhat: Vec<Vec<f64>>,
    /// `Σ_j p_j qhat_j`.
    pub qhat_sigma: Vec<f64>,
    pub p: Vec<f64>,
    /// Offered load `λr/μ`.
    pub load: f64,
}

/// Scales one state vector.
pub fn scale_state(q: &[f64], p: &[f64], load: f64) -> Vec<f64> {
    let root = load.sqrt();
    q.iter()
        .zip(p)
        .map(|(&qj, &pj)| (qj - pj * load) / (pj * root))
        .collect()
}

pub fn diffusion_scale(path: &SimPath, net: &Network) -> ScaledPath {
    let p = net.p().to_vec();
    let load = net.offered_load();
    let mut qhat = Vec::with_capacity(path.q_samples.len());
    let mut qhat_sigma = Vec::with_capacity(path.q_samples.len());
    for q in &path.q_samples {
        let qf: Vec<f64> = q.iter().map(|&x| x as f64).collect();
        let s = scale_state(&qf, &p, load);
        qhat_sigma.push(s.iter().zip(&p).map(|(x, pj)| x * pj).sum());
        qhat.push(s);
    }
    ScaledPath {
        times: path.sample_times.clone(),
        qhat,
        qhat_sigma,
        p,
        load,
    }
}

impl ScaledPath {
    /// Samples where the aggregate leaves `[min_j qhat_j, max_j qhat_j]`.
    pub fn sandwich_violations(&self) -> usize {
        self.qhat
            .iter()
            .zip(&self.qhat_sigma)
            .filter(|(q, &s)| {
                let (lo, hi) = min_max(q);
                let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
                s < lo - slack || s > hi + slack
            })
            .count()
    }

    /// Unscaled queue lengths at sample `k`.
    pub fn unscaled(&self, k: usize) -> Vec<f64> {
        let root = self.load.sqrt();
        self.qhat[k]
            .iter()
            .zip(&self.p)
            .map(|(x, pj)| pj * self.load + pj * root * x)
            .collect()
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Collapse statistics over a time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapStats {
    /// Largest scaled gap `max_{i<j} |qhat_i − qhat_j|` seen in the window.
    pub max_gap: f64,
    /// Time average of the scaled gap.
    pub avg_gap: f64,
    /// Time average of the unscaled gap `max_{i<j} |Q_i − Q_j|`.
    pub unscaled_avg_gap: f64,
}

/// Gap statistics on `[t0, t1]`. Time averages treat the sampled path as
/// piecewise constant between samples.
pub fn ssc_gaps(scaled: &ScaledPath, t0: f64, t1: f64) -> Result<GapStats> {
    if !(t0 < t1) {
        return Err(invalid("gap window needs t0 < t1"));
    }
    let n = scaled.times.len();
    let mut max_gap: f64 = f64::NEG_INFINITY;
    let mut weight = 0.0;
    let mut acc = 0.0;
    let mut acc_raw = 0.0;
    for k in 0..n {
        let t = scaled.times[k];
        let (lo, hi) = min_max(&scaled.qhat[k]);
        let gap = hi - lo;
        if t >= t0 && t <= t1 {
            max_gap = max_gap.max(gap);
        }
        let end = if k + 1 < n { scaled.times[k + 1] } else { t1 };
        let w = (end.min(t1) - t.max(t0)).max(0.0);
        if w > 0.0 {
            let (qlo, qhi) = min_max(&scaled.unscaled(k));
            acc += w * gap;
            acc_raw += w * (qhi - qlo);
            weight += w;
        }
    }
    if !max_gap.is_finite() || weight <= 0.0 {
        return Err(invalid(format!("no samples in window [{t0}, {t1}]")));
    }
    Ok(GapStats {
        max_gap,
        avg_gap: acc / weight,
        unscaled_avg_gap: acc_raw / weight,
    })
}

/// Mean across replications with a normal-approximation 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl Estimate {
    /// Summarises per-replication values. The result does not depend on
    /// their order. A single value gets a zero-width interval.
    pub fn from_values(values: &[f64]) -> Option<Estimate> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let half_width = if n > 1 {
            let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            dev.sort_by(f64::total_cmp);
            let var = dev.iter().sum::<f64>() / (n - 1) as f64;
            Z_95 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Estimate {
            mean,
            half_width,
            n,
        })
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationWaitStats {
    pub station: usize,
    pub wait_prob: Option<Estimate>,
    pub mean_wait: Option<Estimate>,
    /// No replication saw an arrival at this station.
    pub missing: bool,
}

/// Per-station waiting probability and mean wait across replications.
///
/// `reps[k][j]` is replication `k`'s tally at station `j`. Replications with
/// no arrivals at a station do not contribute to that station.
pub fn wait_stats(reps: &[Vec<WaitTally>]) -> Result<Vec<StationWaitStats>> {
    let Some(first) = reps.first() else {
        return Err(crate::Error::NoReplications);
    };
    let s = first.len();
    if reps.iter().any(|r| r.len() != s) {
        return Err(invalid("replications disagree on the number of stations"));
    }
    Ok((0..s)
        .map(|j| {
            let probs: Vec<f64> = reps
                .iter()
                .filter(|r| r[j].arrivals > 0)
                .map(|r| r[j].waited as f64 / r[j].arrivals as f64)
                .collect();
            let waits: Vec<f64> = reps
                .iter()
                .filter(|r| r[j].completed > 0)
                .map(|r| r[j].wait_sum / r[j].completed as f64)
                .collect();
            StationWaitStats {
                station: j,
                missing: probs.is_empty(),
                wait_prob: Estimate::from_values(&probs),
                mean_wait: Estimate::from_values(&waits),
            }
        })
        .collect())
}

/// Time-average resource utilisation per station.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Utilization {
    /// Busy fraction of charging points, `None` with unlimited chargers.
    pub rho_f: Vec<Option<f64>>,
    /// Fraction of spare batteries not fully charged, `min(q, B)/B`;
    /// `None` when `B = 0`.
    pub rho_b: Vec<Option<f64>>,
}

pub fn utilization(path: &SimPath, net: &Network) -> Utilization {
    let t = path.end_time;
    let caps = net.capacities();
    Utilization {
        rho_f: caps
            .iter()
            .zip(&path.busy_time)
            .map(|(c, &busy)| c.f.filter(|&f| f > 0 && t > 0.0).map(|f| busy / (f as f64 * t)))
            .collect(),
        rho_b: caps
            .iter()
            .zip(&path.spare_time)
            .map(|(c, &spare)| (c.b > 0 && t > 0.0).then(|| spare / (c.b as f64 * t)))
            .collect(),
    }
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    0.5 * (0..n)
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against a CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_has_zero_width() {
        let e = Estimate::from_values(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.half_width, 0.0);
    }

    #[test]
    fn tv_of_identical_is_zero() {
        assert_eq!(total_variation(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
    }
}
