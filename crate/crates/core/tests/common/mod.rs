#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swapnet::asymptotics::DiffusionSpec;
use swapnet::model::Regime;

/// Tanh–sinh quadrature on a finite interval.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, tol).integral
}

/// Integral over `[a, b]` split at interior `breaks` so every panel is smooth.
pub fn integrate_pieces(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| integrate(&f, w[0], w[1], tol)).sum()
}

/// Stationary law of the single-station chain by a dense linear solve of
/// `π Q = 0`, `Σπ = 1`.
pub fn generator_stationary(b: u64, f: Option<u64>, r: u64, lambda: f64, mu: f64) -> Vec<f64> {
    let n = (b + r + 1) as usize;
    let mut q = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let ku = k as u64;
        let birth = lambda * (r - ku.saturating_sub(b)) as f64;
        let death = mu * f.map_or(ku, |f| ku.min(f)) as f64;
        if k + 1 < n {
            q[(k, k + 1)] = birth;
        }
        if k > 0 {
            q[(k, k - 1)] = death;
        }
        let out: f64 = (0..n).filter(|&j| j != k).map(|j| q[(k, j)]).sum();
        q[(k, k)] = -out;
    }
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let sol = a.lu().solve(&rhs).expect("generator system is nonsingular");
    sol.iter().copied().collect()
}

pub fn assert_close(got: f64, want: f64, rel: f64, what: &str) {
    let scale = want.abs().max(1e-300);
    assert!(
        (got - want).abs() <= rel * scale,
        "{what}: got {got:e}, want {want:e} (rel err {:e})",
        (got - want).abs() / scale
    );
}

/// `n` seeded random parameter sets valid for `regime`.
pub fn random_specs(regime: Regime, n: usize, seed: u64) -> Vec<DiffusionSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let lambda = rng.random_range(0.1..3.0);
            let mu = rng.random_range(0.1..3.0);
            let (beta, gamma) = match regime {
                Regime::LimitedChargers => {
                    let beta = rng.random_range(-1.5..2.5);
                    (beta, beta - rng.random_range(0.0..3.0))
                }
                Regime::UnlimitedChargers => (rng.random_range(-2.0..3.0), 0.0),
                Regime::SwapUnconstrained => {
                    let beta = rng.random_range(-2.0..2.0);
                    (beta, beta + rng.random_range(0.05..3.0))
                }
            };
            DiffusionSpec::new(lambda, mu, beta, gamma, regime).unwrap()
        })
        .collect()
}

pub const REGIMES: [Regime; 3] = [Regime::LimitedChargers, Regime::UnlimitedChargers, Regime::SwapUnconstrained];

/// An interval holding all but a negligible part of the density's mass.
pub fn support(s: &DiffusionSpec) -> (f64, f64) {
    let (lo, hi) = s.breakpoints;
    let tail_scale = (s.mu / s.lambda).sqrt().max(1.0);
    (lo.min(0.0) - 40.0, hi.max(0.0) + 40.0 * tail_scale)
}

pub fn breaks(s: &DiffusionSpec) -> Vec<f64> {
    vec![s.breakpoints.0, s.breakpoints.1]
}
