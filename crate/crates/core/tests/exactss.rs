mod common;

use common::{assert_close, generator_stationary};
use swapnet::exactss::{expected_waiting, steady_state, steady_state_infinite_f, wait_probability_exact};

/// Rational elimination on the full generator (tests/oracles/chain_exact.py).
const CHAIN_PI: [f64; 16] = [
    0.0007064873900924835,
    0.0035324369504624174,
    0.008831092376156044,
    0.014718487293593405,
    0.02453081215598901,
    0.04088468692664835,
    0.06814114487774725,
    0.10221171731662088,
    0.1362822897554945,
    0.15899600471474357,
    0.15899600471474357,
    0.13249667059561965,
    0.0883311137304131,
    0.04416555686520655,
    0.014721852288402183,
    0.0024536420480670306,
];
const CHAIN_WAIT: f64 = 0.9476806838337066;
const CHAIN_EQW: f64 = 4.036030856894716;
const CHAIN_MEAN: f64 = 8.937907608270761;

fn ln_fact(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Unnormalised log-weights from the four-case closed form.
fn closed_form_log(b: u64, f: u64, r: u64, lambda: f64, mu: f64) -> Vec<f64> {
    let rho = lambda / mu;
    (0..=b + r)
        .map(|k| {
            let kf = k as f64;
            let charging = if k <= f {
                -ln_fact(k)
            } else {
                -ln_fact(f) - (k - f) as f64 * (f as f64).ln()
            };
            if k <= b {
                kf * (rho * r as f64).ln() + charging
            } else {
                b as f64 * (r as f64).ln() + ln_fact(r) - ln_fact(r + b - k) + kf * rho.ln() + charging
            }
        })
        .collect()
}

fn normalise(log_w: &[f64]) -> Vec<f64> {
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_w.iter().map(|v| (v - m).exp()).sum();
    log_w.iter().map(|v| (v - m).exp() / z).collect()
}

#[test]
fn unit_chain_is_uniform() {
    let d = steady_state(1, 1, 1, 1.0, 1.0).unwrap();
    for p in d.probs() {
        assert!((p - 1.0 / 3.0).abs() < 1e-14);
    }
    assert!((wait_probability_exact(&d, 1).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    let (e_qw, e_w) = expected_waiting(&d, 1, 1.0, 1).unwrap();
    assert!((e_qw - 1.0 / 3.0).abs() < 1e-14);
    assert!((e_w - 0.5).abs() < 1e-14);
}

#[test]
fn two_state_chain_is_symmetric() {
    let d = steady_state(0, 1, 1, 1.0, 1.0).unwrap();
    assert_eq!(d.len(), 2);
    for p in d.probs() {
        assert!((p - 0.5).abs() < 1e-14);
    }
}

#[test]
fn matches_rational_generator_solution() {
    let d = steady_state(5, 3, 10, 1.0, 2.0).unwrap();
    assert_eq!(d.len(), 16);
    for (k, (got, want)) in d.probs().iter().zip(CHAIN_PI).enumerate() {
        assert!((got - want).abs() < 1e-12, "k = {k}: {got} vs {want}");
    }
    assert_close(wait_probability_exact(&d, 5).unwrap(), CHAIN_WAIT, 1e-12, "P(wait)");
    assert_close(expected_waiting(&d, 5, 1.0, 10).unwrap().0, CHAIN_EQW, 1e-12, "E_QW");
    assert_close(d.mean(), CHAIN_MEAN, 1e-12, "E(Q)");
}

#[test]
fn matches_dense_generator_solve() {
    for &(b, f, r, lambda, mu) in &[
        (5, 3, 10, 1.0, 2.0),
        (0, 1, 7, 0.3, 1.1),
        (4, 4, 12, 2.0, 0.5),
        (3, 6, 9, 1.0, 1.0),
        (10, 2, 20, 0.05, 1.0),
    ] {
        let d = steady_state(b, f, r, lambda, mu).unwrap();
        let oracle = generator_stationary(b, Some(f), r, lambda, mu);
        for (got, want) in d.probs().iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-10, "(B,F,r)=({b},{f},{r})");
        }
    }
    let d = steady_state_infinite_f(4, 9, 0.7, 1.3).unwrap();
    let oracle = generator_stationary(4, None, 9, 0.7, 1.3);
    for (got, want) in d.probs().iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-10);
    }
}

#[test]
fn matches_four_case_closed_form() {
    for &(b, f, r) in &[(5, 3, 10), (3, 5, 10), (4, 4, 6), (0, 2, 5), (8, 1, 3)] {
        let d = steady_state(b, f, r, 1.0, 2.0).unwrap();
        let want = normalise(&closed_form_log(b, f, r, 1.0, 2.0));
        for (got, want) in d.probs().iter().zip(&want) {
            assert_close(*got, *want, 1e-11, "closed form");
        }
    }
}

#[test]
fn infinite_f_examples() {
    let d = steady_state_infinite_f(1, 1, 1.0, 1.0).unwrap();
    for (got, want) in d.probs().iter().zip([0.4, 0.4, 0.2]) {
        assert!((got - want).abs() < 1e-14);
    }
    // Birth λr = 1 out of 0 and death μ = 1 out of 1 balance exactly.
    let d = steady_state_infinite_f(0, 1, 1.0, 1.0).unwrap();
    let oracle = generator_stationary(0, None, 1, 1.0, 1.0);
    for (got, want) in d.probs().iter().zip(oracle) {
        assert!((got - 0.5).abs() < 1e-14 && (want - 0.5).abs() < 1e-14);
    }
}

#[test]
fn large_f_equals_infinite_f() {
    let (b, r) = (7, 30);
    let inf = steady_state_infinite_f(b, r, 0.4, 1.0).unwrap();
    for f in [b + r, b + r + 5, 10_000] {
        let fin = steady_state(b, f, r, 0.4, 1.0).unwrap();
        for (x, y) in fin.probs().iter().zip(inf.probs()) {
            assert_close(*x, y, 1e-12, "F >= B + r");
        }
    }
}

#[test]
fn ratio_recursion_and_poisson_head() {
    let (b, f, r, lambda, mu) = (40u64, 30u64, 200u64, 0.2, 1.0);
    let d = steady_state(b, f, r, lambda, mu).unwrap();
    let p = d.probs();
    for k in 0..p.len() - 1 {
        let ku = k as u64;
        let birth = lambda * (r - ku.saturating_sub(b)) as f64;
        let death = mu * ((ku + 1).min(f)) as f64;
        assert_close(p[k + 1] / p[k], birth / death, 1e-12, "ratio");
    }
    let load = lambda * r as f64 / mu;
    for k in 0..b.min(f) as usize {
        assert_close(p[k + 1] / p[k], load / (k + 1) as f64, 1e-12, "Poisson head");
    }
}

#[test]
fn huge_fleet_does_not_overflow() {
    let d = steady_state(1_286, 1_250, 50_000, 0.025, 1.0).unwrap();
    let p = d.probs();
    assert!(p.iter().all(|x| x.is_finite()));
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let w = wait_probability_exact(&d, 1_286).unwrap();
    assert!(w > 0.0 && w < 1.0);
    let d = steady_state(100_400, 100_000, 100_000, 1.0, 1.0).unwrap();
    assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn wait_probability_edge_cases() {
    let d = steady_state(5, 3, 10, 1.0, 2.0).unwrap();
    let top = d.len() as u64 - 1;
    assert_close(wait_probability_exact(&d, top).unwrap(), d.pi(top as usize), 1e-12, "top state");
    assert!(wait_probability_exact(&d, top + 1).is_err());
    let (e_qw, e_w) = expected_waiting(&d, top, 1.0, 10).unwrap();
    assert_eq!((e_qw, e_w), (0.0, 0.0));
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(steady_state(1, 0, 1, 1.0, 1.0).is_err());
    assert!(steady_state(1, 1, 0, 1.0, 1.0).is_err());
    assert!(steady_state(1, 1, 1, -1.0, 1.0).is_err());
    assert!(steady_state_infinite_f(1, 1, 1.0, 0.0).is_err());
}

#[test]
fn quantiles_and_cdf_are_consistent() {
    let d = steady_state(5, 3, 10, 1.0, 2.0).unwrap();
    let cdf = d.cdf();
    assert!((cdf.last().unwrap() - 1.0).abs() < 1e-12);
    for q in [0.1, 0.5, 0.9] {
        let k = d.quantile(q);
        assert!(cdf[k] >= q);
        assert!(k == 0 || cdf[k - 1] < q);
    }
}
