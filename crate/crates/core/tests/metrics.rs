use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swapnet::asymptotics::ssc_function;
use swapnet::exactss::steady_state;
use swapnet::harness::five_station_network;
use swapnet::metrics::{
    diffusion_scale, ks_statistic, scale_state, ssc_gaps, total_variation, utilization, wait_stats, Estimate,
};
use swapnet::model::{Capacity, Edge, Network, NetworkConfig};
use swapnet::sim::{run_ctmc, run_replications, RunSpec, SimPath, WaitTally};

fn frozen_path(q: Vec<u64>, horizon: f64, net: &Network) -> SimPath {
    let s = q.len();
    let caps = net.capacities();
    SimPath {
        seed: 0,
        stream: 0,
        sample_times: vec![0.0, horizon],
        q_samples: vec![q.clone(), q.clone()],
        arrivals: vec![],
        tallies: vec![WaitTally::default(); s],
        event_count: 0,
        arrival_count: 0,
        end_time: horizon,
        busy_time: q
            .iter()
            .zip(caps)
            .map(|(&x, c)| c.f.map_or(x, |f| x.min(f)) as f64 * horizon)
            .collect(),
        spare_time: q.iter().zip(caps).map(|(&x, c)| x.min(c.b) as f64 * horizon).collect(),
        occupation: None,
        violations: 0,
    }
}

fn two_stations(r: u64, b: u64, f: u64) -> Network {
    NetworkConfig {
        stations: 2,
        edges: vec![Edge::new(0, 1, 1.0)],
        lambda: 0.025,
        mu: 1.0,
        r,
        capacities: vec![Capacity { b, f: Some(f), g: None }; 2],
    }
    .validate()
    .unwrap()
}

#[test]
fn one_extra_ev_at_the_smallest_station() {
    let net = five_station_network(1.0, 0.0, 50_000).unwrap();
    let loads = net.station_loads();
    let base = scale_state(&loads, net.p(), net.offered_load());
    let mut bumped = loads.clone();
    bumped[0] += 1.0;
    let shifted = scale_state(&bumped, net.p(), net.offered_load());
    let step = shifted[0] - base[0];
    assert!((step - 0.5657).abs() < 5e-5, "{step}");
    assert!((step - 1.0 / (0.05 * 1250f64.sqrt())).abs() < 1e-12);
    assert!(shifted[1..].iter().zip(&base[1..]).all(|(a, b)| a == b));
}

#[test]
fn centred_state_scales_to_zero() {
    let net = five_station_network(1.0, 0.0, 50_000).unwrap();
    let s = scale_state(&net.station_loads(), net.p(), net.offered_load());
    assert!(s.iter().all(|x| x.abs() < 1e-12), "{s:?}");
}

#[test]
fn aggregate_of_equal_relative_loads() {
    let net = five_station_network(1.0, 0.0, 50_000).unwrap();
    // q_j = 4 p_j * 250 gives qhat_j = (1000/1250 - 1) * sqrt(1250) for all j
    let q: Vec<u64> = net.p().iter().map(|p| (p * 1000.0).round() as u64).collect();
    let scaled = diffusion_scale(&frozen_path(q, 1.0, &net), &net);
    let common = scaled.qhat[0][0];
    assert!(scaled.qhat[0].iter().all(|x| (x - common).abs() < 1e-9));
    assert!((scaled.qhat_sigma[0] - common).abs() < 1e-9);
    assert!((common - (0.8 - 1.0) * 1250f64.sqrt()).abs() < 1e-9);
}

#[test]
fn aggregate_is_the_weighted_sum_and_sandwiched() {
    let net = five_station_network(1.0, 0.0, 5_000).unwrap();
    let path = run_ctmc(&net, &[300, 0, 0, 40, 0], &RunSpec::new(3.0, 0.01), 8, 0).unwrap();
    let scaled = diffusion_scale(&path, &net);
    assert_eq!(scaled.sandwich_violations(), 0);
    for (q, s) in scaled.qhat.iter().zip(&scaled.qhat_sigma) {
        let w: f64 = q.iter().zip(net.p()).map(|(x, p)| x * p).sum();
        assert!((w - s).abs() < 1e-9);
    }
    for (k, q) in path.q_samples.iter().enumerate() {
        let back = scaled.unscaled(k);
        assert!(q.iter().zip(&back).all(|(&a, b)| (a as f64 - b).abs() < 1e-7));
    }
}

#[test]
fn single_station_has_no_gap() {
    let net = Network::single(0.025, 1.0, 1_000, 30, Some(25)).unwrap();
    let path = run_ctmc(&net, &[0], &RunSpec::new(20.0, 0.05), 1, 0).unwrap();
    let g = ssc_gaps(&diffusion_scale(&path, &net), 0.0, 20.0).unwrap();
    assert_eq!((g.max_gap, g.avg_gap, g.unscaled_avg_gap), (0.0, 0.0, 0.0));
}

#[test]
fn max_gap_agrees_with_collapse_function() {
    let net = five_station_network(1.0, 0.0, 5_000).unwrap();
    let path = run_ctmc(&net, &[300, 0, 0, 40, 0], &RunSpec::new(3.0, 0.01), 8, 0).unwrap();
    let scaled = diffusion_scale(&path, &net);
    let (t0, t1) = (0.5, 2.5);
    let g = ssc_gaps(&scaled, t0, t1).unwrap();
    let root = net.offered_load().sqrt();
    let want = path
        .sample_times
        .iter()
        .zip(&path.q_samples)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(_, q)| {
            let qf: Vec<f64> = q.iter().map(|&x| x as f64).collect();
            ssc_function(&qf, net.p()) / root
        })
        .fold(0.0, f64::max);
    assert!((g.max_gap - want).abs() < 1e-9, "{} vs {want}", g.max_gap);
    assert!(g.avg_gap <= g.max_gap);
}

#[test]
fn gap_window_errors() {
    let net = Network::single(0.025, 1.0, 1_000, 30, Some(25)).unwrap();
    let path = run_ctmc(&net, &[0], &RunSpec::new(2.0, 0.5), 1, 0).unwrap();
    let s = diffusion_scale(&path, &net);
    assert!(ssc_gaps(&s, 1.0, 1.0).is_err());
    assert!(ssc_gaps(&s, 5.0, 6.0).is_err());
}

fn gap_quantiles(r: u64) -> (Vec<f64>, f64) {
    let load = 0.025 * r as f64;
    let cap = (0.5 * load).round() as u64;
    let net = two_stations(r, cap + 10, cap);
    let run = RunSpec {
        record_arrivals: false,
        ..RunSpec::new(20.0, 0.01)
    };
    let paths = run_replications(&net, &[cap, cap], &run, None, 1, 100).unwrap();
    let mut max_gaps = Vec::new();
    let mut worst_avg: f64 = 0.0;
    for p in &paths {
        let g = ssc_gaps(&diffusion_scale(p, &net), 1.0, 20.0).unwrap();
        max_gaps.push(g.max_gap);
        worst_avg = worst_avg.max(g.avg_gap);
    }
    max_gaps.sort_by(f64::total_cmp);
    (max_gaps, worst_avg)
}

#[test]
fn two_identical_stations_stay_together() {
    let (small, avg_small) = gap_quantiles(20_000);
    let (large, avg_large) = gap_quantiles(80_000);
    for (r, avg) in [(20_000.0, avg_small), (80_000.0, avg_large)] {
        let bound = 2.0 / (0.5 * (0.025 * r as f64).sqrt());
        assert!(avg <= bound, "r = {r}: {avg} > {bound}");
    }
    // The excursions of the running maximum are O(1) in queue units, so
    // their scaled size halves when r quadruples.
    let ratio = small[95] / large[95];
    assert!((1.5..=2.7).contains(&ratio), "{} / {} = {ratio}", small[95], large[95]);
}

#[test]
fn estimates_ignore_replication_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut v: Vec<f64> = (0..57).map(|k| ((k * 37) % 101) as f64 * 0.013 + 1e-3 / (k + 1) as f64).collect();
    let a = Estimate::from_values(&v).unwrap();
    for _ in 0..20 {
        v.shuffle(&mut rng);
        assert_eq!(Estimate::from_values(&v).unwrap(), a);
    }
    let t = |a: u64, w: u64| WaitTally { arrivals: a, waited: w, wait_sum: w as f64 * 0.1, completed: a };
    let (x, y, z) = (t(10, 3), t(7, 7), t(1, 0));
    assert_eq!(x.merge(&y).merge(&z), x.merge(&y.merge(&z)));
    assert!(Estimate::from_values(&[]).is_none());
}

#[test]
fn estimate_interval() {
    let e = Estimate::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(e.mean, 2.5);
    let sd = (5.0f64 / 3.0).sqrt();
    assert!((e.half_width - 1.959_963_984_540_054 * sd / 2.0).abs() < 1e-12);
    assert!(e.lo() < e.mean && e.mean < e.hi());
    assert_eq!(Estimate::from_values(&[0.7]).unwrap().half_width, 0.0);
}

#[test]
fn wait_stats_degenerate_and_missing() {
    let all = WaitTally { arrivals: 5, waited: 5, wait_sum: 2.0, completed: 5 };
    let none = WaitTally::default();
    let stats = wait_stats(&vec![vec![all, none]; 4]).unwrap();
    let p = stats[0].wait_prob.unwrap();
    assert_eq!((p.mean, p.half_width), (1.0, 0.0));
    assert_eq!(stats[0].mean_wait.unwrap().mean, 0.4);
    assert!(!stats[0].missing);
    assert!(stats[1].missing);
    assert!(stats[1].wait_prob.is_none());
    assert!(wait_stats(&[]).is_err());
    assert!(wait_stats(&[vec![all], vec![all, all]]).is_err());
}

#[test]
fn single_station_waits_match_exact() {
    // Arrivals come from driving EVs, so at r = 10 the probability an
    // arrival waits weighs state k by the arrival rate λ(r − (k − B)⁺).
    let (b, f, r, lambda, mu) = (5u64, 3u64, 10u64, 1.0, 2.0);
    let pi = steady_state(b, f, r, lambda, mu).unwrap().probs();
    let rate = |k: usize| (r - (k as u64).saturating_sub(b)) as f64;
    let total: f64 = pi.iter().enumerate().map(|(k, p)| p * rate(k)).sum();
    let exact: f64 = pi.iter().enumerate().skip(b as usize).map(|(k, p)| p * rate(k)).sum::<f64>() / total;
    let net = Network::single(lambda, mu, r, b, Some(f)).unwrap();
    let run = RunSpec {
        max_arrivals: Some(200_000),
        record_arrivals: false,
        ..RunSpec::new(1e15, 1e15)
    };
    let paths = run_replications(&net, &[0], &run, None, 5, 20).unwrap();
    let reps: Vec<Vec<WaitTally>> = paths.iter().map(|p| p.tallies.clone()).collect();
    let est = wait_stats(&reps).unwrap()[0].wait_prob.unwrap();
    assert!(est.lo() <= exact && exact <= est.hi(), "{est:?} vs {exact}");
}

#[test]
fn utilisation_extremes() {
    let net = Network::single(1.0, 1.0, 10, 5, Some(3)).unwrap();
    let idle = utilization(&frozen_path(vec![0], 4.0, &net), &net);
    assert_eq!((idle.rho_f[0], idle.rho_b[0]), (Some(0.0), Some(0.0)));
    let full = utilization(&frozen_path(vec![15], 4.0, &net), &net);
    assert_eq!((full.rho_f[0], full.rho_b[0]), (Some(1.0), Some(1.0)));
    let unlimited = Network::single(1.0, 1.0, 10, 0, None).unwrap();
    let u = utilization(&frozen_path(vec![3], 1.0, &unlimited), &unlimited);
    assert_eq!((u.rho_f[0], u.rho_b[0]), (None, None));
}

#[test]
fn idle_capacity_shrinks_like_inverse_root() {
    // Fleet sizes where every p_j λr/μ is an integer, so F_j carries no
    // rounding slack that would distort the rate.
    let rs = [4_000u64, 16_000, 64_000];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &r in &rs {
        let net = five_station_network(1.0, 0.0, r).unwrap();
        let q0: Vec<u64> = net.station_loads().iter().map(|x| x.round() as u64).collect();
        let run = RunSpec {
            record_arrivals: false,
            ..RunSpec::new(4_000.0, 10.0)
        };
        let paths = run_replications(&net, &q0, &run, None, 31, 8).unwrap();
        let f_total: u64 = net.capacities().iter().map(|c| c.f.unwrap()).sum();
        let busy: f64 = paths.iter().flat_map(|p| p.busy_time.iter()).sum();
        let time: f64 = paths.iter().map(|p| p.end_time).sum();
        let rho = busy / (f_total as f64 * time);
        xs.push((r as f64).ln());
        ys.push((1.0 - rho).ln());
        let u = utilization(&paths[0], &net);
        assert!(u.rho_f.iter().all(|x| x.is_some_and(|v| (0.0..=1.0).contains(&v))));
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}");
}

#[test]
fn distance_helpers() {
    assert!((total_variation(&[0.5, 0.5], &[1.0]) - 0.5).abs() < 1e-15);
    assert_eq!(total_variation(&[0.0, 1.0], &[1.0, 0.0]), 1.0);
    let n = 200;
    let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let d = ks_statistic(&sample, |x| x.clamp(0.0, 1.0));
    assert!((d - 0.5 / n as f64).abs() < 1e-12);
    let d = ks_statistic(&[2.0, 3.0], |x| x.clamp(0.0, 1.0));
    assert_eq!(d, 1.0);
}
