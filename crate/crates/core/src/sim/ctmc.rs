use rand::Rng;
use rand_distr::Exp1;

use super::{stream_rng, Engine, RunSpec, SimPath};
use crate::error::Result;
use crate::model::Network;

pub(crate) fn edge_table(net: &Network) -> (Vec<(usize, usize)>, Vec<f64>) {
    if net.edges().is_empty() {
        return (vec![(0, 0)], vec![1.0]);
    }
    let pairs = net.edges().iter().map(|e| (e.i, e.j)).collect();
    let mut acc = 0.0;
    let mut cum: Vec<f64> = net
        .edges()
        .iter()
        .map(|e| {
            acc += e.p;
            acc
        })
        .collect();
    let total = acc;
    for c in &mut cum {
        *c /= total;
    }
    (pairs, cum)
}

pub(crate) fn pick_edge<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

/// Jump-chain simulation with exponential charging at rate `μ`.
///
/// The next event time is exponential with rate `λL + μ Σ_j min(q_j, F_j)`,
/// where `L` is the number of driving EVs. An arrival picks a pair with
/// probability `p_ij` and is routed; a completion picks a station in
/// proportion to its busy chargers.
pub fn run_ctmc(net: &Network, q0: &[u64], run: &RunSpec, seed: u64, stream: u64) -> Result<SimPath> {
    let mut eng = Engine::new(net, q0, run, seed, stream)?;
    let mut rng = stream_rng(seed, stream);
    let (pairs, cum) = edge_table(net);
    let (lambda, mu) = (net.lambda(), net.mu());
    let mut t = 0.0;
    loop {
        if run.max_events.is_some_and(|m| eng.events() >= m)
            || run.max_arrivals.is_some_and(|m| eng.arrivals() >= m)
        {
            return Ok(eng.finish(t));
        }
        let arrival_rate = lambda * eng.driving() as f64;
        let busy: u64 = eng.st.iter().map(|s| s.charging).sum();
        let total = arrival_rate + mu * busy as f64;
        if total <= 0.0 {
            return Ok(eng.finish(run.horizon));
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / total;
        if t + dt > run.horizon {
            return Ok(eng.finish(run.horizon));
        }
        t += dt;
        eng.advance_to(t);
        let u = rng.random::<f64>() * total;
        if u < arrival_rate {
            let (i, j) = pairs[pick_edge(&cum, &mut rng)];
            eng.arrive(i, j, &mut rng);
        } else {
            let mut x = (u - arrival_rate) / mu;
            let mut chosen = None;
            for (k, s) in eng.st.iter().enumerate() {
                if s.charging == 0 {
                    continue;
                }
                chosen = Some(k);
                if x < s.charging as f64 {
                    break;
                }
                x -= s.charging as f64;
            }
            eng.complete(chosen.expect("a busy charger exists"));
        }
        eng.after_event();
    }
}
