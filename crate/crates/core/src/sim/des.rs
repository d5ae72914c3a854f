use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::Exp1;

use super::ctmc::{edge_table, pick_edge};
use super::{stream_rng, ChargingDist, Engine, RunSpec, SimPath};
use crate::error::Result;
use crate::model::Network;

#[derive(Clone, Copy, Debug)]
struct Completion {
    time: f64,
    seq: u64,
    station: usize,
}

impl PartialEq for Completion {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Completion {}

impl PartialOrd for Completion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that `BinaryHeap` pops the earliest completion first.
impl Ord for Completion {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn draw<R: Rng + ?Sized>(law: &ChargingDist, rng: &mut R) -> f64 {
    match *law {
        ChargingDist::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
        ChargingDist::Deterministic { value } => value,
        ChargingDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
    }
}

/// Event-driven simulation with an arbitrary charging-time law.
///
/// Each battery on a charger carries its own completion time. Driving EVs
/// generate demand as a Poisson stream of rate `λL`; the clock is redrawn
/// after every event, which is exact because each EV's demand clock is
/// memoryless.
pub fn run_des(
    net: &Network,
    charging: ChargingDist,
    q0: &[u64],
    run: &RunSpec,
    seed: u64,
    stream: u64,
) -> Result<SimPath> {
    charging.validate()?;
    let mut eng = Engine::new(net, q0, run, seed, stream)?;
    let mut rng = stream_rng(seed, stream);
    let (pairs, cum) = edge_table(net);
    let lambda = net.lambda();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for k in 0..net.stations() {
        for _ in 0..eng.st[k].charging {
            heap.push(Completion {
                time: draw(&charging, &mut rng),
                seq,
                station: k,
            });
            seq += 1;
        }
    }
    let next_arrival = |t: f64, driving: u64, rng: &mut rand_chacha::ChaCha8Rng| {
        if driving == 0 {
            f64::INFINITY
        } else {
            t + rng.sample::<f64, _>(Exp1) / (lambda * driving as f64)
        }
    };
    let mut t = 0.0;
    let mut t_arrival = next_arrival(t, eng.driving(), &mut rng);
    loop {
        if run.max_events.is_some_and(|m| eng.events() >= m)
            || run.max_arrivals.is_some_and(|m| eng.arrivals() >= m)
        {
            return Ok(eng.finish(t));
        }
        let t_done = heap.peek().map_or(f64::INFINITY, |c| c.time);
        let t_next = t_done.min(t_arrival);
        if t_next > run.horizon {
            return Ok(eng.finish(run.horizon));
        }
        t = t_next;
        eng.advance_to(t);
        if t_done <= t_arrival {
            let c = heap.pop().expect("peeked");
            if eng.complete(c.station) {
                heap.push(Completion {
                    time: t + draw(&charging, &mut rng),
                    seq,
                    station: c.station,
                });
                seq += 1;
            }
        } else {
            let (i, j) = pairs[pick_edge(&cum, &mut rng)];
            let (k, started) = eng.arrive(i, j, &mut rng);
            if started {
                heap.push(Completion {
                    time: t + draw(&charging, &mut rng),
                    seq,
                    station: k,
                });
                seq += 1;
            }
        }
        eng.after_event();
        t_arrival = next_arrival(t, eng.driving(), &mut rng);
    }
}
