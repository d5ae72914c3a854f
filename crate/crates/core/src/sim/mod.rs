//! Stochastic simulation of the closed network.
//!
//! [`run_ctmc`] simulates the jump chain for exponential charging.
//! [`run_des`] tracks every charging battery and accepts any
//! [`ChargingDist`]. Both share the bookkeeping in this module:
//!
//! - an arrival always adds a depleted battery to the station's queue `q`;
//!   the EV swaps at once if a charged spare is on hand and waits otherwise;
//! - a charge completion hands the battery to the longest-waiting EV, or
//!   stores it as a spare;
//! - waiting EVs and batteries waiting for a charger are served FIFO.
//!
//! Counters for driving EVs, spares, chargers in use and waiting EVs are
//! maintained separately from `q` and cross-checked after every event. Any
//! mismatch increments [`SimPath::violations`].

mod ctmc;
mod des;
mod rng;
mod route;

pub use ctmc::run_ctmc;
pub use des::run_des;
pub use rng::stream_rng;
pub use route::route;

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Network;

/// Charging-time law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChargingDist {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ChargingDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ChargingDist::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            ChargingDist::Deterministic { value } => value > 0.0 && value.is_finite(),
            ChargingDist::Uniform { lo, hi } => lo > 0.0 && lo <= hi && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid charging distribution {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ChargingDist::Exponential { rate } => 1.0 / rate,
            ChargingDist::Deterministic { value } => value,
            ChargingDist::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

impl std::str::FromStr for ChargingDist {
    type Err = crate::Error;

    /// Parses `exp`, `exp:RATE`, `det:V` or `unif:LO,HI`. Plain `exp` means
    /// rate 1 and is normally replaced by the network's `μ`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("`{t}` is not a number")))
        };
        let d = match s.split_once(':') {
            None if s == "exp" => ChargingDist::Exponential { rate: 1.0 },
            Some(("exp", v)) => ChargingDist::Exponential { rate: num(v)? },
            Some(("det", v)) => ChargingDist::Deterministic { value: num(v)? },
            Some(("unif", v)) => {
                let (lo, hi) = v
                    .split_once(',')
                    .ok_or_else(|| invalid("uniform charging needs `unif:LO,HI`"))?;
                ChargingDist::Uniform {
                    lo: num(lo)?,
                    hi: num(hi)?,
                }
            }
            _ => return Err(invalid(format!("unknown charging law `{s}`"))),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Run length and recording options.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSpec {
    pub horizon: f64,
    pub sample_dt: f64,
    /// Stop after this many events (arrivals plus completions).
    pub max_events: Option<u64>,
    /// Stop after this many arrivals.
    pub max_arrivals: Option<u64>,
    /// Keep one record per arrival.
    pub record_arrivals: bool,
    /// Accumulate time spent in each queue length.
    pub record_occupation: bool,
}

impl RunSpec {
    pub fn new(horizon: f64, sample_dt: f64) -> Self {
        RunSpec {
            horizon,
            sample_dt,
            max_events: None,
            max_arrivals: None,
            record_arrivals: true,
            record_occupation: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon must be positive"));
        }
        if !(self.sample_dt > 0.0) || !self.sample_dt.is_finite() {
            return Err(invalid("sample_dt must be positive and finite"));
        }
        Ok(())
    }
}

/// One EV arrival.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub time: f64,
    /// Candidate pair, 0-based.
    pub pair: (usize, usize),
    pub station: usize,
    pub waited: bool,
    /// Time until a charged battery was handed over; `None` if the run ended
    /// first.
    pub wait: Option<f64>,
}

/// Per-station waiting tallies of one run. Merging is associative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WaitTally {
    pub arrivals: u64,
    pub waited: u64,
    /// Sum of completed waits, zero waits included.
    pub wait_sum: f64,
    /// Number of arrivals whose wait is known.
    pub completed: u64,
}

impl WaitTally {
    pub fn merge(&self, other: &WaitTally) -> WaitTally {
        WaitTally {
            arrivals: self.arrivals + other.arrivals,
            waited: self.waited + other.waited,
            wait_sum: self.wait_sum + other.wait_sum,
            completed: self.completed + other.completed,
        }
    }

    /// Tallies rebuilt from arrival records.
    pub fn from_arrivals(arrivals: &[ArrivalRecord], stations: usize) -> Vec<WaitTally> {
        let mut out = vec![WaitTally::default(); stations];
        for a in arrivals {
            let t = &mut out[a.station];
            t.arrivals += 1;
            t.waited += a.waited as u64;
            if let Some(w) = a.wait {
                t.wait_sum += w;
                t.completed += 1;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct WaitingEv {
    since: f64,
    record: Option<usize>,
    counted: bool,
}

/// State of one station.
#[derive(Clone, Debug)]
pub struct StationState {
    /// Batteries in need of charging.
    pub q: u64,
    /// Chargers in use.
    pub charging: u64,
    /// Charged spares on hand.
    pub full_spares: u64,
    waiting: VecDeque<WaitingEv>,
}

impl StationState {
    pub fn waiting(&self) -> usize {
        self.waiting.len()
    }

    /// Checks the station identities against capacities `B`, `F`.
    pub fn consistent(&self, b: u64, f: Option<u64>) -> bool {
        let busy = f.map_or(self.q, |f| self.q.min(f));
        self.charging == busy
            && self.full_spares == b.saturating_sub(self.q)
            && self.waiting.len() as u64 == self.q.saturating_sub(b)
            && (self.full_spares == 0 || self.waiting.is_empty())
    }
}

/// Output of one simulation run.
#[derive(Clone, Debug, Serialize)]
pub struct SimPath {
    pub seed: u64,
    pub stream: u64,
    pub sample_times: Vec<f64>,
    /// `q_samples[k][j]`: queue at station `j` at `sample_times[k]`.
    pub q_samples: Vec<Vec<u64>>,
    pub arrivals: Vec<ArrivalRecord>,
    pub tallies: Vec<WaitTally>,
    pub event_count: u64,
    pub arrival_count: u64,
    pub end_time: f64,
    /// `∫ min(q_j, F_j) dt`.
    pub busy_time: Vec<f64>,
    /// `∫ min(q_j, B_j) dt`.
    pub spare_time: Vec<f64>,
    /// Time spent at each queue length, per station.
    pub occupation: Option<Vec<Vec<f64>>>,
    /// Events or samples at which an identity failed.
    pub violations: u64,
}

impl SimPath {
    /// Occupation measure of station `j`, normalised to total time.
    pub fn occupation_measure(&self, j: usize) -> Option<Vec<f64>> {
        let occ = self.occupation.as_ref()?.get(j)?;
        let total: f64 = occ.iter().sum();
        Some(occ.iter().map(|x| x / total).collect())
    }

    /// Fraction of arrivals that found no charged spare.
    pub fn waited_fraction(&self) -> f64 {
        let (a, w) = self
            .tallies
            .iter()
            .fold((0u64, 0u64), |(a, w), t| (a + t.arrivals, w + t.waited));
        w as f64 / a as f64
    }
}

/// Sample times `0, dt, 2dt, ...` below the horizon, then the horizon.
pub fn sample_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let mut g = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * dt;
        if t >= horizon * (1.0 - 1e-12) {
            break;
        }
        g.push(t);
        k += 1;
    }
    g.push(horizon);
    g
}

pub(crate) struct Engine<'a> {
    net: &'a Network,
    pub(crate) st: Vec<StationState>,
    q: Vec<u64>,
    driving: u64,
    t: f64,
    horizon: f64,
    grid: Vec<f64>,
    grid_next: usize,
    record_arrivals: bool,
    path: SimPath,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(net: &'a Network, q0: &[u64], run: &RunSpec, seed: u64, stream: u64) -> Result<Self> {
        run.validate()?;
        let s = net.stations();
        if q0.len() != s {
            return Err(invalid(format!("q0 has {} entries for {s} stations", q0.len())));
        }
        let r = net.r();
        let mut waiting_total = 0u64;
        let mut st = Vec::with_capacity(s);
        for (j, (&q, cap)) in q0.iter().zip(net.capacities()).enumerate() {
            if q > cap.b + r {
                return Err(invalid(format!(
                    "q0 at station {} is {q}, above B + r = {}",
                    j + 1,
                    cap.b + r
                )));
            }
            let w = q.saturating_sub(cap.b);
            waiting_total += w;
            st.push(StationState {
                q,
                charging: cap.f.map_or(q, |f| q.min(f)),
                full_spares: cap.b.saturating_sub(q),
                waiting: (0..w)
                    .map(|_| WaitingEv {
                        since: 0.0,
                        record: None,
                        counted: false,
                    })
                    .collect(),
            });
        }
        if waiting_total > r {
            return Err(invalid(format!(
                "q0 puts {waiting_total} EVs in queues but r = {r}"
            )));
        }
        let occupation = run.record_occupation.then(|| {
            net.capacities()
                .iter()
                .map(|c| vec![0.0; (c.b + r + 1) as usize])
                .collect()
        });
        Ok(Engine {
            net,
            q: q0.to_vec(),
            st,
            driving: r - waiting_total,
            t: 0.0,
            horizon: run.horizon,
            grid: sample_grid(run.horizon, run.sample_dt),
            grid_next: 0,
            record_arrivals: run.record_arrivals,
            path: SimPath {
                seed,
                stream,
                sample_times: Vec::new(),
                q_samples: Vec::new(),
                arrivals: Vec::new(),
                tallies: vec![WaitTally::default(); s],
                event_count: 0,
                arrival_count: 0,
                end_time: 0.0,
                busy_time: vec![0.0; s],
                spare_time: vec![0.0; s],
                occupation,
                violations: 0,
            },
        })
    }

    pub(crate) fn driving(&self) -> u64 {
        self.driving
    }

    pub(crate) fn events(&self) -> u64 {
        self.path.event_count
    }

    pub(crate) fn arrivals(&self) -> u64 {
        self.path.arrival_count
    }

    fn take_sample(&mut self, time: f64) {
        self.path.sample_times.push(time);
        self.path.q_samples.push(self.q.clone());
        self.grid_next += 1;
        if !self.check() {
            self.path.violations += 1;
        }
    }

    /// Holds the current state on `[t, t_new)`: records grid samples and
    /// accumulates time integrals.
    pub(crate) fn advance_to(&mut self, t_new: f64) {
        while self.grid_next < self.grid.len() && self.grid[self.grid_next] < t_new {
            self.take_sample(self.grid[self.grid_next]);
        }
        let dt = t_new - self.t;
        if dt > 0.0 {
            for (j, (s, cap)) in self.st.iter().zip(self.net.capacities()).enumerate() {
                self.path.busy_time[j] += s.charging as f64 * dt;
                self.path.spare_time[j] += s.q.min(cap.b) as f64 * dt;
                if let Some(occ) = self.path.occupation.as_mut() {
                    occ[j][s.q as usize] += dt;
                }
            }
        }
        self.t = t_new;
    }

    /// An EV choosing between `i` and `j` arrives. Returns the station and
    /// whether a new charge started there.
    pub(crate) fn arrive<R: rand::Rng + ?Sized>(&mut self, i: usize, j: usize, rng: &mut R) -> (usize, bool) {
        let k = route(&self.q, i, j, self.net.weights(), rng);
        let cap = self.net.capacities()[k];
        let t = self.t;
        let s = &mut self.st[k];
        s.q += 1;
        self.q[k] += 1;
        let started = cap.f.is_none_or(|f| s.q <= f);
        if started {
            s.charging += 1;
        }
        let tally = &mut self.path.tallies[k];
        tally.arrivals += 1;
        let waited = s.full_spares == 0;
        let record = self.record_arrivals.then_some(self.path.arrivals.len());
        if waited {
            tally.waited += 1;
            self.driving -= 1;
            s.waiting.push_back(WaitingEv {
                since: t,
                record,
                counted: true,
            });
        } else {
            s.full_spares -= 1;
            tally.completed += 1;
        }
        if self.record_arrivals {
            self.path.arrivals.push(ArrivalRecord {
                time: t,
                pair: (i, j),
                station: k,
                waited,
                wait: if waited { None } else { Some(0.0) },
            });
        }
        self.path.arrival_count += 1;
        self.path.event_count += 1;
        (k, started)
    }

    /// A battery at station `k` finished charging. Returns whether the freed
    /// charger picked up another battery.
    pub(crate) fn complete(&mut self, k: usize) -> bool {
        let cap = self.net.capacities()[k];
        let t = self.t;
        let s = &mut self.st[k];
        s.q -= 1;
        self.q[k] -= 1;
        let restarted = cap.f.is_some_and(|f| s.q >= f);
        if !restarted {
            s.charging -= 1;
        }
        if let Some(ev) = s.waiting.pop_front() {
            self.driving += 1;
            let w = t - ev.since;
            if ev.counted {
                let tally = &mut self.path.tallies[k];
                tally.wait_sum += w;
                tally.completed += 1;
            }
            if let Some(idx) = ev.record {
                self.path.arrivals[idx].wait = Some(w);
            }
        } else {
            s.full_spares += 1;
        }
        self.path.event_count += 1;
        restarted
    }

    /// Battery conservation and per-station identities.
    pub(crate) fn check(&self) -> bool {
        let r = self.net.r();
        let b_total: u64 = self.net.capacities().iter().map(|c| c.b).sum();
        let held: u64 = self.st.iter().map(|s| s.q + s.full_spares).sum();
        let waiting: u64 = self.st.iter().map(|s| s.waiting.len() as u64).sum();
        self.driving + held == r + b_total
            && self.driving + waiting == r
            && self
                .st
                .iter()
                .zip(self.net.capacities())
                .zip(&self.q)
                .all(|((s, c), &q)| s.q == q && q <= c.b + r && s.consistent(c.b, c.f))
    }

    pub(crate) fn after_event(&mut self) {
        if !self.check() {
            self.path.violations += 1;
        }
    }

    pub(crate) fn finish(mut self, end: f64) -> SimPath {
        self.advance_to(end);
        if end >= self.horizon && self.grid_next < self.grid.len() {
            self.take_sample(self.horizon);
        }
        self.path.end_time = end;
        self.path
    }
}

/// Runs `reps` independent replications, stream `k` for replication `k`.
/// Output order is by replication index regardless of thread count.
pub fn run_replications(
    net: &Network,
    q0: &[u64],
    run: &RunSpec,
    charging: Option<ChargingDist>,
    seed: u64,
    reps: u64,
) -> Result<Vec<SimPath>> {
    if reps == 0 {
        return Err(crate::Error::NoReplications);
    }
    (0..reps)
        .into_par_iter()
        .map(|k| match charging {
            None => run_ctmc(net, q0, run, seed, k),
            Some(c) => run_des(net, c, q0, run, seed, k),
        })
        .collect()
}
