//! Fluid limits.
//!
//! The network fluid model tracks relative loads `v_j = q̄_j / p_j`. Stations
//! with equal relative load move together as a block; the integrator works on
//! blocks and re-partitions whenever two blocks meet or a block crosses the
//! invariant level `λ/μ`.
//!
//! Arrivals on edge `{i, j}` go to the endpoint with the smaller relative
//! load. When both endpoints sit in the same block the edge's flow is shared.
//! A block only stays together if the shared flow can keep all members at the
//! same rate; otherwise the subset that receives least flow per unit
//! probability peels off below the rest. That subset is found by enumerating
//! the block's subsets, which caps tied blocks at [`MAX_TIE_GROUP`] stations.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::Network;

/// Relative tolerance for treating two relative loads as tied.
const TIE_TOL: f64 = 1e-9;
/// Time resolution of event localisation.
const EVENT_TOL: f64 = 1e-9;
/// Largest tied group the subset enumeration accepts.
pub const MAX_TIE_GROUP: usize = 20;

/// Single-station fluid queue started at `q0`.
///
/// Below `λ/μ` it relaxes at rate `μ`, above at rate `λ`; neither branch
/// crosses the invariant level.
pub fn fluid_single(q0: f64, lambda: f64, mu: f64, t: f64) -> f64 {
    let rho = lambda / mu;
    if q0 <= rho {
        rho + (q0 - rho) * (-mu * t).exp()
    } else {
        rho + (q0 - rho) * (-lambda * t).exp()
    }
}

/// Collapse diagnostic `max_j q_j/p_j − min_j q_j/p_j`.
pub fn ssc_function(q: &[f64], p: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (qj, pj) in q.iter().zip(p) {
        let v = qj / pj;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Fluid state in units of the fleet size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluidState {
    pub time: f64,
    pub qbar: Vec<f64>,
}

impl FluidState {
    pub fn new(time: f64, qbar: Vec<f64>) -> Self {
        FluidState { time, qbar }
    }

    /// Fraction of EVs driving, `1 − Σ_j (q̄_j − p_j λ/μ)⁺`.
    pub fn l_bar(&self, p: &[f64], rho: f64) -> f64 {
        1.0 - self
            .qbar
            .iter()
            .zip(p)
            .map(|(q, pj)| (q - pj * rho).max(0.0))
            .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluidEventKind {
    /// Two blocks reached the same relative load.
    Merge { lower: Vec<usize>, upper: Vec<usize> },
    /// A block crossed the invariant level `λ/μ`.
    Crossing { stations: Vec<usize>, upward: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluidEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: FluidEventKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct FluidTrajectory {
    pub states: Vec<FluidState>,
    pub events: Vec<FluidEvent>,
}

#[derive(Clone, Debug)]
struct Block {
    members: Vec<usize>,
    p: f64,
    inflow: f64,
}

struct Model {
    lambda: f64,
    mu: f64,
    rho: f64,
    unlimited: bool,
    p: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
}

impl Model {
    fn rhs(&self, blocks: &[Block], v: &[f64], out: &mut [f64]) {
        let over: f64 = blocks
            .iter()
            .zip(v)
            .map(|(b, &x)| b.p * (x - self.rho).max(0.0))
            .sum();
        let l_bar = 1.0 - over;
        for ((b, &x), o) in blocks.iter().zip(v).zip(out.iter_mut()) {
            let service = if self.unlimited { x } else { x.min(self.rho) };
            *o = self.lambda * l_bar * b.inflow / b.p - self.mu * service;
        }
    }

    fn rk4(&self, blocks: &[Block], v: &[f64], h: f64) -> Vec<f64> {
        let n = v.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        self.rhs(blocks, v, &mut k1);
        for i in 0..n {
            tmp[i] = v[i] + 0.5 * h * k1[i];
        }
        self.rhs(blocks, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = v[i] + 0.5 * h * k2[i];
        }
        self.rhs(blocks, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = v[i] + h * k3[i];
        }
        self.rhs(blocks, &tmp, &mut k4);
        (0..n)
            .map(|i| v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    /// Splits stations with relative loads `v` into ordered blocks and snaps
    /// tied loads to their probability-weighted mean.
    fn partition(&self, v: &mut [f64]) -> Result<Vec<Block>> {
        let s = v.len();
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        let scale = v.iter().fold(self.rho, |m, &x| m.max(x.abs()));
        let tol = TIE_TOL * scale;
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &j in &order {
            match groups.last_mut() {
                Some(g) if v[j] - v[*g.last().expect("non-empty")] <= tol => g.push(j),
                _ => groups.push(vec![j]),
            }
        }
        let mut rank = vec![0usize; s];
        for (gi, g) in groups.iter().enumerate() {
            let pg: f64 = g.iter().map(|&j| self.p[j]).sum();
            let mean = g.iter().map(|&j| self.p[j] * v[j]).sum::<f64>() / pg;
            for &j in g {
                v[j] = mean;
                rank[j] = gi;
            }
        }
        let mut fixed = vec![0.0; s];
        let mut internal: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); groups.len()];
        for &(i, j, pe) in &self.edges {
            if i == j {
                fixed[i] += pe;
            } else if rank[i] < rank[j] {
                fixed[i] += pe;
            } else if rank[j] < rank[i] {
                fixed[j] += pe;
            } else {
                internal[rank[i]].push((i, j, pe));
            }
        }
        let mut blocks = Vec::new();
        for (g, edges) in groups.iter().zip(&internal) {
            if g.len() > MAX_TIE_GROUP {
                return Err(invalid(format!(
                    "{} stations share a relative load; at most {MAX_TIE_GROUP} are supported",
                    g.len()
                )));
            }
            self.decompose(g, &fixed, edges, &mut blocks);
        }
        Ok(blocks)
    }

    fn decompose(&self, group: &[usize], fixed: &[f64], edges: &[(usize, usize, f64)], out: &mut Vec<Block>) {
        let n = group.len();
        let p_of = |mask: u32| -> f64 {
            (0..n).filter(|k| mask >> k & 1 == 1).map(|k| self.p[group[k]]).sum()
        };
        let pos = |j: usize| group.iter().position(|&g| g == j).expect("edge endpoint in group");
        let edge_bits: Vec<(u32, f64)> = edges
            .iter()
            .map(|&(i, j, pe)| ((1u32 << pos(i)) | (1u32 << pos(j)), pe))
            .collect();
        let flow_of = |mask: u32| -> f64 {
            let f: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| fixed[group[k]]).sum();
            f + edge_bits
                .iter()
                .filter(|(bits, _)| bits & mask != 0)
                .map(|(_, pe)| pe)
                .sum::<f64>()
        };
        let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let total_ratio = flow_of(full) / p_of(full);
        if n == 1 {
            out.push(Block {
                members: group.to_vec(),
                p: p_of(full),
                inflow: flow_of(full),
            });
            return;
        }
        let mut best_mask = full;
        let mut best_ratio = total_ratio;
        for mask in 1..full {
            let ratio = flow_of(mask) / p_of(mask);
            let eps = 1e-12 * best_ratio.abs().max(1e-300);
            if ratio < best_ratio - eps
                || (ratio <= best_ratio + eps && mask.count_ones() > best_mask.count_ones())
            {
                best_ratio = ratio;
                best_mask = mask;
            }
        }
        if best_mask == full || best_ratio >= total_ratio - 1e-12 * total_ratio.abs() {
            out.push(Block {
                members: group.to_vec(),
                p: p_of(full),
                inflow: flow_of(full),
            });
            return;
        }
        let lower: Vec<usize> = (0..n).filter(|k| best_mask >> k & 1 == 1).map(|k| group[k]).collect();
        let upper: Vec<usize> = (0..n).filter(|k| best_mask >> k & 1 == 0).map(|k| group[k]).collect();
        let mut fixed2 = fixed.to_vec();
        let mut lower_edges = Vec::new();
        let mut upper_edges = Vec::new();
        for &(i, j, pe) in edges {
            let (li, lj) = (lower.contains(&i), lower.contains(&j));
            match (li, lj) {
                (true, true) => lower_edges.push((i, j, pe)),
                (false, false) => upper_edges.push((i, j, pe)),
                (true, false) => fixed2[i] += pe,
                (false, true) => fixed2[j] += pe,
            }
        }
        self.decompose(&lower, &fixed2, &lower_edges, out);
        self.decompose(&upper, &fixed2, &upper_edges, out);
    }
}

/// Outcome of one tentative step.
struct StepCheck {
    merges: Vec<usize>,
    crossings: Vec<usize>,
}

impl StepCheck {
    fn any(&self) -> bool {
        !self.merges.is_empty() || !self.crossings.is_empty()
    }
}

fn check_step(before: &[f64], after: &[f64], rho: f64, tol: f64, separating: &[bool]) -> StepCheck {
    let mut merges = Vec::new();
    for b in 0..before.len().saturating_sub(1) {
        if separating[b] {
            continue;
        }
        let g0 = before[b + 1] - before[b];
        let g1 = after[b + 1] - after[b];
        if g0 > tol && g1 <= tol {
            merges.push(b);
        }
    }
    let crossings = (0..before.len())
        .filter(|&b| (before[b] - rho) * (after[b] - rho) < 0.0)
        .collect();
    StepCheck { merges, crossings }
}

/// Integrates the network fluid model and reports states at `t_grid`.
///
/// Fixed-step RK4 with step `1e-3 / max(λ, μ)`; merge and crossing events
/// are located by bisection to `1e-9` in time.
pub fn fluid_network_integrate(net: &Network, q0: &FluidState, t_grid: &[f64]) -> Result<FluidTrajectory> {
    let s = net.stations();
    if q0.qbar.len() != s {
        return Err(invalid(format!("q0 has {} entries for {s} stations", q0.qbar.len())));
    }
    if q0.qbar.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
        return Err(invalid("q0 entries must be finite and non-negative"));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < q0.time) {
        return Err(invalid("t_grid must be ascending and start at or after q0.time"));
    }
    let lambda = net.lambda();
    let mu = net.mu();
    let mut edges: Vec<(usize, usize, f64)> = net.edges().iter().map(|e| (e.i, e.j, e.p)).collect();
    if edges.is_empty() {
        edges.push((0, 0, 1.0));
    }
    let model = Model {
        lambda,
        mu,
        rho: lambda / mu,
        unlimited: net.unlimited_chargers(),
        p: net.p().to_vec(),
        edges,
    };
    let h_max = 1e-3 / lambda.max(mu);
    let mut v: Vec<f64> = q0.qbar.iter().zip(&model.p).map(|(q, p)| q / p).collect();
    let mut blocks = model.partition(&mut v)?;
    let mut y: Vec<f64> = blocks.iter().map(|b| v[b.members[0]]).collect();
    let mut separating = vec![true; blocks.len().saturating_sub(1)];
    let mut t = q0.time;
    let mut states = Vec::with_capacity(t_grid.len());
    let mut events = Vec::new();

    let to_q = |blocks: &[Block], y: &[f64]| -> Vec<f64> {
        let mut q = vec![0.0; s];
        for (b, &x) in blocks.iter().zip(y) {
            for &j in &b.members {
                q[j] = model.p[j] * x;
            }
        }
        q
    };
    let tol_of = |y: &[f64]| TIE_TOL * y.iter().fold(model.rho, |m, &x| m.max(x.abs()));

    for &target in t_grid {
        while target - t > 1e-12 * target.abs().max(1.0) {
            let dt = h_max.min(target - t);
            let tol = tol_of(&y);
            let next = model.rk4(&blocks, &y, dt);
            if next.iter().any(|x| !x.is_finite()) {
                return Err(Error::StepFailure {
                    t,
                    reason: "non-finite state".into(),
                });
            }
            let chk = check_step(&y, &next, model.rho, tol, &separating);
            if !chk.any() {
                for b in 0..separating.len() {
                    if separating[b] && next[b + 1] - next[b] > tol {
                        separating[b] = false;
                    }
                }
                y = next;
                t += dt;
                continue;
            }
            let (mut lo, mut hi) = (0.0, dt);
            while hi - lo > EVENT_TOL {
                let mid = 0.5 * (lo + hi);
                let trial = model.rk4(&blocks, &y, mid);
                if check_step(&y, &trial, model.rho, tol, &separating).any() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut at = model.rk4(&blocks, &y, hi);
            let chk = check_step(&y, &at, model.rho, tol, &separating);
            t += hi;
            for &b in &chk.crossings {
                events.push(FluidEvent {
                    time: t,
                    kind: FluidEventKind::Crossing {
                        stations: sorted(&blocks[b].members),
                        upward: at[b] > model.rho,
                    },
                });
                at[b] = model.rho;
            }
            for &b in &chk.merges {
                events.push(FluidEvent {
                    time: t,
                    kind: FluidEventKind::Merge {
                        lower: sorted(&blocks[b].members),
                        upper: sorted(&blocks[b + 1].members),
                    },
                });
            }
            let mut vs = vec![0.0; s];
            for (b, &x) in blocks.iter().zip(&at) {
                for &j in &b.members {
                    vs[j] = x;
                }
            }
            for &b in &chk.merges {
                let (pa, pb) = (blocks[b].p, blocks[b + 1].p);
                let mean = (pa * at[b] + pb * at[b + 1]) / (pa + pb);
                for &j in blocks[b].members.iter().chain(&blocks[b + 1].members) {
                    vs[j] = mean;
                }
            }
            if chk.merges.is_empty() {
                y = at;
            } else {
                blocks = model.partition(&mut vs)?;
                y = blocks.iter().map(|b| vs[b.members[0]]).collect();
                separating = y.windows(2).map(|w| w[1] - w[0] <= tol).collect();
            }
        }
        states.push(FluidState::new(target, to_q(&blocks, &y)));
    }
    Ok(FluidTrajectory { states, events })
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}
