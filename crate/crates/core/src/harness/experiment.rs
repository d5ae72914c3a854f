use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::reference::{five_station_reference, BREAKPOINTS};
use super::{ExperimentKind, ExperimentSpec};
use crate::asymptotics::{
    fluid_network_integrate, interchange_check, DiffusionSpec, wait_probability_limit, FluidEventKind, FluidState,
    FluidTrajectory,
};
use crate::error::{Error, Result};
use crate::exactss::steady_state;
use crate::metrics::{diffusion_scale, ssc_gaps, total_variation, wait_stats, Estimate};
use crate::model::{Network, Regime};
use crate::sim::{run_ctmc, run_des, RunSpec};

const BREAKPOINT_TOL: f64 = 0.01;
const GRANULARITY: f64 = 0.5657;
const FLUID_Q0: f64 = 150.0;
const FLUID_R: f64 = 50_000.0;

/// Quantity a check is about.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum Metric {
    /// Largest pointwise fluid deviation from the reference, queue units.
    FluidMaxDeviation,
    /// `|t_k − reference t_k|` for breakpoint `k`.
    BreakpointError { index: usize },
    /// Largest increase of the mean windowed max gap between consecutive `r`.
    GapTrend,
    /// `1/(p_1 sqrt(λr/μ))` at the largest `r`.
    Granularity { r: u64 },
    /// `|estimate − asymptote|` of a station's waiting probability.
    WaitDeviation { station: usize },
    /// `estimate − asymptote − CI half-width` at a station.
    WaitExcess { station: usize },
    /// Largest `|Q_j − p_j λr/μ| / sqrt(λr/μ)` in the window.
    BandExcursion { r: u64 },
    /// Kolmogorov distance between scaled exact and limit distributions.
    SupCdfDistance { r: u64 },
    /// Largest change of the Kolmogorov distance between consecutive `r`.
    DistanceTrend,
    /// Total-variation distance of occupation measure to the exact law.
    TotalVariation,
    /// Conservation or station-identity failures across all runs.
    InvariantViolations,
    /// Samples breaking the aggregate sandwich inequality.
    SandwichViolations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    Below,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    #[serde(flatten)]
    pub metric: Metric,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(metric: Metric, value: f64, threshold: f64) -> Check {
        Check {
            metric,
            value,
            relation: Relation::AtMost,
            threshold,
            passed: value <= threshold,
        }
    }

    fn below(metric: Metric, value: f64, threshold: f64) -> Check {
        Check {
            metric,
            value,
            relation: Relation::Below,
            threshold,
            passed: value < threshold,
        }
    }
}

/// A CSV table. The file starts with a `# columns: ...` comment line.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &str, columns: &[&str]) -> Table {
        Table {
            file: file.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# columns: {}\n", self.columns.join(","));
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Result of an executed experiment.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: String,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub summary: serde_json::Value,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, metric: &Metric) -> Option<&Check> {
        self.checks.iter().find(|c| &c.metric == metric)
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.into(),
        cause: e.to_string(),
    })
}

fn f(x: f64) -> String {
    format!("{x}")
}

/// Runs an experiment without touching the filesystem.
pub fn execute(spec: &ExperimentSpec) -> Result<Outcome> {
    stage("validate", spec.validate())?;
    match spec.kind {
        ExperimentKind::Fluid => fluid(spec),
        ExperimentKind::SscTrend => ssc_trend(spec),
        ExperimentKind::WaitConvergence => waits(spec),
        ExperimentKind::ChargingRobustness => robustness(spec),
        ExperimentKind::Interchange => interchange(spec),
        ExperimentKind::ExactAgreement => exact(spec),
    }
}

fn five_station_fluid(net: &Network, horizon: f64, dt: f64) -> Result<FluidTrajectory> {
    let q0 = FluidState::new(0.0, vec![FLUID_Q0 / FLUID_R; net.stations()]);
    let n = (horizon / dt).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    fluid_network_integrate(net, &q0, &grid)
}

/// Breakpoints in order: first two merges, first crossing, third merge.
fn breakpoints(traj: &FluidTrajectory) -> [Option<f64>; 4] {
    let merges: Vec<f64> = traj
        .events
        .iter()
        .filter(|e| matches!(e.kind, FluidEventKind::Merge { .. }))
        .map(|e| e.time)
        .collect();
    let crossing = traj
        .events
        .iter()
        .find(|e| matches!(e.kind, FluidEventKind::Crossing { .. }))
        .map(|e| e.time);
    [merges.first().copied(), merges.get(1).copied(), crossing, merges.get(2).copied()]
}

/// Time at which the fluid trajectory of the five-station study becomes
/// fully collapsed.
fn collapse_time(spec: &ExperimentSpec) -> Result<f64> {
    let net = spec.network(FLUID_R as u64)?;
    let traj = five_station_fluid(&net, 3.0, 0.01)?;
    breakpoints(&traj)[3].ok_or_else(|| Error::Numerical("fluid trajectory never collapsed".into()))
}

fn fluid(spec: &ExperimentSpec) -> Result<Outcome> {
    let r = spec.r_grid[0];
    let net = stage("network", spec.network(r))?;
    let traj = stage("fluid", five_station_fluid(&net, spec.horizon, spec.sample_dt))?;
    let rf = r as f64;
    let mut table = Table::new(
        "fluid.csv",
        &["t", "q1", "q2", "q3", "q4", "q5", "ref1", "ref2", "ref3", "ref4", "ref5"],
    );
    let mut worst: f64 = 0.0;
    for s in &traj.states {
        let reference = five_station_reference(s.time);
        let mut row = vec![f(s.time)];
        for (q, rq) in s.qbar.iter().zip(&reference) {
            worst = worst.max((q * rf - rq).abs());
            row.push(f(q * rf));
        }
        row.extend(reference.iter().map(|&x| f(x)));
        table.push(row);
    }
    let mut events = Table::new("events.csv", &["t", "kind", "stations"]);
    for e in &traj.events {
        let (kind, members) = match &e.kind {
            FluidEventKind::Merge { lower, upper } => ("merge", [lower.as_slice(), upper.as_slice()].concat()),
            FluidEventKind::Crossing { stations, .. } => ("crossing", stations.clone()),
        };
        let names: Vec<String> = members.iter().map(|j| (j + 1).to_string()).collect();
        events.push(vec![f(e.time), kind.into(), names.join(" ")]);
    }
    let found = breakpoints(&traj);
    let mut checks = vec![Check::at_most(Metric::FluidMaxDeviation, worst, spec.tolerance)];
    for (k, (got, want)) in found.iter().zip(BREAKPOINTS).enumerate() {
        let err = got.map_or(f64::INFINITY, |t| (t - want).abs());
        checks.push(Check::at_most(Metric::BreakpointError { index: k + 1 }, err, BREAKPOINT_TOL));
    }
    Ok(Outcome {
        name: spec.name.clone(),
        tables: vec![table, events],
        checks,
        summary: serde_json::json!({ "breakpoints": found, "max_deviation": worst }),
    })
}

struct RepGaps {
    max_gap: f64,
    avg_gap: f64,
    unscaled_avg_gap: f64,
    violations: u64,
    sandwich: usize,
    band: f64,
}

fn gap_runs(spec: &ExperimentSpec, net: &Network, q0: &[u64], horizon: f64, window: [f64; 2]) -> Result<Vec<RepGaps>> {
    let run = RunSpec {
        record_arrivals: false,
        ..RunSpec::new(horizon, spec.sample_dt)
    };
    let load = net.offered_load();
    let loads = net.station_loads();
    (0..spec.replications)
        .into_par_iter()
        .map(|k| {
            let path = match spec.charging {
                None => run_ctmc(net, q0, &run, spec.seed, k)?,
                Some(c) => run_des(net, c, q0, &run, spec.seed, k)?,
            };
            let scaled = diffusion_scale(&path, net);
            let g = ssc_gaps(&scaled, window[0], window[1])?;
            let band = path
                .sample_times
                .iter()
                .zip(&path.q_samples)
                .filter(|(t, _)| **t >= window[0] && **t <= window[1])
                .flat_map(|(_, q)| q.iter().zip(&loads).map(|(&x, l)| (x as f64 - l).abs() / load.sqrt()))
                .fold(0.0, f64::max);
            Ok(RepGaps {
                max_gap: g.max_gap,
                avg_gap: g.avg_gap,
                unscaled_avg_gap: g.unscaled_avg_gap,
                violations: path.violations,
                sandwich: scaled.sandwich_violations(),
                band,
            })
        })
        .collect()
}

/// Largest consecutive difference; negative means strictly decreasing.
fn worst_step(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn gap_study(
    spec: &ExperimentSpec,
    window: [f64; 2],
    q0_of: impl Fn(&Network) -> Vec<u64>,
) -> Result<(Table, Vec<f64>, Vec<f64>, u64, usize, serde_json::Value)> {
    let mut table = Table::new("gaps.csv", &["r", "seed", "max_gap", "avg_gap", "unscaled_avg_gap"]);
    let mut means = Vec::new();
    let mut bands = Vec::new();
    let mut violations = 0;
    let mut sandwich = 0;
    let mut per_r = Vec::new();
    for &r in &spec.r_grid {
        let net = stage("network", spec.network(r))?;
        let q0 = q0_of(&net);
        let reps = stage("simulate", gap_runs(spec, &net, &q0, window[1], window))?;
        for (k, g) in reps.iter().enumerate() {
            table.push(vec![r.to_string(), k.to_string(), f(g.max_gap), f(g.avg_gap), f(g.unscaled_avg_gap)]);
            violations += g.violations;
            sandwich += g.sandwich;
        }
        let est = |sel: fn(&RepGaps) -> f64| {
            Estimate::from_values(&reps.iter().map(sel).collect::<Vec<_>>()).expect("replications > 0")
        };
        let max_gap = est(|g| g.max_gap);
        means.push(max_gap.mean);
        bands.push(reps.iter().map(|g| g.band).fold(0.0, f64::max));
        per_r.push(serde_json::json!({
            "r": r,
            "q0": q0,
            "max_gap": max_gap,
            "avg_gap": est(|g| g.avg_gap),
            "unscaled_avg_gap": est(|g| g.unscaled_avg_gap),
        }));
    }
    Ok((table, means, bands, violations, sandwich, serde_json::Value::Array(per_r)))
}

fn ssc_trend(spec: &ExperimentSpec) -> Result<Outcome> {
    let window = match spec.window {
        Some(w) => w,
        None => {
            let t4 = stage("fluid", collapse_time(spec))?;
            [t4, t4 + 1.0]
        }
    };
    // Keep Q(0)/r fixed so every r follows the same fluid trajectory.
    let q0_of = |net: &Network| vec![(FLUID_Q0 * net.r() as f64 / FLUID_R).round() as u64; net.stations()];
    let (table, means, _, violations, sandwich, per_r) = gap_study(spec, window, q0_of)?;
    let r_max = *spec.r_grid.last().expect("non-empty");
    let net = spec.network(r_max)?;
    let granularity = 1.0 / (net.p()[0] * net.offered_load().sqrt());
    let checks = vec![
        Check::below(Metric::GapTrend, worst_step(&means), 0.0),
        Check::at_most(Metric::Granularity { r: r_max }, (granularity - GRANULARITY).abs(), 5e-5),
        Check::at_most(Metric::InvariantViolations, violations as f64, 0.0),
        Check::at_most(Metric::SandwichViolations, sandwich as f64, 0.0),
    ];
    Ok(Outcome {
        name: spec.name.clone(),
        tables: vec![table],
        checks,
        summary: serde_json::json!({ "window": window, "per_r": per_r, "granularity": granularity }),
    })
}

fn waits(spec: &ExperimentSpec) -> Result<Outcome> {
    let r = spec.r_grid[0];
    let net = stage("network", spec.network(r))?;
    let arrivals = spec.arrivals_per_rep.unwrap_or(1_000_000);
    let horizon = 20.0 * arrivals as f64 / (net.lambda() * r as f64);
    let run = RunSpec {
        max_arrivals: Some(arrivals),
        record_arrivals: false,
        ..RunSpec::new(horizon, horizon)
    };
    let q0: Vec<u64> = net.station_loads().iter().map(|l| l.round() as u64).collect();
    let paths = stage(
        "simulate",
        (0..spec.replications)
            .into_par_iter()
            .map(|k| match spec.charging {
                None => run_ctmc(&net, &q0, &run, spec.seed, k),
                Some(c) => run_des(&net, c, &q0, &run, spec.seed, k),
            })
            .map(|p| p.map(|p| (p.tallies, p.violations)))
            .collect::<Result<Vec<_>>>(),
    )?;
    let violations: u64 = paths.iter().map(|(_, v)| v).sum();
    let tallies: Vec<_> = paths.into_iter().map(|(t, _)| t).collect();
    let stats = stage("estimate", wait_stats(&tallies))?;
    let asymptote = stage(
        "asymptote",
        wait_probability_limit(spec.lambda, spec.mu, spec.beta, spec.gamma, Regime::LimitedChargers),
    )?;
    let mut table = Table::new("waits.csv", &["station", "estimate", "ci_lo", "ci_hi", "asymptote"]);
    let mut checks = Vec::new();
    for s in &stats {
        let station = s.station + 1;
        match &s.wait_prob {
            Some(e) => {
                table.push(vec![station.to_string(), f(e.mean), f(e.lo()), f(e.hi()), f(asymptote)]);
                checks.push(Check::at_most(
                    Metric::WaitDeviation { station },
                    (e.mean - asymptote).abs(),
                    spec.tolerance,
                ));
                checks.push(Check::at_most(
                    Metric::WaitExcess { station },
                    e.mean - asymptote - e.half_width,
                    0.0,
                ));
            }
            None => {
                table.push(vec![station.to_string(), "missing".into(), "".into(), "".into(), f(asymptote)]);
                checks.push(Check::at_most(Metric::WaitDeviation { station }, f64::INFINITY, spec.tolerance));
            }
        }
    }
    checks.push(Check::at_most(Metric::InvariantViolations, violations as f64, 0.0));
    let caps: Vec<_> = net.capacities().iter().map(|c| (c.b, c.f)).collect();
    let rounded = rounded_prediction(&net);
    Ok(Outcome {
        name: spec.name.clone(),
        tables: vec![table],
        checks,
        summary: serde_json::json!({
            "asymptote": asymptote,
            "stations": stats,
            "capacities": caps,
            "rounded_capacity_prediction": rounded,
            "loads": net.station_loads(),
            "arrivals_per_rep": arrivals,
        }),
    })
}

/// Per-station waiting probability predicted by the pooled diffusion with
/// the integer capacities actually provisioned: station `j` waits when the
/// common scaled level exceeds `(B_j − p_j L)/(p_j sqrt(L))`.
fn rounded_prediction(net: &Network) -> Option<Vec<f64>> {
    let load = net.offered_load();
    let root = load.sqrt();
    let caps = net.capacities();
    let total = |sel: fn(&crate::model::Capacity) -> Option<u64>| -> Option<f64> {
        caps.iter().map(|c| sel(c).map(|v| v as f64)).sum::<Option<f64>>()
    };
    let beta = (total(|c| Some(c.b))? - load) / root;
    let gamma = (total(|c| c.f)? - load) / root;
    let spec = DiffusionSpec::new(net.lambda(), net.mu(), beta, gamma, Regime::LimitedChargers).ok()?;
    Some(
        caps.iter()
            .zip(net.p())
            .map(|(c, &pj)| 1.0 - spec.cdf((c.b as f64 - pj * load) / (pj * root)))
            .collect(),
    )
}

fn robustness(spec: &ExperimentSpec) -> Result<Outcome> {
    let window = spec.window.unwrap_or([1.0, spec.horizon]);
    let (table, means, bands, violations, sandwich, per_r) =
        gap_study(spec, window, |net| vec![0; net.stations()])?;
    let r_max = *spec.r_grid.last().expect("non-empty");
    let checks = vec![
        Check::at_most(Metric::BandExcursion { r: r_max }, *bands.last().expect("non-empty"), spec.tolerance),
        Check::below(Metric::GapTrend, worst_step(&means), 0.0),
        Check::at_most(Metric::InvariantViolations, violations as f64, 0.0),
        Check::at_most(Metric::SandwichViolations, sandwich as f64, 0.0),
    ];
    Ok(Outcome {
        name: spec.name.clone(),
        tables: vec![table],
        checks,
        summary: serde_json::json!({ "window": window, "per_r": per_r, "bands": bands }),
    })
}

fn interchange(spec: &ExperimentSpec) -> Result<Outcome> {
    let points = stage(
        "interchange",
        interchange_check(spec.lambda, spec.mu, spec.beta, spec.gamma, &spec.r_grid),
    )?;
    let mut table = Table::new("interchange.csv", &["r", "B", "F", "distance"]);
    for p in &points {
        table.push(vec![p.r.to_string(), p.b.to_string(), p.f.to_string(), f(p.distance)]);
    }
    let last = points.last().expect("non-empty grid");
    let distances: Vec<f64> = points.iter().map(|p| p.distance).collect();
    let mut checks = vec![Check::at_most(Metric::SupCdfDistance { r: last.r }, last.distance, spec.tolerance)];
    if distances.len() > 1 {
        checks.push(Check::below(Metric::DistanceTrend, worst_step(&distances), 0.0));
    }
    Ok(Outcome {
        name: spec.name.clone(),
        tables: vec![table],
        checks,
        summary: serde_json::json!({ "points": points }),
    })
}

fn exact(spec: &ExperimentSpec) -> Result<Outcome> {
    let r = spec.r_grid[0];
    let net = stage("network", spec.network(r))?;
    let cap = net.capacities()[0];
    let dist = stage(
        "exact",
        steady_state(cap.b, cap.f.unwrap_or(cap.b + r), r, spec.lambda, spec.mu),
    )?;
    let run = RunSpec {
        max_events: spec.events,
        record_arrivals: false,
        record_occupation: true,
        ..RunSpec::new(spec.horizon, spec.sample_dt)
    };
    let q0 = [cap.b.min(r)];
    let path = stage("simulate", run_ctmc(&net, &q0, &run, spec.seed, 0))?;
    let occ = path.occupation_measure(0).expect("occupation recorded");
    let exact = dist.probs();
    let tv = total_variation(&occ, &exact);
    let mut table = Table::new("occupation.csv", &["k", "exact", "empirical"]);
    for (k, (e, o)) in exact.iter().zip(&occ).enumerate() {
        table.push(vec![k.to_string(), f(*e), f(*o)]);
    }
    Ok(Outcome {
        name: spec.name.clone(),
        tables: vec![table],
        checks: vec![
            Check::at_most(Metric::TotalVariation, tv, spec.tolerance),
            Check::at_most(Metric::InvariantViolations, path.violations as f64, 0.0),
        ],
        summary: serde_json::json!({
            "events": path.event_count,
            "end_time": path.end_time,
            "waited_fraction": path.waited_fraction(),
        }),
    })
}

/// Git-style blob hash (`blob <len>\0<content>`) with SHA-256.
pub(crate) fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    hash: String,
}

#[derive(Serialize)]
struct Report<'a> {
    name: &'a str,
    passed: bool,
    checks: &'a [Check],
    summary: &'a serde_json::Value,
}

/// Executes `spec` and writes its artifacts into `out_dir`.
///
/// Produces one CSV per table, `report.json` and `manifest.json`. The
/// manifest echoes the spec and seeds and hashes every file; it contains no
/// timestamps, so identical inputs give identical bytes. On failure the
/// manifest is still written, marked incomplete, with the failing stage.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let streams: Vec<u64> = (0..spec.replications).collect();
    let seeds = serde_json::json!({ "master": spec.seed, "streams": streams });
    match execute(spec) {
        Ok(outcome) => {
            let mut files = Vec::new();
            let mut write = |name: &str, content: String| -> Result<()> {
                std::fs::write(out_dir.join(name), &content)?;
                files.push(FileEntry {
                    name: name.into(),
                    bytes: content.len(),
                    hash: blob_hash(content.as_bytes()),
                });
                Ok(())
            };
            for t in &outcome.tables {
                write(&t.file, t.to_csv())?;
            }
            let report = Report {
                name: &outcome.name,
                passed: outcome.passed(),
                checks: &outcome.checks,
                summary: &outcome.summary,
            };
            write("report.json", to_json(&report)?)?;
            files.sort_by(|a, b| a.name.cmp(&b.name));
            let combined: String = files.iter().map(|f| format!("{} {}\n", f.hash, f.name)).collect();
            let manifest = serde_json::json!({
                "complete": true,
                "spec": spec,
                "seeds": seeds,
                "files": files,
                "content_hash": blob_hash(combined.as_bytes()),
            });
            std::fs::write(out_dir.join("manifest.json"), to_json(&manifest)?)?;
            Ok(outcome)
        }
        Err(e) => {
            let manifest = serde_json::json!({
                "complete": false,
                "spec": spec,
                "seeds": seeds,
                "error": e.to_string(),
            });
            std::fs::write(out_dir.join("manifest.json"), to_json(&manifest)?)?;
            Err(e)
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Numerical(format!("serialisation failed: {e}")))
}
