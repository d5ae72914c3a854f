//! Experiment presets and artifact generation.
//!
//! An [`ExperimentSpec`] names a study, its parameters and the tolerance of
//! its acceptance check. [`execute`] runs it in memory; [`run_experiment`]
//! also writes CSV tables, `report.json` and a content-hashed
//! `manifest.json` to an output directory.

mod experiment;
mod reference;

pub use experiment::{execute, run_experiment, Check, Metric, Outcome, Relation, Table};
pub use reference::{five_station_reference, BREAKPOINTS};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Edge, Network, QedParams, Regime};
use crate::sim::ChargingDist;

/// What an experiment measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Network fluid trajectory against the published piecewise solution.
    Fluid,
    /// Windowed diffusion-scaled gaps across fleet sizes.
    SscTrend,
    /// Per-station waiting probabilities against the pooled asymptote.
    WaitConvergence,
    /// Non-exponential charging: invariant-load band and gap trend.
    ChargingRobustness,
    /// Exact single-station steady states against the diffusion limit.
    Interchange,
    /// Single-station CTMC occupation measure against the exact solution.
    ExactAgreement,
}

/// Network shape used by an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Topology {
    FiveStation,
    Single { b: u64, f: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub topology: Topology,
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r_grid: Vec<u64>,
    /// Master seed; replication `k` uses stream `k`.
    pub seed: u64,
    pub replications: u64,
    pub horizon: f64,
    pub sample_dt: f64,
    /// `None` runs the exponential CTMC.
    pub charging: Option<ChargingDist>,
    pub arrivals_per_rep: Option<u64>,
    pub events: Option<u64>,
    /// Statistics window; `None` lets the experiment choose.
    pub window: Option<[f64; 2]>,
    /// Main acceptance tolerance of this experiment.
    pub tolerance: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.r_grid.is_empty() || self.r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("r_grid must be non-empty and strictly ascending"));
        }
        let simulates = !matches!(self.kind, ExperimentKind::Fluid | ExperimentKind::Interchange);
        if simulates && self.replications == 0 {
            return Err(Error::NoReplications);
        }
        if !(self.sample_dt > 0.0) || !(self.horizon > 0.0) {
            return Err(invalid("horizon and sample_dt must be positive"));
        }
        if let Some(c) = &self.charging {
            c.validate()?;
        }
        Ok(())
    }

    pub fn qed(&self) -> Result<QedParams> {
        QedParams::new(self.beta, self.gamma, Regime::LimitedChargers)
    }

    /// The experiment's network at fleet size `r`.
    pub fn network(&self, r: u64) -> Result<Network> {
        match self.topology {
            Topology::FiveStation => {
                five_station_network_with(self.lambda, self.mu, r, self.qed()?)
            }
            Topology::Single { b, f } => Network::single(self.lambda, self.mu, r, b, Some(f)),
        }
    }
}

/// Edge probabilities of the five-station study network (0-based).
pub fn five_station_edges() -> Vec<Edge> {
    vec![
        Edge::new(0, 1, 0.1),
        Edge::new(1, 3, 0.1),
        Edge::new(2, 3, 0.1),
        Edge::new(2, 4, 0.1),
        Edge::new(1, 2, 0.4),
        Edge::new(3, 4, 0.2),
    ]
}

fn five_station_network_with(lambda: f64, mu: f64, r: u64, qed: QedParams) -> Result<Network> {
    Network::provisioned(5, five_station_edges(), lambda, mu, r, qed, &[Some(1); 5])
}

/// Five-station network with `λ = 0.025`, `μ = 1` and one swap server per
/// station.
pub fn five_station_network(beta: f64, gamma: f64, r: u64) -> Result<Network> {
    five_station_network_with(0.025, 1.0, r, QedParams::new(beta, gamma, Regime::LimitedChargers)?)
}

fn base(name: &str, kind: ExperimentKind) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        kind,
        topology: Topology::FiveStation,
        lambda: 0.025,
        mu: 1.0,
        beta: 1.0,
        gamma: 0.0,
        r_grid: vec![50_000],
        seed: 20_240_601,
        replications: 20,
        horizon: 3.0,
        sample_dt: 0.01,
        charging: None,
        arrivals_per_rep: None,
        events: None,
        window: None,
        tolerance: 0.0,
    }
}

/// Five-station fluid study from `Q(0) = 150` per station at `r = 50000`.
pub fn preset_five_station() -> ExperimentSpec {
    ExperimentSpec {
        tolerance: 0.5,
        replications: 0,
        ..base("five-station-fluid", ExperimentKind::Fluid)
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 7] = [
    "five-station-fluid",
    "five-station-ssc",
    "five-station-waits",
    "deterministic",
    "uniform",
    "single-interchange",
    "single-exact",
];

/// Looks up a named preset.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let spec = match name {
        "five-station-fluid" => preset_five_station(),
        "five-station-ssc" => ExperimentSpec {
            r_grid: vec![5_000, 20_000, 50_000],
            replications: 100,
            sample_dt: 1e-4,
            ..base(name, ExperimentKind::SscTrend)
        },
        // 20 independent replications, each run until 2.5e6 arrivals.
        "five-station-waits" => ExperimentSpec {
            arrivals_per_rep: Some(2_500_000),
            tolerance: 0.05,
            ..base(name, ExperimentKind::WaitConvergence)
        },
        "deterministic" => ExperimentSpec {
            r_grid: vec![5_000, 20_000, 50_000],
            charging: Some(ChargingDist::Deterministic { value: 1.0 }),
            sample_dt: 1e-3,
            window: Some([1.0, 3.0]),
            tolerance: 4.0,
            ..base(name, ExperimentKind::ChargingRobustness)
        },
        "uniform" => ExperimentSpec {
            r_grid: vec![5_000, 20_000, 50_000],
            charging: Some(ChargingDist::Uniform { lo: 0.75, hi: 1.25 }),
            sample_dt: 1e-3,
            window: Some([1.0, 3.0]),
            tolerance: 4.0,
            ..base(name, ExperimentKind::ChargingRobustness)
        },
        "single-interchange" => ExperimentSpec {
            topology: Topology::Single { b: 0, f: 1 },
            lambda: 1.0,
            mu: 1.0,
            beta: 1.0,
            gamma: 0.5,
            r_grid: vec![1_000, 10_000, 100_000],
            replications: 0,
            tolerance: 0.02,
            ..base(name, ExperimentKind::Interchange)
        },
        "single-exact" => ExperimentSpec {
            topology: Topology::Single { b: 5, f: 3 },
            lambda: 1.0,
            mu: 2.0,
            r_grid: vec![10],
            replications: 1,
            horizon: 1e12,
            sample_dt: 1e12,
            events: Some(10_000_000),
            tolerance: 0.02,
            ..base(name, ExperimentKind::ExactAgreement)
        },
        _ => return None,
    };
    Some(spec)
}

/// Reads an experiment spec from TOML. A `preset = "name"` key starts from
/// that preset and overrides the listed fields.
pub fn load_spec_str(text: &str) -> Result<ExperimentSpec> {
    let value: toml::Value = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut table = value
        .as_table()
        .cloned()
        .ok_or_else(|| Error::Parse("experiment spec must be a table".into()))?;
    let spec: ExperimentSpec = match table.remove("preset") {
        Some(name) => {
            let name = name
                .as_str()
                .ok_or_else(|| Error::Parse("preset must be a string".into()))?;
            let base = preset(name).ok_or_else(|| Error::Parse(format!("unknown preset `{name}`")))?;
            let mut merged = toml::Value::try_from(&base)
                .map_err(|e| Error::Parse(e.to_string()))?
                .as_table()
                .cloned()
                .expect("spec serialises to a table");
            for (k, v) in table {
                merged.insert(k, v);
            }
            toml::Value::Table(merged)
                .try_into()
                .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?
        }
        None => toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?,
    };
    spec.validate()?;
    Ok(spec)
}
