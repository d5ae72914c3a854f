//! Network description, QED provisioning and structural validation.
//!
//! Stations are indexed from 0 in code and from 1 in config files and CSV
//! output. A [`NetworkConfig`] is plain data; [`NetworkConfig::validate`]
//! checks it and returns an immutable [`Network`] carrying the derived
//! effective probabilities and exact routing weights.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;
const CEIL_REL_TOL: f64 = 1e-9;
const RATIONAL_MAX_DEN: u64 = 1_000_000_000;

/// Capacity regime of the QED scaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Finitely many charging points with `γ ≤ β`.
    #[serde(alias = "limited")]
    LimitedChargers,
    /// A charging point for every battery (`F = ∞`).
    #[serde(alias = "unlimited")]
    UnlimitedChargers,
    /// `γ > β`, swap servers never bind (`G = ∞`).
    #[serde(alias = "swap")]
    SwapUnconstrained,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::LimitedChargers => "limited_chargers",
            Regime::UnlimitedChargers => "unlimited_chargers",
            Regime::SwapUnconstrained => "swap_unconstrained",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "limited" | "limited_chargers" | "main" => Ok(Regime::LimitedChargers),
            "unlimited" | "unlimited_chargers" => Ok(Regime::UnlimitedChargers),
            "swap" | "swap_unconstrained" => Ok(Regime::SwapUnconstrained),
            other => Err(invalid(format!("unknown regime `{other}`"))),
        }
    }
}

/// Slack coefficients of the square-root provisioning rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QedParams {
    pub beta: f64,
    pub gamma: f64,
    pub regime: Regime,
}

impl QedParams {
    pub fn new(beta: f64, gamma: f64, regime: Regime) -> Result<Self> {
        let q = QedParams {
            beta,
            gamma,
            regime,
        };
        q.check()?;
        Ok(q)
    }

    pub fn check(&self) -> Result<()> {
        if !self.beta.is_finite() || !self.gamma.is_finite() {
            return Err(invalid("beta and gamma must be finite"));
        }
        match self.regime {
            Regime::LimitedChargers if self.gamma > self.beta => Err(invalid(format!(
                "limited-charger regime needs gamma <= beta (got {} > {})",
                self.gamma, self.beta
            ))),
            Regime::SwapUnconstrained if self.gamma <= self.beta => Err(invalid(format!(
                "swap-unconstrained regime needs gamma > beta (got {} <= {})",
                self.gamma, self.beta
            ))),
            _ => Ok(()),
        }
    }
}

/// An unordered station pair with its selection probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub p: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, p: f64) -> Self {
        Edge { i, j, p }
    }
}

/// Per-station resources. `None` encodes an infinite amount.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capacity {
    /// Spare batteries `B_j`.
    pub b: u64,
    /// Charging points `F_j`.
    pub f: Option<u64>,
    /// Swap servers `G_j`.
    pub g: Option<u64>,
}

/// A non-negative rational number `num/den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Best rational approximation of `x >= 0` with denominator at most `max_den`,
/// stopping early once within `1e-15` relative.
pub fn rationalize(x: f64, max_den: u64) -> Ratio {
    assert!(x >= 0.0 && x.is_finite(), "rationalize needs a finite x >= 0");
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        if a > u32::MAX as f64 {
            break;
        }
        let a = a as u64;
        let h2 = a.saturating_mul(h1).saturating_add(h0);
        let k2 = a.saturating_mul(k1).saturating_add(k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= 1e-15 * x.max(f64::MIN_POSITIVE) {
            break;
        }
        let frac = rem - a as f64;
        if frac <= 0.0 {
            break;
        }
        rem = 1.0 / frac;
    }
    if k1 == 0 {
        return Ratio { num: 0, den: 1 };
    }
    Ratio { num: h1, den: k1 }
}

/// Effective arrival probabilities `p_j = Σ_i p_ij / 2`.
///
/// A self-loop `{j, j}` contributes its full probability to `p_j`. With a
/// single station and no edges the result is `[1.0]`.
pub fn effective_probs(stations: usize, edges: &[Edge]) -> Result<Vec<f64>> {
    if stations == 0 {
        return Err(Error::InvalidConfig("network needs at least one station".into()));
    }
    if edges.is_empty() {
        return if stations == 1 {
            Ok(vec![1.0])
        } else {
            Err(Error::Disconnected {
                components: stations,
            })
        };
    }
    let mut seen = std::collections::HashSet::new();
    for e in edges {
        if e.i >= stations || e.j >= stations {
            return Err(Error::InvalidConfig(format!(
                "edge {{{}, {}}} references a station outside 1..={stations}",
                e.i + 1,
                e.j + 1
            )));
        }
        if !(e.p > 0.0 && e.p <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "edge {{{}, {}}} has probability {} outside (0, 1]",
                e.i + 1,
                e.j + 1,
                e.p
            )));
        }
        if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
            return Err(Error::InvalidConfig(format!(
                "edge {{{}, {}}} listed twice",
                e.i + 1,
                e.j + 1
            )));
        }
    }
    let sum: f64 = edges.iter().map(|e| e.p).sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::ProbabilitySum { sum });
    }
    let components = count_components(stations, edges);
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    let mut p = vec![0.0; stations];
    for e in edges {
        p[e.i] += e.p / 2.0;
        p[e.j] += e.p / 2.0;
    }
    Ok(p)
}

fn count_components(stations: usize, edges: &[Edge]) -> usize {
    let mut parent: Vec<usize> = (0..stations).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = stations;
    for e in edges.iter().filter(|e| e.p > 0.0) {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components
}

/// `ceil(x)` that ignores floating-point noise just above an integer.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    let n = x.round();
    if (x - n).abs() <= CEIL_REL_TOL * x.abs().max(1.0) {
        n
    } else {
        x.ceil()
    }
}

/// Square-root provisioning of spare batteries and charging points.
///
/// `B_j = ceil(p_j (λr/μ + β sqrt(λr/μ)))` and likewise `F_j` with `γ`.
/// `g` supplies the swap servers per station (`None` = unlimited); it is
/// ignored in the swap-unconstrained regime.
pub fn provision(
    lambda: f64,
    mu: f64,
    r: u64,
    qed: &QedParams,
    p: &[f64],
    g: &[Option<u64>],
) -> Result<Vec<Capacity>> {
    if !(lambda > 0.0 && mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
        return Err(invalid("lambda and mu must be positive and finite"));
    }
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    if g.len() != p.len() {
        return Err(invalid("one swap-server count per station is required"));
    }
    qed.check()?;
    let load = lambda * r as f64 / mu;
    let root = load.sqrt();
    let mut caps = Vec::with_capacity(p.len());
    for (j, (&pj, &gj)) in p.iter().zip(g).enumerate() {
        let b_raw = ceil_tol(pj * (load + qed.beta * root));
        if b_raw < 0.0 {
            return Err(Error::NegativeCapacity {
                station: j + 1,
                what: "spare-battery",
                value: b_raw,
            });
        }
        let b = b_raw as u64;
        let (f, g) = match qed.regime {
            Regime::UnlimitedChargers => (None, gj),
            Regime::LimitedChargers | Regime::SwapUnconstrained => {
                let f_raw = ceil_tol(pj * (load + qed.gamma * root));
                if f_raw < 1.0 {
                    return Err(Error::NegativeCapacity {
                        station: j + 1,
                        what: "charging-point",
                        value: f_raw - 1.0,
                    });
                }
                let f = f_raw as u64;
                if qed.regime == Regime::SwapUnconstrained {
                    (Some(f), None)
                } else {
                    if let Some(gv) = gj {
                        if f > b + gv {
                            return Err(Error::ChargerBound {
                                station: j + 1,
                                f,
                                bound: b + gv,
                            });
                        }
                    }
                    (Some(f), gj)
                }
            }
        };
        caps.push(Capacity { b, f, g });
    }
    Ok(caps)
}

/// Raw network description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub stations: usize,
    pub edges: Vec<Edge>,
    pub lambda: f64,
    pub mu: f64,
    pub r: u64,
    pub capacities: Vec<Capacity>,
}

impl NetworkConfig {
    /// Checks every structural invariant and derives routing data.
    pub fn validate(&self) -> Result<Network> {
        self.validate_with(None)
    }

    pub fn validate_with(&self, qed: Option<QedParams>) -> Result<Network> {
        if !(self.lambda > 0.0 && self.mu > 0.0) || !self.lambda.is_finite() || !self.mu.is_finite()
        {
            return Err(Error::InvalidConfig("lambda and mu must be positive and finite".into()));
        }
        if self.r == 0 {
            return Err(Error::InvalidConfig("r must be at least 1".into()));
        }
        if let Some(q) = &qed {
            q.check()?;
        }
        let p_raw = effective_probs(self.stations, &self.edges)?;
        if self.capacities.len() != self.stations {
            return Err(Error::InvalidConfig(format!(
                "{} capacity records for {} stations",
                self.capacities.len(),
                self.stations
            )));
        }
        for (j, c) in self.capacities.iter().enumerate() {
            if let Some(f) = c.f {
                if f == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "station {} has no charging points",
                        j + 1
                    )));
                }
                if let Some(g) = c.g {
                    if f > c.b + g {
                        return Err(Error::ChargerBound {
                            station: j + 1,
                            f,
                            bound: c.b + g,
                        });
                    }
                }
            }
        }
        let mut p = Vec::with_capacity(p_raw.len());
        let mut weights = Vec::with_capacity(p_raw.len());
        for &x in &p_raw {
            let w = rationalize(x, RATIONAL_MAX_DEN);
            let wv = w.value();
            // Snap to the rational when it is the same number up to rounding.
            p.push(if (wv - x).abs() <= 1e-12 * x { wv } else { x });
            weights.push(w);
        }
        Ok(Network {
            config: self.clone(),
            qed,
            p,
            weights,
        })
    }
}

/// A validated, immutable network.
#[derive(Clone, Debug)]
pub struct Network {
    config: NetworkConfig,
    qed: Option<QedParams>,
    p: Vec<f64>,
    weights: Vec<Ratio>,
}

impl Network {
    /// Builds a network whose capacities follow the provisioning rule.
    pub fn provisioned(
        stations: usize,
        edges: Vec<Edge>,
        lambda: f64,
        mu: f64,
        r: u64,
        qed: QedParams,
        g: &[Option<u64>],
    ) -> Result<Network> {
        let p = effective_probs(stations, &edges)?;
        let capacities = provision(lambda, mu, r, &qed, &p, g)?;
        NetworkConfig {
            stations,
            edges,
            lambda,
            mu,
            r,
            capacities,
        }
        .validate_with(Some(qed))
    }

    /// A one-station network with explicit capacities.
    pub fn single(lambda: f64, mu: f64, r: u64, b: u64, f: Option<u64>) -> Result<Network> {
        NetworkConfig {
            stations: 1,
            edges: vec![],
            lambda,
            mu,
            r,
            capacities: vec![Capacity { b, f, g: None }],
        }
        .validate()
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }
    pub fn qed(&self) -> Option<&QedParams> {
        self.qed.as_ref()
    }
    pub fn stations(&self) -> usize {
        self.config.stations
    }
    pub fn edges(&self) -> &[Edge] {
        &self.config.edges
    }
    pub fn lambda(&self) -> f64 {
        self.config.lambda
    }
    pub fn mu(&self) -> f64 {
        self.config.mu
    }
    pub fn r(&self) -> u64 {
        self.config.r
    }
    pub fn capacities(&self) -> &[Capacity] {
        &self.config.capacities
    }
    /// Effective probabilities `p_j`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }
    /// Exact rational forms of `p_j` used for routing comparisons.
    pub fn weights(&self) -> &[Ratio] {
        &self.weights
    }
    /// Offered load `λr/μ`.
    pub fn offered_load(&self) -> f64 {
        self.config.lambda * self.config.r as f64 / self.config.mu
    }
    /// Per-station loads `p_j λr/μ`.
    pub fn station_loads(&self) -> Vec<f64> {
        let load = self.offered_load();
        self.p.iter().map(|p| p * load).collect()
    }
    /// True when every station has unlimited chargers.
    pub fn unlimited_chargers(&self) -> bool {
        self.config.capacities.iter().all(|c| c.f.is_none())
    }

    /// Same topology and QED parameters with a different fleet size.
    pub fn with_r(&self, r: u64) -> Result<Network> {
        let qed = self
            .qed
            .ok_or_else(|| invalid("network was not built by provisioning"))?;
        let g: Vec<Option<u64>> = self.config.capacities.iter().map(|c| c.g).collect();
        Network::provisioned(
            self.config.stations,
            self.config.edges.clone(),
            self.config.lambda,
            self.config.mu,
            r,
            qed,
            &g,
        )
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    i: usize,
    j: usize,
    p: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CountSpec {
    Scalar(u64),
    List(Vec<u64>),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    lambda: f64,
    mu: f64,
    r: u64,
    stations: usize,
    #[serde(default)]
    edges: Vec<EdgeFile>,
    beta: Option<f64>,
    gamma: Option<f64>,
    regime: Option<Regime>,
    #[serde(rename = "G")]
    g: Option<CountSpec>,
    #[serde(rename = "B")]
    b: Option<Vec<u64>>,
    #[serde(rename = "F")]
    f: Option<Vec<u64>>,
}

fn expand_g(spec: Option<CountSpec>, stations: usize) -> Result<Vec<Option<u64>>> {
    match spec {
        None => Ok(vec![Some(1); stations]),
        Some(CountSpec::Scalar(g)) => Ok(vec![Some(g); stations]),
        Some(CountSpec::List(v)) if v.len() == stations => Ok(v.into_iter().map(Some).collect()),
        Some(CountSpec::List(v)) => Err(Error::Parse(format!(
            "G lists {} values for {stations} stations",
            v.len()
        ))),
        Some(CountSpec::Text(s)) if s == "inf" => Ok(vec![None; stations]),
        Some(CountSpec::Text(s)) => Err(Error::Parse(format!("G = `{s}` is not a count or \"inf\""))),
    }
}

/// Parses and validates a TOML network description.
///
/// Keys: `lambda`, `mu`, `r`, `stations`, `edges = [{i, j, p}, ...]`
/// (1-based), `beta`, `gamma`, `regime`, `G` (count, list or `"inf"`,
/// default 1). Explicit `B` and `F` lists override provisioning.
pub fn load_config_str(text: &str) -> Result<Network> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let edges = file
        .edges
        .iter()
        .map(|e| {
            if e.i == 0 || e.j == 0 {
                Err(Error::Parse("station indices in edges are 1-based".into()))
            } else {
                Ok(Edge::new(e.i - 1, e.j - 1, e.p))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let g = expand_g(file.g, file.stations)?;
    let qed = match (file.beta, file.gamma) {
        (Some(beta), gamma) => Some(QedParams::new(
            beta,
            gamma.unwrap_or(0.0),
            file.regime.unwrap_or(Regime::LimitedChargers),
        )?),
        (None, Some(_)) => return Err(Error::Parse("gamma given without beta".into())),
        (None, None) => None,
    };
    match (file.b, qed) {
        (Some(b), _) => {
            let unlimited = matches!(file.regime, Some(Regime::UnlimitedChargers));
            let f: Vec<Option<u64>> = match file.f {
                Some(f) => f.into_iter().map(Some).collect(),
                None if unlimited => vec![None; file.stations],
                None => return Err(Error::Parse("B given without F".into())),
            };
            if b.len() != file.stations || f.len() != file.stations {
                return Err(Error::Parse("B and F need one entry per station".into()));
            }
            let swap = matches!(file.regime, Some(Regime::SwapUnconstrained));
            let capacities = b
                .iter()
                .zip(&f)
                .zip(&g)
                .map(|((&b, &f), &g)| Capacity {
                    b,
                    f,
                    g: if swap { None } else { g },
                })
                .collect();
            NetworkConfig {
                stations: file.stations,
                edges,
                lambda: file.lambda,
                mu: file.mu,
                r: file.r,
                capacities,
            }
            .validate_with(qed)
        }
        (None, Some(qed)) => Network::provisioned(
            file.stations,
            edges,
            file.lambda,
            file.mu,
            file.r,
            qed,
            &g,
        ),
        (None, None) => Err(Error::Parse(
            "config needs either beta (and gamma) or explicit B and F".into(),
        )),
    }
}

/// Reads a TOML network description from disk.
pub fn load_config(path: &std::path::Path) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    load_config_str(&text)
}
