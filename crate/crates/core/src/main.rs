use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use swapnet::asymptotics::{
    expected_wait_limit, fluid_network_integrate, interchange_check, DiffusionSpec, FluidState,
};
use swapnet::exactss::{expected_waiting, steady_state, steady_state_infinite_f, wait_probability_exact};
use swapnet::harness::{load_spec_str, preset, run_experiment, Relation, PRESET_NAMES};
use swapnet::metrics::{utilization, wait_stats};
use swapnet::model::{load_config, Regime};
use swapnet::sim::{run_replications, ChargingDist, RunSpec};

#[derive(Parser)]
#[command(name = "swapnet", version, about = "Battery-swapping network simulator and analytic engine")]
struct Cli {
    /// Worker threads for replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a network from a TOML config.
    Simulate(SimulateArgs),
    /// Exact single-station steady state, as JSON.
    Analytic(AnalyticArgs),
    /// Network fluid trajectory. Columns: t, q_1..q_S (queue units).
    Fluid(FluidArgs),
    /// Limiting diffusion density. Columns: x, density, cdf.
    Density(DensityArgs),
    /// Limiting waiting measures per fleet size. Columns: r, wait_probability,
    /// tail_integral, e_qw, e_w, e_w_sqrt_r.
    Limits(LimitsArgs),
    /// Exact-vs-limit Kolmogorov distance. Columns: r, B, F, distance.
    Interchange(InterchangeArgs),
    /// Run a named preset or a TOML experiment file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Initial queue lengths, comma separated (default: rounded loads).
    #[arg(long, value_delimiter = ',')]
    q0: Option<Vec<u64>>,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    sample_dt: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    /// exp, det:V or unif:LO,HI (mean-one laws recommended).
    #[arg(long, default_value = "exp")]
    charging: String,
    #[arg(long, default_value = "swapnet")]
    out: String,
}

#[derive(Args)]
struct Rates {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long)]
    b: u64,
    /// Charging points, or `inf`.
    #[arg(long)]
    f: String,
    #[arg(long)]
    r: u64,
    #[command(flatten)]
    rates: Rates,
}

#[derive(Args)]
struct FluidArgs {
    #[arg(long)]
    config: PathBuf,
    /// Initial queue lengths (queue units), comma separated.
    #[arg(long, value_delimiter = ',')]
    q0: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
}

#[derive(Args)]
struct Qed {
    #[command(flatten)]
    rates: Rates,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gamma: f64,
    #[arg(long, default_value = "limited_chargers")]
    regime: Regime,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    qed: Qed,
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 161)]
    points: usize,
}

#[derive(Args)]
struct LimitsArgs {
    #[command(flatten)]
    qed: Qed,
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    r: Vec<u64>,
}

#[derive(Args)]
struct InterchangeArgs {
    #[command(flatten)]
    rates: Rates,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    gamma: f64,
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    r: Vec<u64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset name or path to a TOML spec.
    target: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Simulate(a) => simulate(a).map(|_| true),
        Cmd::Analytic(a) => analytic(a).map(|_| true),
        Cmd::Fluid(a) => fluid(a).map(|_| true),
        Cmd::Density(a) => density(a).map(|_| true),
        Cmd::Limits(a) => limits(a).map(|_| true),
        Cmd::Interchange(a) => interchange(a).map(|_| true),
        Cmd::Experiment(a) => experiment(a),
    }
}

fn csv(columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = format!("# columns: {}\n{}\n", columns.join(","), columns.join(","));
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn print(text: &str) -> Result<()> {
    std::io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let net = load_config(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    let charging: ChargingDist = a.charging.parse()?;
    let charging = (!matches!(charging, ChargingDist::Exponential { .. })).then_some(charging);
    let q0 = match a.q0 {
        Some(q) => q,
        None => net.station_loads().iter().map(|l| l.round() as u64).collect(),
    };
    let run = RunSpec::new(a.horizon, a.sample_dt);
    let paths = run_replications(&net, &q0, &run, charging, a.seed, a.reps)?;
    let first = &paths[0];
    let s = net.stations();

    let mut cols = vec!["t".to_string()];
    cols.extend((1..=s).map(|j| format!("q_{j}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let rows = first.sample_times.iter().zip(&first.q_samples).map(|(t, q)| {
        std::iter::once(t.to_string()).chain(q.iter().map(u64::to_string)).collect()
    });
    write(&format!("{}_path.csv", a.out), &csv(&cols, rows))?;

    let rows = first.arrivals.iter().map(|r| {
        vec![
            r.time.to_string(),
            format!("{}-{}", r.pair.0 + 1, r.pair.1 + 1),
            (r.station + 1).to_string(),
            u8::from(r.waited).to_string(),
            r.wait.map_or(String::new(), |w| w.to_string()),
        ]
    });
    write(
        &format!("{}_arrivals.csv", a.out),
        &csv(&["time", "pair", "station", "waited", "wait"], rows),
    )?;

    let tallies: Vec<_> = paths.iter().map(|p| p.tallies.clone()).collect();
    let summary = json!({
        "seed": a.seed,
        "replications": a.reps,
        "capacities": net.capacities().iter().map(|c| json!({"B": c.b, "F": c.f, "G": c.g})).collect::<Vec<_>>(),
        "loads": net.station_loads(),
        "waits": wait_stats(&tallies)?,
        "utilization": utilization(first, &net),
        "events": paths.iter().map(|p| p.event_count).collect::<Vec<_>>(),
        "violations": paths.iter().map(|p| p.violations).sum::<u64>(),
    });
    write(&format!("{}_summary.json", a.out), &serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn write(path: &str, content: &str) -> Result<()> {
    std::fs::write(Path::new(path), content).with_context(|| format!("writing {path}"))
}

fn analytic(a: AnalyticArgs) -> Result<()> {
    let Rates { lambda, mu } = a.rates;
    let dist = if a.f == "inf" {
        steady_state_infinite_f(a.b, a.r, lambda, mu)?
    } else {
        let f: u64 = a.f.parse().context("--f must be an integer or `inf`")?;
        steady_state(a.b, f, a.r, lambda, mu)?
    };
    let quantiles: Vec<_> = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99]
        .iter()
        .map(|&q| json!({"q": q, "k": dist.quantile(q)}))
        .collect();
    let wait = wait_probability_exact(&dist, a.b)?;
    let (e_qw, e_w) = expected_waiting(&dist, a.b, lambda, a.r)?;
    let out = json!({
        "B": a.b, "F": a.f, "r": a.r, "lambda": lambda, "mu": mu,
        "mean_queue": dist.mean(),
        "quantiles": quantiles,
        "wait_probability": wait,
        "expected_waiting_evs": e_qw,
        "expected_wait": e_w,
    });
    print(&(serde_json::to_string_pretty(&out)? + "\n"))
}

fn fluid(a: FluidArgs) -> Result<()> {
    let net = load_config(&a.config)?;
    if a.q0.len() != net.stations() {
        bail!("--q0 needs {} entries", net.stations());
    }
    let r = net.r() as f64;
    let q0 = FluidState::new(0.0, a.q0.iter().map(|q| q / r).collect());
    let n = (a.horizon / a.dt).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * a.dt).collect();
    let traj = fluid_network_integrate(&net, &q0, &grid)?;
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=net.stations()).map(|j| format!("q_{j}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let rows = traj.states.iter().map(|s| {
        std::iter::once(s.time.to_string())
            .chain(s.qbar.iter().map(|q| (q * r).to_string()))
            .collect()
    });
    print(&csv(&cols, rows))
}

fn diffusion(q: &Qed) -> Result<DiffusionSpec> {
    Ok(DiffusionSpec::new(q.rates.lambda, q.rates.mu, q.beta, q.gamma, q.regime)?)
}

fn density(a: DensityArgs) -> Result<()> {
    let spec = diffusion(&a.qed)?;
    if a.points < 2 || !(a.from < a.to) {
        bail!("need --points ≥ 2 and --from < --to");
    }
    let h = (a.to - a.from) / (a.points - 1) as f64;
    let rows = (0..a.points).map(|k| {
        let x = a.from + k as f64 * h;
        vec![x.to_string(), spec.density(x).to_string(), spec.cdf(x).to_string()]
    });
    print(&csv(&["x", "density", "cdf"], rows))
}

fn limits(a: LimitsArgs) -> Result<()> {
    let spec = diffusion(&a.qed)?;
    let q = &a.qed;
    let rows = a
        .r
        .iter()
        .map(|&r| {
            let w = expected_wait_limit(q.rates.lambda, q.rates.mu, q.beta, q.gamma, q.regime, r)?;
            Ok(vec![
                r.to_string(),
                spec.wait_probability().to_string(),
                w.tail_integral.to_string(),
                w.e_qw.to_string(),
                w.e_w.to_string(),
                w.e_w_sqrt_r.to_string(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    print(&csv(
        &["r", "wait_probability", "tail_integral", "e_qw", "e_w", "e_w_sqrt_r"],
        rows,
    ))
}

fn interchange(a: InterchangeArgs) -> Result<()> {
    let pts = interchange_check(a.rates.lambda, a.rates.mu, a.beta, a.gamma, &a.r)?;
    let rows = pts
        .iter()
        .map(|p| vec![p.r.to_string(), p.b.to_string(), p.f.to_string(), p.distance.to_string()]);
    print(&csv(&["r", "B", "F", "distance"], rows))
}

fn experiment(a: ExperimentArgs) -> Result<bool> {
    let spec = match preset(&a.target) {
        Some(s) => s,
        None => {
            let path = Path::new(&a.target);
            if !path.exists() {
                bail!(
                    "`{}` is neither a preset ({}) nor a file",
                    a.target,
                    PRESET_NAMES.join(", ")
                );
            }
            load_spec_str(&std::fs::read_to_string(path)?)?
        }
    };
    let outcome = run_experiment(&spec, &a.out)?;
    let mut out = String::new();
    for c in &outcome.checks {
        let rel = match c.relation {
            Relation::AtMost => "<=",
            Relation::Below => "<",
        };
        let metric = serde_json::to_value(&c.metric)?;
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            metric,
            c.value,
            rel,
            c.threshold
        ));
    }
    print(&out)?;
    Ok(outcome.passed())
}
