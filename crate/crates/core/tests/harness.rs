use std::collections::BTreeSet;
use std::fs;

use swapnet::harness::{
    execute, load_spec_str, preset, run_experiment, ExperimentKind, Metric, Topology, PRESET_NAMES,
};
use swapnet::Error;

#[test]
fn every_preset_resolves_and_validates() {
    for name in PRESET_NAMES {
        let spec = preset(name).unwrap();
        assert_eq!(spec.name, name);
        spec.validate().unwrap();
        for &r in &spec.r_grid {
            spec.network(r).unwrap();
        }
    }
    assert!(preset("nope").is_none());
}

#[test]
fn five_station_preset_network() {
    let spec = preset("five-station-fluid").unwrap();
    let net = spec.network(50_000).unwrap();
    for (got, want) in net.station_loads().iter().zip([62.5, 375.0, 375.0, 250.0, 187.5]) {
        assert!((got - want).abs() < 1e-9);
    }
    let waits = preset("five-station-waits").unwrap();
    assert_eq!((waits.replications, waits.arrivals_per_rep), (20, Some(2_500_000)));
    assert!(preset("five-station-ssc").unwrap().replications >= 100);
}

#[test]
fn spec_files_override_presets() {
    let spec = load_spec_str(
        r#"
        preset = "five-station-ssc"
        replications = 3
        r_grid = [1000, 2000]
        "#,
    )
    .unwrap();
    assert_eq!(spec.kind, ExperimentKind::SscTrend);
    assert_eq!(spec.replications, 3);
    assert_eq!(spec.r_grid, vec![1000, 2000]);
    assert_eq!(spec.sample_dt, preset("five-station-ssc").unwrap().sample_dt);

    let full = toml::to_string(&preset("single-exact").unwrap()).unwrap();
    let spec = load_spec_str(&full).unwrap();
    assert_eq!(spec, preset("single-exact").unwrap());
    assert_eq!(spec.topology, Topology::Single { b: 5, f: 3 });
}

#[test]
fn bad_spec_files_are_rejected() {
    assert!(load_spec_str(r#"preset = "nope""#).is_err());
    assert!(load_spec_str("preset = \"five-station-ssc\"\nbogus = 1").is_err());
    assert!(load_spec_str("preset = \"five-station-ssc\"\nr_grid = [50, 20]").is_err());
    assert!(matches!(
        load_spec_str("preset = \"five-station-ssc\"\nreplications = 0"),
        Err(Error::NoReplications)
    ));
}

#[test]
fn no_replications_is_an_error() {
    let mut spec = preset("single-exact").unwrap();
    spec.replications = 0;
    let err = execute(&spec).unwrap_err();
    assert!(err.to_string().contains("no replications"), "{err}");
}

#[test]
fn fluid_preset_recovers_breakpoints() {
    let out = execute(&preset("five-station-fluid").unwrap()).unwrap();
    assert!(out.passed(), "{:?}", out.checks);
    for index in 1..=4 {
        let c = out.check(&Metric::BreakpointError { index }).unwrap();
        assert!(c.value <= 0.01);
    }
    assert!(out.check(&Metric::FluidMaxDeviation).unwrap().value <= 0.5);
    let bp: Vec<f64> = serde_json::from_value(out.summary["breakpoints"].clone()).unwrap();
    assert!((bp[2] - 1.4).abs() < 1e-6);
}

#[test]
fn interchange_preset_passes() {
    let out = execute(&preset("single-interchange").unwrap()).unwrap();
    let c = out.check(&Metric::SupCdfDistance { r: 100_000 }).unwrap();
    assert!(c.passed && c.value <= 0.02, "{c:?}");
    assert!(out.check(&Metric::DistanceTrend).unwrap().passed);
}

#[test]
fn artifacts_are_deterministic() {
    let spec = preset("five-station-fluid").unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&spec, a.path()).unwrap();
    run_experiment(&spec, b.path()).unwrap();
    let names = |d: &std::path::Path| {
        let mut v: Vec<String> = fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let files = names(a.path());
    assert_eq!(files, names(b.path()));
    for f in ["manifest.json", "report.json", "fluid.csv", "events.csv"] {
        assert!(files.contains(&f.to_string()), "{files:?}");
    }
    for f in &files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["spec"]["name"], "five-station-fluid");
    let listed: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert!(!listed.contains(&"manifest.json"));
    assert_eq!(listed.len() + 1, files.len());
    let csv = fs::read_to_string(a.path().join("fluid.csv")).unwrap();
    assert!(csv.starts_with("# columns: t,"));
}

#[test]
fn manifest_hash_is_a_git_blob_hash() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&preset("five-station-fluid").unwrap(), dir.path()).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    for entry in manifest["files"].as_array().unwrap() {
        let bytes = fs::read(dir.path().join(entry["name"].as_str().unwrap())).unwrap();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", bytes.len()));
        h.update(&bytes);
        let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(entry["hash"].as_str().unwrap(), hex);
        assert_eq!(entry["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn failed_runs_leave_an_incomplete_manifest() {
    let mut spec = preset("single-exact").unwrap();
    spec.lambda = -1.0;
    let dir = tempfile::tempdir().unwrap();
    assert!(run_experiment(&spec, dir.path()).is_err());
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], false);
    assert!(manifest["error"].as_str().unwrap().len() > 0);
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn reports_use_only_known_metrics() {
    let known: BTreeSet<&str> = [
        "fluid_max_deviation",
        "breakpoint_error",
        "gap_trend",
        "granularity",
        "wait_deviation",
        "wait_excess",
        "band_excursion",
        "sup_cdf_distance",
        "distance_trend",
        "total_variation",
        "invariant_violations",
        "sandwich_violations",
    ]
    .into();
    let fields: BTreeSet<&str> =
        ["metric", "value", "relation", "threshold", "passed", "index", "r", "station"].into();
    for name in ["five-station-fluid", "single-interchange"] {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&preset(name).unwrap(), dir.path()).unwrap();
        let report: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["name"], name);
        for c in report["checks"].as_array().unwrap() {
            let obj = c.as_object().unwrap();
            assert!(known.contains(obj["metric"].as_str().unwrap()), "{c}");
            assert!(obj.keys().all(|k| fields.contains(k.as_str())), "{c}");
            assert!(["at_most", "below"].contains(&obj["relation"].as_str().unwrap()));
        }
    }
}
