//! Config-driven Monte Carlo experiment runner: builds the network and data
//! sources, fans runs out across a thread pool, and writes the CSV tables
//! and manifest an experiment leaves behind.
//!
//! Per-run seeds derive from the master seed via [`crate::stats::split_seed`],
//! so results are independent of worker count and adding runs never changes
//! earlier ones.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::algorithms::{run, AlgorithmKind, RunSettings, StepParams};
use crate::config::{RunConfig, SourceSpec, TopologySpec};
use crate::data::{
    load_csv, normalize_and_partition, DatasetSource, SlotSource, SyntheticConfig, SyntheticSource,
};
use crate::error::{Error, Result};
use crate::graph::Network;
use crate::metrics::{msd, smrd, MetricsLog};

/// Bound on topology resampling when connectivity is required.
pub const MAX_CONNECT_ATTEMPTS: u64 = 10_000;

/// Builds the communication graph a config describes. For geometric
/// topologies with `require_connected`, seeds are resampled (bounded) until
/// the graph is connected; the attempt index is returned for the manifest.
pub fn build_network(cfg: &RunConfig) -> Result<(Arc<Network>, u64)> {
    let (net, attempt) = match &cfg.topology {
        TopologySpec::Geometric { range, seed } => {
            if cfg.require_connected {
                Network::connected_geometric(cfg.nodes, *range, *seed, MAX_CONNECT_ATTEMPTS)?
            } else {
                (
                    Network::random_geometric(cfg.nodes, *range, crate::stats::split_seed(*seed, 0)),
                    0,
                )
            }
        }
        TopologySpec::EdgeList { path } => {
            let text = std::fs::read_to_string(path)?;
            let net = Network::from_edge_list_text(&text)?;
            if net.node_count() != cfg.nodes {
                return Err(Error::config(
                    "nodes",
                    cfg.nodes,
                    &format!("edge list declares {} nodes", net.node_count()),
                ));
            }
            if cfg.require_connected && !net.is_connected() {
                return Err(Error::Graph("edge-list graph is not connected".to_string()));
            }
            (net, 0)
        }
    };
    Ok((Arc::new(net), attempt))
}

/// Normalized dataset shared by every run of a CSV-backed experiment.
fn load_dataset(cfg: &RunConfig) -> Result<Option<Arc<crate::data::NormalizedData>>> {
    match &cfg.source {
        SourceSpec::Csv {
            path,
            x_column,
            feature_columns,
            max_records,
        } => {
            let raw = load_csv(path, *x_column, feature_columns, *max_records)?;
            let data = normalize_and_partition(&raw.records, cfg.nodes)?;
            Ok(Some(Arc::new(data)))
        }
        _ => Ok(None),
    }
}

fn build_source(
    cfg: &RunConfig,
    dataset: Option<&Arc<crate::data::NormalizedData>>,
    run_seed: u64,
) -> Result<Box<dyn SlotSource>> {
    match &cfg.source {
        SourceSpec::Synthetic | SourceSpec::Tracking => {
            let synth_cfg = SyntheticConfig {
                p: cfg.dim,
                window: cfg.window,
                tracking: matches!(cfg.source, SourceSpec::Tracking),
                ..SyntheticConfig::default()
            };
            Ok(Box::new(SyntheticSource::new(cfg.nodes, run_seed, synth_cfg)))
        }
        SourceSpec::Csv { .. } => {
            let data = dataset.expect("dataset prepared for csv source");
            Ok(Box::new(DatasetSource::new((**data).clone())?))
        }
    }
}

fn step_params(cfg: &RunConfig) -> Result<StepParams> {
    let tau = cfg.resolved_tau()?;
    let mut params = StepParams::new(cfg.lambda, cfg.rho, cfg.gamma, tau);
    params.d_max = cfg.d_max;
    params.combine = cfg.combine;
    Ok(params)
}

/// Runs one Monte Carlo repetition of the configured experiment.
pub fn run_once(
    cfg: &RunConfig,
    net: &Arc<Network>,
    dataset: Option<&Arc<crate::data::NormalizedData>>,
    run_index: usize,
) -> Result<MetricsLog> {
    let run_seed = crate::stats::split_seed(cfg.seed, run_index as u64);
    let mut source = build_source(cfg, dataset, run_seed)?;
    if source.dim() != cfg.dim {
        return Err(Error::config(
            "dimension",
            cfg.dim,
            &format!("data source emits dimension {}", source.dim()),
        ));
    }
    let mut settings = RunSettings::new(step_params(cfg)?, cfg.horizon);
    settings.variance = cfg.variance;
    run(
        cfg.algorithm,
        &settings,
        Arc::clone(net),
        source.as_mut(),
        run_seed,
        cfg.config_hash(),
    )
}

/// Runs all Monte Carlo repetitions, in parallel when `workers != Some(1)`.
pub fn run_all(
    cfg: &RunConfig,
    net: &Arc<Network>,
    workers: Option<usize>,
) -> Result<Vec<MetricsLog>> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    let indices: Vec<usize> = (0..cfg.runs).collect();
    let work = |i: &usize| run_once(cfg, net, dataset.as_ref(), *i);
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
            pool.install(|| indices.par_iter().map(work).collect())
        }
        None => indices.par_iter().map(work).collect(),
    }
}

#[derive(Debug, Serialize)]
struct Manifest {
    config: String,
    git: String,
    wall_time_secs: f64,
    effective_horizon: u64,
    clamp_events: u64,
    max_inbox_age: u64,
    network_edges: usize,
    topology_attempt: u64,
    censor_fraction: f64,
}

/// Everything `simulate` produced, returned for programmatic callers in
/// addition to the files on disk.
pub struct SimulateOutcome {
    pub logs: Vec<MetricsLog>,
    pub net: Arc<Network>,
    pub out_dir: PathBuf,
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Runs the experiment and writes `smrd.csv`, `costs.csv`, `censoring.csv`
/// (plus `tracking.csv` for tracking sources) and a `meta.json` manifest
/// into `out_dir`. Counter columns are averaged over runs. On failure any
/// partially written outputs are removed.
pub fn simulate(cfg: &RunConfig, out_dir: &Path, workers: Option<usize>) -> Result<SimulateOutcome> {
    let started = std::time::Instant::now();
    let (net, attempt) = build_network(cfg)?;
    let logs = run_all(cfg, &net, workers)?;

    std::fs::create_dir_all(out_dir)?;
    let outputs = [
        out_dir.join("smrd.csv"),
        out_dir.join("costs.csv"),
        out_dir.join("censoring.csv"),
        out_dir.join("tracking.csv"),
        out_dir.join("meta.json"),
    ];
    let cleanup = |paths: &[PathBuf]| {
        for p in paths {
            let _ = std::fs::remove_file(p);
        }
    };

    let result = (|| -> Result<()> {
        let runs = logs.len() as f64;
        let j = cfg.nodes as f64;
        let slots: Vec<u64> = logs[0].records.iter().map(|r| r.slot).collect();

        let mut smrd_csv = String::from("slot,smrd,msd\n");
        let mut costs_csv = String::from(
            "slot,cum_multiplications,cum_comm_units,forced_receive_units\n",
        );
        let mut censoring_csv = String::from("slot,cumulative_censor_fraction\n");
        for &t in &slots {
            let s = smrd(&logs, t)?;
            let m = msd(&logs, t)?;
            smrd_csv.push_str(&format!("{t},{s},{m}\n"));

            let mut mults = 0.0;
            let mut comm = 0.0;
            let mut forced = 0.0;
            let mut censored = 0.0;
            for log in &logs {
                let rec = log.record_at(t).expect("aligned records");
                mults += rec.cum_mults as f64;
                comm += (rec.cum_messages * log.dim as u64) as f64;
                forced += (rec.cum_forced * log.dim as u64) as f64;
                censored += rec.cum_censored as f64;
            }
            costs_csv.push_str(&format!(
                "{t},{},{},{}\n",
                mults / runs,
                comm / runs,
                forced / runs
            ));
            censoring_csv.push_str(&format!("{t},{}\n", censored / runs / (j * t as f64)));
        }
        write_atomic(&outputs[0], &smrd_csv)?;
        write_atomic(&outputs[1], &costs_csv)?;
        write_atomic(&outputs[2], &censoring_csv)?;

        if matches!(cfg.source, SourceSpec::Tracking) {
            let mut tracking_csv = String::from("slot,mean_estimate_coord0,truth_coord0\n");
            for (idx, &t) in slots.iter().enumerate() {
                let mut est = 0.0;
                let mut truth = 0.0;
                for log in &logs {
                    est += log.records[idx].mean_estimate[0];
                    truth += log.records[idx].ground_truth[0];
                }
                tracking_csv.push_str(&format!("{t},{},{}\n", est / runs, truth / runs));
            }
            write_atomic(&outputs[3], &tracking_csv)?;
        }

        let manifest = Manifest {
            config: cfg.to_config_text(),
            git: git_describe(),
            wall_time_secs: started.elapsed().as_secs_f64(),
            effective_horizon: logs.iter().map(|l| l.effective_horizon).min().unwrap_or(0),
            clamp_events: logs.iter().map(|l| l.clamp_events).sum(),
            max_inbox_age: logs.iter().map(|l| l.max_inbox_age).max().unwrap_or(0),
            network_edges: net.edge_count(),
            topology_attempt: attempt,
            censor_fraction: logs.iter().map(|l| l.censor_fraction()).sum::<f64>() / runs,
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Usage(format!("manifest serialization: {e}")))?;
        write_atomic(&outputs[4], &json)?;
        Ok(())
    })();

    if let Err(err) = result {
        cleanup(&outputs);
        return Err(err);
    }

    Ok(SimulateOutcome {
        logs,
        net,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Parameters `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    PiStar,
    Rho,
    Lambda,
    DMax,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pi_star" => Ok(SweepParam::PiStar),
            "rho" => Ok(SweepParam::Rho),
            "lambda" => Ok(SweepParam::Lambda),
            "d_max" => Ok(SweepParam::DMax),
            _ => Err(format!(
                "unknown sweep parameter '{s}' (expected pi_star, rho, lambda or d_max)"
            )),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PiStar => "pi_star",
            SweepParam::Rho => "rho",
            SweepParam::Lambda => "lambda",
            SweepParam::DMax => "d_max",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: f64) -> Result<()> {
        match self {
            SweepParam::PiStar => cfg.censor = crate::config::CensorSpec::PiStar(value),
            SweepParam::Rho => cfg.rho = value,
            SweepParam::Lambda => cfg.lambda = value,
            SweepParam::DMax => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::config("d_max", value, "must be a positive integer"));
                }
                cfg.d_max = value as u64;
            }
        }
        cfg.validate()
    }
}

/// One `simulate` per (algorithm, value) pair plus a summary table. Runs
/// that diverge are recorded with a `diverged` flag instead of aborting the
/// sweep; clamping shows up as `clamped`.
pub fn sweep(
    base: &RunConfig,
    param: SweepParam,
    values: &[f64],
    algorithms: &[AlgorithmKind],
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<PathBuf> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".to_string()));
    }
    let algorithms = if algorithms.is_empty() {
        vec![base.algorithm]
    } else {
        algorithms.to_vec()
    };
    std::fs::create_dir_all(out_dir)?;
    let mut summary =
        String::from("algorithm,value,smrd_at_horizon,total_multiplications,total_comm_units,flag\n");
    for &kind in &algorithms {
        for &value in values {
            let mut cfg = base.clone();
            cfg.algorithm = kind;
            if !kind.is_censoring() {
                cfg.censor = crate::config::CensorSpec::None;
            }
            param.apply(&mut cfg, value)?;
            let dir = out_dir.join(format!("{}_{}_{}", kind, param.name(), value));
            match simulate(&cfg, &dir, workers) {
                Ok(outcome) => {
                    let last = outcome.logs[0]
                        .records
                        .last()
                        .map(|r| r.slot)
                        .unwrap_or(0);
                    let (s, mults, comm) = if last == 0 {
                        (f64::NAN, 0.0, 0.0)
                    } else {
                        let runs = outcome.logs.len() as f64;
                        let mults = outcome.logs.iter().map(|l| l.total_mults as f64).sum::<f64>() / runs;
                        let comm = outcome
                            .logs
                            .iter()
                            .map(|l| (l.total_messages * l.dim as u64) as f64)
                            .sum::<f64>()
                            / runs;
                        (smrd(&outcome.logs, last)?, mults, comm)
                    };
                    let clamped = outcome.logs.iter().any(|l| l.clamp_events > 0);
                    let flag = if clamped { "clamped" } else { "ok" };
                    summary.push_str(&format!("{kind},{value},{s},{mults},{comm},{flag}\n"));
                }
                Err(Error::Numeric { node, slot, .. }) => {
                    summary.push_str(&format!(
                        "{kind},{value},nan,nan,nan,diverged(node={node} slot={slot})\n"
                    ));
                }
                Err(other) => return Err(other),
            }
        }
    }
    let path = out_dir.join("sweep_summary.csv");
    write_atomic(&path, &summary)?;
    Ok(path)
}

/// Outcome of running both solver forms on identical streams.
#[derive(Debug, Clone)]
pub struct CompareReport {
    /// Max over nodes of the estimate deviation, per slot.
    pub per_slot: Vec<(u64, f64)>,
    pub max_deviation: f64,
    /// First slot whose deviation exceeded the tolerance, if any.
    pub first_breach: Option<u64>,
    pub tolerance: f64,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.first_breach.is_none()
    }
}

/// Runs the estimate-space and original recursions side by side on one
/// synthetic stream and reports per-slot deviations against a 1e-6 bound.
pub fn compare_forms(cfg: &RunConfig) -> Result<CompareReport> {
    if cfg.algorithm != AlgorithmKind::Drls {
        return Err(Error::config(
            "algorithm",
            cfg.algorithm,
            "compare-forms requires the drls algorithm",
        ));
    }
    if !matches!(cfg.source, SourceSpec::Synthetic | SourceSpec::Tracking) {
        return Err(Error::config(
            "source",
            "csv",
            "compare-forms runs on synthetic sources",
        ));
    }
    let tolerance = 1e-6;
    let (net, _) = build_network(cfg)?;
    let params = step_params(cfg)?;
    let noise = |_: usize| crate::node::NoiseScale::Known(0.0);
    let mut new_form = crate::algorithms::Simulation::new(
        AlgorithmKind::Drls,
        Arc::clone(&net),
        cfg.dim,
        params.clone(),
        (0..cfg.nodes).map(noise).collect(),
    );
    let mut original = crate::algorithms::Simulation::new(
        AlgorithmKind::DrlsOriginal,
        Arc::clone(&net),
        cfg.dim,
        params,
        (0..cfg.nodes).map(noise).collect(),
    );
    let run_seed = crate::stats::split_seed(cfg.seed, 0);
    let mut source = build_source(cfg, None, run_seed)?;

    let mut per_slot = Vec::new();
    let mut max_deviation = 0.0f64;
    let mut first_breach = None;
    for t in 1..=cfg.horizon {
        let data = match source.next_slot(t)? {
            Some(d) => d,
            None => break,
        };
        new_form.step(&data)?;
        original.step(&data)?;
        let mut dev = 0.0f64;
        for (a, b) in new_form.states().iter().zip(original.states()) {
            dev = dev.max((&a.s - &b.s).abs().max());
        }
        per_slot.push((t, dev));
        max_deviation = max_deviation.max(dev);
        if dev > tolerance && first_breach.is_none() {
            first_breach = Some(t);
        }
    }
    Ok(CompareReport {
        per_slot,
        max_deviation,
        first_breach,
        tolerance,
    })
}

/// Formats tau for a target censoring ratio to six decimals, the CLI
/// contract of the `calibrate` subcommand.
pub fn calibrate_text(pi_star: f64) -> Result<String> {
    Ok(format!("{:.6}", crate::stats::calibrate_tau(pi_star)?))
}

/// Dataset statistics the `ingest` subcommand reports.
#[derive(Debug, Serialize)]
pub struct IngestReport {
    pub raw_records: usize,
    pub retained_records: usize,
    pub partitioned_records: usize,
    pub records_per_node: usize,
    pub feature_count: usize,
    /// Max |mean| over normalized columns (target first).
    pub max_abs_mean: f64,
    /// Max |std - 1| over normalized columns.
    pub max_std_error: f64,
    pub batch_solution: Vec<f64>,
}

/// Loads, normalizes and partitions a CSV dataset, verifying the z-score
/// invariant and solving the batch least-squares ground truth.
pub fn ingest(
    path: &Path,
    x_column: usize,
    feature_columns: &[usize],
    max_records: Option<usize>,
    nodes: usize,
) -> Result<IngestReport> {
    let raw = load_csv(path, x_column, feature_columns, max_records)?;
    let retained = raw.records.len();
    let data = normalize_and_partition(&raw.records, nodes)?;
    let n = data.records.len() as f64;
    let p = feature_columns.len();

    let mut max_abs_mean = 0.0f64;
    let mut max_std_error = 0.0f64;
    for c in 0..=p {
        let column: Vec<f64> = data
            .records
            .iter()
            .map(|(x, h)| if c == 0 { *x } else { h[c - 1] })
            .collect();
        let mean = column.iter().sum::<f64>() / n;
        let sd = (column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        max_abs_mean = max_abs_mean.max(mean.abs());
        max_std_error = max_std_error.max((sd - 1.0).abs());
    }

    let solution = crate::data::batch_least_squares(&data.records)?;
    Ok(IngestReport {
        raw_records: raw.raw_count,
        retained_records: retained,
        partitioned_records: data.records.len(),
        records_per_node: data.shard_len,
        feature_count: p,
        max_abs_mean,
        max_std_error,
        batch_solution: solution.iter().cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small_cfg() -> RunConfig {
        parse_config(
            "\
algorithm = cdrls1
nodes = 6
dimension = 4
lambda = 1
rho = 0.01
gamma = 30
pi_star = 0.6
horizon = 80
runs = 3
seed = 5
topology = geometric
range = 0.5
topology_seed = 2
",
        )
        .unwrap()
    }

    #[test]
    fn simulate_writes_expected_files() {
        let dir = std::env::temp_dir().join(format!("drls_sim_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let cfg = small_cfg();
        let outcome = simulate(&cfg, &dir, Some(2)).unwrap();
        assert_eq!(outcome.logs.len(), 3);
        for name in ["smrd.csv", "costs.csv", "censoring.csv", "meta.json"] {
            assert!(dir.join(name).exists(), "{name} missing");
        }
        assert!(!dir.join("tracking.csv").exists());
        let smrd_text = std::fs::read_to_string(dir.join("smrd.csv")).unwrap();
        let mut lines = smrd_text.lines();
        assert_eq!(lines.next().unwrap(), "slot,smrd,msd");
        assert_eq!(smrd_text.lines().count(), 81);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn simulate_is_byte_deterministic() {
        let base = std::env::temp_dir().join(format!("drls_det_{}", std::process::id()));
        let d1 = base.join("a");
        let d2 = base.join("b");
        let cfg = small_cfg();
        simulate(&cfg, &d1, Some(1)).unwrap();
        simulate(&cfg, &d2, Some(3)).unwrap();
        for name in ["smrd.csv", "costs.csv", "censoring.csv"] {
            let a = std::fs::read(d1.join(name)).unwrap();
            let b = std::fs::read(d2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs across worker counts");
        }
        let _ = std::fs::remove_dir_all(&base);
    }

    #[test]
    fn manifest_config_echo_reproduces_run() {
        let base = std::env::temp_dir().join(format!("drls_echo_{}", std::process::id()));
        let d1 = base.join("a");
        let d2 = base.join("b");
        let cfg = small_cfg();
        simulate(&cfg, &d1, Some(2)).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(d1.join("meta.json")).unwrap()).unwrap();
        let echoed = parse_config(manifest["config"].as_str().unwrap()).unwrap();
        assert_eq!(echoed, cfg);
        simulate(&echoed, &d2, Some(1)).unwrap();
        for name in ["smrd.csv", "costs.csv", "censoring.csv"] {
            let a = std::fs::read(d1.join(name)).unwrap();
            let b = std::fs::read(d2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs after config echo round-trip");
        }
        let _ = std::fs::remove_dir_all(&base);
    }

    #[test]
    fn zero_horizon_yields_headers_only() {
        let dir = std::env::temp_dir().join(format!("drls_zero_{}", std::process::id()));
        let mut cfg = small_cfg();
        cfg.horizon = 0;
        cfg.runs = 1;
        simulate(&cfg, &dir, Some(1)).unwrap();
        let text = std::fs::read_to_string(dir.join("smrd.csv")).unwrap();
        assert_eq!(text, "slot,smrd,msd\n");
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn sweep_writes_summary_and_flags_divergence() {
        let dir = std::env::temp_dir().join(format!("drls_sweep_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let mut cfg = small_cfg();
        cfg.horizon = 400;
        cfg.runs = 2;
        // The second rho is far beyond the stable region and must diverge.
        let summary = sweep(
            &cfg,
            SweepParam::Rho,
            &[0.01, 50.0],
            &[AlgorithmKind::Cdrls1],
            &dir,
            Some(2),
        )
        .unwrap();
        let text = std::fs::read_to_string(summary).unwrap();
        assert!(text.starts_with("algorithm,value,"));
        assert!(text.contains("cdrls1,0.01"));
        let bad_row = text
            .lines()
            .find(|l| l.starts_with("cdrls1,50"))
            .expect("row for rho = 50");
        assert!(bad_row.contains("diverged"), "{bad_row}");
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn sweep_rejects_empty_values() {
        let cfg = small_cfg();
        let dir = std::env::temp_dir().join("drls_sweep_empty");
        assert!(sweep(&cfg, SweepParam::PiStar, &[], &[], &dir, Some(1)).is_err());
    }

    #[test]
    fn compare_forms_passes_on_default_convention() {
        let mut cfg = small_cfg();
        cfg.algorithm = AlgorithmKind::Drls;
        cfg.censor = crate::config::CensorSpec::None;
        cfg.horizon = 100;
        let report = compare_forms(&cfg).unwrap();
        assert!(report.passed(), "deviation {}", report.max_deviation);
        assert!(report.max_deviation < 1e-9);
    }

    #[test]
    fn csv_numbers_round_trip_through_parse_and_format() {
        let dir = std::env::temp_dir().join(format!("drls_round_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        simulate(&small_cfg(), &dir, Some(1)).unwrap();
        for name in ["smrd.csv", "costs.csv", "censoring.csv"] {
            let text = std::fs::read_to_string(dir.join(name)).unwrap();
            for line in text.lines().skip(1) {
                let rebuilt: Vec<String> = line
                    .split(',')
                    .map(|cell| cell.parse::<f64>().unwrap().to_string())
                    .collect();
                assert_eq!(line, rebuilt.join(","), "{name}");
            }
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn edge_list_topology_through_the_harness() {
        let dir = std::env::temp_dir().join(format!("drls_edges_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ring.edges");
        let mut text = String::from("# five-node ring\n5\n");
        for i in 0..5 {
            text.push_str(&format!("{i} {}\n", (i + 1) % 5));
        }
        std::fs::write(&path, text).unwrap();

        let mut cfg = small_cfg();
        cfg.nodes = 5;
        cfg.topology = crate::config::TopologySpec::EdgeList { path: path.clone() };
        let (net, _) = build_network(&cfg).unwrap();
        assert_eq!(net.edge_count(), 5);
        assert!(net.is_connected());
        let logs = run_all(&cfg, &net, Some(1)).unwrap();
        assert_eq!(logs.len(), cfg.runs);

        cfg.nodes = 7; // mismatched declared node count is a config error
        assert!(build_network(&cfg).is_err());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn calibrate_text_format() {
        assert_eq!(calibrate_text(0.0).unwrap(), "0.000000");
        assert_eq!(calibrate_text(0.6).unwrap(), "0.841621");
        let big = calibrate_text(0.9999).unwrap();
        let v: f64 = big.parse().unwrap();
        assert!(v.is_finite() && v > 3.0);
    }
}
