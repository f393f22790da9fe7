//! `drls` — experiment runner for decentralized recursive least-squares
//! with data-adaptive censoring.
//!
//! Exit codes: 0 on success, 1 for configuration/validation problems, 2 for
//! runtime or numeric failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drls_core::error::Error;
use drls_core::harness::{self, SweepParam};
use drls_core::{load_config, AlgorithmKind, RunConfig};

/// Environment variable that overrides the config's master seed (useful
/// for CI reruns without editing configs).
const SEED_ENV: &str = "DRLS_SEED";

#[derive(Parser)]
#[command(
    name = "drls",
    about = "Decentralized recursive least-squares with data-adaptive censoring",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured Monte Carlo experiment and write CSV tables.
    Simulate {
        config: PathBuf,
        /// Output directory for smrd.csv, costs.csv, censoring.csv, meta.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for Monte Carlo runs (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run one simulate per parameter value (optionally per algorithm) and
    /// summarize into sweep_summary.csv.
    Sweep {
        config: PathBuf,
        /// Parameter to vary: pi_star, rho, lambda or d_max.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Comma-separated algorithms to cross with the values
        /// (default: the config's algorithm).
        #[arg(long, value_delimiter = ',')]
        algorithms: Vec<String>,
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run both solver forms on identical streams and compare trajectories.
    #[command(name = "compare-forms")]
    CompareForms { config: PathBuf },
    /// Print the censoring threshold for a target censoring ratio.
    Calibrate { pi_star: f64 },
    /// Validate a CSV dataset and report its statistics.
    Ingest {
        csv: PathBuf,
        /// Column index of the target variable.
        #[arg(long = "x-col", default_value_t = 0)]
        x_col: usize,
        /// Comma-separated feature column indices.
        #[arg(long = "feature-cols", value_delimiter = ',', required = true)]
        feature_cols: Vec<usize>,
        /// Keep only the first N data rows.
        #[arg(long = "max-records")]
        max_records: Option<usize>,
        /// Node count used for the even partition.
        #[arg(long, default_value_t = 15)]
        nodes: usize,
    },
}

fn load_with_seed_override(path: &Path) -> Result<RunConfig, Error> {
    let mut cfg = load_config(path)?;
    if let Ok(value) = std::env::var(SEED_ENV) {
        cfg.seed = value
            .parse()
            .map_err(|_| Error::config(SEED_ENV, &value, "must be a 64-bit unsigned integer"))?;
    }
    Ok(cfg)
}

fn parse_algorithms(names: &[String]) -> Result<Vec<AlgorithmKind>, Error> {
    names
        .iter()
        .map(|n| n.parse::<AlgorithmKind>().map_err(|e| Error::config("algorithms", n, &e)))
        .collect()
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate { config, out, workers } => {
            let cfg = load_with_seed_override(&config)?;
            let outcome = harness::simulate(&cfg, &out, workers)?;
            let runs = outcome.logs.len();
            let effective = outcome.logs.iter().map(|l| l.effective_horizon).min().unwrap_or(0);
            println!(
                "simulated {} x {runs} runs over {} nodes ({} edges), effective horizon {effective}",
                cfg.algorithm,
                outcome.net.node_count(),
                outcome.net.edge_count()
            );
            if cfg.algorithm.is_censoring() {
                let frac = outcome.logs.iter().map(|l| l.censor_fraction()).sum::<f64>() / runs as f64;
                println!("cumulative censor fraction: {frac:.4}");
            }
            println!("outputs in {}", outcome.out_dir.display());
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
            algorithms,
            out,
            workers,
        } => {
            let cfg = load_with_seed_override(&config)?;
            let param: SweepParam = param
                .parse()
                .map_err(|e: String| Error::config("param", "", &e))?;
            let kinds = parse_algorithms(&algorithms)?;
            let summary = harness::sweep(&cfg, param, &values, &kinds, &out, workers)?;
            println!("sweep summary in {}", summary.display());
            Ok(())
        }
        Command::CompareForms { config } => {
            let cfg = load_with_seed_override(&config)?;
            let report = harness::compare_forms(&cfg)?;
            println!("slot,max_deviation");
            for (slot, dev) in &report.per_slot {
                println!("{slot},{dev}");
            }
            if let Some(slot) = report.first_breach {
                eprintln!(
                    "FAIL: deviation exceeded {} at slot {slot} (max {})",
                    report.tolerance, report.max_deviation
                );
                return Err(Error::Numeric {
                    node: 0,
                    slot,
                    message: format!("solver forms deviate beyond {}", report.tolerance),
                });
            }
            println!("PASS: max deviation {}", report.max_deviation);
            Ok(())
        }
        Command::Calibrate { pi_star } => {
            println!("{}", harness::calibrate_text(pi_star)?);
            Ok(())
        }
        Command::Ingest {
            csv,
            x_col,
            feature_cols,
            max_records,
            nodes,
        } => {
            let report = harness::ingest(&csv, x_col, &feature_cols, max_records, nodes)?;
            println!("raw records: {}", report.raw_records);
            println!("retained records: {}", report.retained_records);
            println!("partitioned records: {}", report.partitioned_records);
            println!("records per node: {}", report.records_per_node);
            println!("features: {}", report.feature_count);
            println!("max |column mean| after normalization: {:.3e}", report.max_abs_mean);
            println!("max |column std - 1| after normalization: {:.3e}", report.max_std_error);
            let solution: Vec<String> = report.batch_solution.iter().map(|v| format!("{v:.6}")).collect();
            println!("batch least-squares solution: [{}]", solution.join(", "));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
