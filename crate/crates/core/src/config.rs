//! Run configuration: a flat `key = value` text format with one optional
//! section describing the data source, strict validation, and a canonical
//! serialization that reproduces the run (the manifest embeds it).
//!
//! Unknown keys are rejected so typos cannot silently fall back to defaults.

use std::path::{Path, PathBuf};

use crate::algorithms::{AlgorithmKind, CombineWeights, VarianceMode};
use crate::data::WindowMode;
use crate::error::{Error, Result};

/// How the communication graph is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Geometric { range: f64, seed: u64 },
    EdgeList { path: PathBuf },
}

/// Censoring threshold specification: a target ratio to calibrate from, or
/// an explicit threshold. Non-censoring algorithms take `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensorSpec {
    None,
    PiStar(f64),
    Tau(f64),
}

/// Where observations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Synthetic,
    Tracking,
    Csv {
        path: PathBuf,
        x_column: usize,
        feature_columns: Vec<usize>,
        max_records: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: AlgorithmKind,
    pub nodes: usize,
    pub dim: usize,
    pub lambda: f64,
    pub rho: f64,
    pub gamma: f64,
    pub censor: CensorSpec,
    pub variance: VarianceMode,
    pub d_max: u64,
    pub horizon: u64,
    pub runs: usize,
    pub seed: u64,
    pub topology: TopologySpec,
    pub require_connected: bool,
    pub window: WindowMode,
    pub combine: CombineWeights,
    pub source: SourceSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: AlgorithmKind::Drls,
            nodes: 15,
            dim: 4,
            lambda: 1.0,
            rho: 0.01,
            gamma: 30.0,
            censor: CensorSpec::None,
            variance: VarianceMode::Online,
            d_max: 20,
            horizon: 2000,
            runs: 20,
            seed: 1,
            topology: TopologySpec::Geometric { range: 0.3, seed: 7 },
            require_connected: true,
            window: WindowMode::Tiled,
            combine: CombineWeights::Uniform,
            source: SourceSpec::Synthetic,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn bad(field: &str, value: impl std::fmt::Display, constraint: &str) -> Error {
    Error::config(field, value, constraint)
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str, constraint: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| bad(field, value, constraint))
}

/// Parses the documented `key = value` schema. `#` starts a comment; a
/// `[synthetic]`, `[tracking]` or `[csv]` section selects the data source
/// (synthetic by default) and scopes its keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut algorithm: Option<AlgorithmKind> = None;
    let mut pi_star: Option<f64> = None;
    let mut tau: Option<f64> = None;
    let mut section: Option<String> = None;
    let mut csv_path: Option<PathBuf> = None;
    let mut csv_x: Option<usize> = None;
    let mut csv_features: Option<Vec<usize>> = None;
    let mut csv_max: Option<usize> = None;
    let mut topology_kind = "geometric".to_string();
    let mut geo_range = 0.3f64;
    let mut geo_seed = 7u64;
    let mut edge_file: Option<PathBuf> = None;

    for raw in text.lines() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            let name = line[1..line.len() - 1].trim().to_string();
            match name.as_str() {
                "synthetic" | "tracking" | "csv" => section = Some(name),
                other => {
                    return Err(bad(
                        "section",
                        other,
                        "must be one of [synthetic], [tracking], [csv]",
                    ))
                }
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("line", line, "expected 'key = value'"))?;
        let key = key.trim();
        let value = value.trim();

        if let Some(sec) = &section {
            match (sec.as_str(), key) {
                ("csv", "path") => csv_path = Some(PathBuf::from(value)),
                ("csv", "x_column") => {
                    csv_x = Some(parse_num(key, value, "must be a column index")?)
                }
                ("csv", "feature_columns") => {
                    let cols: Result<Vec<usize>> = value
                        .split(',')
                        .map(|v| parse_num("feature_columns", v.trim(), "must be column indices"))
                        .collect();
                    csv_features = Some(cols?);
                }
                ("csv", "max_records") => {
                    csv_max = Some(parse_num(key, value, "must be a record count")?)
                }
                (sec, key) => {
                    return Err(bad(
                        key,
                        value,
                        &format!("unknown key in [{sec}] section"),
                    ))
                }
            }
            continue;
        }

        match key {
            "algorithm" => {
                algorithm = Some(
                    value
                        .parse()
                        .map_err(|e: String| bad("algorithm", value, &e))?,
                )
            }
            "nodes" => {
                cfg.nodes = parse_num(key, value, "must be a positive integer")?;
            }
            "dimension" => {
                cfg.dim = parse_num(key, value, "must be a positive integer")?;
            }
            "lambda" => cfg.lambda = parse_num(key, value, "must be a number in (0,1]")?,
            "rho" => cfg.rho = parse_num(key, value, "must be a nonnegative number")?,
            "gamma" => cfg.gamma = parse_num(key, value, "must be a positive number")?,
            "pi_star" => pi_star = Some(parse_num(key, value, "must be a number in [0,1)")?),
            "tau" => tau = Some(parse_num(key, value, "must be a nonnegative number")?),
            "variance" => {
                cfg.variance = match value {
                    "known" => VarianceMode::Known,
                    "online" => VarianceMode::Online,
                    _ => return Err(bad(key, value, "must be 'known' or 'online'")),
                }
            }
            "d_max" => cfg.d_max = parse_num(key, value, "must be a positive integer")?,
            "horizon" => cfg.horizon = parse_num(key, value, "must be a nonnegative integer")?,
            "runs" => cfg.runs = parse_num(key, value, "must be a positive integer")?,
            "seed" => cfg.seed = parse_num(key, value, "must be a 64-bit unsigned integer")?,
            "topology" => topology_kind = value.to_string(),
            "range" => geo_range = parse_num(key, value, "must be a number in (0, sqrt(2)]")?,
            "topology_seed" => {
                geo_seed = parse_num(key, value, "must be a 64-bit unsigned integer")?
            }
            "edge_file" => edge_file = Some(PathBuf::from(value)),
            "require_connected" => {
                cfg.require_connected = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad(key, value, "must be 'true' or 'false'")),
                }
            }
            "window" => {
                cfg.window = match value {
                    "tiled" => WindowMode::Tiled,
                    "sliding" => WindowMode::Sliding,
                    _ => return Err(bad(key, value, "must be 'tiled' or 'sliding'")),
                }
            }
            "combine" => {
                cfg.combine = match value {
                    "uniform" => CombineWeights::Uniform,
                    "metropolis" => CombineWeights::Metropolis,
                    _ => return Err(bad(key, value, "must be 'uniform' or 'metropolis'")),
                }
            }
            _ => return Err(bad(key, value, "unknown key")),
        }
    }

    cfg.algorithm = algorithm.ok_or_else(|| bad("algorithm", "", "is required"))?;
    cfg.censor = match (pi_star, tau) {
        (None, None) => CensorSpec::None,
        (Some(p), None) => CensorSpec::PiStar(p),
        (None, Some(t)) => CensorSpec::Tau(t),
        (Some(_), Some(_)) => {
            return Err(bad(
                "pi_star",
                "both",
                "exactly one of pi_star or tau may be given",
            ))
        }
    };
    cfg.topology = match topology_kind.as_str() {
        "geometric" => TopologySpec::Geometric {
            range: geo_range,
            seed: geo_seed,
        },
        "edge_list" => TopologySpec::EdgeList {
            path: edge_file.ok_or_else(|| bad("edge_file", "", "required for edge_list topology"))?,
        },
        other => return Err(bad("topology", other, "must be 'geometric' or 'edge_list'")),
    };
    cfg.source = match section.as_deref() {
        None | Some("synthetic") => SourceSpec::Synthetic,
        Some("tracking") => SourceSpec::Tracking,
        Some("csv") => SourceSpec::Csv {
            path: csv_path.ok_or_else(|| bad("path", "", "required in [csv] section"))?,
            x_column: csv_x.unwrap_or(0),
            feature_columns: csv_features
                .ok_or_else(|| bad("feature_columns", "", "required in [csv] section"))?,
            max_records: csv_max,
        },
        _ => unreachable!(),
    };

    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(bad("nodes", self.nodes, "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(bad("dimension", self.dim, "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(bad("lambda", self.lambda, "lambda must lie in (0,1]"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(bad("rho", self.rho, "must be finite and nonnegative"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(bad("gamma", self.gamma, "must be finite and positive"));
        }
        match self.censor {
            CensorSpec::PiStar(p) if !(0.0..1.0).contains(&p) => {
                return Err(bad("pi_star", p, "must lie in [0, 1)"));
            }
            CensorSpec::Tau(t) if !(t >= 0.0 && t.is_finite()) => {
                return Err(bad("tau", t, "must be finite and nonnegative"));
            }
            _ => {}
        }
        if self.algorithm.is_censoring() {
            if matches!(self.censor, CensorSpec::None) {
                return Err(bad(
                    "pi_star",
                    "missing",
                    "censoring algorithms need pi_star or tau",
                ));
            }
        } else if !matches!(self.censor, CensorSpec::None) {
            return Err(bad(
                "pi_star",
                "present",
                "only censoring algorithms take a censoring spec",
            ));
        }
        if self.d_max == 0 {
            return Err(bad("d_max", self.d_max, "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(bad("runs", self.runs, "must be at least 1"));
        }
        if let TopologySpec::Geometric { range, .. } = self.topology {
            if !(range > 0.0 && range <= std::f64::consts::SQRT_2) {
                return Err(bad("range", range, "must lie in (0, sqrt(2)]"));
            }
        }
        match &self.source {
            SourceSpec::Csv {
                feature_columns, ..
            } => {
                if feature_columns.is_empty() {
                    return Err(bad("feature_columns", "empty", "need at least one column"));
                }
                if self.variance == VarianceMode::Known {
                    return Err(bad(
                        "variance",
                        "known",
                        "csv sources have no known noise scale; use 'online'",
                    ));
                }
            }
            SourceSpec::Synthetic | SourceSpec::Tracking => {}
        }
        Ok(())
    }

    /// The censoring threshold this run uses (0 for non-censoring kinds).
    pub fn resolved_tau(&self) -> Result<f64> {
        match self.censor {
            CensorSpec::None => Ok(0.0),
            CensorSpec::Tau(t) => Ok(t),
            CensorSpec::PiStar(p) => crate::stats::calibrate_tau(p),
        }
    }

    /// Canonical text form; `parse_config` of the output reproduces `self`.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("algorithm = {}\n", self.algorithm));
        out.push_str(&format!("nodes = {}\n", self.nodes));
        out.push_str(&format!("dimension = {}\n", self.dim));
        out.push_str(&format!("lambda = {}\n", self.lambda));
        out.push_str(&format!("rho = {}\n", self.rho));
        out.push_str(&format!("gamma = {}\n", self.gamma));
        match self.censor {
            CensorSpec::None => {}
            CensorSpec::PiStar(p) => out.push_str(&format!("pi_star = {p}\n")),
            CensorSpec::Tau(t) => out.push_str(&format!("tau = {t}\n")),
        }
        out.push_str(&format!(
            "variance = {}\n",
            match self.variance {
                VarianceMode::Known => "known",
                VarianceMode::Online => "online",
            }
        ));
        out.push_str(&format!("d_max = {}\n", self.d_max));
        out.push_str(&format!("horizon = {}\n", self.horizon));
        out.push_str(&format!("runs = {}\n", self.runs));
        out.push_str(&format!("seed = {}\n", self.seed));
        match &self.topology {
            TopologySpec::Geometric { range, seed } => {
                out.push_str("topology = geometric\n");
                out.push_str(&format!("range = {range}\n"));
                out.push_str(&format!("topology_seed = {seed}\n"));
            }
            TopologySpec::EdgeList { path } => {
                out.push_str("topology = edge_list\n");
                out.push_str(&format!("edge_file = {}\n", path.display()));
            }
        }
        out.push_str(&format!("require_connected = {}\n", self.require_connected));
        out.push_str(&format!(
            "window = {}\n",
            match self.window {
                WindowMode::Tiled => "tiled",
                WindowMode::Sliding => "sliding",
            }
        ));
        out.push_str(&format!(
            "combine = {}\n",
            match self.combine {
                CombineWeights::Uniform => "uniform",
                CombineWeights::Metropolis => "metropolis",
            }
        ));
        match &self.source {
            SourceSpec::Synthetic => out.push_str("\n[synthetic]\n"),
            SourceSpec::Tracking => out.push_str("\n[tracking]\n"),
            SourceSpec::Csv {
                path,
                x_column,
                feature_columns,
                max_records,
            } => {
                out.push_str("\n[csv]\n");
                out.push_str(&format!("path = {}\n", path.display()));
                out.push_str(&format!("x_column = {x_column}\n"));
                let cols: Vec<String> = feature_columns.iter().map(|c| c.to_string()).collect();
                out.push_str(&format!("feature_columns = {}\n", cols.join(",")));
                if let Some(max) = max_records {
                    out.push_str(&format!("max_records = {max}\n"));
                }
            }
        }
        out
    }

    /// FNV-1a hash of the canonical text; identifies a configuration in run
    /// metadata.
    pub fn config_hash(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for byte in self.to_config_text().bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100_0000_01b3);
        }
        hash
    }
}
