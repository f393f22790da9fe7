//! Per-slot observation sources: the synthetic autoregressive generator
//! (static and tracking ground truths), CSV ingestion of real regression
//! data, z-score normalization, even partitioning across nodes, and the
//! batch least-squares ground truth.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::node::StepDatum;
use crate::stats::{stream_id, RngStream, StreamPurpose};

/// Slot at which the tracking ground truth freezes (`ceil(1000/3)`).
pub const TRACKING_FREEZE_SLOT: u64 = 334;

/// The unknown vector the network estimates, possibly time-varying.
#[derive(Debug, Clone)]
pub enum GroundTruth {
    Static(DVector<f64>),
    /// Entry `i` is `magnitudes[i] * sin(3 pi t / 500)` until the freeze
    /// slot and constant afterwards (continuous at the freeze point).
    Tracking { magnitudes: DVector<f64> },
}

impl GroundTruth {
    pub fn at(&self, t: u64) -> DVector<f64> {
        match self {
            GroundTruth::Static(s0) => s0.clone(),
            GroundTruth::Tracking { magnitudes } => {
                let clamped = t.min(TRACKING_FREEZE_SLOT) as f64;
                let phase = (3.0 * std::f64::consts::PI * clamped / 500.0).sin();
                magnitudes * phase
            }
        }
    }
}

/// How regressor windows consume the underlying AR chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Advance the chain `p` samples per slot; successive windows share
    /// nothing (the default).
    Tiled,
    /// Advance one sample per slot; successive windows overlap in `p - 1`
    /// samples.
    Sliding,
}

/// A source that yields one `(x_j(t), h_j(t))` pair per node per slot.
pub trait SlotSource {
    fn dim(&self) -> usize;
    fn node_count(&self) -> usize;
    /// Emits slot `t` for all nodes, or `None` once the source is exhausted.
    /// Slots must be requested in increasing order starting at 1.
    fn next_slot(&mut self, t: u64) -> Result<Option<Vec<StepDatum>>>;
    fn ground_truth(&self, t: u64) -> DVector<f64>;
    /// True observation-noise standard deviation, when the source knows it.
    fn true_sigma(&self, node: usize) -> Option<f64>;
}

/// One step of the auxiliary AR recursion:
/// `r(t) = (1 - q) * beta * r(t-1) + sqrt(q) * omega(t)`.
pub fn ar_step(r_prev: f64, beta: f64, q: f64, omega: f64) -> f64 {
    (1.0 - q) * beta * r_prev + q.sqrt() * omega
}

struct NodeGen {
    beta: f64,
    sigma_omega: f64,
    sigma: f64,
    r: f64,
    window: Vec<f64>,
    drive: RngStream,
    noise: RngStream,
}

impl NodeGen {
    fn drive_sample(&mut self) -> f64 {
        let bound = 3f64.sqrt() * self.sigma_omega;
        self.drive.uniform(-bound, bound)
    }

    fn advance(&mut self, q: f64) {
        let omega = self.drive_sample();
        self.r = ar_step(self.r, self.beta, q, omega);
    }
}

/// Synthetic observation source driven by per-node AR chains.
pub struct SyntheticSource {
    p: usize,
    q: f64,
    window: WindowMode,
    ground_truth: GroundTruth,
    nodes: Vec<NodeGen>,
    expected_slot: u64,
}

/// Paper-style defaults: `p = 4`, `q = 0.5`, `beta_j ~ U(0,1)`,
/// `sigma_omega_j^2 ~ U(0,2)`, `sigma_j^2 = 1e-3 * U(0,1)`, all-ones
/// ground truth, 50-step AR burn-in.
pub fn synthetic_default(node_count: usize, seed: u64) -> SyntheticSource {
    SyntheticSource::new(node_count, seed, SyntheticConfig::default())
}

/// Knobs for the synthetic generator; `Default` matches the experiment
/// setup the library reproduces.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub p: usize,
    pub q: f64,
    pub window: WindowMode,
    pub tracking: bool,
    /// Scale of the observation-noise variance: `sigma_j^2 = scale * U(0,1)`.
    pub noise_scale: f64,
    pub burn_in: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            p: 4,
            q: 0.5,
            window: WindowMode::Tiled,
            tracking: false,
            noise_scale: 1e-3,
            burn_in: 50,
        }
    }
}

impl SyntheticSource {
    pub fn new(node_count: usize, seed: u64, cfg: SyntheticConfig) -> SyntheticSource {
        let mut nodes = Vec::with_capacity(node_count);
        for j in 0..node_count {
            let mut params = RngStream::new(seed, stream_id(StreamPurpose::NodeParams, j));
            let beta = params.uniform(0.0, 1.0);
            let sigma_omega_sq = params.uniform(0.0, 2.0);
            let alpha = params.uniform(0.0, 1.0);
            let mut init = RngStream::new(seed, stream_id(StreamPurpose::ArInit, j));
            let r0 = init.uniform(-1.0, 1.0);
            let mut gen = NodeGen {
                beta,
                sigma_omega: sigma_omega_sq.sqrt(),
                sigma: (cfg.noise_scale * alpha).sqrt(),
                r: r0,
                window: Vec::with_capacity(cfg.p),
                drive: RngStream::new(seed, stream_id(StreamPurpose::Drive, j)),
                noise: RngStream::new(seed, stream_id(StreamPurpose::Noise, j)),
            };
            for _ in 0..cfg.burn_in {
                gen.advance(cfg.q);
            }
            nodes.push(gen);
        }
        let ground_truth = if cfg.tracking {
            let mut stream = RngStream::new(seed, stream_id(StreamPurpose::Tracking, 0));
            let magnitudes = DVector::from_fn(cfg.p, |_, _| stream.uniform(0.0, 1.0));
            GroundTruth::Tracking { magnitudes }
        } else {
            GroundTruth::Static(DVector::from_element(cfg.p, 1.0))
        };
        SyntheticSource {
            p: cfg.p,
            q: cfg.q,
            window: cfg.window,
            ground_truth,
            nodes,
            expected_slot: 1,
        }
    }

    /// Forces every node's observation noise to the given standard
    /// deviation (test hook; `0.0` gives the noiseless linear model).
    pub fn override_noise_sigma(&mut self, sigma: f64) {
        for gen in &mut self.nodes {
            gen.sigma = sigma;
        }
    }

    /// Forces every node's driving-noise variance (test hook).
    pub fn override_sigma_omega_sq(&mut self, sigma_omega_sq: f64) {
        for gen in &mut self.nodes {
            gen.sigma_omega = sigma_omega_sq.sqrt();
        }
    }
}

impl SlotSource for SyntheticSource {
    fn dim(&self) -> usize {
        self.p
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn next_slot(&mut self, t: u64) -> Result<Option<Vec<StepDatum>>> {
        if t != self.expected_slot {
            return Err(Error::Usage(format!(
                "slots must be requested in order; expected {}, got {t}",
                self.expected_slot
            )));
        }
        self.expected_slot += 1;
        let s0 = self.ground_truth.at(t);
        let p = self.p;
        let q = self.q;
        let mut out = Vec::with_capacity(self.nodes.len());
        for gen in &mut self.nodes {
            match self.window {
                WindowMode::Tiled => {
                    gen.window.clear();
                    for _ in 0..p {
                        gen.advance(q);
                        gen.window.push(gen.r);
                    }
                }
                WindowMode::Sliding => {
                    if gen.window.is_empty() {
                        for _ in 0..p {
                            gen.advance(q);
                            gen.window.push(gen.r);
                        }
                    } else {
                        gen.advance(q);
                        gen.window.remove(0);
                        gen.window.push(gen.r);
                    }
                }
            }
            // h^T(t) = [r(t+p-1); ...; r(t)], newest sample first.
            let h = DVector::from_fn(p, |i, _| gen.window[p - 1 - i]);
            let eps = gen.noise.gaussian(0.0, gen.sigma);
            let x = h.dot(&s0) + eps;
            out.push(StepDatum { x, h, slot: t });
        }
        Ok(Some(out))
    }

    fn ground_truth(&self, t: u64) -> DVector<f64> {
        self.ground_truth.at(t)
    }

    fn true_sigma(&self, node: usize) -> Option<f64> {
        Some(self.nodes[node].sigma)
    }
}

// --- CSV ingestion ----------------------------------------------------------

/// Raw records read from a CSV file, before normalization.
#[derive(Debug, Clone)]
pub struct RawRecords {
    /// `(x, features)` pairs in file order, truncated to `max_records`.
    pub records: Vec<(f64, Vec<f64>)>,
    /// Number of data rows present in the file before truncation.
    pub raw_count: usize,
}

/// Reads `(x, h)` records from a comma-separated numeric file. A single
/// non-numeric first row is treated as a header. Rows are 1-based file
/// lines in error messages.
pub fn load_csv(
    path: &Path,
    x_column: usize,
    feature_columns: &[usize],
    max_records: Option<usize>,
) -> Result<RawRecords> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, x_column, feature_columns, max_records)
}

/// See [`load_csv`]; split out so tests can feed text directly.
pub fn parse_csv(
    text: &str,
    x_column: usize,
    feature_columns: &[usize],
    max_records: Option<usize>,
) -> Result<RawRecords> {
    if feature_columns.is_empty() {
        return Err(Error::Usage("feature column list is empty".to_string()));
    }
    let needed = feature_columns.iter().chain(std::iter::once(&x_column)).max().copied().unwrap();
    let mut records = Vec::new();
    let mut raw_count = 0usize;
    let mut first_data_line = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if first_data_line {
            first_data_line = false;
            // Header auto-detection: a first row with any non-numeric cell.
            if cells.iter().any(|c| c.parse::<f64>().is_err()) {
                continue;
            }
        }
        if cells.len() <= needed {
            return Err(Error::Csv {
                line: lineno + 1,
                message: format!(
                    "row has {} cells but column {} is required",
                    cells.len(),
                    needed
                ),
            });
        }
        raw_count += 1;
        if let Some(max) = max_records {
            if records.len() >= max {
                continue; // keep counting raw rows past the truncation point
            }
        }
        let parse_cell = |col: usize| -> Result<f64> {
            cells[col].parse::<f64>().map_err(|_| Error::Csv {
                line: lineno + 1,
                message: format!("non-numeric cell '{}' in column {col}", cells[col]),
            })
        };
        let x = parse_cell(x_column)?;
        let mut features = Vec::with_capacity(feature_columns.len());
        for &col in feature_columns {
            features.push(parse_cell(col)?);
        }
        records.push((x, features));
    }
    Ok(RawRecords { records, raw_count })
}

/// Z-scored records split evenly across nodes.
#[derive(Debug, Clone)]
pub struct NormalizedData {
    /// Normalized `(x, h)` records; only the first `J * floor(N/J)` raw
    /// records are retained.
    pub records: Vec<(f64, DVector<f64>)>,
    pub node_count: usize,
    pub shard_len: usize,
    /// `(mean, std)` of the target column over the retained records.
    pub target_stat: (f64, f64),
    /// `(mean, std)` per feature column over the retained records.
    pub feature_stats: Vec<(f64, f64)>,
}

/// Z-scores features and target over the retained records and splits them
/// into `J` contiguous shards; node `j` replays records
/// `[j * N/J, (j+1) * N/J)` in order, one per slot.
pub fn normalize_and_partition(records: &[(f64, Vec<f64>)], node_count: usize) -> Result<NormalizedData> {
    if node_count == 0 {
        return Err(Error::Usage("node count must be positive".to_string()));
    }
    if records.len() < node_count {
        return Err(Error::Usage(format!(
            "need at least {} records for {} nodes, got {}",
            node_count,
            node_count,
            records.len()
        )));
    }
    let shard_len = records.len() / node_count;
    let retained = &records[..shard_len * node_count];
    let p = retained[0].1.len();
    let n = retained.len() as f64;

    let column_stat = |values: &mut dyn Iterator<Item = f64>| -> (f64, f64) {
        let vals: Vec<f64> = values.collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    };

    let target_stat = column_stat(&mut retained.iter().map(|(x, _)| *x));
    if target_stat.1 == 0.0 {
        return Err(Error::ZeroVariance { column: 0 });
    }
    let mut feature_stats = Vec::with_capacity(p);
    for c in 0..p {
        let stat = column_stat(&mut retained.iter().map(|(_, h)| h[c]));
        if stat.1 == 0.0 {
            return Err(Error::ZeroVariance { column: c + 1 });
        }
        feature_stats.push(stat);
    }

    let normalized: Vec<(f64, DVector<f64>)> = retained
        .iter()
        .map(|(x, h)| {
            let nx = (x - target_stat.0) / target_stat.1;
            let nh = DVector::from_fn(p, |i, _| (h[i] - feature_stats[i].0) / feature_stats[i].1);
            (nx, nh)
        })
        .collect();

    Ok(NormalizedData {
        records: normalized,
        node_count,
        shard_len,
        target_stat,
        feature_stats,
    })
}

/// Least-squares solution `argmin_s sum (x_i - h_i^T s)^2` via the normal
/// equations `(H^T H)^{-1} H^T x`. Errors when the Gram matrix is singular.
pub fn batch_least_squares(records: &[(f64, DVector<f64>)]) -> Result<DVector<f64>> {
    if records.is_empty() {
        return Err(Error::Usage("no records for least squares".to_string()));
    }
    let p = records[0].1.len();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for (x, h) in records {
        gram += h * h.transpose();
        rhs.axpy(*x, h, 1.0);
    }
    match nalgebra::Cholesky::new(gram) {
        Some(chol) => Ok(chol.solve(&rhs)),
        None => Err(Error::RankDeficient),
    }
}

/// Replays a normalized dataset shard-per-node, one record per slot, until
/// the shards are exhausted.
pub struct DatasetSource {
    data: NormalizedData,
    ground_truth: DVector<f64>,
    expected_slot: u64,
}

impl DatasetSource {
    /// Ground truth is the batch least-squares fit over all retained records.
    pub fn new(data: NormalizedData) -> Result<DatasetSource> {
        let ground_truth = batch_least_squares(&data.records)?;
        Ok(DatasetSource {
            data,
            ground_truth,
            expected_slot: 1,
        })
    }

    pub fn shard_len(&self) -> usize {
        self.data.shard_len
    }

    pub fn batch_solution(&self) -> &DVector<f64> {
        &self.ground_truth
    }
}

impl SlotSource for DatasetSource {
    fn dim(&self) -> usize {
        self.data.records[0].1.len()
    }

    fn node_count(&self) -> usize {
        self.data.node_count
    }

    fn next_slot(&mut self, t: u64) -> Result<Option<Vec<StepDatum>>> {
        if t != self.expected_slot {
            return Err(Error::Usage(format!(
                "slots must be requested in order; expected {}, got {t}",
                self.expected_slot
            )));
        }
        let offset = (t - 1) as usize;
        if offset >= self.data.shard_len {
            return Ok(None);
        }
        self.expected_slot += 1;
        let out = (0..self.data.node_count)
            .map(|j| {
                let (x, h) = &self.data.records[j * self.data.shard_len + offset];
                StepDatum {
                    x: *x,
                    h: h.clone(),
                    slot: t,
                }
            })
            .collect();
        Ok(Some(out))
    }

    fn ground_truth(&self, _t: u64) -> DVector<f64> {
        self.ground_truth.clone()
    }

    fn true_sigma(&self, _node: usize) -> Option<f64> {
        None
    }
}
