//! Slot-synchronous orchestrators for the solver family: the uncensored
//! decentralized solver in both algebraic forms, the three censoring
//! strategies, the isolated adaptive-censoring baseline, and diffusion LMS.
//!
//! Every slot runs in barrier-separated phases: (1) each node computes its
//! local update from its own state plus previous-slot neighbor snapshots,
//! (2) mandated messages are delivered, (3) multiplier updates consume the
//! fresh inbox, (4) overdue neighbor entries trigger forced receives. Nodes
//! within a phase never read each other's in-flight state, so per-seed
//! results are independent of scheduling.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::metrics::{MetricsLog, SlotRecord};
use crate::node::{
    censor_decide, delta_update, estimate_update_cost, estimate_update_new_form, innovation,
    multiplier_update, original_estimate, phi_censored, phi_update, phi_update_cost, psi_update,
    NodeState, NoiseScale, StepDatum,
};

/// The algorithms the simulator implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    /// Uncensored decentralized solver, original recursions (cross-covariance
    /// plus per-edge multipliers). Kept as an executable equivalence check.
    DrlsOriginal,
    /// Uncensored decentralized solver, estimate-space recursions.
    Drls,
    /// Censors computation only; everyone still communicates each slot.
    Cdrls1,
    /// Censored nodes also stop transmitting; they store arrivals passively.
    Cdrls2,
    /// Censored nodes neither transmit nor receive; staleness is bounded by
    /// forced receives every `d_max` slots.
    Cdrls3,
    /// Adaptive-censoring solver run independently at every node.
    Acrls,
    /// Adapt-then-combine diffusion least-mean-squares baseline.
    DiffusionLms,
}

impl AlgorithmKind {
    pub fn is_censoring(self) -> bool {
        matches!(
            self,
            AlgorithmKind::Cdrls1 | AlgorithmKind::Cdrls2 | AlgorithmKind::Cdrls3 | AlgorithmKind::Acrls
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::DrlsOriginal => "drls_original",
            AlgorithmKind::Drls => "drls",
            AlgorithmKind::Cdrls1 => "cdrls1",
            AlgorithmKind::Cdrls2 => "cdrls2",
            AlgorithmKind::Cdrls3 => "cdrls3",
            AlgorithmKind::Acrls => "acrls",
            AlgorithmKind::DiffusionLms => "diffusion_lms",
        }
    }

    pub const ALL: [AlgorithmKind; 7] = [
        AlgorithmKind::DrlsOriginal,
        AlgorithmKind::Drls,
        AlgorithmKind::Cdrls1,
        AlgorithmKind::Cdrls2,
        AlgorithmKind::Cdrls3,
        AlgorithmKind::Acrls,
        AlgorithmKind::DiffusionLms,
    ];
}

impl std::str::FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        AlgorithmKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown algorithm '{s}'"))
    }
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Combine-matrix choice for diffusion LMS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineWeights {
    /// Uniform over the closed neighborhood, `1 / (|N_j| + 1)`.
    Uniform,
    /// Metropolis--Hastings weights with the residual on the self loop.
    Metropolis,
}

/// Whether the censoring threshold uses the true noise scale or the online
/// recursive estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    Known,
    Online,
}

/// Per-run numeric parameters shared by all slot steppers.
#[derive(Debug, Clone)]
pub struct StepParams {
    pub lambda: f64,
    pub rho: f64,
    pub gamma: f64,
    /// Censoring threshold multiplier; ignored by non-censoring kinds.
    pub tau: f64,
    /// Staleness bound for forced receives (third censoring strategy).
    pub d_max: u64,
    pub combine: CombineWeights,
    /// Norm bound on local estimates for the third strategy; clamping
    /// events are logged and expected to be zero in healthy runs.
    pub clamp_norm: f64,
    /// Scale on the original-form multiplier step. 1.0 is the convention
    /// under which the two solver forms coincide; tests use other values as
    /// a negative control.
    pub v_step_scale: f64,
}

impl StepParams {
    pub fn new(lambda: f64, rho: f64, gamma: f64, tau: f64) -> StepParams {
        StepParams {
            lambda,
            rho,
            gamma,
            tau,
            d_max: 20,
            combine: CombineWeights::Uniform,
            clamp_norm: 1e6,
            v_step_scale: 1.0,
        }
    }
}

/// What happened in one slot: censor flags, every directed delivery, forced
/// receives, per-node multiplication tallies, and staleness extremes.
#[derive(Debug, Clone)]
pub struct SlotTranscript {
    pub slot: u64,
    /// `true` where the node censored its datum (indicator c = 0).
    pub censored: Vec<bool>,
    /// Directed `(sender, receiver)` messages delivered this slot.
    pub deliveries: Vec<(usize, usize)>,
    /// Forced receives `(sender, receiver)`, third strategy only.
    pub forced: Vec<(usize, usize)>,
    /// Per-node multiplications tallied this slot (leading-order model).
    pub mults: Vec<u64>,
    /// Max inbox staleness observed at use time this slot.
    pub max_inbox_age: u64,
    /// Nodes whose estimates were norm-clamped this slot.
    pub clamped: Vec<usize>,
}

/// A network of nodes advancing slot by slot under one algorithm.
pub struct Simulation {
    kind: AlgorithmKind,
    params: StepParams,
    net: Arc<Network>,
    states: Vec<NodeState>,
    dim: usize,
    slot: u64,
    zero: DVector<f64>,
}

impl Simulation {
    /// Initializes all nodes: `s = 0`, `delta = 0`, `Phi^{-1} = gamma I`,
    /// cross-covariances and multipliers zero, inboxes seeded with every
    /// neighbor's zero estimate at slot 0.
    pub fn new(
        kind: AlgorithmKind,
        net: Arc<Network>,
        dim: usize,
        params: StepParams,
        noise: Vec<NoiseScale>,
    ) -> Simulation {
        assert_eq!(noise.len(), net.node_count());
        let states = (0..net.node_count())
            .map(|j| NodeState::new(dim, params.gamma, net.neighbors(j), noise[j].clone()))
            .collect();
        Simulation {
            kind,
            params,
            net,
            states,
            dim,
            slot: 0,
            zero: DVector::zeros(dim),
        }
    }

    pub fn kind(&self) -> AlgorithmKind {
        self.kind
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Advances one slot. `data` holds this slot's datum for each node.
    pub fn step(&mut self, data: &[StepDatum]) -> Result<SlotTranscript> {
        assert_eq!(data.len(), self.net.node_count());
        self.slot += 1;
        match self.kind {
            AlgorithmKind::DiffusionLms => self.step_diffusion(data),
            AlgorithmKind::DrlsOriginal => self.step_original(data),
            _ => self.step_rls_family(data),
        }
    }

    fn neighbor_slot(&self, node: usize, neighbor: usize) -> usize {
        self.net
            .neighbors(node)
            .binary_search(&neighbor)
            .expect("neighbor lookup")
    }

    fn check_finite(&self, node: usize, slot: u64, s: &DVector<f64>) -> Result<()> {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                node,
                slot,
                message: "estimate diverged to a non-finite value".to_string(),
            });
        }
        Ok(())
    }

    /// The recursive-least-squares family: both censored and uncensored
    /// schedules share this stepper; the algorithm kind picks the message
    /// and multiplier schedule.
    fn step_rls_family(&mut self, data: &[StepDatum]) -> Result<SlotTranscript> {
        let t = self.slot;
        let kind = self.kind;
        let j_count = self.net.node_count();
        let p = self.dim;
        let censoring = kind.is_censoring();
        // The isolated baseline is the first censoring strategy with the
        // consensus term switched off.
        let rho = if kind == AlgorithmKind::Acrls { 0.0 } else { self.params.rho };
        let lambda = self.params.lambda;

        let prev: Vec<DVector<f64>> = self.states.iter().map(|st| st.s.clone()).collect();
        let mut censored = vec![false; j_count];
        let mut mults = vec![0u64; j_count];
        let mut clamped = Vec::new();

        for j in 0..j_count {
            let st = &mut self.states[j];
            let d = &data[j];
            let innov = innovation(&st.s, d.x, &d.h);
            let c = if censoring {
                censor_decide(innov, self.params.tau, st.noise.sigma())
            } else {
                true
            };
            censored[j] = !c;
            if c {
                let up = phi_update(&st.phi_inv, &d.h, lambda).map_err(|message| Error::Numeric {
                    node: j,
                    slot: t,
                    message,
                })?;
                st.phi_inv = up.phi_inv;
                st.s = estimate_update_new_form(&prev[j], true, &up.gain, innov, rho, &st.phi_inv, &st.delta);
                mults[j] += phi_update_cost(p) + estimate_update_cost(p, rho);
            } else {
                match kind {
                    AlgorithmKind::Cdrls1 | AlgorithmKind::Acrls => {
                        st.phi_inv = phi_censored(&st.phi_inv, lambda);
                        st.s = estimate_update_new_form(
                            &prev[j], false, &self.zero, innov, rho, &st.phi_inv, &st.delta,
                        );
                        mults[j] += estimate_update_cost(p, rho);
                    }
                    AlgorithmKind::Cdrls2 | AlgorithmKind::Cdrls3 => {
                        // Idle: the datum is dropped and no state advances.
                    }
                    _ => unreachable!("non-censoring kind reached censored branch"),
                }
            }
            if censoring {
                // End-of-slot residual; close to the observation noise even
                // during the initial transient, which keeps the threshold
                // calibrated. The a priori innovation would fold the large
                // early prediction errors into the noise estimate.
                let residual = d.x - d.h.dot(&st.s);
                st.noise.absorb(residual);
            }
            if kind == AlgorithmKind::Cdrls3 {
                let norm = st.s.norm();
                if norm > self.params.clamp_norm {
                    st.s *= self.params.clamp_norm / norm;
                    clamped.push(j);
                }
            }
        }
        for j in 0..j_count {
            self.check_finite(j, t, &self.states[j].s)?;
        }

        // Phase 2: deliveries mandated by the schedule.
        let fresh: Vec<DVector<f64>> = self.states.iter().map(|st| st.s.clone()).collect();
        let mut deliveries = Vec::new();
        if kind != AlgorithmKind::Acrls {
            for sender in 0..j_count {
                for &receiver in self.net.neighbors(sender) {
                    let deliver = match kind {
                        AlgorithmKind::Drls | AlgorithmKind::Cdrls1 => true,
                        AlgorithmKind::Cdrls2 => !censored[sender],
                        AlgorithmKind::Cdrls3 => !censored[sender] && !censored[receiver],
                        _ => unreachable!(),
                    };
                    if deliver {
                        let idx = self.neighbor_slot(receiver, sender);
                        let entry = &mut self.states[receiver].inbox[idx];
                        entry.estimate = fresh[sender].clone();
                        entry.slot_received = t;
                        deliveries.push((sender, receiver));
                    }
                }
            }
        }

        // Staleness as seen by this slot's consumers, before forced receives.
        let mut max_inbox_age = 0u64;
        if kind != AlgorithmKind::Acrls {
            for st in &self.states {
                for entry in &st.inbox {
                    max_inbox_age = max_inbox_age.max(t - entry.slot_received);
                }
            }
        }

        // Phase 3: multiplier updates.
        for j in 0..j_count {
            let runs_delta = match kind {
                AlgorithmKind::Drls | AlgorithmKind::Cdrls1 => true,
                AlgorithmKind::Cdrls2 | AlgorithmKind::Cdrls3 => !censored[j],
                AlgorithmKind::Acrls => false,
                _ => unreachable!(),
            };
            if !runs_delta {
                continue;
            }
            let st = &mut self.states[j];
            let now: Vec<&DVector<f64>> = st.inbox.iter().map(|e| &e.estimate).collect();
            let before: Vec<&DVector<f64>> = st.last_used.iter().collect();
            let delta = delta_update(&st.delta, &fresh[j], &prev[j], &now, &before, lambda);
            st.delta = delta;
            for (slot_est, entry) in st.last_used.iter_mut().zip(&st.inbox) {
                slot_est.clone_from(&entry.estimate);
            }
        }

        // Phase 4: forced receives keep every neighbor entry fresher than
        // d_max slots, independent of the receiver's censor state.
        let mut forced = Vec::new();
        if kind == AlgorithmKind::Cdrls3 {
            for receiver in 0..j_count {
                for (idx, &sender) in self.net.neighbors(receiver).iter().enumerate() {
                    if t - self.states[receiver].inbox[idx].slot_received >= self.params.d_max {
                        let entry = &mut self.states[receiver].inbox[idx];
                        entry.estimate = fresh[sender].clone();
                        entry.slot_received = t;
                        forced.push((sender, receiver));
                    }
                }
            }
        }

        Ok(SlotTranscript {
            slot: t,
            censored,
            deliveries,
            forced,
            mults,
            max_inbox_age,
            clamped,
        })
    }

    /// Adapt-then-combine diffusion LMS with a `1.5 / sqrt(t)` step size.
    fn step_diffusion(&mut self, data: &[StepDatum]) -> Result<SlotTranscript> {
        let t = self.slot;
        let j_count = self.net.node_count();
        let mu = 1.5 / (t as f64).sqrt();

        let intermediates: Vec<DVector<f64>> = (0..j_count)
            .map(|j| {
                let st = &self.states[j];
                let d = &data[j];
                let innov = innovation(&st.s, d.x, &d.h);
                let mut phi = st.s.clone();
                phi.axpy(mu * innov, &d.h, 1.0);
                phi
            })
            .collect();

        let mut deliveries = Vec::new();
        for (sender, intermediate) in intermediates.iter().enumerate() {
            for &receiver in self.net.neighbors(sender) {
                let idx = self.neighbor_slot(receiver, sender);
                let entry = &mut self.states[receiver].inbox[idx];
                entry.estimate = intermediate.clone();
                entry.slot_received = t;
                deliveries.push((sender, receiver));
            }
        }

        for (j, intermediate) in intermediates.iter().enumerate() {
            let weights = self.combine_weights(j);
            let st = &mut self.states[j];
            let mut s = intermediate * weights.self_weight;
            for (entry, w) in st.inbox.iter().zip(&weights.neighbor_weights) {
                s.axpy(*w, &entry.estimate, 1.0);
            }
            st.s = s;
        }
        for j in 0..j_count {
            self.check_finite(j, t, &self.states[j].s)?;
        }

        Ok(SlotTranscript {
            slot: t,
            censored: vec![false; j_count],
            deliveries,
            forced: Vec::new(),
            mults: vec![0; j_count],
            max_inbox_age: 0,
            clamped: Vec::new(),
        })
    }

    /// Combine weights over the closed neighborhood of `j`; rows sum to one.
    fn combine_weights(&self, j: usize) -> CombineRow {
        let neighbors = self.net.neighbors(j);
        match self.params.combine {
            CombineWeights::Uniform => {
                let w = 1.0 / (neighbors.len() as f64 + 1.0);
                let neighbor_weights = vec![w; neighbors.len()];
                // Complementing the accumulated sum keeps the row summing
                // to exactly one.
                CombineRow {
                    self_weight: 1.0 - neighbor_weights.iter().sum::<f64>(),
                    neighbor_weights,
                }
            }
            CombineWeights::Metropolis => {
                let dj = neighbors.len();
                let neighbor_weights: Vec<f64> = neighbors
                    .iter()
                    .map(|&n| 1.0 / (1.0 + dj.max(self.net.degree(n)) as f64))
                    .collect();
                CombineRow {
                    self_weight: 1.0 - neighbor_weights.iter().sum::<f64>(),
                    neighbor_weights,
                }
            }
        }
    }

    /// Original-form recursions. Both a node's own multipliers and its
    /// neighbors' mirror multipliers are read at their previous-slot values;
    /// multiplier updates run after every estimate is in place and use the
    /// fresh estimates on both sides.
    fn step_original(&mut self, data: &[StepDatum]) -> Result<SlotTranscript> {
        let t = self.slot;
        let j_count = self.net.node_count();
        let p = self.dim;
        let lambda = self.params.lambda;
        let v_prev: Vec<BTreeMap<usize, DVector<f64>>> =
            self.states.iter().map(|st| st.v.clone()).collect();
        let mut mults = vec![0u64; j_count];

        for j in 0..j_count {
            let mirror: BTreeMap<usize, DVector<f64>> = self
                .net
                .neighbors(j)
                .iter()
                .map(|&n| (n, v_prev[n].get(&j).cloned().expect("mirror multiplier")))
                .collect();
            let st = &mut self.states[j];
            let d = &data[j];
            let up = phi_update(&st.phi_inv, &d.h, lambda).map_err(|message| Error::Numeric {
                node: j,
                slot: t,
                message,
            })?;
            st.phi_inv = up.phi_inv;
            st.psi = psi_update(&st.psi, d.x, &d.h, lambda);
            st.s = original_estimate(&st.phi_inv, &st.psi, &v_prev[j], &mirror)
                .map_err(|message| Error::Numeric {
                    node: j,
                    slot: t,
                    message,
                })?;
            mults[j] += phi_update_cost(p) + (p * p) as u64;
        }
        for j in 0..j_count {
            self.check_finite(j, t, &self.states[j].s)?;
        }

        let fresh: Vec<DVector<f64>> = self.states.iter().map(|st| st.s.clone()).collect();
        let step = self.params.v_step_scale * self.params.rho;
        let mut deliveries = Vec::new();
        for j in 0..j_count {
            let neighbors: Vec<usize> = self.net.neighbors(j).to_vec();
            for n in neighbors {
                let st = &mut self.states[j];
                let v = multiplier_update(&v_prev[j][&n], &fresh[j], &fresh[n], step);
                st.v.insert(n, v);
                // Estimate and multiplier both cross each directed edge.
                deliveries.push((j, n));
                deliveries.push((j, n));
            }
        }

        Ok(SlotTranscript {
            slot: t,
            censored: vec![false; j_count],
            deliveries,
            forced: Vec::new(),
            mults,
            max_inbox_age: 0,
            clamped: Vec::new(),
        })
    }
}

struct CombineRow {
    self_weight: f64,
    neighbor_weights: Vec<f64>,
}

/// Settings for a full run of one algorithm over a data source.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub params: StepParams,
    pub horizon: u64,
    pub variance: VarianceMode,
    /// Recording cadence: every slot up to this horizon, every 10th beyond.
    pub dense_record_limit: u64,
}

impl RunSettings {
    pub fn new(params: StepParams, horizon: u64) -> RunSettings {
        RunSettings {
            params,
            horizon,
            variance: VarianceMode::Online,
            dense_record_limit: 5000,
        }
    }
}

/// Runs `kind` for `settings.horizon` slots over `source`, collecting the
/// per-slot metrics trail. Stops early (reporting the effective horizon)
/// when the source is exhausted.
pub fn run(
    kind: AlgorithmKind,
    settings: &RunSettings,
    net: Arc<Network>,
    source: &mut dyn SlotSource,
    seed: u64,
    config_hash: u64,
) -> Result<MetricsLog> {
    let j_count = net.node_count();
    assert_eq!(source.node_count(), j_count);
    let p = source.dim();
    let noise: Vec<NoiseScale> = (0..j_count)
        .map(|j| match settings.variance {
            VarianceMode::Online => Ok(NoiseScale::Online(crate::stats::VarianceEstimator::new())),
            VarianceMode::Known => source
                .true_sigma(j)
                .map(NoiseScale::Known)
                .ok_or_else(|| Error::Usage("known-variance mode requires a source with known noise".to_string())),
        })
        .collect::<Result<_>>()?;

    let mut sim = Simulation::new(kind, Arc::clone(&net), p, settings.params.clone(), noise);
    let record_every = if settings.horizon <= settings.dense_record_limit { 1 } else { 10 };

    let mut log = MetricsLog {
        algorithm: kind,
        node_count: j_count,
        dim: p,
        edge_count: net.edge_count(),
        horizon: settings.horizon,
        effective_horizon: 0,
        seed,
        config_hash,
        records: Vec::new(),
        clamp_events: 0,
        max_inbox_age: 0,
        total_mults: 0,
        total_messages: 0,
        total_forced: 0,
        total_censored: 0,
    };

    let mut cum_mults = 0u64;
    let mut cum_messages = 0u64;
    let mut cum_forced = 0u64;
    let mut cum_censored = 0u64;

    for t in 1..=settings.horizon {
        let data = match source.next_slot(t)? {
            Some(data) => data,
            None => break,
        };
        let transcript = sim.step(&data)?;
        cum_mults += transcript.mults.iter().sum::<u64>();
        cum_messages += transcript.deliveries.len() as u64;
        cum_forced += transcript.forced.len() as u64;
        cum_censored += transcript.censored.iter().filter(|&&c| c).count() as u64;
        log.clamp_events += transcript.clamped.len() as u64;
        log.max_inbox_age = log.max_inbox_age.max(transcript.max_inbox_age);
        log.effective_horizon = t;

        if t % record_every == 0 || t == settings.horizon {
            let truth = source.ground_truth(t);
            let mut err_sq = 0.0;
            let mut mean = DVector::zeros(p);
            for st in sim.states() {
                err_sq += (&st.s - &truth).norm_squared();
                mean += &st.s;
            }
            mean /= j_count as f64;
            let error_norm = err_sq.sqrt();
            if !error_norm.is_finite() {
                return Err(Error::Numeric {
                    node: 0,
                    slot: t,
                    message: "error norm is not finite".to_string(),
                });
            }
            log.records.push(SlotRecord {
                slot: t,
                error_norm,
                mean_estimate: mean,
                ground_truth: truth,
                cum_mults,
                cum_messages,
                cum_forced,
                cum_censored,
            });
        }
    }

    log.total_mults = cum_mults;
    log.total_messages = cum_messages;
    log.total_forced = cum_forced;
    log.total_censored = cum_censored;
    Ok(log)
}

pub use crate::data::SlotSource;
