//! Decentralized recursive least-squares with data-adaptive censoring.
//!
//! A network of nodes estimates a common regression vector from streaming
//! scalar observations, exchanging local estimates with one-hop neighbors.
//! Data-adaptive censoring discards observations whose innovation falls
//! below a calibrated threshold, trading a little accuracy for large
//! savings in computation and communication. Three censoring strategies are
//! implemented on top of the uncensored decentralized solver:
//!
//! 1. censor computation only — every node still talks each slot;
//! 2. censored nodes also stop transmitting, storing arrivals passively;
//! 3. censored nodes go fully idle, with forced receives bounding how stale
//!    any neighbor estimate can get.
//!
//! Baselines: the solver's original algebraic form (kept as an executable
//! equivalence check), an isolated adaptive-censoring solver with no
//! communication, and diffusion LMS.
//!
//! The crate splits into the simulation stack ([`graph`], [`data`],
//! [`node`], [`algorithms`]) and the experiment stack ([`metrics`],
//! [`config`], [`harness`]); the `drls` CLI in the companion crate is a
//! thin wrapper over [`harness`].

pub mod algorithms;
pub mod config;
pub mod data;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod node;
pub mod stats;

pub use algorithms::{
    AlgorithmKind, CombineWeights, RunSettings, Simulation, SlotTranscript, StepParams,
    VarianceMode,
};
pub use config::{load_config, parse_config, CensorSpec, RunConfig, SourceSpec, TopologySpec};
pub use data::{
    synthetic_default, DatasetSource, GroundTruth, SlotSource, SyntheticSource, WindowMode,
};
pub use error::{Error, Result};
pub use graph::Network;
pub use metrics::{decay_rate_fit, empirical_costs, msd, smrd, table1_predictions, MetricsLog};
pub use node::{NodeState, NoiseScale, StepDatum};
pub use stats::{calibrate_tau, q_function, q_inverse, split_seed, RngStream, VarianceEstimator};
