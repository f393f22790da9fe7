//! Shared setup for the kernel benchmarks; see `benches/kernels.rs`.

use std::sync::Arc;

use drls_core::node::NoiseScale;
use drls_core::{AlgorithmKind, Network, Simulation, StepParams, VarianceEstimator};

/// A connected 15-node geometric network with the standard parameters,
/// ready to step.
pub fn standard_simulation(kind: AlgorithmKind, tau: f64) -> Simulation {
    let (net, _) = Network::connected_geometric(15, 0.3, 7, 10_000).expect("connected graph");
    let params = StepParams::new(1.0, 0.01, 30.0, tau);
    let noise = (0..15)
        .map(|_| NoiseScale::Online(VarianceEstimator::new()))
        .collect();
    Simulation::new(kind, Arc::new(net), 4, params, noise)
}
