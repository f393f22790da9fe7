//! Per-node state and the exact update kernels: the rank-one inverse
//! covariance update, the estimate and multiplier recursions of both solver
//! forms, and the censoring decision.
//!
//! All kernels are pure functions of their inputs; a node's state is owned
//! exclusively by its simulation and updated in place by the slot steppers.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::stats::VarianceEstimator;

/// One time-slot datum observed by a node.
#[derive(Debug, Clone)]
pub struct StepDatum {
    pub x: f64,
    pub h: DVector<f64>,
    pub slot: u64,
}

/// The most recent estimate received from a neighbor and when it arrived.
#[derive(Debug, Clone)]
pub struct InboxEntry {
    pub estimate: DVector<f64>,
    pub slot_received: u64,
}

/// Noise scale used by the censoring test: either the true per-node standard
/// deviation or the online recursive estimate.
#[derive(Debug, Clone)]
pub enum NoiseScale {
    Known(f64),
    Online(VarianceEstimator),
}

impl NoiseScale {
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseScale::Known(sigma) => *sigma,
            NoiseScale::Online(est) => est.sigma(),
        }
    }

    /// Feeds the end-of-slot residual into the online estimate; no-op for
    /// the known-variance mode.
    pub fn absorb(&mut self, residual: f64) {
        if let NoiseScale::Online(est) = self {
            est.update(residual);
        }
    }
}

/// Full per-node state. The `psi`/`v` pair is used only by the original
/// solver form and stays zero/empty otherwise.
#[derive(Debug, Clone)]
pub struct NodeState {
    /// Local estimate `s_j(t)`.
    pub s: DVector<f64>,
    /// Inverse covariance `Phi_j^{-1}(t)`.
    pub phi_inv: DMatrix<f64>,
    /// Network multiplier `delta_j(t)` of the new solver form.
    pub delta: DVector<f64>,
    /// Cross-covariance `psi_j(t)` (original form only).
    pub psi: DVector<f64>,
    /// Per-neighbor multipliers `v_j^{j'}(t)` (original form only).
    pub v: BTreeMap<usize, DVector<f64>>,
    /// Noise scale for the censoring threshold.
    pub noise: NoiseScale,
    /// Most recent neighbor estimates, aligned with the sorted neighbor list.
    pub inbox: Vec<InboxEntry>,
    /// Neighbor estimates consumed by this node's previous multiplier
    /// update; they play the `s_{j'}(t-1)` role at the next one.
    pub last_used: Vec<DVector<f64>>,
    /// Cumulative multiplication tally (leading-order cost model).
    pub mults: u64,
}

impl NodeState {
    /// Fresh state: `s = 0`, `delta = 0`, `Phi^{-1} = gamma * I`, inbox
    /// seeded with zero estimates at slot 0.
    pub fn new(p: usize, gamma: f64, neighbors: &[usize], noise: NoiseScale) -> NodeState {
        NodeState {
            s: DVector::zeros(p),
            phi_inv: DMatrix::identity(p, p) * gamma,
            delta: DVector::zeros(p),
            psi: DVector::zeros(p),
            v: neighbors.iter().map(|&n| (n, DVector::zeros(p))).collect(),
            noise: NoiseScale::Known(0.0),
            inbox: neighbors
                .iter()
                .map(|_| InboxEntry {
                    estimate: DVector::zeros(p),
                    slot_received: 0,
                })
                .collect(),
            last_used: neighbors.iter().map(|_| DVector::zeros(p)).collect(),
            mults: 0,
        }
        .with_noise(noise)
    }

    fn with_noise(mut self, noise: NoiseScale) -> Self {
        self.noise = noise;
        self
    }
}

/// Prediction error of the incoming datum against the current estimate.
pub fn innovation(s: &DVector<f64>, x: f64, h: &DVector<f64>) -> f64 {
    x - h.dot(s)
}

/// Censoring indicator: `false` (c = 0) when the datum is censored, i.e.
/// `|innovation| <= tau * sigma`; boundary equality censors.
pub fn censor_decide(innovation: f64, tau: f64, sigma: f64) -> bool {
    innovation.abs() > tau * sigma
}

/// Result of advancing the inverse covariance by one datum.
pub struct PhiUpdate {
    /// `Phi^{-1}(t) = lambda^{-1}[Phi^{-1} - Phi^{-1} h h^T Phi^{-1} / (lambda + h^T Phi^{-1} h)]`.
    pub phi_inv: DMatrix<f64>,
    /// Gain vector `Phi^{-1}(t) h`, obtained from the intermediate product
    /// `k = Phi^{-1}(t-1) h` as `k / (lambda + h^T k)`.
    pub gain: DVector<f64>,
}

/// Rank-one inverse covariance update; equals `(lambda*Phi + h h^T)^{-1}`
/// by the matrix inversion lemma. The censored update is the `h = 0` case.
///
/// The new matrix is assembled from its upper triangle and mirrored, so it
/// is symmetric by construction.
pub fn phi_update(
    phi_inv: &DMatrix<f64>,
    h: &DVector<f64>,
    lambda: f64,
) -> std::result::Result<PhiUpdate, String> {
    debug_assert!(lambda > 0.0 && lambda <= 1.0);
    let p = phi_inv.nrows();
    let k = phi_inv * h;
    let denom = lambda + h.dot(&k);
    if !denom.is_finite() || denom <= 0.0 {
        return Err(format!("covariance update denominator {denom}"));
    }
    let gain = &k / denom;
    let mut next = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let value = (phi_inv[(i, j)] - k[i] * k[j] / denom) / lambda;
            next[(i, j)] = value;
            next[(j, i)] = value;
        }
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err("covariance update produced non-finite entries".to_string());
    }
    Ok(PhiUpdate {
        phi_inv: next,
        gain,
    })
}

/// Censored covariance step: `Phi^{-1}(t) = lambda^{-1} Phi^{-1}(t-1)`.
pub fn phi_censored(phi_inv: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    phi_inv / lambda
}

/// Estimate recursion of the new solver form:
/// `s(t) = s(t-1) + c * gain * innovation - rho * Phi^{-1}(t) * delta(t-1)`.
///
/// With `c = 0` this is the censored update; with `rho = 0` and `c = 1` it
/// is a centralized recursive least-squares step. The consensus product is
/// skipped entirely when `rho = 0` so isolated runs match bit for bit.
pub fn estimate_update_new_form(
    s_prev: &DVector<f64>,
    c: bool,
    gain: &DVector<f64>,
    innovation: f64,
    rho: f64,
    phi_inv_new: &DMatrix<f64>,
    delta_prev: &DVector<f64>,
) -> DVector<f64> {
    let mut s = s_prev.clone();
    if c {
        s.axpy(innovation, gain, 1.0);
    }
    if rho != 0.0 {
        let smoothing = phi_inv_new * delta_prev;
        s.axpy(-rho, &smoothing, 1.0);
    }
    s
}

/// Multiplier recursion of the new solver form:
/// `delta(t) = delta(t-1) + sum_{j'} [s_j(t) - s_{j'}(t)] - lambda * sum_{j'} [s_j(t-1) - s_{j'}(t-1)]`.
///
/// The two neighbor slices must be aligned; the sums run in slice order so
/// results are reproducible.
pub fn delta_update(
    delta_prev: &DVector<f64>,
    own_now: &DVector<f64>,
    own_prev: &DVector<f64>,
    neighbors_now: &[&DVector<f64>],
    neighbors_prev: &[&DVector<f64>],
    lambda: f64,
) -> DVector<f64> {
    debug_assert_eq!(neighbors_now.len(), neighbors_prev.len());
    // Differences are formed before accumulation so consensus (all
    // estimates equal) contributes an exact zero.
    let mut delta = delta_prev.clone();
    for nb in neighbors_now {
        delta += own_now - *nb;
    }
    for nb in neighbors_prev {
        delta.axpy(-lambda, &(own_prev - *nb), 1.0);
    }
    delta
}

/// Cross-covariance recursion of the original form: `psi(t) = lambda * psi(t-1) + h * x`.
pub fn psi_update(psi_prev: &DVector<f64>, x: f64, h: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let mut psi = psi_prev * lambda;
    psi.axpy(x, h, 1.0);
    psi
}

/// Estimate step of the original form:
/// `s(t) = Phi^{-1}(t) [psi(t) - 1/2 * sum_{j'} (v_j^{j'}(t-1) - v_{j'}^{j}(t-1))]`.
///
/// `v_own` holds this node's multipliers keyed by neighbor; `v_mirror` the
/// neighbors' multipliers kept for this node (what they transmitted).
pub fn original_estimate(
    phi_inv_new: &DMatrix<f64>,
    psi_new: &DVector<f64>,
    v_own: &BTreeMap<usize, DVector<f64>>,
    v_mirror: &BTreeMap<usize, DVector<f64>>,
) -> std::result::Result<DVector<f64>, String> {
    let mut rhs = psi_new.clone();
    for (neighbor, own) in v_own {
        let mirror = v_mirror
            .get(neighbor)
            .ok_or_else(|| format!("missing multiplier from neighbor {neighbor}"))?;
        rhs.axpy(-0.5, own, 1.0);
        rhs.axpy(0.5, mirror, 1.0);
    }
    Ok(phi_inv_new * rhs)
}

/// Multiplier step of the original form:
/// `v_j^{j'}(t) = v_j^{j'}(t-1) + rho * [s_j(t) - s_{j'}(t)]`.
pub fn multiplier_update(
    v_prev: &DVector<f64>,
    own_now: &DVector<f64>,
    neighbor_now: &DVector<f64>,
    rho: f64,
) -> DVector<f64> {
    let mut v = v_prev.clone();
    v.axpy(rho, own_now, 1.0);
    v.axpy(-rho, neighbor_now, 1.0);
    v
}

// --- Leading-order multiplication cost model -------------------------------
//
// Tallies count the p^2-order products of the recursions: the dense
// matrix-vector product `Phi^{-1} h`, the symmetric rank-one outer product,
// the forgetting-factor rescale of the covariance, and the consensus product
// `Phi^{-1} delta`. O(p) work (dot products, gain scaling, vector axpys) is
// excluded, matching the fraction-of-p^2 accounting the cost tables use.

/// Uncensored covariance update: `p^2` (product `Phi^{-1} h`) +
/// `p(p+1)/2` (symmetric outer product) + `p^2` (rescale) = `5p^2/2 + O(p)`.
pub fn phi_update_cost(p: usize) -> u64 {
    let p = p as u64;
    2 * p * p + p * (p + 1) / 2
}

/// Estimate update: the `p^2` consensus product `Phi^{-1} delta`, incurred
/// in censored and uncensored slots alike, but only when `rho != 0`. The
/// data term reuses the gain vector from the covariance update, which costs
/// only O(p).
pub fn estimate_update_cost(p: usize, rho: f64) -> u64 {
    if rho == 0.0 {
        0
    } else {
        (p * p) as u64
    }
}
