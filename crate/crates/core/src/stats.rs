//! Seeded random streams, the Gaussian tail function and its inverse,
//! threshold calibration, and the recursive noise-variance estimator.
//!
//! Every random draw in a simulation flows through an [`RngStream`] keyed by
//! `(seed, stream_id)`, so regenerating any component is bit-identical and
//! independent of scheduling. Stream ids encode a purpose tag and a node
//! index; see [`stream_id`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; mixes all input bits into all output bits.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for sub-unit `index` of a master seed.
///
/// Adding more units (e.g. extra Monte Carlo runs) never perturbs the seeds
/// of earlier ones, which keeps previously produced streams stable.
pub fn split_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Purpose tags for the random streams a simulation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Per-node model parameters (AR coefficient, noise scales).
    NodeParams,
    /// AR chain initial state.
    ArInit,
    /// AR driving noise.
    Drive,
    /// Observation noise.
    Noise,
    /// Tracking-mode ground-truth magnitudes.
    Tracking,
    /// Node positions for geometric graphs.
    Positions,
}

/// Packs a purpose tag and a node index into a 64-bit stream id.
pub fn stream_id(purpose: StreamPurpose, node: usize) -> u64 {
    let tag = match purpose {
        StreamPurpose::NodeParams => 1u64,
        StreamPurpose::ArInit => 2,
        StreamPurpose::Drive => 3,
        StreamPurpose::Noise => 4,
        StreamPurpose::Tracking => 5,
        StreamPurpose::Positions => 6,
    };
    (tag << 32) | node as u64
}

/// A deterministic random stream identified by `(seed, stream_id)`.
///
/// Identical identifiers yield identical sequences; distinct stream ids are
/// mixed into unrelated generator states.
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        let a = mix64(seed ^ GOLDEN_GAMMA);
        let b = mix64(a ^ stream_id);
        let c = mix64(b.wrapping_add(GOLDEN_GAMMA));
        let d = mix64(c ^ seed.rotate_left(32));
        key[0..8].copy_from_slice(&a.to_le_bytes());
        key[8..16].copy_from_slice(&b.to_le_bytes());
        key[16..24].copy_from_slice(&c.to_le_bytes());
        key[24..32].copy_from_slice(&d.to_le_bytes());
        RngStream {
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Uniform draw on `[a, b)`; returns `a` exactly when `a == b`.
    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        let u: f64 = self.rng.gen();
        a + (b - a) * u
    }

    /// Gaussian draw with the given mean and standard deviation.
    /// `sigma == 0` returns `mu` exactly.
    pub fn gaussian(&mut self, mu: f64, sigma: f64) -> f64 {
        debug_assert!(sigma >= 0.0);
        let z: f64 = self.rng.sample(StandardNormal);
        mu + sigma * z
    }
}

/// Standard Gaussian density.
pub fn gaussian_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper-tail probability of the standard Gaussian, `Q(z) = P(Z > z)`.
pub fn q_function(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on (0, 1).
///
/// Bisection brackets the root, then a Newton polish against
/// [`q_function`] brings `|q_function(q_inverse(p)) - p|` down to the
/// 1e-15 level across the domain.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "q_inverse requires p in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..2 {
        let pdf = gaussian_pdf(z);
        if pdf <= f64::MIN_POSITIVE {
            break;
        }
        let step = (q_function(z) - p) / pdf;
        if !step.is_finite() {
            break;
        }
        z += step;
    }
    Ok(z)
}

/// Censoring threshold for a target average censoring ratio:
/// `tau = Q^{-1}((1 - pi_star) / 2)`.
pub fn calibrate_tau(pi_star: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&pi_star) {
        return Err(Error::Domain(format!(
            "censoring ratio must lie in [0, 1), got {pi_star}"
        )));
    }
    if pi_star == 0.0 {
        return Ok(0.0);
    }
    q_inverse((1.0 - pi_star) / 2.0)
}

/// Recursive noise-variance estimate.
///
/// The update is `sigma_sq <- (t-1)/t * sigma_sq + residual^2 / t` with `t`
/// then incremented. The slot counter starts at 1, so the first update
/// discards whatever the estimate was initialized to; after `n` updates the
/// estimate equals the arithmetic mean of the `n` squared residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimator {
    t: u64,
    sigma_sq: f64,
}

impl VarianceEstimator {
    pub fn new() -> Self {
        VarianceEstimator { t: 1, sigma_sq: 0.0 }
    }

    pub fn update(&mut self, residual: f64) {
        let t = self.t as f64;
        self.sigma_sq = (t - 1.0) / t * self.sigma_sq + residual * residual / t;
        self.t += 1;
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    pub fn slot(&self) -> u64 {
        self.t
    }
}

impl Default for VarianceEstimator {
    fn default() -> Self {
        Self::new()
    }
}
