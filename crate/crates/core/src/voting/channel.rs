//! The symmetric corruption channel on `{1..m}`.

use crate::error::{Error, Result};
use crate::gaussian::Correlation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Each symbol is kept with `stay_prob` and moved to each other symbol with
/// `switch_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel {
    m: usize,
    rho: f64,
    stay_prob: f64,
    switch_prob: f64,
}

impl TransitionModel {
    /// Requires `rho >= -1/(m-1)` so that the stay probability is nonnegative.
    pub fn new(m: usize, rho: Correlation) -> Result<Self> {
        Self::build(m, rho.value())
    }

    /// The noiseless channel (`rho = 1`).
    pub fn identity(m: usize) -> Result<Self> {
        Self::build(m, 1.0)
    }

    fn build(m: usize, rho: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("need at least two symbols, got {m}")));
        }
        let mf = m as f64;
        let stay_prob = (1.0 + (mf - 1.0) * rho) / mf;
        let switch_prob = (1.0 - rho) / mf;
        if stay_prob < 0.0 {
            return Err(Error::CorrelationNotAllowed { rho, reason: "stay probability (1+(m-1)rho)/m would be negative" });
        }
        Ok(Self { m, rho, stay_prob, switch_prob })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn stay_prob(&self) -> f64 {
        self.stay_prob
    }

    pub fn switch_prob(&self) -> f64 {
        self.switch_prob
    }

    /// Corrupts the zero-based symbol `a` using one uniform draw `u` in `[0, 1)`.
    ///
    /// The same `u` drives every `rho`, which gives common random numbers
    /// across correlation sweeps.
    pub fn corrupt_symbol(&self, a: usize, u: f64) -> usize {
        if u < self.stay_prob {
            return a;
        }
        let k = (((u - self.stay_prob) / self.switch_prob) as usize).min(self.m - 2);
        if k >= a {
            k + 1
        } else {
            k
        }
    }
}

/// Independently corrupts every entry of a one-based ballot.
pub fn corrupt_ballot(ballot: &[usize], model: &TransitionModel, seed: u64) -> Result<Vec<usize>> {
    if let Some((position, &value)) = ballot.iter().enumerate().find(|(_, &v)| v == 0 || v > model.m) {
        return Err(Error::BallotOutOfRange { position: position + 1, value, m: model.m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ballot.iter().map(|&b| model.corrupt_symbol(b - 1, rng.random::<f64>()) + 1).collect())
}
