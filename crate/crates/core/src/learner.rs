//! Per-action local learner.
//!
//! Learner `i` runs exponential weights over its neighbor set `N_i`. Between
//! two invocations it buffers every round in which it was either the sampled
//! neighborhood (`k_r = i`) or the played action (`I_r = i`); on invocation it
//! turns the buffer into importance-weighted estimates of the loss differences
//! `l_j - l_i` for `j` in `N_i`, sums them into a cost vector, takes one
//! exponential-weights step, and mixes the new iterate with the uniform
//! distribution on `N_i`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::SignalObservation;
use crate::observability::ObservabilityReport;

/// A round as seen by a learner that has to account for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: usize,
    /// Sampled neighborhood `k_r`.
    pub k: usize,
    /// Played action `I_r`.
    pub played: usize,
    pub signal: SignalObservation,
    /// `q_{k_r}(I_r)` as it stood at round `r`.
    pub sampling_prob: f64,
}

/// Cost vector over all `N` actions, zero outside `N_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostVector {
    pub f: Vec<f64>,
    pub invocation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalLearner {
    owner: usize,
    num_actions: usize,
    neighbors: Vec<usize>,
    /// Exponential-weights iterate, indexed like `neighbors`.
    x: Vec<f64>,
    /// Sampling distribution over all actions.
    q: Vec<f64>,
    invocations: usize,
    eta: f64,
    gamma: f64,
    buffer: Vec<RoundRecord>,
}

impl LocalLearner {
    /// Learner starting from the uniform distribution on `neighbors`.
    pub fn new(
        owner: usize,
        num_actions: usize,
        neighbors: &[usize],
        eta: f64,
        gamma: f64,
    ) -> Result<Self> {
        let x = vec![1.0 / neighbors.len().max(1) as f64; neighbors.len()];
        Self::from_iterate(owner, num_actions, neighbors, x, eta, gamma)
    }

    /// Learner whose current iterate is `x` (indexed like `neighbors`).
    pub fn from_iterate(
        owner: usize,
        num_actions: usize,
        neighbors: &[usize],
        x: Vec<f64>,
        eta: f64,
        gamma: f64,
    ) -> Result<Self> {
        if !neighbors.contains(&owner) || neighbors.iter().any(|&j| j >= num_actions) {
            return Err(Error::InvalidInput(format!(
                "neighbor set {neighbors:?} of action {owner} is invalid"
            )));
        }
        if x.len() != neighbors.len() {
            return Err(Error::InvalidInput(
                "iterate length differs from |N_i|".into(),
            ));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        if !(0.0..0.5).contains(&gamma) {
            return Err(Error::InvalidInput(format!(
                "exploration weight must lie in [0, 1/2), got {gamma}"
            )));
        }
        let mut learner = LocalLearner {
            owner,
            num_actions,
            neighbors: neighbors.to_vec(),
            x,
            q: vec![0.0; num_actions],
            invocations: 0,
            eta,
            gamma,
            buffer: Vec::new(),
        };
        learner.refresh_distribution();
        Ok(learner)
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn iterate(&self) -> &[f64] {
        &self.x
    }

    /// `q_i`, a distribution over all `N` actions supported on `N_i`.
    pub fn distribution(&self) -> &[f64] {
        &self.q
    }

    pub fn invocations(&self) -> usize {
        self.invocations
    }

    pub fn buffer(&self) -> &[RoundRecord] {
        &self.buffer
    }

    pub fn record(&mut self, rec: RoundRecord) {
        debug_assert!(rec.k == self.owner || rec.played == self.owner);
        self.buffer.push(rec);
    }

    /// `q = (1 - gamma) x + gamma / |N_i|` on `N_i`.
    fn refresh_distribution(&mut self) {
        let uniform = self.gamma / self.neighbors.len() as f64;
        self.q.iter_mut().for_each(|p| *p = 0.0);
        for (&j, &xj) in self.neighbors.iter().zip(&self.x) {
            self.q[j] = (1.0 - self.gamma) * xj + uniform;
        }
    }

    /// Loss-difference estimate `b^r_(i,j)` contributed by one buffered round.
    pub fn estimate_b(
        &self,
        rec: &RoundRecord,
        observers: &ObservabilityReport,
        j: usize,
    ) -> Result<f64> {
        let i = self.owner;
        if j == i {
            return Ok(0.0);
        }
        let Some(ov) = observers.observer(i, j) else {
            return Err(Error::InvalidInput(format!("{j} is not a neighbor of {i}")));
        };
        let mut b = 0.0;
        if rec.played == i {
            b += ov.own_block()[rec.signal.symbol];
        }
        if rec.k == i && rec.played == j {
            if rec.sampling_prob <= 0.0 {
                return Err(Error::Numerical(format!(
                    "round {}: action {j} sampled by learner {i} with probability {}",
                    rec.t, rec.sampling_prob
                )));
            }
            b += ov.neighbor_block()[rec.signal.symbol] / rec.sampling_prob;
        }
        Ok(b)
    }

    /// Sums the buffered estimates into the cost vector for this invocation.
    pub fn aggregate_costs(&self, observers: &ObservabilityReport) -> Result<CostVector> {
        let Some(last) = self.buffer.last() else {
            return Err(Error::InvalidInput(format!(
                "learner {} invoked with an empty buffer",
                self.owner
            )));
        };
        if last.k != self.owner {
            return Err(Error::InvalidInput(format!(
                "learner {} invoked but the latest round selected {}",
                self.owner, last.k
            )));
        }
        let mut f = vec![0.0; self.num_actions];
        for &j in &self.neighbors {
            let mut h = 0.0;
            for rec in &self.buffer {
                h += self.estimate_b(rec, observers, j)?;
            }
            f[j] = h;
        }
        Ok(CostVector {
            f,
            invocation: self.invocations + 1,
        })
    }

    /// Runs one invocation: aggregate, exponential-weights step, exploration
    /// mixing, buffer reset.
    pub fn invoke(&mut self, observers: &ObservabilityReport) -> Result<()> {
        let costs = self.aggregate_costs(observers)?;
        let local: Vec<f64> = self.neighbors.iter().map(|&j| costs.f[j]).collect();
        self.x = exp_weights_step(&self.x, &local, self.eta)?;
        self.refresh_distribution();
        self.buffer.clear();
        self.invocations += 1;
        debug_assert!(self.invariants_hold(), "learner {} invariants", self.owner);
        Ok(())
    }

    fn invariants_hold(&self) -> bool {
        let floor = self.gamma / self.neighbors.len() as f64;
        let x_sum: f64 = self.x.iter().sum();
        let q_sum: f64 = self.q.iter().sum();
        (x_sum - 1.0).abs() <= 1e-12
            && (q_sum - 1.0).abs() <= 1e-12
            && self.q.iter().enumerate().all(|(j, &p)| {
                if self.neighbors.contains(&j) {
                    p >= floor * (1.0 - 1e-12)
                } else {
                    p == 0.0
                }
            })
    }
}

/// Multiplicative-weights update `x'_j ∝ x_j exp(-eta f_j)`.
///
/// The exponent is shifted by `min_j eta f_j` before exponentiating, which
/// leaves the normalised result unchanged.
pub fn exp_weights_step(x: &[f64], f: &[f64], eta: f64) -> Result<Vec<f64>> {
    if x.len() != f.len() || x.is_empty() {
        return Err(Error::InvalidInput(format!(
            "iterate and cost lengths differ ({} vs {})",
            x.len(),
            f.len()
        )));
    }
    let shift = f.iter().map(|c| eta * c).fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = x
        .iter()
        .zip(f)
        .map(|(&xj, &c)| xj * (-(eta * c - shift)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numerical(format!(
            "exponential weights degenerate (total weight {total})"
        )));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}
