//! Stochastic attachment models for incoming nodes.
//!
//! An incoming node attaches to existing node `i` with probability `p_i`,
//! forming an edge of weight `w_i`; draws are independent across nodes.

pub mod centrality;
mod ensemble;
mod rules;
mod simplex;

pub use ensemble::{random_weights, EnsembleAttachment, RuleDictionary};
pub use rules::{AttachmentRule, RuleKind, RuleOutput, WeightRule};
pub use simplex::{is_on_simplex, project_simplex};

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::graph::AttachmentVector;

/// Independent weighted Bernoulli attachment `(p, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticAttachment {
    probs: Vec<f64>,
    weights: Vec<f64>,
}

impl StochasticAttachment {
    pub fn new(probs: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim(
            "stochastic attachment: weights length",
            probs.len(),
            weights.len(),
        )?;
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, &p)| !(0.0..=1.0).contains(&p))
        {
            return Err(Error::Invariant(format!(
                "probability {p} at node {i} not in [0, 1]"
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, &w)| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::Invariant(format!(
                "weight {w} at node {i} not positive"
            )));
        }
        Ok(Self { probs, weights })
    }

    /// Every node shares the same candidate weight.
    pub fn with_common_weight(probs: Vec<f64>, weight: f64) -> Result<Self> {
        let weights = vec![weight; probs.len()];
        Self::new(probs, weights)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn check_weight_cap(&self, weight_cap: f64) -> Result<()> {
        match self.weights.iter().position(|&w| w > weight_cap) {
            Some(i) => Err(Error::Invariant(format!(
                "weight {} at node {i} exceeds w_h = {weight_cap}",
                self.weights[i]
            ))),
            None => Ok(()),
        }
    }

    /// Expected attachment `p ∘ w`.
    pub fn mean(&self) -> Vec<f64> {
        self.probs
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .collect()
    }

    /// Diagonal of the attachment covariance, `w² ∘ p ∘ (1 − p)`.
    pub fn covariance_diag(&self) -> Vec<f64> {
        self.probs
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * w * p * (1.0 - p))
            .collect()
    }

    /// `(mean, covariance diagonal)`.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        (self.mean(), self.covariance_diag())
    }

    /// The attachment itself when every probability is 0 or 1, i.e. the
    /// model has no randomness left.
    pub fn as_deterministic(&self) -> Option<AttachmentVector> {
        if self.probs.iter().any(|&p| p != 0.0 && p != 1.0) {
            return None;
        }
        let entries = self
            .probs
            .iter()
            .zip(&self.weights)
            .enumerate()
            .filter_map(|(i, (&p, &w))| (p == 1.0).then_some((i, w)))
            .collect();
        Some(AttachmentVector::new(self.len(), entries).expect("validated weights"))
    }

    /// One realization: node `i` is included with weight `w_i` w.p. `p_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AttachmentVector {
        let entries = self
            .probs
            .iter()
            .zip(&self.weights)
            .enumerate()
            .filter_map(|(i, (&p, &w))| (rng.random::<f64>() < p).then_some((i, w)))
            .collect();
        AttachmentVector::new(self.len(), entries).expect("validated weights")
    }

    pub fn sample_seeded(&self, seed: u64) -> AttachmentVector {
        self.sample(&mut crate::rng::seeded(seed))
    }
}
