//! Prediction error, static regret and the analytic regret bounds.

mod bounds;

pub use bounds::{
    audit_bound, bound_adaptive, bound_deterministic, bound_stochastic, spectral_norm_sq,
    uniform_limit_bound, AdaptiveSeries, AuditObservation, AuditRow, BoundAudit, BoundEvaluation,
    BoundKind, RegretBoundParams, StochasticSeries,
};

use crate::error::{check_dim, Error, Result};

/// `√MSE / (max x − min x)`.
pub fn nrmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_dim("nrmse: predictions", truths.len(), predictions.len())?;
    if truths.is_empty() {
        return Err(Error::Config("NRMSE of an empty sequence".into()));
    }
    let (lo, hi) = truths
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::ConstantTruth);
    }
    let mse = predictions
        .iter()
        .zip(truths)
        .map(|(p, x)| (p - x) * (p - x))
        .sum::<f64>()
        / truths.len() as f64;
    Ok(mse.sqrt() / range)
}

/// `(Σ_{s≤t} online_s − Σ_{s≤t} comparator_s) / t` for every `t`.
pub fn normalized_regret(online: &[f64], comparator: &[f64]) -> Result<Vec<f64>> {
    check_dim("regret: comparator losses", online.len(), comparator.len())?;
    let mut acc = 0.0;
    Ok(online
        .iter()
        .zip(comparator)
        .enumerate()
        .map(|(i, (o, c))| {
            acc += o - c;
            acc / (i + 1) as f64
        })
        .collect())
}

/// Per-step online and comparator losses of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretLedger {
    online: Vec<f64>,
    comparator: Vec<f64>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_losses(online: Vec<f64>, comparator: Vec<f64>) -> Result<Self> {
        check_dim(
            "regret ledger: comparator losses",
            online.len(),
            comparator.len(),
        )?;
        Ok(Self { online, comparator })
    }

    pub fn push(&mut self, online: f64, comparator: f64) {
        self.online.push(online);
        self.comparator.push(comparator);
    }

    pub fn len(&self) -> usize {
        self.online.len()
    }

    pub fn is_empty(&self) -> bool {
        self.online.is_empty()
    }

    pub fn online(&self) -> &[f64] {
        &self.online
    }

    pub fn comparator(&self) -> &[f64] {
        &self.comparator
    }

    /// Cumulative regret `R_t`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.online
            .iter()
            .zip(&self.comparator)
            .map(|(o, c)| {
                acc += o - c;
                acc
            })
            .collect()
    }

    /// Normalized regret `R_t / t`.
    pub fn normalized(&self) -> Vec<f64> {
        normalized_regret(&self.online, &self.comparator).expect("lengths kept equal")
    }

    /// Normalized regret at the last step, or zero when empty.
    pub fn terminal(&self) -> f64 {
        self.normalized().last().copied().unwrap_or(0.0)
    }
}
