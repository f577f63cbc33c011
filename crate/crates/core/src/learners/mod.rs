//! Online graph-filter learners and their batch baselines.
//!
//! The prediction at an incoming node is `aᵀ A_x h`, where `A_x` is the shift
//! matrix of the graph before arrival and `h ∈ R^K` holds the filter taps
//! `h_1..h_K`. Every learner takes a projected gradient step on the ball
//! `‖h‖ ≤ H` after predicting.

mod batch;
mod loss;
mod online;

pub(crate) use batch::self_prediction_rows;
pub use batch::{batch_solve, pretrain, pretrain_on_nodes, BatchAccumulator};
pub use loss::{
    grad_ada, grad_ada_h, grad_ada_m, grad_ada_n, grad_det, grad_stoch, loss_ada, loss_det,
    loss_stoch, predict_det, predict_stoch, printed_grad_m, printed_grad_n, AdaGradients,
    GradientForm, StochasticLoss,
};
pub use online::{AdaOgf, Dogf, PcOgf, Sogf, DIVERGENCE_LIMIT};

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::io::fmt_real;

/// Filter taps `h_1..h_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients(Vec<f64>);

impl FilterCoefficients {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(order: usize) -> Self {
        Self(vec![0.0; order])
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &FilterCoefficients) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for FilterCoefficients {
    fn from(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }
}

/// Step size `η`, regularization `μ`, order `K` and ball radius `H`.
///
/// `η = 0` (evaluation only) and `μ = 0` are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub eta: f64,
    pub mu: f64,
    pub order: usize,
    pub ball_radius: f64,
}

impl HyperParams {
    pub fn new(eta: f64, mu: f64, order: usize, ball_radius: f64) -> Result<Self> {
        let hp = Self {
            eta,
            mu,
            order,
            ball_radius,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and ≥ 0",
                self.eta
            )));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!(
                "regularization {} must be finite and ≥ 0",
                self.mu
            )));
        }
        if self.order == 0 {
            return Err(Error::Config("filter order K must be at least 1".into()));
        }
        if !(self.ball_radius > 0.0) {
            return Err(Error::Config(format!(
                "ball radius {} must be positive",
                self.ball_radius
            )));
        }
        Ok(())
    }
}

/// One online step: what was predicted, what arrived, and the filter after.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub prediction: f64,
    pub truth: f64,
    /// Online loss at the pre-step filter; the learner's regret loss.
    pub loss: f64,
    pub grad_norm: f64,
    pub filter_after: FilterCoefficients,
}

pub const STEP_CSV_HEADER: &str = "t,prediction,truth,loss,grad_norm,filter_norm";

impl StepRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.t,
            fmt_real(self.prediction),
            fmt_real(self.truth),
            fmt_real(self.loss),
            fmt_real(self.grad_norm),
            fmt_real(self.filter_after.norm())
        )
    }
}

pub fn write_step_records(records: &[StepRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{STEP_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

/// Projection onto `{h : ‖h‖ ≤ H}` by radial scaling.
pub fn project_ball(h: &[f64], radius: f64) -> Vec<f64> {
    let n = norm(h);
    if n <= radius {
        h.to_vec()
    } else {
        let scale = radius / n;
        h.iter().map(|v| v * scale).collect()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_projection_cases() {
        assert_eq!(project_ball(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
        let p = project_ball(&[3.0, 4.0], 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_ball(&p, 1.0), p);
    }

    #[test]
    fn hyperparams_validation() {
        assert!(HyperParams::new(0.0, 0.0, 1, 1.0).is_ok());
        assert!(HyperParams::new(-1.0, 0.1, 3, 1.0).is_err());
        assert!(HyperParams::new(0.1, 0.1, 0, 1.0).is_err());
        assert!(HyperParams::new(0.1, 0.1, 3, 0.0).is_err());
    }

    #[test]
    fn step_record_csv() {
        let r = StepRecord {
            t: 3,
            prediction: 0.5,
            truth: 1.0,
            loss: 0.125,
            grad_norm: 2.0,
            filter_after: vec![3.0, 4.0].into(),
        };
        assert_eq!(
            r.csv_row(),
            "3,5.0000000000000000e-1,1.0000000000000000e0,1.2500000000000000e-1,2.0000000000000000e0,5.0000000000000000e0"
        );
    }
}
