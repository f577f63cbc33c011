//! Experiment protocol: seeded realizations, grid search on the train prefix,
//! test evaluation, regret against the batch filter, and bound audits.

mod audit;
mod bundle;
mod replay;
mod runner;

pub use audit::{audit_stream, validate_bounds, AuditConfig, AuditReport, AuditRun};
pub use bundle::{read_runs, summarize, write_bundle, write_summary, RunRow, SummaryRow};
pub use replay::{replay, StepContext};
pub use runner::{
    run_experiment, run_realization, ExperimentResult, RealizationResult, SelectedTrace,
    SeriesPoint,
};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::SyntheticConfig;
use crate::error::{Error, Result};
use crate::learners::GradientForm;

/// Learners compared by the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Dogf,
    Sogf,
    Adaogf,
    Pcogf,
    Batch,
    Pretrained,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::Pretrained,
        LearnerKind::Batch,
        LearnerKind::Dogf,
        LearnerKind::Sogf,
        LearnerKind::Adaogf,
        LearnerKind::Pcogf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Dogf => "dogf",
            LearnerKind::Sogf => "sogf",
            LearnerKind::Adaogf => "adaogf",
            LearnerKind::Pcogf => "pcogf",
            LearnerKind::Batch => "batch",
            LearnerKind::Pretrained => "pretrained",
        }
    }

    /// Learners that update online and take a step size.
    pub fn is_online(self) -> bool {
        !matches!(self, LearnerKind::Batch | LearnerKind::Pretrained)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown learner {s:?}")))
    }
}

/// Where the node stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// Regenerated per realization with a seed derived from the experiment seed.
    Synthetic(SyntheticConfig),
    /// A saved stream directory, shared by all realizations.
    Stream { path: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticConfig::default())
    }
}

/// Ada-OGF settings beyond `(η, μ, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaSettings {
    pub steps_per_arrival: usize,
    pub gradient_form: GradientForm,
    /// Combiner step size `η_m`; `None` reuses the filter step size `η`.
    /// Combiner gradients scale with the loss, which is small next to the
    /// unit-simplex geometry, so the default is large.
    pub combiner_eta: Option<f64>,
}

impl Default for AdaSettings {
    fn default() -> Self {
        Self {
            steps_per_arrival: 1,
            gradient_form: GradientForm::Exact,
            combiner_eta: Some(3e3),
        }
    }
}

/// `points` log-spaced values over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub learners: Vec<LearnerKind>,
    pub eta_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    /// Searched by D-OGF; the other learners reuse its selected order.
    pub order_grid: Vec<usize>,
    pub batch_mu_grid: Vec<f64>,
    pub pretrain_mu_grid: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    /// Expected edge count `c_e` of the attachment rules.
    pub attachment_scale: f64,
    /// Use the starting graph's median weight for every step instead of the
    /// current median.
    pub freeze_weight: bool,
    pub ada: AdaSettings,
    /// Ball radius as a multiple of the pre-trained filter's norm.
    pub ball_scale: f64,
    /// Fraction of starting-graph nodes used to fit the pre-trained filter.
    pub pretrain_fraction: f64,
    /// Trailing fraction of the train prefix scored during selection.
    pub selection_fraction: f64,
    /// Emit one step CSV per selected run.
    pub write_steps: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            learners: LearnerKind::ALL.to_vec(),
            eta_grid: log_grid(1e-5, 1e-1, 5),
            mu_grid: log_grid(1e-5, 1e-1, 5),
            order_grid: vec![1, 3, 5, 7, 9],
            batch_mu_grid: log_grid(1e-3, 10.0, 5),
            pretrain_mu_grid: log_grid(1e-3, 10.0, 5),
            realizations: 10,
            seed: 0,
            attachment_scale: 5.0,
            freeze_weight: false,
            ada: AdaSettings::default(),
            ball_scale: 10.0,
            pretrain_fraction: 0.8,
            selection_fraction: 0.5,
            write_steps: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Config(format!("{name} must be nonempty")))
            } else {
                Ok(())
            }
        };
        nonempty("learners", self.learners.len())?;
        nonempty("eta_grid", self.eta_grid.len())?;
        nonempty("mu_grid", self.mu_grid.len())?;
        nonempty("order_grid", self.order_grid.len())?;
        nonempty("batch_mu_grid", self.batch_mu_grid.len())?;
        nonempty("pretrain_mu_grid", self.pretrain_mu_grid.len())?;
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self
            .eta_grid
            .iter()
            .chain(&self.mu_grid)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Config(
                "η and μ grids must hold finite nonnegative values".into(),
            ));
        }
        if self
            .batch_mu_grid
            .iter()
            .chain(&self.pretrain_mu_grid)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::Config(
                "batch and pre-training μ grids must be positive".into(),
            ));
        }
        if self.order_grid.contains(&0) {
            return Err(Error::Config("filter orders must be at least 1".into()));
        }
        if !(self.attachment_scale > 0.0 && self.attachment_scale.is_finite()) {
            return Err(Error::Config("attachment_scale must be positive".into()));
        }
        if !(self.ball_scale > 0.0 && self.ball_scale.is_finite()) {
            return Err(Error::Config("ball_scale must be positive".into()));
        }
        for (name, v) in [
            ("pretrain_fraction", self.pretrain_fraction),
            ("selection_fraction", self.selection_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        if self.ada.steps_per_arrival == 0 {
            return Err(Error::Config(
                "ada.steps_per_arrival must be at least 1".into(),
            ));
        }
        if let DataSource::Synthetic(cfg) = &self.data {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn has(&self, kind: LearnerKind) -> bool {
        self.learners.contains(&kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-5, 1e-1, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-5).abs() < 1e-20);
        assert!((g[2] - 1e-3).abs() < 1e-15);
        assert!((g[4] - 1e-1).abs() < 1e-15);
    }

    #[test]
    fn learner_names_round_trip() {
        for k in LearnerKind::ALL {
            assert_eq!(k.as_str().parse::<LearnerKind>().unwrap(), k);
        }
        assert_eq!("D-OGF".parse::<LearnerKind>().unwrap(), LearnerKind::Dogf);
        assert!("ogf".parse::<LearnerKind>().is_err());
    }

    #[test]
    fn config_json_round_trip_and_defaults() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"realizations": 2}"#).unwrap();
        assert_eq!(partial.realizations, 2);
        assert_eq!(partial.order_grid, vec![1, 3, 5, 7, 9]);
    }

    #[test]
    fn empty_grid_rejected() {
        let cfg = ExperimentConfig {
            eta_grid: vec![],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
