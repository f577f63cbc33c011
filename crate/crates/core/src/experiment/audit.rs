use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::replay::replay;
use super::runner::hindsight_ridge;
use super::{AdaSettings, LearnerKind};
use crate::attachment::{random_weights, AttachmentRule, RuleDictionary, RuleKind, WeightRule};
use crate::datagen::{self, NodeStream, SyntheticConfig};
use crate::error::{Error, Result};
use crate::learners::{
    pretrain, project_ball, AdaOgf, BatchAccumulator, Dogf, HyperParams, Sogf, StepRecord,
};
use crate::metrics::{
    audit_bound, spectral_norm_sq, AuditObservation, BoundAudit, BoundKind, RegretBoundParams,
};
use crate::rng::{derive_seed, seeded};

const ADA_WEIGHT_TAG: u64 = 0xADA0;

/// A fixed-hyperparameter run audited step by step against its regret bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub data: SyntheticConfig,
    /// `dogf`, `sogf` (uniform rule) or `adaogf`.
    pub learner: LearnerKind,
    pub eta: f64,
    pub mu: f64,
    pub order: usize,
    pub pretrain_mu: f64,
    pub attachment_scale: f64,
    pub ball_scale: f64,
    pub ada: AdaSettings,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            data: SyntheticConfig {
                n0: 50,
                t_total: 200,
                ..SyntheticConfig::default()
            },
            learner: LearnerKind::Dogf,
            eta: 1e-2,
            mu: 1e-3,
            order: 3,
            pretrain_mu: 1e-2,
            attachment_scale: 5.0,
            ball_scale: 10.0,
            ada: AdaSettings::default(),
            realizations: 10,
            seed: 0,
        }
    }
}

impl AuditConfig {
    pub fn bound_kind(&self) -> Result<BoundKind> {
        match self.learner {
            LearnerKind::Dogf => Ok(BoundKind::Deterministic),
            LearnerKind::Sogf => Ok(BoundKind::Stochastic),
            LearnerKind::Adaogf => Ok(BoundKind::Adaptive),
            other => Err(Error::Config(format!(
                "no regret bound is audited for {other}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bound_kind()?;
        self.data.validate()?;
        HyperParams::new(self.eta, self.mu, self.order, 1.0)?;
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if !(self.pretrain_mu > 0.0 && self.attachment_scale > 0.0 && self.ball_scale > 0.0) {
            return Err(Error::Config(
                "pretrain_mu, attachment_scale and ball_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRun {
    pub realization: usize,
    pub seed: u64,
    pub audit: BoundAudit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub kind: BoundKind,
    pub runs: Vec<AuditRun>,
}

impl AuditReport {
    pub fn min_slack(&self) -> f64 {
        self.runs
            .iter()
            .map(|r| r.audit.min_slack())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn violation_count(&self) -> usize {
        self.runs.iter().map(|r| r.audit.violations().len()).sum()
    }

    /// One `audit_rNNN.csv` per run plus `audit_summary.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut summary = csv::Writer::from_path(dir.join("audit_summary.csv"))?;
        summary.write_record(["realization", "seed", "steps", "min_slack", "violations"])?;
        for run in &self.runs {
            run.audit
                .write_csv(dir.join(format!("audit_r{:03}.csv", run.realization)))?;
            summary.write_record([
                run.realization.to_string(),
                run.seed.to_string(),
                run.audit.rows.len().to_string(),
                run.audit.min_slack().to_string(),
                run.audit.violations().len().to_string(),
            ])?;
        }
        summary.flush()?;
        Ok(())
    }
}

/// Audits `config.realizations` seeded synthetic runs.
pub fn validate_bounds(config: &AuditConfig) -> Result<AuditReport> {
    config.validate()?;
    let kind = config.bound_kind()?;
    let runs = (0..config.realizations)
        .map(|r| {
            let seed = derive_seed(config.seed, r as u64);
            let data = SyntheticConfig {
                seed,
                ..config.data.clone()
            };
            let stream = datagen::generate(&data)?;
            Ok(AuditRun {
                realization: r,
                seed,
                audit: audit_stream(config, &stream, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AuditReport { kind, runs })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

enum Audited {
    D(Dogf),
    S(Sogf),
    Ada(AdaOgf),
}

/// Runs the learner and a shadow D-OGF from the same start, against the
/// best fixed filter in hindsight for the learner's loss (projected onto the
/// ball). The bound's initial-distance term uses `‖h* − h(0)‖²`.
pub fn audit_stream(config: &AuditConfig, stream: &NodeStream, seed: u64) -> Result<BoundAudit> {
    let kind = config.bound_kind()?;
    let (order, mu) = (config.order, config.mu);
    let h0 = pretrain(
        stream.base_graph(),
        stream.base_signal(),
        order,
        config.pretrain_mu,
    )?;
    let radius = config.ball_scale * if h0.norm() > 0.0 { h0.norm() } else { 1.0 };
    let hp = HyperParams::new(config.eta, mu, order, radius)?;
    let start = project_ball(h0.coeffs(), radius);

    // Minimizer of Σ ½(gᵀh − x)² + μ‖h‖², i.e. ridge with weight 2Tμ.
    let mut acc = BatchAccumulator::new(order);
    replay(stream, &[order], |ctx| {
        acc.push(
            &ctx.shifts[0].transpose_apply_sparse(&ctx.record.attachment)?,
            ctx.record.value,
        )
    })?;
    let ridge = hindsight_ridge(&acc, mu, stream.len());
    let h_star = project_ball(acc.solve(ridge)?.coeffs(), radius);
    let h_star_reg = mu * dot(&h_star, &h_star);

    let mut dictionary = RuleDictionary::standard(config.attachment_scale)?;
    let n_rules = dictionary.len();
    let mut learner = match kind {
        BoundKind::Deterministic => Audited::D(Dogf::new(h0.clone(), hp)?),
        BoundKind::Stochastic => Audited::S(Sogf::new(h0.clone(), hp)?),
        BoundKind::Adaptive => {
            let mut ada = AdaOgf::new(h0.clone(), hp, n_rules)?
                .with_steps_per_arrival(config.ada.steps_per_arrival)?
                .with_gradient_form(config.ada.gradient_form);
            if let Some(ceta) = config.ada.combiner_eta {
                ada = ada.with_combiner_eta(ceta)?;
            }
            Audited::Ada(ada)
        }
    };
    let mut shadow = Dogf::new(h0, hp)?;
    let uniform = AttachmentRule::new(RuleKind::Uniform, config.attachment_scale)?;
    let w_h = stream.base_graph().weight_cap();
    let mut weight_rng = seeded(derive_seed(seed, ADA_WEIGHT_TAG));
    let mut weights = random_weights(stream.n0(), n_rules, w_h, &mut weight_rng);

    let mut obs = Vec::with_capacity(stream.len());
    replay(stream, &[order], |ctx| {
        let (a, sm, x) = (&ctx.record.attachment, &ctx.shifts[0], ctx.record.value);
        let g = sm.transpose_apply_sparse(a)?;
        let h = match &learner {
            Audited::D(l) => l.filter(),
            Audited::S(l) => l.filter(),
            Audited::Ada(l) => l.filter(),
        };
        let hd = shadow.filter();
        let mut o = AuditObservation {
            comparator_loss: 0.5 * (dot(&g, &h_star) - x).powi(2) + h_star_reg,
            c_norm: norm(&g),
            filter_gap: h.distance(&hd),
            ..AuditObservation::default()
        };
        for f in [h.coeffs(), hd.coeffs(), &h_star[..]] {
            o.residual = o.residual.max((dot(&g, f) - x).abs());
            o.y_norm = o.y_norm.max(norm(&sm.apply(f)?));
        }
        // Expected-attachment feature `A_xᵀ(p∘w)` also enters the residual and C.
        let expected_feature = |p: &[f64], w: &[f64], o: &mut AuditObservation| -> Result<()> {
            let pw: Vec<f64> = p.iter().zip(w).map(|(p, w)| p * w).collect();
            let gbar = sm.transpose_apply(&pw)?;
            o.c_norm = o.c_norm.max(norm(&gbar));
            o.residual = o.residual.max((dot(&gbar, h.coeffs()) - x).abs());
            Ok(())
        };
        let rec: StepRecord = match &mut learner {
            Audited::D(l) => l.step(a, sm, x)?,
            Audited::S(l) => {
                let sa = uniform
                    .apply(ctx.graph, WeightRule::MedianCurrent)?
                    .attachment;
                o.p_sq_norm = dot(sa.probs(), sa.probs());
                o.sigma_bar_sq = sa.probs().iter().map(|p| p * (1.0 - p)).fold(0.0, f64::max);
                expected_feature(sa.probs(), sa.weights(), &mut o)?;
                l.step(&sa, sm, x)?
            }
            Audited::Ada(l) => {
                let (probs, _) = dictionary.evaluate(ctx.graph);
                o.p_frob_sq = dot(&probs, &probs);
                o.p_spec_sq = spectral_norm_sq(&probs, n_rules);
                o.p_bar = probs.chunks_exact(n_rules).map(norm).fold(0.0, f64::max);
                let (sa, _) = l.ensemble(probs.clone(), weights.clone())?.compose()?;
                expected_feature(sa.probs(), sa.weights(), &mut o)?;
                let rec = l.step(probs, weights.clone(), sm, x)?;
                weights.extend(random_weights(1, n_rules, w_h, &mut weight_rng));
                rec
            }
        };
        shadow.step(a, sm, x)?;
        o.online_loss = rec.loss;
        obs.push(o);
        Ok(())
    })?;

    let m_max = stream
        .records()
        .iter()
        .map(|r| r.attachment.nnz())
        .max()
        .unwrap_or(0);
    let start_gap: f64 = start
        .iter()
        .zip(&h_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let base = RegretBoundParams {
        r: 0.0,
        c: 0.0,
        y: 0.0,
        w_h,
        m_max: m_max as f64,
        ball_radius: radius,
        eta: config.eta,
        mu,
        h_star_sq: start_gap,
    };
    audit_bound(kind, &base, &obs)
}
