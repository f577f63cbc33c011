use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::bundle::{summarize, RunRow, SummaryRow};
use super::replay::replay;
use super::{DataSource, ExperimentConfig, LearnerKind};
use crate::attachment::{
    random_weights, AttachmentRule, RuleDictionary, RuleKind, StochasticAttachment, WeightRule,
};
use crate::datagen::{self, load_stream, NodeStream};
use crate::error::{Error, Result};
use crate::learners::{
    batch_solve, self_prediction_rows, AdaOgf, BatchAccumulator, Dogf, FilterCoefficients,
    HyperParams, PcOgf, Sogf, StepRecord,
};
use crate::metrics::{nrmse, RegretLedger};
use crate::rng::{derive_seed, seeded};

const PRETRAIN_SPLIT_TAG: u64 = 0x9E7A;
const ADA_WEIGHT_TAG: u64 = 0xADA0;

/// One point of an η- or K-sweep: the best run at that grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub learner: LearnerKind,
    pub order: usize,
    pub eta: f64,
    pub mu: f64,
    pub selection_nrmse: f64,
    pub test_nrmse: f64,
}

/// A selected run's trace and its normalized cumulative train regret.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedTrace {
    pub learner: LearnerKind,
    pub records: Vec<StepRecord>,
    pub regret: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    pub realization: usize,
    pub seed: u64,
    /// Filter order selected by D-OGF and shared by the other learners.
    pub order: usize,
    /// Every grid run; exactly one row per learner is flagged as selected.
    pub rows: Vec<RunRow>,
    pub traces: Vec<SelectedTrace>,
    pub eta_sweep: Vec<SeriesPoint>,
    pub order_sweep: Vec<SeriesPoint>,
}

impl RealizationResult {
    pub fn selected(&self, learner: LearnerKind) -> Option<&RunRow> {
        self.rows
            .iter()
            .find(|r| r.selected && r.learner == learner)
    }

    pub fn trace(&self, learner: LearnerKind) -> Option<&SelectedTrace> {
        self.traces.iter().find(|t| t.learner == learner)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub realizations: Vec<RealizationResult>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn rows(&self) -> impl Iterator<Item = &RunRow> {
        self.realizations.iter().flat_map(|r| &r.rows)
    }
}

/// Runs every realization (in parallel when a pool is available) and
/// aggregates the selected runs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let shared = match &config.data {
        DataSource::Stream { path } => Some(load_stream(path)?),
        DataSource::Synthetic(_) => None,
    };
    let realizations = (0..config.realizations)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(config.seed, r as u64);
            let stream = match (&config.data, &shared) {
                (_, Some(stream)) => stream.clone(),
                (DataSource::Synthetic(cfg), None) => {
                    let mut cfg = cfg.clone();
                    cfg.seed = seed;
                    datagen::generate(&cfg)?
                }
                (DataSource::Stream { .. }, None) => unreachable!("stream loaded above"),
            };
            run_realization(config, &stream, r, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<RunRow> = realizations
        .iter()
        .flat_map(|r| r.rows.iter().cloned())
        .collect();
    let summary = summarize(&rows);
    Ok(ExperimentResult {
        config: config.clone(),
        realizations,
        summary,
    })
}

enum Online {
    D(Dogf),
    S(Sogf),
    Pc(PcOgf),
    Ada(AdaOgf),
}

struct OnlineRun {
    eta: f64,
    mu: f64,
    /// `‖h(0)‖²`, to strip the regularizer from the first recorded loss.
    h0_sq: f64,
    learner: Online,
    records: Vec<StepRecord>,
    diverged: bool,
}

impl OnlineRun {
    fn advance(&mut self, step: impl FnOnce(&mut Online) -> Result<StepRecord>) -> Result<()> {
        if self.diverged {
            return Ok(());
        }
        match step(&mut self.learner) {
            Ok(rec) => self.records.push(rec),
            Err(Error::Diverged { .. }) => self.diverged = true,
            Err(e) => return Err(e),
        }
        Ok(())
    }

    fn new(eta: f64, mu: f64, h0: &FilterCoefficients, learner: Online) -> Self {
        Self {
            eta,
            mu,
            h0_sq: h0.norm().powi(2),
            learner,
            records: Vec::new(),
            diverged: false,
        }
    }

    fn predictions(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.prediction).collect()
    }

    /// Recorded losses minus `μ‖h(t−1)‖²`.
    fn unregularized_losses(&self) -> Vec<f64> {
        let mut prev_sq = self.h0_sq;
        self.records
            .iter()
            .map(|r| {
                let loss = r.loss - self.mu * prev_sq;
                prev_sq = r.filter_after.norm().powi(2);
                loss
            })
            .collect()
    }
}

/// Scoring windows over a stream of length `len` split at `split`.
#[derive(Clone, Copy)]
struct Windows {
    selection_start: usize,
    split: usize,
}

impl Windows {
    fn new(split: usize, fraction: f64) -> Result<Self> {
        if split == 0 {
            return Err(Error::Config("train prefix is empty".into()));
        }
        let scored = ((split as f64 * fraction).round() as usize).clamp(1, split);
        Ok(Self {
            selection_start: split - scored,
            split,
        })
    }

    /// `(selection NRMSE, test NRMSE)`; NaN for runs that stopped early.
    fn score(&self, preds: &[f64], truths: &[f64]) -> Result<(f64, f64)> {
        if preds.len() < truths.len() {
            return Ok((f64::NAN, f64::NAN));
        }
        let sel = nrmse(
            &preds[self.selection_start..self.split],
            &truths[self.selection_start..self.split],
        )?;
        let test = nrmse(&preds[self.split..], &truths[self.split..])?;
        Ok((sel, test))
    }
}

/// Per-step features `g_t = A_xᵀa_t` at one order.
struct Features {
    rows: Vec<Vec<f64>>,
}

impl Features {
    fn predict(&self, h: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|g| g.iter().zip(h).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Deterministic losses `½(g_tᵀh − x_t)² + μ‖h‖²` over the first `len` steps.
    fn losses(&self, h: &[f64], truths: &[f64], mu: f64, len: usize) -> Vec<f64> {
        let reg = mu * h.iter().map(|v| v * v).sum::<f64>();
        self.predict(h)[..len]
            .iter()
            .zip(truths)
            .map(|(p, x)| 0.5 * (p - x) * (p - x) + reg)
            .collect()
    }
}

struct Pretrained {
    order: usize,
    mu: f64,
    filter: FilterCoefficients,
    validation_nrmse: f64,
}

/// Fits the pre-trained filter on a seeded subset of the starting nodes,
/// choosing μ by self-prediction error on the held-out nodes.
fn pretrain_selected(
    config: &ExperimentConfig,
    stream: &NodeStream,
    order: usize,
    seed: u64,
) -> Result<Pretrained> {
    let n0 = stream.n0();
    let mut nodes: Vec<usize> = (0..n0).collect();
    nodes.shuffle(&mut seeded(derive_seed(seed, PRETRAIN_SPLIT_TAG)));
    let fit_len = ((n0 as f64 * config.pretrain_fraction).round() as usize).clamp(1, n0);
    let (fit, held) = nodes.split_at(fit_len);
    let (rows, targets) =
        self_prediction_rows(stream.base_graph(), stream.base_signal(), fit, order)?;
    let held_out = if held.is_empty() {
        None
    } else {
        Some(self_prediction_rows(
            stream.base_graph(),
            stream.base_signal(),
            held,
            order,
        )?)
    };
    let mut best: Option<Pretrained> = None;
    for &mu in &config.pretrain_mu_grid {
        let filter = batch_solve(&rows, &targets, mu)?;
        let (vr, vt) = match &held_out {
            Some((r, t)) => (r, t),
            None => (&rows, &targets),
        };
        let preds: Vec<f64> = vr.iter().map(|g| dot(g, filter.coeffs())).collect();
        let score = nrmse(&preds, vt).unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|b| score < b.validation_nrmse) {
            best = Some(Pretrained {
                order,
                mu,
                filter,
                validation_nrmse: score,
            });
        }
    }
    Ok(best.expect("pretrain_mu_grid is nonempty"))
}

/// `2Tμ`, or a trace-relative jitter when `μ = 0` keeps the system definite.
pub(crate) fn hindsight_ridge(acc: &BatchAccumulator, mu: f64, len: usize) -> f64 {
    let ridge = 2.0 * len as f64 * mu;
    if ridge > 0.0 {
        ridge
    } else {
        1e-12 * acc.trace().max(1.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ball_radius(config: &ExperimentConfig, h0: &FilterCoefficients) -> f64 {
    let n = h0.norm();
    config.ball_scale * if n > 0.0 { n } else { 1.0 }
}

/// Index of the smallest finite score; ties keep the earliest.
fn argmin(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if s.is_finite() && best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Runs one realization on `stream` and returns every grid run.
pub fn run_realization(
    config: &ExperimentConfig,
    stream: &NodeStream,
    realization: usize,
    seed: u64,
) -> Result<RealizationResult> {
    config.validate()?;
    let split = stream.split();
    if split >= stream.len() {
        return Err(Error::Config("stream has no test suffix".into()));
    }
    let windows = Windows::new(split, config.selection_fraction)?;
    let truths: Vec<f64> = stream.records().iter().map(|r| r.value).collect();
    let orders = &config.order_grid;

    let pretrained = orders
        .iter()
        .map(|&k| pretrain_selected(config, stream, k, seed))
        .collect::<Result<Vec<_>>>()?;

    // Pass 1: per-order features and the D-OGF grid at every order.
    let need_dogf = config.has(LearnerKind::Dogf);
    let mut features: Vec<Features> = orders
        .iter()
        .map(|_| Features { rows: Vec::new() })
        .collect();
    let mut dogf_runs: Vec<Vec<OnlineRun>> = Vec::with_capacity(orders.len());
    for pre in &pretrained {
        let mut runs = Vec::new();
        if need_dogf {
            for &eta in &config.eta_grid {
                for &mu in &config.mu_grid {
                    let hp =
                        HyperParams::new(eta, mu, pre.order, ball_radius(config, &pre.filter))?;
                    let learner = Online::D(Dogf::new(pre.filter.clone(), hp)?);
                    runs.push(OnlineRun::new(eta, mu, &pre.filter, learner));
                }
            }
        }
        dogf_runs.push(runs);
    }
    replay(stream, orders, |ctx| {
        let a = &ctx.record.attachment;
        for (ki, sm) in ctx.shifts.iter().enumerate() {
            features[ki].rows.push(sm.transpose_apply_sparse(a)?);
            for run in &mut dogf_runs[ki] {
                run.advance(|l| match l {
                    Online::D(d) => d.step(a, sm, ctx.record.value),
                    _ => unreachable!("pass 1 holds D-OGF runs only"),
                })?;
            }
        }
        Ok(())
    })?;

    // Order selection by D-OGF; without D-OGF the first order is used.
    let mut dogf_scores: Vec<Vec<(f64, f64)>> = Vec::with_capacity(orders.len());
    for runs in &dogf_runs {
        dogf_scores.push(
            runs.iter()
                .map(|r| windows.score(&r.predictions(), &truths))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let flat: Vec<(usize, usize)> = (0..orders.len())
        .flat_map(|ki| (0..dogf_runs[ki].len()).map(move |ri| (ki, ri)))
        .collect();
    let dogf_best = argmin(flat.iter().map(|&(ki, ri)| dogf_scores[ki][ri].0)).map(|i| flat[i]);
    let k_index = dogf_best.map_or(0, |(ki, _)| ki);
    let order = orders[k_index];
    let feats = &features[k_index];
    let pre = &pretrained[k_index];

    let mut acc = BatchAccumulator::new(order);
    for (g, &x) in feats.rows[..split].iter().zip(&truths) {
        acc.push(g, x)?;
    }
    let batch_filters = config
        .batch_mu_grid
        .iter()
        .map(|&mu| acc.solve(mu))
        .collect::<Result<Vec<_>>>()?;
    let batch_scores = batch_filters
        .iter()
        .map(|h| windows.score(&feats.predict(h.coeffs()), &truths))
        .collect::<Result<Vec<_>>>()?;
    let batch_index = argmin(batch_scores.iter().map(|s| s.0))
        .ok_or_else(|| Error::Numerical("no batch filter produced a finite score".into()))?;
    // Every learner is scored against the selected batch filter on the
    // unregularized loss, so runs with different μ share one scale.
    let comparator_losses = feats.losses(batch_filters[batch_index].coeffs(), &truths, 0.0, split);

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let regret_of = |losses: &[f64]| -> Result<Vec<f64>> {
        if losses.len() < split {
            return Ok(Vec::new());
        }
        Ok(
            RegretLedger::from_losses(losses[..split].to_vec(), comparator_losses.clone())?
                .normalized(),
        )
    };
    let row =
        |learner, eta, mu, (sel, test): (f64, f64), regret: &[f64], diverged, selected| RunRow {
            realization,
            learner,
            order,
            eta,
            mu,
            selection_nrmse: sel,
            test_nrmse: test,
            train_regret: regret.last().copied().unwrap_or(f64::NAN),
            diverged,
            selected,
        };

    if config.has(LearnerKind::Pretrained) {
        let preds = feats.predict(pre.filter.coeffs());
        let losses = feats.losses(pre.filter.coeffs(), &truths, 0.0, split);
        let regret = regret_of(&losses)?;
        rows.push(row(
            LearnerKind::Pretrained,
            0.0,
            pre.mu,
            windows.score(&preds, &truths)?,
            &regret,
            false,
            true,
        ));
    }
    if config.has(LearnerKind::Batch) {
        for (i, (h, &mu)) in batch_filters.iter().zip(&config.batch_mu_grid).enumerate() {
            let losses = feats.losses(h.coeffs(), &truths, 0.0, split);
            let regret = regret_of(&losses)?;
            rows.push(row(
                LearnerKind::Batch,
                0.0,
                mu,
                batch_scores[i],
                &regret,
                false,
                i == batch_index,
            ));
        }
    }

    let mut eta_sweep = Vec::new();
    let mut order_sweep = Vec::new();
    let mut emit_online = |kind: LearnerKind,
                           runs: Vec<OnlineRun>,
                           scores: &[(f64, f64)],
                           best: Option<usize>,
                           rows: &mut Vec<RunRow>,
                           traces: &mut Vec<SelectedTrace>|
     -> Result<()> {
        for (i, (run, &score)) in runs.iter().zip(scores).enumerate() {
            let regret = regret_of(&run.unregularized_losses())?;
            // All-diverged grids still flag their first run so the loss is visible.
            let selected = best.map_or(i == 0, |b| b == i);
            rows.push(row(
                kind,
                run.eta,
                run.mu,
                score,
                &regret,
                run.diverged,
                selected,
            ));
            if selected && !run.diverged {
                traces.push(SelectedTrace {
                    learner: kind,
                    records: run.records.clone(),
                    regret,
                });
            }
        }
        for &eta in &config.eta_grid {
            let idx: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].eta == eta).collect();
            if let Some(j) = argmin(idx.iter().map(|&i| scores[i].0)) {
                let i = idx[j];
                eta_sweep.push(SeriesPoint {
                    learner: kind,
                    order,
                    eta,
                    mu: runs[i].mu,
                    selection_nrmse: scores[i].0,
                    test_nrmse: scores[i].1,
                });
            }
        }
        Ok(())
    };

    if need_dogf {
        for (ki, (runs, scores)) in dogf_runs.iter().zip(&dogf_scores).enumerate() {
            if let Some(i) = argmin(scores.iter().map(|s| s.0)) {
                order_sweep.push(SeriesPoint {
                    learner: LearnerKind::Dogf,
                    order: orders[ki],
                    eta: runs[i].eta,
                    mu: runs[i].mu,
                    selection_nrmse: scores[i].0,
                    test_nrmse: scores[i].1,
                });
            }
        }
        let runs = std::mem::take(&mut dogf_runs[k_index]);
        let scores = &dogf_scores[k_index];
        let best = dogf_best.map(|(_, ri)| ri);
        emit_online(
            LearnerKind::Dogf,
            runs,
            scores,
            best,
            &mut rows,
            &mut traces,
        )?;
    }

    // Pass 2: stochastic learners at the selected order.
    let stochastic = [LearnerKind::Sogf, LearnerKind::Adaogf, LearnerKind::Pcogf];
    let active: Vec<LearnerKind> = stochastic.into_iter().filter(|&k| config.has(k)).collect();
    if !active.is_empty() {
        let radius = ball_radius(config, &pre.filter);
        let mut dictionary = RuleDictionary::standard(config.attachment_scale)?;
        let n_rules = dictionary.len();
        let mut runs: Vec<(LearnerKind, Vec<OnlineRun>)> = Vec::new();
        for &kind in &active {
            let mut grid = Vec::new();
            for &eta in &config.eta_grid {
                for &mu in &config.mu_grid {
                    let hp = HyperParams::new(eta, mu, order, radius)?;
                    let h0 = pre.filter.clone();
                    let learner = match kind {
                        LearnerKind::Sogf => Online::S(Sogf::new(h0, hp)?),
                        LearnerKind::Pcogf => Online::Pc(PcOgf::new(h0, hp)?),
                        _ => {
                            let mut ada = AdaOgf::new(h0, hp, n_rules)?
                                .with_steps_per_arrival(config.ada.steps_per_arrival)?
                                .with_gradient_form(config.ada.gradient_form);
                            if let Some(ceta) = config.ada.combiner_eta {
                                ada = ada.with_combiner_eta(ceta)?;
                            }
                            Online::Ada(ada)
                        }
                    };
                    grid.push(OnlineRun::new(eta, mu, &pre.filter, learner));
                }
            }
            runs.push((kind, grid));
        }
        let need_ada = config.has(LearnerKind::Adaogf);
        let need_uniform = config.has(LearnerKind::Sogf) || config.has(LearnerKind::Pcogf);
        let weight_rule = if config.freeze_weight {
            let median = stream.base_graph().median_weight().ok_or_else(|| {
                Error::Config("starting graph has no edges to take a median over".into())
            })?;
            WeightRule::Fixed(median)
        } else {
            WeightRule::MedianCurrent
        };
        let uniform = AttachmentRule::new(RuleKind::Uniform, config.attachment_scale)?;
        let w_h = stream.base_graph().weight_cap();
        let mut weight_rng = seeded(derive_seed(seed, ADA_WEIGHT_TAG));
        let mut weights = random_weights(stream.n0(), n_rules, w_h, &mut weight_rng);
        replay(stream, &[order], |ctx| {
            let (a, sm, x) = (&ctx.record.attachment, &ctx.shifts[0], ctx.record.value);
            let sa: Option<StochasticAttachment> = if need_uniform {
                Some(uniform.apply(ctx.graph, weight_rule)?.attachment)
            } else {
                None
            };
            let probs = if need_ada {
                Some(dictionary.evaluate(ctx.graph).0)
            } else {
                None
            };
            for (_, grid) in &mut runs {
                for run in grid.iter_mut() {
                    run.advance(|l| match l {
                        Online::S(s) => s.step(sa.as_ref().expect("uniform model built"), sm, x),
                        Online::Pc(p) => {
                            p.step(sa.as_ref().expect("uniform model built"), a, sm, x)
                        }
                        Online::Ada(ada) => ada.step(
                            probs.clone().expect("dictionary evaluated"),
                            weights.clone(),
                            sm,
                            x,
                        ),
                        Online::D(_) => unreachable!("pass 2 holds stochastic learners only"),
                    })?;
                }
            }
            if need_ada {
                weights.extend(random_weights(1, n_rules, w_h, &mut weight_rng));
            }
            Ok(())
        })?;
        for (kind, grid) in runs {
            let scores = grid
                .iter()
                .map(|r| windows.score(&r.predictions(), &truths))
                .collect::<Result<Vec<_>>>()?;
            let best = argmin(scores.iter().map(|s| s.0));
            emit_online(kind, grid, &scores, best, &mut rows, &mut traces)?;
        }
    }

    rows.sort_by_key(|r| LearnerKind::ALL.iter().position(|&k| k == r.learner));
    traces.sort_by_key(|t| LearnerKind::ALL.iter().position(|&k| k == t.learner));
    Ok(RealizationResult {
        realization,
        seed,
        order,
        rows,
        traces,
        eta_sweep,
        order_sweep,
    })
}
