use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::centrality;
use super::StochasticAttachment;
use crate::error::{Error, Result};
use crate::graph::ExpandingGraph;

pub(crate) const EIGEN_TOL: f64 = 1e-10;
pub(crate) const EIGEN_MAX_ITER: usize = 1000;
pub(crate) const PAGERANK_DAMPING: f64 = 0.85;
pub(crate) const PAGERANK_TOL: f64 = 1e-10;
pub(crate) const PAGERANK_MAX_ITER: usize = 1000;

/// Heuristic used to turn the current topology into attachment probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Uniform,
    Degree,
    Betweenness,
    Eigenvector,
    Pagerank,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::Degree,
        RuleKind::Betweenness,
        RuleKind::Eigenvector,
        RuleKind::Pagerank,
        RuleKind::Uniform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Uniform => "uniform",
            RuleKind::Degree => "degree",
            RuleKind::Betweenness => "betweenness",
            RuleKind::Eigenvector => "eigenvector",
            RuleKind::Pagerank => "pagerank",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown attachment rule {s:?}")))
    }
}

/// How candidate edge weights are chosen for a single-rule model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// Median of the edge weights currently in the graph.
    MedianCurrent,
    /// A frozen weight, e.g. the median of the starting graph.
    Fixed(f64),
}

/// Attachment rule with expected-edge-count scale `c_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttachmentRule {
    pub kind: RuleKind,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

/// Probabilities produced by a rule, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleOutput {
    pub attachment: StochasticAttachment,
    /// The centrality was degenerate (all zero or non-convergent) and the
    /// uniform rule was used instead.
    pub fallback: bool,
}

impl AttachmentRule {
    pub fn new(kind: RuleKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!(
                "rule scale c_e = {scale} must be positive"
            )));
        }
        Ok(Self { kind, scale })
    }

    pub fn uniform() -> Self {
        Self {
            kind: RuleKind::Uniform,
            scale: 1.0,
        }
    }

    /// Attachment probabilities on `graph`; returns `(probs, fallback)`.
    pub fn probabilities(&self, graph: &ExpandingGraph) -> (Vec<f64>, bool) {
        self.probabilities_warm(graph, None).0
    }

    /// As [`probabilities`](Self::probabilities), seeding iterative centralities
    /// from `warm` (previous scores). Also returns the raw scores for reuse.
    pub(crate) fn probabilities_warm(
        &self,
        graph: &ExpandingGraph,
        warm: Option<&[f64]>,
    ) -> ((Vec<f64>, bool), Option<Vec<f64>>) {
        let scores = match self.kind {
            RuleKind::Uniform => None,
            RuleKind::Degree => Some(centrality::out_degree(graph)),
            RuleKind::Betweenness => Some(centrality::betweenness(graph)),
            RuleKind::Eigenvector => {
                let res = centrality::eigenvector(graph, EIGEN_TOL, EIGEN_MAX_ITER, warm);
                res.converged.then_some(res.scores)
            }
            RuleKind::Pagerank => {
                let res = centrality::pagerank(
                    graph,
                    PAGERANK_DAMPING,
                    PAGERANK_TOL,
                    PAGERANK_MAX_ITER,
                    warm,
                );
                res.converged.then_some(res.scores)
            }
        };
        let out = self.probs_from_scores(graph.n_nodes(), scores.as_deref());
        let scores = if out.1 { None } else { scores };
        (out, scores)
    }

    /// Maps centrality scores to probabilities; `None` scores (or a uniform
    /// rule) yield the uniform vector. The flag reports a degenerate fallback.
    pub(crate) fn probs_from_scores(&self, n: usize, scores: Option<&[f64]>) -> (Vec<f64>, bool) {
        if self.kind == RuleKind::Uniform {
            return (uniform_probs(n, self.scale), false);
        }
        match scores.and_then(|s| normalize_scores(s, self.scale)) {
            Some(probs) => (probs, false),
            None => (uniform_probs(n, self.scale), true),
        }
    }

    /// Full stochastic model on `graph` with weights from `weights`.
    pub fn apply(&self, graph: &ExpandingGraph, weights: WeightRule) -> Result<RuleOutput> {
        if graph.n_nodes() == 0 {
            return Err(Error::Config("attachment rule on an empty graph".into()));
        }
        let (probs, fallback) = self.probabilities(graph);
        let weight = resolve_weight(graph, weights)?;
        Ok(RuleOutput {
            attachment: StochasticAttachment::with_common_weight(probs, weight)?,
            fallback,
        })
    }
}

pub(crate) fn resolve_weight(graph: &ExpandingGraph, rule: WeightRule) -> Result<f64> {
    match rule {
        WeightRule::MedianCurrent => graph.median_weight().ok_or_else(|| {
            Error::Config("median edge weight undefined on an edgeless graph".into())
        }),
        WeightRule::Fixed(w) if w > 0.0 && w.is_finite() => Ok(w),
        WeightRule::Fixed(w) => Err(Error::Config(format!("fixed weight {w} must be positive"))),
    }
}

fn uniform_probs(n: usize, scale: f64) -> Vec<f64> {
    let target = scale.min(n as f64);
    vec![(target / n as f64).min(1.0); n]
}

/// Shifts scores to be nonnegative, rescales them to sum `min(c_e, N)` and
/// clips at one. `None` when every score is equal to the minimum.
fn normalize_scores(scores: &[f64], scale: f64) -> Option<Vec<f64>> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let total: f64 = scores.iter().map(|s| s + shift).sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let target = scale.min(scores.len() as f64);
    Some(
        scores
            .iter()
            .map(|s| ((s + shift) * target / total).min(1.0))
            .collect(),
    )
}
