use rand::Rng;

use super::centrality::IncrementalBetweenness;
use super::rules::{AttachmentRule, RuleKind};
use super::simplex::is_on_simplex;
use super::StochasticAttachment;
use crate::error::{check_dim, Error, Result};
use crate::graph::ExpandingGraph;

const SIMPLEX_TOL: f64 = 1e-9;

/// Evaluates `M` attachment rules on successive snapshots of one expanding
/// graph, producing the probability dictionary `P` (row-major, `N × M`).
///
/// Iterative centralities are warm-started from the previous snapshot and
/// betweenness is updated incrementally when the graph grew by appended rows.
#[derive(Debug, Clone)]
pub struct RuleDictionary {
    rules: Vec<AttachmentRule>,
    warm: Vec<Option<Vec<f64>>>,
    betweenness: Option<(IncrementalBetweenness, usize)>,
}

impl RuleDictionary {
    pub fn new(rules: Vec<AttachmentRule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Config(
                "rule dictionary needs at least one rule".into(),
            ));
        }
        let warm = vec![None; rules.len()];
        Ok(Self {
            rules,
            warm,
            betweenness: None,
        })
    }

    /// Degree, betweenness, eigenvector, pagerank and uniform, sharing `c_e`.
    pub fn standard(scale: f64) -> Result<Self> {
        let rules = RuleKind::ALL
            .into_iter()
            .map(|kind| AttachmentRule::new(kind, scale))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rules)
    }

    pub fn rules(&self) -> &[AttachmentRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// `P` on `graph` and one fallback flag per rule.
    pub fn evaluate(&mut self, graph: &ExpandingGraph) -> (Vec<f64>, Vec<bool>) {
        let n = graph.n_nodes();
        let m = self.rules.len();
        let mut probs = vec![0.0; n * m];
        let mut fallbacks = vec![false; m];
        for l in 0..m {
            let rule = self.rules[l];
            let (column, fallback) = if rule.kind == RuleKind::Betweenness {
                let scores = self.sync_betweenness(graph);
                rule.probs_from_scores(n, Some(scores))
            } else {
                let ((column, fallback), scores) =
                    rule.probabilities_warm(graph, self.warm[l].as_deref());
                if scores.is_some() {
                    self.warm[l] = scores;
                }
                (column, fallback)
            };
            for (i, p) in column.into_iter().enumerate() {
                probs[i * m + l] = p;
            }
            fallbacks[l] = fallback;
        }
        (probs, fallbacks)
    }

    fn sync_betweenness(&mut self, graph: &ExpandingGraph) -> &[f64] {
        let reusable = match &self.betweenness {
            Some((tracker, edges)) => {
                let start = tracker.n_nodes();
                start <= graph.n_nodes()
                    && start >= graph.origin_size()
                    && edges
                        + (start..graph.n_nodes())
                            .map(|i| graph.row(i).len())
                            .sum::<usize>()
                        == graph.n_edges()
            }
            None => false,
        };
        if !reusable {
            self.betweenness = Some((IncrementalBetweenness::new(graph), graph.n_edges()));
        }
        let (tracker, edges) = self.betweenness.as_mut().expect("initialized above");
        for i in tracker.n_nodes()..graph.n_nodes() {
            tracker.push_sink(graph.row(i));
        }
        *edges = graph.n_edges();
        tracker.scores()
    }
}

/// Dictionaries `P`, `W` (row-major, `N × M`) with simplex combiners `m`, `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAttachment {
    n_rules: usize,
    probs: Vec<f64>,
    weights: Vec<f64>,
    m: Vec<f64>,
    n: Vec<f64>,
}

impl EnsembleAttachment {
    pub fn new(
        n_rules: usize,
        probs: Vec<f64>,
        weights: Vec<f64>,
        m: Vec<f64>,
        n: Vec<f64>,
    ) -> Result<Self> {
        if n_rules == 0 {
            return Err(Error::Config("ensemble needs at least one rule".into()));
        }
        if !probs.len().is_multiple_of(n_rules) {
            return Err(Error::Dimension {
                context: "ensemble: probability dictionary is not N × M",
                expected: (probs.len() / n_rules + 1) * n_rules,
                found: probs.len(),
            });
        }
        check_dim("ensemble: weight dictionary", probs.len(), weights.len())?;
        check_dim("ensemble: probability combiner", n_rules, m.len())?;
        check_dim("ensemble: weight combiner", n_rules, n.len())?;
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Invariant(format!(
                "dictionary probability {p} not in [0, 1]"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Invariant(format!(
                "dictionary weight {w} not positive"
            )));
        }
        let ens = Self {
            n_rules,
            probs,
            weights,
            m,
            n,
        };
        ens.check_combiners()?;
        Ok(ens)
    }

    /// Combiners start at the simplex barycenter `1/M`.
    pub fn uniform_combiners(n_rules: usize, probs: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let bary = vec![1.0 / n_rules.max(1) as f64; n_rules];
        Self::new(n_rules, probs, weights, bary.clone(), bary)
    }

    pub fn n_rows(&self) -> usize {
        self.probs.len() / self.n_rules
    }

    pub fn n_rules(&self) -> usize {
        self.n_rules
    }

    pub fn prob_dict(&self) -> &[f64] {
        &self.probs
    }

    pub fn weight_dict(&self) -> &[f64] {
        &self.weights
    }

    pub fn prob_combiner(&self) -> &[f64] {
        &self.m
    }

    pub fn weight_combiner(&self) -> &[f64] {
        &self.n
    }

    pub fn set_combiners(&mut self, m: Vec<f64>, n: Vec<f64>) -> Result<()> {
        check_dim("ensemble: probability combiner", self.n_rules, m.len())?;
        check_dim("ensemble: weight combiner", self.n_rules, n.len())?;
        self.m = m;
        self.n = n;
        self.check_combiners()
    }

    /// Replaces `P` and `W` (e.g. with the next step's dictionaries), keeping
    /// the combiners.
    pub fn set_dictionaries(&mut self, probs: Vec<f64>, weights: Vec<f64>) -> Result<()> {
        *self = Self::new(self.n_rules, probs, weights, self.m.clone(), self.n.clone())?;
        Ok(())
    }

    fn check_combiners(&self) -> Result<()> {
        for (name, c) in [("m", &self.m), ("n", &self.n)] {
            if !is_on_simplex(c, SIMPLEX_TOL) {
                return Err(Error::Invariant(format!(
                    "combiner {name} = {c:?} is off the simplex"
                )));
            }
        }
        Ok(())
    }

    /// `P x` for a length-`M` vector `x`.
    pub fn prob_apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.probs, self.n_rules, x)
    }

    /// `W x` for a length-`M` vector `x`.
    pub fn weight_apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.weights, self.n_rules, x)
    }

    /// `Pᵀ y` for a length-`N` vector `y`.
    pub fn prob_transpose_apply(&self, y: &[f64]) -> Vec<f64> {
        mat_t_vec(&self.probs, self.n_rules, y)
    }

    /// `Wᵀ y` for a length-`N` vector `y`.
    pub fn weight_transpose_apply(&self, y: &[f64]) -> Vec<f64> {
        mat_t_vec(&self.weights, self.n_rules, y)
    }

    /// Composite `(P m, W n)` before any clipping.
    pub fn composite(&self) -> (Vec<f64>, Vec<f64>) {
        (self.prob_apply(&self.m), self.weight_apply(&self.n))
    }

    /// Composite model `(P m, W n)`; the flag is set when `P m` had to be
    /// clipped into `[0, 1]`.
    pub fn compose(&self) -> Result<(StochasticAttachment, bool)> {
        self.check_combiners()?;
        let (mut probs, weights) = self.composite();
        let mut clipped = false;
        for p in &mut probs {
            if *p > 1.0 || *p < 0.0 {
                clipped = true;
                *p = p.clamp(0.0, 1.0);
            }
        }
        Ok((StochasticAttachment::new(probs, weights)?, clipped))
    }

    /// Recomputes `P` from all rules on `graph_after` and appends one row of
    /// independent uniform `(0, w_h]` weights to `W`. Returns per-rule
    /// fallback flags.
    pub fn append_row<R: Rng + ?Sized>(
        &mut self,
        dictionary: &mut RuleDictionary,
        graph_after: &ExpandingGraph,
        weight_cap: f64,
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        check_dim(
            "ensemble: graph after expansion",
            self.n_rows() + 1,
            graph_after.n_nodes(),
        )?;
        check_dim("ensemble: rule count", self.n_rules, dictionary.len())?;
        let (probs, fallbacks) = dictionary.evaluate(graph_after);
        let mut weights = std::mem::take(&mut self.weights);
        weights.extend(random_weights(1, self.n_rules, weight_cap, rng));
        self.set_dictionaries(probs, weights)?;
        Ok(fallbacks)
    }
}

/// `rows × cols` independent draws uniform on `(0, w_h]`, row-major.
pub fn random_weights<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    weight_cap: f64,
    rng: &mut R,
) -> Vec<f64> {
    (0..rows * cols)
        .map(|_| weight_cap * (1.0 - rng.random::<f64>()))
        .collect()
}

fn mat_vec(a: &[f64], cols: usize, x: &[f64]) -> Vec<f64> {
    a.chunks_exact(cols)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn mat_t_vec(a: &[f64], cols: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (row, &yi) in a.chunks_exact(cols).zip(y) {
        for (o, &a) in out.iter_mut().zip(row) {
            *o += a * yi;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AttachmentVector;
    use crate::rng::seeded;

    fn two_rule_ensemble() -> EnsembleAttachment {
        let probs = vec![0.1, 0.9, 0.5, 0.2, 0.0, 1.0];
        let weights = vec![1.0, 2.0, 0.5, 0.5, 3.0, 1.0];
        EnsembleAttachment::uniform_combiners(2, probs, weights).unwrap()
    }

    #[test]
    fn one_hot_combiner_selects_column() {
        let mut ens = two_rule_ensemble();
        ens.set_combiners(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let (sa, clipped) = ens.compose().unwrap();
        assert_eq!(sa.probs(), &[0.9, 0.2, 1.0]);
        assert_eq!(sa.weights(), &[1.0, 0.5, 3.0]);
        assert!(!clipped);
    }

    #[test]
    fn off_simplex_combiner_rejected() {
        let mut ens = two_rule_ensemble();
        assert!(ens.set_combiners(vec![0.6, 0.6], vec![0.5, 0.5]).is_err());
        assert!(ens.set_combiners(vec![1.5, -0.5], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn transpose_products_are_adjoint() {
        let ens = two_rule_ensemble();
        let x = [0.3, -1.2];
        let y = [2.0, 0.5, -1.0];
        let lhs: f64 = ens.prob_apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = ens
            .prob_transpose_apply(&y)
            .iter()
            .zip(&x)
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn uniform_dictionary_append() {
        let mut dict = RuleDictionary::new(vec![AttachmentRule::uniform()]).unwrap();
        let g = ExpandingGraph::from_edges(3, &[(0, 1, 0.5), (1, 2, 0.5)]).unwrap();
        let (probs, _) = dict.evaluate(&g);
        let mut rng = seeded(1);
        let weights = random_weights(3, 1, 0.5, &mut rng);
        let mut ens = EnsembleAttachment::uniform_combiners(1, probs, weights).unwrap();
        let g2 = g
            .expanded(&AttachmentVector::new(3, vec![(0, 0.5)]).unwrap())
            .unwrap();
        ens.append_row(&mut dict, &g2, 0.5, &mut rng).unwrap();
        assert_eq!(ens.prob_dict(), &[0.25; 4]);
        assert!(ens.weight_dict().iter().all(|&w| w > 0.0 && w <= 0.5));
        assert_eq!(ens.prob_combiner(), &[1.0]);
    }

    #[test]
    fn dictionary_betweenness_matches_direct_rule() {
        let mut dict = RuleDictionary::standard(1.0).unwrap();
        let mut g = ExpandingGraph::from_edges(
            4,
            &[
                (0, 1, 1.0),
                (1, 2, 0.5),
                (2, 3, 0.5),
                (3, 0, 1.0),
                (1, 3, 0.2),
            ],
        )
        .unwrap();
        let mut rng = seeded(4);
        for _ in 0..6 {
            let n = g.n_nodes();
            let i = rng.random_range(0..n);
            let j = (i + 1 + rng.random_range(0..n - 1)) % n;
            let a = AttachmentVector::new(n, vec![(i, 0.5), (j, 0.5)]).unwrap();
            g.expand(&a).unwrap();
            let (probs, _) = dict.evaluate(&g);
            let m = dict.len();
            for (l, rule) in dict.rules().iter().enumerate() {
                let (direct, _) = rule.probabilities(&g);
                for (i, d) in direct.iter().enumerate() {
                    assert!((probs[i * m + l] - d).abs() < 1e-8, "rule {}", rule.kind);
                }
            }
        }
    }
}
