use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::stream::{NodeStream, StreamRecord};
use crate::error::{Error, Result};
use crate::graph::{AttachmentVector, ExpandingGraph, GraphSignal, ShiftMatrix};
use crate::learners::{pretrain, FilterCoefficients};
use crate::rng::{derive_seed, seeded};

const BASE_TAG: u64 = 0xBA5E;
const STREAM_TAG: u64 = 0x57AE;
const REFERENCE_TAG: u64 = 0x2EF0;
const MAX_BASE_ATTEMPTS: u64 = 5;

/// How the incoming-node signal is produced from its neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// A fixed pre-trained filter applied at the incoming node.
    Filter,
    /// Attachment-weighted mean of neighbor signals.
    Wmean,
    /// Gaussian-kernel (Nadaraya–Watson) regression over neighbor signals.
    Kernel,
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filter" => Ok(TargetKind::Filter),
            "wmean" => Ok(TargetKind::Wmean),
            "kernel" => Ok(TargetKind::Kernel),
            other => Err(Error::Config(format!("unknown target kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for TargetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetKind::Filter => "filter",
            TargetKind::Wmean => "wmean",
            TargetKind::Kernel => "kernel",
        })
    }
}

/// Rescaling applied to the starting adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyScaling {
    /// Raw `U(0, 1]` weights.
    None,
    /// Divide by the largest weighted in-degree (row sum), so `‖A_0‖_∞ = 1`.
    MaxInDegree,
}

/// Data the generating filter is pre-trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterSource {
    /// The stream's own starting graph; the pre-trained baseline then
    /// recovers the generator.
    Base,
    /// An independent draw from the same starting-graph distribution.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n0: usize,
    pub edge_prob: f64,
    pub t_total: usize,
    pub edges_per_node: usize,
    pub bandwidth: usize,
    pub target_kind: TargetKind,
    pub kernel_variance: f64,
    pub gen_filter_order: usize,
    /// Ridge parameter of the generating filter's pre-training.
    pub gen_filter_mu: f64,
    pub gen_filter_source: FilterSource,
    pub adjacency_scaling: AdjacencyScaling,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n0: 100,
            edge_prob: 0.2,
            t_total: 1000,
            edges_per_node: 5,
            bandwidth: 3,
            target_kind: TargetKind::Filter,
            kernel_variance: 10.0,
            gen_filter_order: 5,
            gen_filter_mu: 2.0,
            gen_filter_source: FilterSource::Reference,
            adjacency_scaling: AdjacencyScaling::None,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n0 < 2 {
            return fail(format!("n0 = {} must be at least 2", self.n0));
        }
        if self.bandwidth == 0 || self.bandwidth > self.n0 {
            return fail(format!("bandwidth {} must be in 1..=n0", self.bandwidth));
        }
        if !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return fail(format!("edge_prob {} must be in (0, 1]", self.edge_prob));
        }
        if self.edges_per_node == 0 || self.edges_per_node > self.n0 {
            return fail(format!(
                "edges_per_node {} must be in 1..=n0",
                self.edges_per_node
            ));
        }
        if !(self.kernel_variance > 0.0) {
            return fail(format!(
                "kernel_variance {} must be positive",
                self.kernel_variance
            ));
        }
        if self.gen_filter_order == 0 || !(self.gen_filter_mu > 0.0) {
            return fail("generating filter needs order ≥ 1 and μ > 0".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!(
                "train_fraction {} must be in (0, 1)",
                self.train_fraction
            ));
        }
        Ok(())
    }

    /// Number of leading records used for training.
    pub fn train_len(&self) -> usize {
        (self.t_total as f64 * self.train_fraction).floor() as usize
    }
}

/// Erdős–Rényi directed starting graph and a band-limited unit-norm signal.
///
/// The signal mixes the `bandwidth` lowest Laplacian eigenvectors of the
/// symmetrized graph with standard-normal coefficients. A degenerate draw is
/// retried with the next sub-seed, at most five times.
pub fn generate_base(config: &SyntheticConfig) -> Result<(ExpandingGraph, GraphSignal)> {
    config.validate()?;
    let mut last_err = None;
    for attempt in 0..MAX_BASE_ATTEMPTS {
        let mut rng = seeded(derive_seed(config.seed, BASE_TAG + attempt));
        match base_attempt(config, &mut rng) {
            Ok(base) => return Ok(base),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn base_attempt(
    config: &SyntheticConfig,
    rng: &mut crate::rng::Rng,
) -> Result<(ExpandingGraph, GraphSignal)> {
    let n = config.n0;
    let mut edges = Vec::new();
    for src in 0..n {
        for dst in 0..n {
            if src != dst && rng.random::<f64>() < config.edge_prob {
                edges.push((src, dst, 1.0 - rng.random::<f64>()));
            }
        }
    }
    let mut graph = ExpandingGraph::from_edges(n, &edges)?;
    if graph.n_edges() == 0 {
        return Err(Error::Numerical("starting graph has no edges".into()));
    }
    if config.adjacency_scaling == AdjacencyScaling::MaxInDegree {
        graph = graph.scaled(1.0 / graph.max_row_sum())?;
    }
    let cap = graph.max_weight().expect("nonempty");
    let graph = graph.with_weight_cap(cap)?;

    let dense = graph.to_dense();
    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (0..n)
                .filter(|&k| k != i)
                .map(|k| 0.5 * (dense[i][k] + dense[k][i]))
                .sum()
        } else {
            -0.5 * (dense[i][j] + dense[j][i])
        }
    });
    let eig = SymmetricEigen::new(laplacian);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "Laplacian eigendecomposition failed".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut x = vec![0.0; n];
    for &col in &order[..config.bandwidth] {
        let c: f64 = rng.sample(StandardNormal);
        for (xi, v) in x.iter_mut().zip(eig.eigenvectors.column(col).iter()) {
            *xi += c * v;
        }
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 1e-12 && norm.is_finite()) {
        return Err(Error::Numerical("band-limited signal vanished".into()));
    }
    x.iter_mut().for_each(|v| *v /= norm);
    Ok((graph, GraphSignal::new(x)))
}

/// The generating filter for [`TargetKind::Filter`] data.
pub fn target_filter(
    config: &SyntheticConfig,
    graph: &ExpandingGraph,
    signal: &GraphSignal,
) -> Result<FilterCoefficients> {
    pretrain(graph, signal, config.gen_filter_order, config.gen_filter_mu)
}

/// Streams `t_total` incoming nodes, each attaching to `edges_per_node`
/// distinct uniformly chosen nodes with the median starting-graph weight.
pub fn generate_stream(
    config: &SyntheticConfig,
    base: (ExpandingGraph, GraphSignal),
) -> Result<NodeStream> {
    config.validate()?;
    let (base_graph, base_signal) = base;
    let weight = base_graph
        .median_weight()
        .ok_or_else(|| Error::Config("starting graph has no edges".into()))?;
    let mut rng = seeded(derive_seed(config.seed, STREAM_TAG));
    let h_gen = match config.target_kind {
        TargetKind::Filter => Some(match config.gen_filter_source {
            FilterSource::Base => target_filter(config, &base_graph, &base_signal)?,
            FilterSource::Reference => {
                let reference = SyntheticConfig {
                    seed: derive_seed(config.seed, REFERENCE_TAG),
                    ..config.clone()
                };
                let (graph, signal) = generate_base(&reference)?;
                target_filter(config, &graph, &signal)?
            }
        }),
        _ => None,
    };
    let mut graph = base_graph.clone();
    let mut signal = base_signal.clone();
    let mut shifts = match &h_gen {
        Some(h) => Some(ShiftMatrix::build(&graph, &signal, h.order())?),
        None => None,
    };
    let mut records = Vec::with_capacity(config.t_total);
    for t in 1..=config.t_total {
        let n = graph.n_nodes();
        let mut targets = sample(&mut rng, n, config.edges_per_node).into_vec();
        targets.sort_unstable();
        let a = AttachmentVector::new(n, targets.iter().map(|&i| (i, weight)).collect())?;
        let value = match config.target_kind {
            TargetKind::Filter => {
                let sm = shifts.as_ref().expect("filter data keeps shifts");
                crate::learners::predict_det(&a, sm, h_gen.as_ref().expect("filter").coeffs())?
            }
            TargetKind::Wmean => weighted_mean(&a, signal.values()),
            TargetKind::Kernel => kernel_mean(&a, signal.values(), config.kernel_variance),
        };
        graph.expand(&a)?;
        signal.push(value);
        if let Some(sm) = shifts.as_mut() {
            sm.extend(&graph, &a, value)?;
        }
        records.push(StreamRecord {
            t,
            attachment: a,
            value,
        });
    }
    NodeStream::new(base_graph, base_signal, records, config.train_len())
}

/// Base graph and stream in one call.
pub fn generate(config: &SyntheticConfig) -> Result<NodeStream> {
    generate_stream(config, generate_base(config)?)
}

fn weighted_mean(a: &AttachmentVector, x: &[f64]) -> f64 {
    let total: f64 = a.entries().iter().map(|&(_, w)| w).sum();
    if total == 0.0 {
        return 0.0;
    }
    a.dot(x) / total
}

/// `Σ β_i k_i x_i / Σ β_i k_i` with `β` the attachment weights and
/// `k_i = exp(−(x_i − x̄)²/2σ²)` around the neighbor mean `x̄`.
fn kernel_mean(a: &AttachmentVector, x: &[f64], variance: f64) -> f64 {
    let entries = a.entries();
    if entries.is_empty() {
        return 0.0;
    }
    let center = entries.iter().map(|&(i, _)| x[i]).sum::<f64>() / entries.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for &(i, w) in entries {
        let k = w * (-(x[i] - center).powi(2) / (2.0 * variance)).exp();
        num += k * x[i];
        den += k;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n0: 20,
            t_total: 30,
            seed: 5,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn single_neighbor_means() {
        let a = AttachmentVector::new(3, vec![(1, 1.0)]).unwrap();
        let x = [0.3, -0.7, 2.0];
        assert_eq!(weighted_mean(&a, &x), -0.7);
        assert_eq!(kernel_mean(&a, &x, 10.0), -0.7);
    }

    #[test]
    fn kernel_approaches_weighted_mean() {
        let a = AttachmentVector::new(4, vec![(0, 0.2), (2, 0.5), (3, 0.3)]).unwrap();
        let x = [1.0, 0.0, -0.5, 2.0];
        let wm = weighted_mean(&a, &x);
        assert!((kernel_mean(&a, &x, 1e8) - wm).abs() <= 1e-3 * wm.abs());
    }

    #[test]
    fn base_signal_is_unit_and_smooth() {
        let (g, x) = generate_base(&small()).unwrap();
        assert_eq!(g.n_nodes(), 20);
        assert!((x.values().iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        let scaled = SyntheticConfig {
            adjacency_scaling: AdjacencyScaling::MaxInDegree,
            ..small()
        };
        let (gs, _) = generate_base(&scaled).unwrap();
        assert!((gs.max_row_sum() - 1.0).abs() < 1e-12);
        assert!(g.max_row_sum() > 1.0);
    }

    #[test]
    fn stream_shape() {
        let s = generate(&small()).unwrap();
        assert_eq!(s.records().len(), 30);
        assert_eq!(s.split(), 24);
        for r in s.records() {
            assert_eq!(r.attachment.len(), 20 + r.t - 1);
            assert_eq!(r.attachment.nnz(), 5);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
    }
}
