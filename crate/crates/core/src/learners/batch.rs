use nalgebra::{DMatrix, DVector};

use super::FilterCoefficients;
use crate::error::{check_dim, Error, Result};
use crate::graph::{AttachmentVector, ExpandingGraph, GraphSignal, ShiftMatrix};

/// Running Gram matrix `GᵀG` and right-hand side `Gᵀx` of the regularized
/// least-squares problem `min Σ_t (g_tᵀh − x_t)² + μ‖h‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchAccumulator {
    order: usize,
    gram: Vec<f64>,
    rhs: Vec<f64>,
    count: usize,
}

impl BatchAccumulator {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            gram: vec![0.0; order * order],
            rhs: vec![0.0; order],
            count: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Adds one row `g_t = A_xᵀ a_t` with target `x_t`.
    pub fn push(&mut self, g: &[f64], x: f64) -> Result<()> {
        check_dim("batch: feature row", self.order, g.len())?;
        let k = self.order;
        for i in 0..k {
            self.rhs[i] += g[i] * x;
            for j in 0..k {
                self.gram[i * k + j] += g[i] * g[j];
            }
        }
        self.count += 1;
        Ok(())
    }

    /// `tr(GᵀG)`.
    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.gram[i * self.order + i]).sum()
    }

    /// Solves `(GᵀG + μI)h = Gᵀx` by Cholesky.
    pub fn solve(&self, mu: f64) -> Result<FilterCoefficients> {
        if self.count == 0 {
            return Err(Error::Config(
                "batch solve needs at least one sample".into(),
            ));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!(
                "batch regularization {mu} must be positive"
            )));
        }
        let k = self.order;
        let system = DMatrix::from_row_slice(k, k, &self.gram) + DMatrix::identity(k, k) * mu;
        let chol = system
            .cholesky()
            .ok_or_else(|| Error::Numerical("normal equations are not positive definite".into()))?;
        let h = chol.solve(&DVector::from_column_slice(&self.rhs));
        Ok(FilterCoefficients::new(h.iter().copied().collect()))
    }

    /// Gradient of the batch objective at `h`: `2(GᵀG h − Gᵀx) + 2μh`.
    pub fn objective_gradient(&self, h: &[f64], mu: f64) -> Vec<f64> {
        let k = self.order;
        (0..k)
            .map(|i| {
                let gh: f64 = (0..k).map(|j| self.gram[i * k + j] * h[j]).sum();
                2.0 * (gh - self.rhs[i]) + 2.0 * mu * h[i]
            })
            .collect()
    }
}

/// Closed-form batch filter from feature rows `g_t` and targets `x_t`.
pub fn batch_solve(rows: &[Vec<f64>], targets: &[f64], mu: f64) -> Result<FilterCoefficients> {
    check_dim("batch: targets", rows.len(), targets.len())?;
    let order = rows.first().map_or(0, Vec::len);
    let mut acc = BatchAccumulator::new(order);
    for (g, &x) in rows.iter().zip(targets) {
        acc.push(g, x)?;
    }
    acc.solve(mu)
}

/// Masked self-prediction rows on the starting graph: node `i` is treated as
/// if it arrived with attachment `A[i, :]` onto the signal with `x_i`
/// zeroed, and `x_i` is the target.
pub(crate) fn self_prediction_rows(
    graph: &ExpandingGraph,
    signal: &GraphSignal,
    nodes: &[usize],
    order: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    check_dim("pretrain: signal length", graph.n_nodes(), signal.len())?;
    let n = graph.n_nodes();
    let mut rows = Vec::with_capacity(nodes.len());
    let mut targets = Vec::with_capacity(nodes.len());
    for &i in nodes {
        if i >= n {
            return Err(Error::Config(format!(
                "pretrain node {i} outside {n} nodes"
            )));
        }
        let mut masked = signal.values().to_vec();
        masked[i] = 0.0;
        let sm = ShiftMatrix::build(graph, &GraphSignal::new(masked), order)?;
        let a = AttachmentVector::new(n, graph.row(i).to_vec())?;
        rows.push(sm.transpose_apply_sparse(&a)?);
        targets.push(signal.values()[i]);
    }
    Ok((rows, targets))
}

/// Pre-training over every node of the starting graph.
pub fn pretrain(
    graph: &ExpandingGraph,
    signal: &GraphSignal,
    order: usize,
    mu: f64,
) -> Result<FilterCoefficients> {
    let nodes: Vec<usize> = (0..graph.n_nodes()).collect();
    pretrain_on_nodes(graph, signal, &nodes, order, mu)
}

/// Pre-training restricted to the self-prediction samples of `nodes`.
pub fn pretrain_on_nodes(
    graph: &ExpandingGraph,
    signal: &GraphSignal,
    nodes: &[usize],
    order: usize,
    mu: f64,
) -> Result<FilterCoefficients> {
    if graph.n_nodes() == 0 || nodes.is_empty() {
        return Err(Error::Config(
            "pre-training needs a nonempty starting graph".into(),
        ));
    }
    let (rows, targets) = self_prediction_rows(graph, signal, nodes, order)?;
    batch_solve(&rows, &targets, mu)
}
