//! Expanding directed graphs, attachment vectors and node signals.
//!
//! Adjacency convention: entry `A[i][j]` is the weight of the edge from node
//! `j` toward node `i`. An incoming node's attachment vector therefore becomes
//! the new last row of the adjacency, and its last column stays zero until a
//! later node attaches to it.

pub mod io;
mod shift;

pub use shift::ShiftMatrix;

use crate::error::{check_dim, Error, Result};

/// Sparse incoming-node connectivity over the existing `len` nodes.
///
/// Entries are kept sorted by node index; zero weights are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentVector {
    len: usize,
    entries: Vec<(usize, f64)>,
}

impl AttachmentVector {
    pub fn new(len: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(i, _)| i);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Invariant(format!(
                    "duplicate attachment index {}",
                    pair[0].0
                )));
            }
        }
        for &(i, w) in &entries {
            if i >= len {
                return Err(Error::Invariant(format!(
                    "attachment index {i} out of range for {len} nodes"
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Invariant(format!(
                    "attachment weight {w} at node {i} is not in (0, w_h]"
                )));
            }
        }
        Ok(Self { len, entries })
    }

    /// An attachment with no edges.
    pub fn empty(len: usize) -> Self {
        Self {
            len,
            entries: Vec::new(),
        }
    }

    /// Builds from a dense vector, dropping exact zeros.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (i, w))
            .collect();
        Self::new(values.len(), entries)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.len];
        for &(i, w) in &self.entries {
            dense[i] = w;
        }
        dense
    }

    /// Sparse inner product with a dense vector of the same length.
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * values[i]).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum()
    }

    /// Checks the edge-count and weight caps (at most `max_edges` nonzeros,
    /// every weight at most `weight_cap`).
    pub fn check_bounds(&self, max_edges: usize, weight_cap: f64) -> Result<()> {
        if self.nnz() > max_edges {
            return Err(Error::Invariant(format!(
                "attachment has {} edges, cap is {max_edges}",
                self.nnz()
            )));
        }
        if let Some(&(i, w)) = self.entries.iter().find(|&&(_, w)| w > weight_cap) {
            return Err(Error::Invariant(format!(
                "attachment weight {w} at node {i} exceeds w_h = {weight_cap}"
            )));
        }
        Ok(())
    }
}

/// Real-valued signal indexed by node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphSignal(Vec<f64>);

impl GraphSignal {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn push(&mut self, value: f64) {
        self.0.push(value);
    }

    /// The temporary signal seen by an incoming node: existing values plus an
    /// explicit zero at the new node.
    pub fn with_placeholder(&self) -> GraphSignal {
        let mut values = Vec::with_capacity(self.0.len() + 1);
        values.extend_from_slice(&self.0);
        values.push(0.0);
        GraphSignal(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for GraphSignal {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Directed weighted graph that grows by one node at a time.
///
/// Storage is row-major: `rows[i]` lists `(j, A[i][j])` for the in-edges of
/// node `i`, sorted by `j`. Existing rows are never touched by [`expand`].
///
/// [`expand`]: ExpandingGraph::expand
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandingGraph {
    rows: Vec<Vec<(usize, f64)>>,
    n_edges: usize,
    origin_size: usize,
    weight_cap: f64,
}

impl ExpandingGraph {
    /// Edgeless graph on `n_nodes` nodes with no weight cap.
    pub fn new(n_nodes: usize) -> Self {
        Self {
            rows: vec![Vec::new(); n_nodes],
            n_edges: 0,
            origin_size: n_nodes,
            weight_cap: f64::INFINITY,
        }
    }

    /// Builds a starting graph from `(src, dst, weight)` edges, each meaning
    /// an edge from `src` toward `dst`.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_nodes];
        for &(src, dst, w) in edges {
            if src >= n_nodes || dst >= n_nodes {
                return Err(Error::Invariant(format!(
                    "edge ({src}, {dst}) out of range for {n_nodes} nodes"
                )));
            }
            if src == dst {
                return Err(Error::Invariant(format!("self-loop at node {src}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Invariant(format!(
                    "edge ({src}, {dst}) has non-positive weight {w}"
                )));
            }
            rows[dst].push((src, w));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if let Some(pair) = row.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(Error::Invariant(format!(
                    "duplicate edge ({}, {i})",
                    pair[0].0
                )));
            }
        }
        Ok(Self {
            rows,
            n_edges: edges.len(),
            origin_size: n_nodes,
            weight_cap: f64::INFINITY,
        })
    }

    /// Sets the weight cap `w_h`; fails if an existing edge exceeds it.
    pub fn with_weight_cap(mut self, weight_cap: f64) -> Result<Self> {
        if !(weight_cap > 0.0) {
            return Err(Error::Config(format!(
                "weight cap {weight_cap} must be positive"
            )));
        }
        if let Some(w) = self.weights().find(|&w| w > weight_cap) {
            return Err(Error::Invariant(format!(
                "edge weight {w} exceeds w_h = {weight_cap}"
            )));
        }
        self.weight_cap = weight_cap;
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn origin_size(&self) -> usize {
        self.origin_size
    }

    pub fn weight_cap(&self) -> f64 {
        self.weight_cap
    }

    /// In-edges of node `i` as `(source, weight)` pairs.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// All edges as `(src, dst, weight)`, ordered by destination then source.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(dst, row)| row.iter().map(move |&(src, w)| (src, dst, w)))
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().flat_map(|row| row.iter().map(|&(_, w)| w))
    }

    pub fn max_weight(&self) -> Option<f64> {
        self.weights().reduce(f64::max)
    }

    /// Median edge weight (mean of the two middle values for even counts).
    pub fn median_weight(&self) -> Option<f64> {
        let mut weights: Vec<f64> = self.weights().collect();
        if weights.is_empty() {
            return None;
        }
        weights.sort_by(f64::total_cmp);
        let mid = weights.len() / 2;
        Some(if weights.len() % 2 == 1 {
            weights[mid]
        } else {
            0.5 * (weights[mid - 1] + weights[mid])
        })
    }

    /// Appends the incoming node described by `a`.
    ///
    /// The new last row is `a`, the new last column is zero and every prior
    /// entry is left untouched. Validation happens before any mutation.
    pub fn expand(&mut self, a: &AttachmentVector) -> Result<()> {
        check_dim("expand: attachment length", self.n_nodes(), a.len())?;
        if let Some(&(i, w)) = a.entries().iter().find(|&&(_, w)| w > self.weight_cap) {
            return Err(Error::Invariant(format!(
                "attachment weight {w} at node {i} exceeds w_h = {}",
                self.weight_cap
            )));
        }
        self.rows.push(a.entries().to_vec());
        self.n_edges += a.nnz();
        Ok(())
    }

    /// Non-mutating variant of [`expand`](Self::expand).
    pub fn expanded(&self, a: &AttachmentVector) -> Result<Self> {
        let mut next = self.clone();
        next.expand(a)?;
        Ok(next)
    }

    /// Sparse shift `A x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("graph shift: signal length", self.n_nodes(), x.len())?;
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect())
    }

    /// Sparse adjoint shift `Aᵀ x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(
            "graph adjoint shift: signal length",
            self.n_nodes(),
            x.len(),
        )?;
        let mut out = vec![0.0; self.n_nodes()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[j] += w * x[i];
            }
        }
        Ok(out)
    }

    /// Out-neighbour lists: `out[j]` holds `(i, A[i][j])` for every edge `j → i`.
    pub fn out_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.n_nodes()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[j].push((i, w));
            }
        }
        out
    }

    /// Dense row-major copy of the adjacency. Intended for small graphs.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_nodes();
        let mut dense = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                dense[i][j] = w;
            }
        }
        dense
    }

    /// Multiplies every weight by `factor` (and the cap with it).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Config(format!(
                "scale factor {factor} must be positive"
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| (j, w * factor)).collect())
            .collect();
        Ok(Self {
            rows,
            n_edges: self.n_edges,
            origin_size: self.origin_size,
            weight_cap: self.weight_cap * factor,
        })
    }

    /// Largest weighted in-degree (row sum).
    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expand_single_node_graph() {
        let mut g = ExpandingGraph::new(1);
        g.expand(&AttachmentVector::new(1, vec![(0, 0.7)]).unwrap())
            .unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.to_dense(), vec![vec![0.0, 0.0], vec![0.7, 0.0]]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1, 0.7)]);
    }

    #[test]
    fn zero_attachment_adds_isolated_node() {
        let mut g = ExpandingGraph::from_edges(3, &[(0, 1, 1.0), (2, 0, 0.5)]).unwrap();
        let before = g.n_edges();
        g.expand(&AttachmentVector::empty(3)).unwrap();
        assert_eq!(g.n_nodes(), 4);
        assert_eq!(g.n_edges(), before);
        assert!(g.row(3).is_empty());
    }

    #[test]
    fn expand_rejects_wrong_length() {
        let mut g = ExpandingGraph::new(3);
        let err = g.expand(&AttachmentVector::empty(2)).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert_eq!(g.n_nodes(), 3);
    }

    #[test]
    fn expand_rejects_weight_above_cap() {
        let mut g = ExpandingGraph::from_edges(2, &[(0, 1, 0.5)])
            .unwrap()
            .with_weight_cap(1.0)
            .unwrap();
        let a = AttachmentVector::new(2, vec![(1, 1.5)]).unwrap();
        assert!(matches!(g.expand(&a), Err(Error::Invariant(_))));
    }

    #[test]
    fn attachment_rejects_bad_entries() {
        assert!(AttachmentVector::new(3, vec![(3, 1.0)]).is_err());
        assert!(AttachmentVector::new(3, vec![(0, 0.0)]).is_err());
        assert!(AttachmentVector::new(3, vec![(0, -1.0)]).is_err());
        assert!(AttachmentVector::new(3, vec![(1, 1.0), (1, 2.0)]).is_err());
        let a = AttachmentVector::new(4, vec![(2, 1.0), (0, 0.5)]).unwrap();
        assert_eq!(a.entries(), &[(0, 0.5), (2, 1.0)]);
        assert!(a.check_bounds(2, 1.0).is_ok());
        assert!(a.check_bounds(1, 1.0).is_err());
        assert!(a.check_bounds(2, 0.9).is_err());
    }

    #[test]
    fn graph_rejects_self_loops_and_duplicates() {
        assert!(ExpandingGraph::from_edges(2, &[(1, 1, 1.0)]).is_err());
        assert!(ExpandingGraph::from_edges(2, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
    }

    #[test]
    fn placeholder_keeps_existing_bits() {
        let x = GraphSignal::new(vec![0.1, -2.5, 1e-300]);
        let xt = x.with_placeholder();
        assert_eq!(&xt.values()[..3], x.values());
        assert_eq!(xt.values()[3], 0.0);
    }

    #[test]
    fn median_weight_even_and_odd() {
        let g = ExpandingGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 3.0), (2, 0, 2.0)]).unwrap();
        assert_eq!(g.median_weight(), Some(2.0));
        let g = ExpandingGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 4.0)]).unwrap();
        assert_eq!(g.median_weight(), Some(2.5));
        assert_eq!(ExpandingGraph::new(2).median_weight(), None);
    }

    #[test]
    fn shift_and_adjoint_are_consistent() {
        let g = ExpandingGraph::from_edges(3, &[(0, 1, 2.0), (1, 2, 3.0), (2, 0, 0.5)]).unwrap();
        let x = [1.0, -1.0, 2.0];
        let y = [0.3, 0.7, -0.2];
        let ax = g.apply(&x).unwrap();
        let aty = g.apply_transpose(&y).unwrap();
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = aty.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-15);
    }
}
