use super::{AttachmentVector, ExpandingGraph, GraphSignal};
use crate::error::{check_dim, Error, Result};

/// The `N × K` matrix `[x, A x, …, A^{K-1} x]` of successive shifts of the
/// current signal, stored as dense columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMatrix {
    columns: Vec<Vec<f64>>,
}

impl ShiftMatrix {
    /// Builds the shift matrix by `K − 1` sparse shifts of `signal`.
    pub fn build(graph: &ExpandingGraph, signal: &GraphSignal, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("filter order K must be at least 1".into()));
        }
        check_dim("shift matrix: signal length", graph.n_nodes(), signal.len())?;
        let mut columns = Vec::with_capacity(order);
        columns.push(signal.values().to_vec());
        for k in 1..order {
            let next = graph.apply(&columns[k - 1])?;
            columns.push(next);
        }
        Ok(Self { columns })
    }

    /// Incremental update after the graph gained the node described by
    /// `prev_attachment` and its signal value was revealed.
    ///
    /// Existing rows are unchanged by the block structure of the expanded
    /// adjacency; the new row is `[x_new, aᵀc_1, …, aᵀc_{K-1}]`, so the work
    /// is `O(K · nnz(a))`.
    pub fn extend(
        &mut self,
        graph_after: &ExpandingGraph,
        prev_attachment: &AttachmentVector,
        new_signal_value: f64,
    ) -> Result<()> {
        let rows = self.n_rows();
        check_dim("shift extend: graph size", rows + 1, graph_after.n_nodes())?;
        check_dim(
            "shift extend: attachment length",
            rows,
            prev_attachment.len(),
        )?;
        if graph_after.row(rows) != prev_attachment.entries() {
            return Err(Error::Invariant(
                "shift extend: graph's newest row differs from the attachment".into(),
            ));
        }
        let order = self.order();
        let mut new_row = Vec::with_capacity(order);
        new_row.push(new_signal_value);
        for k in 1..order {
            new_row.push(prev_attachment.dot(&self.columns[k - 1]));
        }
        for (column, value) in self.columns.iter_mut().zip(new_row) {
            column.push(value);
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn entry(&self, row: usize, k: usize) -> f64 {
        self.columns[k][row]
    }

    /// `A_x h` (length `N`).
    pub fn apply(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_dim("shift apply: filter length", self.order(), h.len())?;
        let mut out = vec![0.0; self.n_rows()];
        for (column, &hk) in self.columns.iter().zip(h) {
            if hk == 0.0 {
                continue;
            }
            for (o, &c) in out.iter_mut().zip(column) {
                *o += hk * c;
            }
        }
        Ok(out)
    }

    /// `A_xᵀ a` for a sparse attachment (length `K`).
    pub fn transpose_apply_sparse(&self, a: &AttachmentVector) -> Result<Vec<f64>> {
        check_dim("shift adjoint: attachment length", self.n_rows(), a.len())?;
        Ok(self.columns.iter().map(|column| a.dot(column)).collect())
    }

    /// `A_xᵀ v` for a dense vector (length `K`).
    pub fn transpose_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("shift adjoint: vector length", self.n_rows(), v.len())?;
        Ok(self
            .columns
            .iter()
            .map(|column| column.iter().zip(v).map(|(c, x)| c * x).sum())
            .collect())
    }
}
