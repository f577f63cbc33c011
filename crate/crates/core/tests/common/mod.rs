//! Shared instance builders and dense oracles for the integration tests.
#![allow(dead_code)]

use ogf::graph::{AttachmentVector, ExpandingGraph, GraphSignal, ShiftMatrix};
use ogf::rng::seeded;
pub use ogf::rng::Rng;
use rand::Rng as _;

pub fn rng(seed: u64) -> Rng {
    seeded(seed)
}

/// Directed ER graph with `U(0, 1]` weights, rescaled to unit max in-degree
/// so high shift powers stay well conditioned.
pub fn random_graph(rng: &mut Rng, n: usize, edge_prob: f64) -> ExpandingGraph {
    let mut edges = Vec::new();
    for src in 0..n {
        for dst in 0..n {
            if src != dst && rng.random::<f64>() < edge_prob {
                edges.push((src, dst, 1.0 - rng.random::<f64>()));
            }
        }
    }
    let g = ExpandingGraph::from_edges(n, &edges).unwrap();
    let rs = g.max_row_sum();
    if rs > 0.0 {
        g.scaled(1.0 / rs).unwrap()
    } else {
        g
    }
}

pub fn random_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

/// `k` distinct targets among `n` nodes, weights in `(0, 1]`.
pub fn random_attachment(rng: &mut Rng, n: usize, k: usize) -> AttachmentVector {
    let idx = rand::seq::index::sample(rng, n, k.min(n)).into_vec();
    AttachmentVector::new(
        n,
        idx.into_iter()
            .map(|i| (i, 1.0 - rng.random::<f64>()))
            .collect(),
    )
    .unwrap()
}

pub fn dense_mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum())
        .collect()
}

/// Columns `x, Ax, …, A^{K−1}x` by dense products.
pub fn dense_shift_columns(graph: &ExpandingGraph, x: &[f64], order: usize) -> Vec<Vec<f64>> {
    let a = graph.to_dense();
    let mut cols = vec![x.to_vec()];
    while cols.len() < order {
        let next = dense_mat_vec(&a, cols.last().unwrap());
        cols.push(next);
    }
    cols
}

/// `A_x h` from dense columns.
pub fn dense_filter_output(cols: &[Vec<f64>], h: &[f64]) -> Vec<f64> {
    let n = cols[0].len();
    (0..n)
        .map(|i| cols.iter().zip(h).map(|(c, hk)| c[i] * hk).sum())
        .collect()
}

pub fn shift(graph: &ExpandingGraph, x: &[f64], order: usize) -> ShiftMatrix {
    ShiftMatrix::build(graph, &GraphSignal::new(x.to_vec()), order).unwrap()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(floor)
}

/// Central differences of `f` at `x`. Exact up to rounding for quadratics,
/// so a coarse relative step keeps cancellation error small.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let step = rel_step * x[i].abs().max(1.0);
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += step;
            down[i] -= step;
            (f(&up) - f(&down)) / (2.0 * step)
        })
        .collect()
}

/// Uniform point in the interior of the simplex, every entry at least
/// `floor / len`.
pub fn interior_simplex(rng: &mut Rng, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| floor + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// Writes a criterion line past the test harness's output capture.
pub fn report(id: &str, name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{id}] {verdict} {name}: {detail}");
}
