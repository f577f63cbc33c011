//! Node centralities on the directed expanding graph.
//!
//! An edge `j → i` is stored as `A[i][j]`. Degree is the out-degree count,
//! betweenness uses unweighted shortest paths, eigenvector centrality is the
//! dominant eigenvector of `Aᵀ`, and PageRank walks along edge direction with
//! weight-proportional transitions.

use std::collections::VecDeque;

use crate::graph::ExpandingGraph;

/// Number of outgoing edges of each node.
pub fn out_degree(graph: &ExpandingGraph) -> Vec<f64> {
    let mut deg = vec![0.0; graph.n_nodes()];
    for (src, _, _) in graph.edges() {
        deg[src] += 1.0;
    }
    deg
}

/// Brandes accumulation over unweighted directed shortest paths.
pub fn betweenness(graph: &ExpandingGraph) -> Vec<f64> {
    let n = graph.n_nodes();
    let out = out_lists(graph);
    let mut centrality = vec![0.0; n];

    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];

    for s in 0..n {
        if out[s].is_empty() {
            continue;
        }
        for &v in &stack {
            sigma[v] = 0.0;
            dist[v] = usize::MAX;
            delta[v] = 0.0;
            preds[v].clear();
        }
        stack.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            let next = dist[v] + 1;
            for &w in &out[v] {
                let w = w as usize;
                if dist[w] == usize::MAX {
                    dist[w] = next;
                    queue.push_back(w);
                }
                if dist[w] == next {
                    sigma[w] += sigma[v];
                    preds[w].push(v as u32);
                }
            }
        }
        for &w in stack.iter().rev() {
            let coeff = (1.0 + delta[w]) / sigma[w];
            for &v in &preds[w] {
                let v = v as usize;
                delta[v] += sigma[v] * coeff;
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    centrality
}

/// Betweenness maintained across arrivals of sink nodes.
///
/// An incoming node has no outgoing edges when it arrives, so it never lies
/// inside a shortest path between existing nodes; only paths ending at it are
/// new. Keeps all-pairs hop distances and path counts, `O(N²)` per arrival.
#[derive(Debug, Clone)]
pub struct IncrementalBetweenness {
    dist: Vec<Vec<u32>>,
    sigma: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

const UNREACHED: u32 = u32::MAX;

impl IncrementalBetweenness {
    pub fn new(graph: &ExpandingGraph) -> Self {
        let n = graph.n_nodes();
        let out = out_lists(graph);
        let mut dist = Vec::with_capacity(n);
        let mut sigma = Vec::with_capacity(n);
        let mut queue = VecDeque::with_capacity(n);
        for s in 0..n {
            let mut d = vec![UNREACHED; n];
            let mut sg = vec![0.0; n];
            d[s] = 0;
            sg[s] = 1.0;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &w in &out[v] {
                    let w = w as usize;
                    if d[w] == UNREACHED {
                        d[w] = d[v] + 1;
                        queue.push_back(w);
                    }
                    if d[w] == d[v] + 1 {
                        sg[w] += sg[v];
                    }
                }
            }
            dist.push(d);
            sigma.push(sg);
        }
        Self {
            dist,
            sigma,
            scores: betweenness(graph),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Adds a node whose in-edges are `row` (the new adjacency row).
    pub fn push_sink(&mut self, row: &[(usize, f64)]) {
        let t = self.n_nodes();
        let mut to_t = vec![UNREACHED; t];
        let mut paths_to_t = vec![0.0; t];
        for s in 0..t {
            let ds = &self.dist[s];
            let best = row.iter().map(|&(i, _)| ds[i]).min().unwrap_or(UNREACHED);
            if best != UNREACHED {
                to_t[s] = best + 1;
                paths_to_t[s] = row
                    .iter()
                    .filter(|&&(i, _)| ds[i] == best)
                    .map(|&(i, _)| self.sigma[s][i])
                    .sum();
            }
        }
        for s in 0..t {
            let d_st = to_t[s];
            if d_st == UNREACHED {
                continue;
            }
            let inv = 1.0 / paths_to_t[s];
            let (ds, ss) = (&self.dist[s], &self.sigma[s]);
            for v in 0..t {
                let (d_sv, d_vt) = (ds[v], to_t[v]);
                if v != s && d_sv != UNREACHED && d_vt != UNREACHED && d_sv + d_vt == d_st {
                    self.scores[v] += ss[v] * paths_to_t[v] * inv;
                }
            }
        }
        for s in 0..t {
            self.dist[s].push(to_t[s]);
            self.sigma[s].push(paths_to_t[s]);
        }
        let mut d = vec![UNREACHED; t + 1];
        let mut sg = vec![0.0; t + 1];
        d[t] = 0;
        sg[t] = 1.0;
        self.dist.push(d);
        self.sigma.push(sg);
        self.scores.push(0.0);
    }
}

/// Result of an iterative centrality solve.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeCentrality {
    pub scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Power iteration on `Aᵀ`, L1-normalized, until the L1 change drops below
/// `tol` or `max_iter` is reached. `warm_start` may be shorter than the graph;
/// missing entries start at the uniform value.
pub fn eigenvector(
    graph: &ExpandingGraph,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&[f64]>,
) -> IterativeCentrality {
    let n = graph.n_nodes();
    let mut x = initial_vector(n, warm_start);
    for iter in 1..=max_iter {
        let mut next = graph.apply_transpose(&x).expect("sized to graph");
        let norm: f64 = next.iter().map(|v| v.abs()).sum();
        if norm == 0.0 || !norm.is_finite() {
            return IterativeCentrality {
                scores: x,
                converged: false,
                iterations: iter,
            };
        }
        next.iter_mut().for_each(|v| *v /= norm);
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < tol {
            return IterativeCentrality {
                scores: x,
                converged: true,
                iterations: iter,
            };
        }
    }
    IterativeCentrality {
        scores: x,
        converged: false,
        iterations: max_iter,
    }
}

/// PageRank with uniform teleportation; mass at nodes without out-edges is
/// spread uniformly.
pub fn pagerank(
    graph: &ExpandingGraph,
    damping: f64,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&[f64]>,
) -> IterativeCentrality {
    let n = graph.n_nodes();
    let nf = n as f64;
    let mut out_weight = vec![0.0; n];
    for (src, _, w) in graph.edges() {
        out_weight[src] += w;
    }
    let mut x = initial_vector(n, warm_start);
    let mut scaled = vec![0.0; n];
    for iter in 1..=max_iter {
        let mut dangling = 0.0;
        for j in 0..n {
            if out_weight[j] > 0.0 {
                scaled[j] = x[j] / out_weight[j];
            } else {
                scaled[j] = 0.0;
                dangling += x[j];
            }
        }
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                base + damping
                    * graph
                        .row(i)
                        .iter()
                        .map(|&(j, w)| w * scaled[j])
                        .sum::<f64>()
            })
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < tol {
            return IterativeCentrality {
                scores: x,
                converged: true,
                iterations: iter,
            };
        }
    }
    IterativeCentrality {
        scores: x,
        converged: false,
        iterations: max_iter,
    }
}

fn out_lists(graph: &ExpandingGraph) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); graph.n_nodes()];
    for (src, dst, _) in graph.edges() {
        out[src].push(dst as u32);
    }
    out
}

fn initial_vector(n: usize, warm_start: Option<&[f64]>) -> Vec<f64> {
    let uniform = 1.0 / n as f64;
    let mut x = vec![uniform; n];
    if let Some(warm) = warm_start {
        for (xi, &wi) in x.iter_mut().zip(warm) {
            *xi = wi.max(0.0);
        }
        let total: f64 = x.iter().sum();
        if total > 0.0 {
            x.iter_mut().for_each(|v| *v /= total);
        } else {
            x.iter_mut().for_each(|v| *v = uniform);
        }
    }
    x
}
