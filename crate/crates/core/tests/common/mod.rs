//! Shared fixtures: random graphs, synthetic labeled datasets and dense
//! reference implementations built straight from edge lists.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smartquery::gcn::{loss, GcnModel};
use smartquery::graph::bundle::Dataset;
use smartquery::graph::{AdjacencyKind, FeatureMatrix, SparseGraph};
use smartquery::labels::LabelState;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi edge list (may leave isolated nodes).
pub fn random_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> (SparseGraph, Vec<(usize, usize)>) {
    let edges = random_edges(n, p, rng);
    (SparseGraph::from_edges(n, edges.clone()).unwrap(), edges)
}

/// Symmetric 0/1 adjacency from an edge list.
pub fn dense_adjacency(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for &(u, v) in edges {
        if u != v {
            a[(u, v)] = 1.0;
            a[(v, u)] = 1.0;
        }
    }
    a
}

/// `D^{-1/2} A D^{-1/2}` with zero rows for isolated nodes.
pub fn dense_plain_norm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if a[(i, j)] == 0.0 {
            0.0
        } else {
            a[(i, j)] / (deg[i] * deg[j]).sqrt()
        }
    })
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`.
pub fn dense_gcn_norm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let at = a + DMatrix::identity(n, n);
    let deg: Vec<f64> = (0..n).map(|i| at.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| at[(i, j)] / (deg[i] * deg[j]).sqrt())
}

pub fn to_dmatrix(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &Array2<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - b[[i, j]]).abs());
        }
    }
    worst
}

/// Planted-partition dataset: `k` equal communities with intra/inter edge
/// probabilities `p_in`/`p_out`, and sparse binary features where each
/// class prefers its own block of `d / k` columns.
pub fn planted_dataset(n: usize, k: usize, d: usize, p_in: f64, p_out: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if r.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let block = (d / k).max(1);
    let features = Array2::from_shape_fn((n, d), |(i, j)| {
        let own = j / block == labels[i];
        let p = if own { 0.3 } else { 0.03 };
        if r.gen::<f64>() < p {
            1.0
        } else {
            0.0
        }
    });
    Dataset {
        name: format!("planted-{n}-{k}"),
        graph: SparseGraph::from_edges(n, edges).unwrap(),
        features: FeatureMatrix::new(features).unwrap(),
        labels,
        k,
    }
}

/// Largest relative error between analytic and central-difference gradients.
pub fn worst_gradient_error(model: &GcnModel, g: &SparseGraph, x: &FeatureMatrix, st: &LabelState) -> f64 {
    let adj = g.normalized(AdjacencyKind::GcnSelfLoop);
    let (_, grads) = model.loss_and_gradients(adj, x, st).unwrap();
    let h = 1e-5;
    let eval = |m: &GcnModel| loss(&m.forward(adj, x).unwrap(), st, m).unwrap();
    let mut worst = 0.0_f64;
    for layer in 0..2 {
        let analytic = if layer == 0 { &grads.w1 } else { &grads.w2 };
        for idx in ndarray::indices(analytic.dim()) {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let (p, m) = if layer == 0 {
                (plus.w1_mut(), minus.w1_mut())
            } else {
                (plus.w2_mut(), minus.w2_mut())
            };
            p[idx] += h;
            m[idx] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic[idx];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}
