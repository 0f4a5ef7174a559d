mod common;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use smartquery::centrality::{pagerank, PageRankConfig};
use smartquery::gcn::evaluate;
use smartquery::gcn::metrics::f1_scores;
use smartquery::graph::{AdjacencyKind, SparseGraph};
use smartquery::propagation::{propagate, LabelSeed, LpConfig};

/// `(1-α)(I - αS)^{-1} Y`.
fn lp_closed_form(s: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let n = s.nrows();
    let m = DMatrix::identity(n, n) - s * alpha;
    m.lu().solve(y).unwrap() * (1.0 - alpha)
}

/// Stationary PageRank by a direct linear solve; degree-0 columns spread
/// uniformly.
fn pagerank_dense(a: &DMatrix<f64>, beta: f64) -> DVector<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let deg: f64 = a.column(j).sum();
        for i in 0..n {
            m[(i, j)] = if deg == 0.0 { 1.0 / n as f64 } else { a[(i, j)] / deg };
        }
    }
    let lhs = DMatrix::identity(n, n) - m * beta;
    lhs.lu().solve(&DVector::from_element(n, (1.0 - beta) / n as f64)).unwrap()
}

#[test]
fn normalized_adjacencies_match_dense_construction() {
    let mut r = common::rng(1);
    for _ in 0..20 {
        let n = r.gen_range(1..40);
        let (g, edges) = common::random_graph(n, r.gen_range(0.0..0.5), &mut r);
        let a = common::dense_adjacency(n, &edges);
        let gcn = g.normalized(AdjacencyKind::GcnSelfLoop).to_dense();
        let plain = g.normalized(AdjacencyKind::PlainSymmetric).to_dense();
        assert!(common::max_abs_diff(&common::dense_gcn_norm(&a), &gcn) < 1e-15);
        assert!(common::max_abs_diff(&common::dense_plain_norm(&a), &plain) < 1e-15);
    }
}

#[test]
fn sparse_product_matches_dense() {
    let mut r = common::rng(2);
    for _ in 0..10 {
        let n = r.gen_range(2..60);
        let (g, edges) = common::random_graph(n, 0.2, &mut r);
        let m = Array2::from_shape_fn((n, 5), |_| r.gen_range(-1.0..1.0));
        let s = common::dense_gcn_norm(&common::dense_adjacency(n, &edges));
        let got = g.normalized(AdjacencyKind::GcnSelfLoop).spmm(m.view()).unwrap();
        assert!(common::max_abs_diff(&(s * common::to_dmatrix(&m)), &got) < 1e-12);
    }
}

#[test]
fn label_spreading_converges_to_closed_form() {
    let mut r = common::rng(3);
    for _ in 0..20 {
        let n = r.gen_range(2..50);
        let k = r.gen_range(2..5);
        let (g, edges) = common::random_graph(n, r.gen_range(0.05..0.4), &mut r);
        let mut pairs = Vec::new();
        for v in 0..n {
            if r.gen_bool(0.3) {
                pairs.push((v, r.gen_range(0..k)));
            }
        }
        let seed = LabelSeed::from_pairs(n, k, pairs);
        let s = common::dense_plain_norm(&common::dense_adjacency(n, &edges));
        for alpha in [0.1, 0.5, 0.9] {
            let exact = lp_closed_form(&s, &common::to_dmatrix(seed.matrix()), alpha);
            let tight = LpConfig {
                alpha,
                tol: 1e-13,
                ..Default::default()
            };
            let f = propagate(g.normalized(AdjacencyKind::PlainSymmetric), seed.matrix().view(), &tight).unwrap();
            assert!(f.converged);
            assert!(common::max_abs_diff(&exact, &f.f) < 1e-10);
            // default stopping rule: geometric tail bounds the error by tol·α/(1-α)
            let default = LpConfig { alpha, ..Default::default() };
            let f = propagate(g.normalized(AdjacencyKind::PlainSymmetric), seed.matrix().view(), &default).unwrap();
            let bound = default.tol * alpha / (1.0 - alpha);
            assert!(common::max_abs_diff(&exact, &f.f) <= bound * 1.01 + 1e-15);
        }
    }
}

#[test]
fn pagerank_matches_linear_solve_with_dangling_nodes() {
    let mut r = common::rng(4);
    for case in 0..20 {
        let n = r.gen_range(2..50);
        let (g, mut edges) = common::random_graph(n, r.gen_range(0.02..0.3), &mut r);
        if case % 2 == 0 {
            // force at least one isolated node
            edges.retain(|&(u, v)| u != 0 && v != 0);
        }
        let g = if case % 2 == 0 { SparseGraph::from_edges(n, edges.clone()).unwrap() } else { g };
        let cfg = PageRankConfig::default();
        let pr = pagerank(&g, &cfg);
        assert!(pr.converged);
        let exact = pagerank_dense(&common::dense_adjacency(n, &edges), cfg.beta);
        for i in 0..n {
            assert!((pr.scores[i] - exact[i]).abs() < 1e-8);
        }
        assert!((pr.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn f1_on_hand_worked_example() {
    // truth 0 0 1 1 2, predicted 0 1 1 1 0
    let pairs = [(0, 0), (0, 1), (1, 1), (1, 1), (2, 0)];
    let s = f1_scores(&pairs, 3);
    assert!((s.micro_f1 - 0.6).abs() < 1e-12);
    // class 0: p=1/2 r=1/2 → .5; class 1: p=2/3 r=1 → .8; class 2: 0
    assert!((s.macro_f1 - 1.3 / 3.0).abs() < 1e-12);
    let probs = ndarray::array![[0.9, 0.1, 0.0], [0.2, 0.7, 0.1], [0.0, 0.0, 1.0]];
    let e = evaluate(&probs, &[0, 0, 2], &[true, true, false], 3);
    assert!((e.micro_f1 - 0.5).abs() < 1e-12);
}
