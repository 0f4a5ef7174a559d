//! Baseline query strategies: entropy, degree, coreset (greedy K-center) and
//! AGE (time-weighted blend of entropy, embedding density and PageRank).

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::kmeans::kmeans;
use super::{QueryContext, QueryScore, StrategyKind};
use crate::gcn::Posterior;
use crate::propagation::entropy;

/// AGE's time-decay base for the weight schedule.
pub const DEFAULT_AGE_BASEF: f64 = 0.9;

const KMEANS_ITERS: usize = 100;

fn scored(kind: StrategyKind, nodes: &[usize], f: impl Fn(usize) -> f64) -> Vec<QueryScore> {
    nodes
        .iter()
        .map(|&node| QueryScore {
            node,
            value: f(node),
            strategy: kind,
        })
        .collect()
}

/// Entropy of the GCN's predicted class distribution.
pub fn entropy_scores(ctx: &QueryContext<'_>, nodes: &[usize]) -> Vec<QueryScore> {
    scored(StrategyKind::Entropy, nodes, |v| entropy(ctx.posterior.probs.row(v)))
}

pub fn degree_scores(ctx: &QueryContext<'_>, nodes: &[usize]) -> Vec<QueryScore> {
    scored(StrategyKind::Degree, nodes, |v| ctx.graph.degree(v) as f64)
}

fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance from each candidate to its nearest labeled node in the hidden
/// embedding space. The argmax is the greedy K-center choice.
pub fn coreset_scores(ctx: &QueryContext<'_>, nodes: &[usize]) -> Vec<QueryScore> {
    let hidden = &ctx.posterior.hidden;
    let labeled = ctx.state.labeled();
    scored(StrategyKind::Coreset, nodes, |v| {
        labeled
            .iter()
            .map(|&l| euclidean(hidden.row(v), hidden.row(l)))
            .fold(f64::INFINITY, f64::min)
    })
}

/// Fraction of `values` strictly below each entry.
pub fn percentiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let mut below = 0;
    for w in 0..n {
        if w > 0 && values[order[w]] > values[order[w - 1]] {
            below = w;
        }
        out[order[w]] = below as f64 / n as f64;
    }
    out
}

/// K-means density of the posterior embedding: `1 / (1 + d)` where `d` is
/// the distance to the nearest of `k` centroids fitted on `nodes`.
pub fn density_scores<R: Rng>(posterior: &Posterior, nodes: &[usize], k: usize, rng: &mut R) -> Vec<f64> {
    let dim = posterior.probs.ncols();
    let mut pts = Array2::zeros((nodes.len(), dim));
    for (r, &v) in nodes.iter().enumerate() {
        pts.row_mut(r).assign(&posterior.probs.row(v));
    }
    let km = kmeans(pts.view(), k, KMEANS_ITERS, rng);
    km.distances(pts.view())
        .into_iter()
        .map(|d| 1.0 / (1.0 + d))
        .collect()
}

/// Mixing weights for AGE's three percentile metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeWeights {
    pub entropy: f64,
    pub density: f64,
    pub centrality: f64,
}

impl AgeWeights {
    /// Centrality weight `~ Beta(1, 1.005 − basef^t)`; the other two share
    /// the remainder equally. Early queries lean on centrality, later ones
    /// move toward the embedding-based metrics.
    pub fn sample<R: Rng>(epoch: usize, basef: f64, rng: &mut R) -> Self {
        let b = 1.005 - basef.powi(epoch as i32);
        let centrality = Beta::new(1.0, b)
            .map(|d| d.sample(rng))
            .unwrap_or(0.5);
        let rest = (1.0 - centrality) / 2.0;
        Self {
            entropy: rest,
            density: rest,
            centrality,
        }
    }
}

pub fn age_scores<R: Rng>(ctx: &QueryContext<'_>, nodes: &[usize], w: AgeWeights, rng: &mut R) -> Vec<QueryScore> {
    let ent: Vec<f64> = nodes.iter().map(|&v| entropy(ctx.posterior.probs.row(v))).collect();
    let dens = density_scores(ctx.posterior, nodes, ctx.state.k(), rng);
    let pr: Vec<f64> = nodes.iter().map(|&v| ctx.centrality.pagerank[v]).collect();
    let (pe, pd, pc) = (percentiles(&ent), percentiles(&dens), percentiles(&pr));
    nodes
        .iter()
        .enumerate()
        .map(|(i, &node)| QueryScore {
            node,
            value: w.entropy * pe[i] + w.density * pd[i] + w.centrality * pc[i],
            strategy: StrategyKind::Age,
        })
        .collect()
}
