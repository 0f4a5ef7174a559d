//! Structural node scores (degree, PageRank) and the one-time candidate pool.

use serde::{Deserialize, Serialize};

use crate::graph::SparseGraph;
use crate::labels::LabelState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageRankConfig {
    /// Damping β.
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            beta: 0.85,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRank {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// `false` when `max_iter` ran out first; `scores` is then the last iterate.
    pub converged: bool,
}

/// Power iteration for `PR_i = (1-β)/n + β Σ_j A_ij PR_j / deg_j`.
///
/// Mass sitting on degree-0 nodes is spread uniformly over all nodes. The
/// iteration stops once the L1 change drops below `tol`.
pub fn pagerank(g: &SparseGraph, cfg: &PageRankConfig) -> PageRank {
    let n = g.n();
    if n == 0 {
        return PageRank {
            scores: Vec::new(),
            iterations: 0,
            converged: true,
        };
    }
    let nf = n as f64;
    let inv_deg: Vec<f64> = (0..n)
        .map(|i| match g.degree(i) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect();
    let mut pr = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| g.degree(i) == 0).map(|i| pr[i]).sum();
        let base = (1.0 - cfg.beta) / nf + cfg.beta * dangling / nf;
        for (i, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = g.neighbors(i).iter().map(|&j| pr[j] * inv_deg[j]).sum();
            *slot = base + cfg.beta * inflow;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta: f64 = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pr, &mut next);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    PageRank {
        scores: pr,
        iterations,
        converged,
    }
}

/// Min-max scaling to `[0, 1]`; constant inputs map to all zeros.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    // constant (or NaN) scores carry no ranking information
    if span.is_nan() || span <= 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

/// Degrees of the raw adjacency, min-max normalized.
pub fn degree_scores(g: &SparseGraph) -> Vec<f64> {
    let deg: Vec<f64> = g.degrees().into_iter().map(|d| d as f64).collect();
    min_max(&deg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityScores {
    pub degree: Vec<usize>,
    pub degree_norm: Vec<f64>,
    pub pagerank: Vec<f64>,
    pub pagerank_norm: Vec<f64>,
    /// `degree_norm + pagerank_norm`, in `[0, 2]`.
    pub pool_score: Vec<f64>,
    pub pagerank_converged: bool,
}

impl CentralityScores {
    pub fn compute(g: &SparseGraph, cfg: &PageRankConfig) -> Self {
        let pr = pagerank(g, cfg);
        let degree_norm = degree_scores(g);
        let pagerank_norm = min_max(&pr.scores);
        let pool_score = degree_norm
            .iter()
            .zip(&pagerank_norm)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            degree: g.degrees(),
            degree_norm,
            pagerank: pr.scores,
            pagerank_norm,
            pool_score,
            pagerank_converged: pr.converged,
        }
    }
}

/// Orders `nodes` by `score` descending, ties by ascending id.
pub fn rank_desc(nodes: &mut [usize], score: &[f64]) {
    nodes.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
}

/// Fixed candidate set from which queries are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    members: Vec<usize>,
    capacity: usize,
}

impl CandidatePool {
    /// Takes the first `capacity` nodes of an already ordered list.
    pub fn from_ranked(mut ranked: Vec<usize>, capacity: usize) -> Self {
        ranked.truncate(capacity);
        Self {
            members: ranked,
            capacity,
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.contains(&node)
    }

    /// Drops a node once it has been labeled.
    pub fn remove(&mut self, node: usize) -> bool {
        match self.members.iter().position(|&m| m == node) {
            Some(pos) => {
                self.members.remove(pos);
                true
            }
            None => false,
        }
    }
}

/// Pool capacity for a per-class cap: `2 · l_max · K`.
pub fn pool_capacity(l_max: usize, k: usize) -> usize {
    2 * l_max * k
}

/// Top unlabeled nodes by pool score.
pub fn build_pool(scores: &CentralityScores, state: &LabelState, l_max: usize, k: usize) -> CandidatePool {
    let mut candidates = state.unlabeled();
    rank_desc(&mut candidates, &scores.pool_score);
    CandidatePool::from_ranked(candidates, pool_capacity(l_max, k))
}
