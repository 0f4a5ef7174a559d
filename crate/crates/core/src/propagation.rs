//! Label spreading `F ← α Â F + (1-α) Y` and entropy-based graph uncertainty.

use ndarray::{Array2, ArrayView1, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AdjacencyKind, NormalizedAdjacency};
use crate::labels::LabelState;

/// Row sums below this are treated as "no label mass reached the node".
pub const EMPTY_ROW: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpConfig {
    pub alpha: f64,
    /// Stop once the largest entry-wise change is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// `n × K` seed matrix: one-hot rows for labeled nodes, zeros elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSeed {
    y: Array2<f64>,
}

impl LabelSeed {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self { y: Array2::zeros((n, k)) }
    }

    pub fn from_pairs(n: usize, k: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut seed = Self::zeros(n, k);
        for (node, class) in pairs {
            seed.set(node, class);
        }
        seed
    }

    pub fn from_state(state: &LabelState) -> Self {
        Self::from_pairs(state.n(), state.k(), state.labeled_pairs())
    }

    /// Makes `node`'s row one-hot at `class`.
    pub fn set(&mut self, node: usize, class: usize) {
        let mut row = self.y.row_mut(node);
        row.fill(0.0);
        row[class] = 1.0;
    }

    pub fn with(&self, node: usize, class: usize) -> Self {
        let mut s = self.clone();
        s.set(node, class);
        s
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub f: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates label spreading from `F(0) = Y` until the max-abs change drops
/// below `tol` or `max_iter` is reached.
///
/// Works for any number of columns, so a single indicator column can be
/// spread on its own (the map is linear in `Y`).
pub fn propagate(adj: &NormalizedAdjacency, y: ArrayView2<'_, f64>, cfg: &LpConfig) -> Result<PropagationResult> {
    if adj.kind() != AdjacencyKind::PlainSymmetric {
        return Err(Error::Shape("label spreading uses the plain symmetric adjacency".into()));
    }
    if y.nrows() != adj.n() {
        return Err(Error::Shape(format!(
            "seed has {} rows, graph has {} nodes",
            y.nrows(),
            adj.n()
        )));
    }
    let alpha = cfg.alpha;
    let mut f = y.to_owned();
    let mut spread = Array2::zeros(f.dim());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        adj.spmm_into(f.view(), &mut spread)?;
        let mut change = 0.0_f64;
        Zip::from(&mut f)
            .and(&spread)
            .and(&y)
            .for_each(|f, &s, &y| {
                let next = alpha * s + (1.0 - alpha) * y;
                change = change.max((next - *f).abs());
                *f = next;
            });
        if !change.is_finite() {
            return Err(Error::NonFinite("label propagation"));
        }
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(PropagationResult {
        f,
        iterations,
        converged,
    })
}

/// Row-wise L1 normalization; rows without mass become uniform.
pub fn lp_posterior(f: &Array2<f64>) -> Array2<f64> {
    let k = f.ncols();
    let mut p = f.clone();
    for mut row in p.rows_mut() {
        let s: f64 = row.iter().sum();
        if s < EMPTY_ROW {
            row.fill(1.0 / k as f64);
        } else {
            row.mapv_inplace(|x| x / s);
        }
    }
    p
}

/// Shannon entropy (natural log) of one probability row, `0 ln 0 = 0`.
pub fn entropy(row: ArrayView1<'_, f64>) -> f64 {
    row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Sum of row entropies of a row-stochastic matrix.
pub fn graph_uncertainty(probs: &Array2<f64>) -> f64 {
    probs.rows().into_iter().map(entropy).sum()
}

/// Entropy of `row` after L1 normalization (uniform if it has no mass).
///
/// Same arithmetic as [`lp_posterior`] followed by [`entropy`], without
/// materializing the normalized row.
pub fn normalized_row_entropy(row: impl Iterator<Item = f64> + Clone, k: usize) -> f64 {
    let s: f64 = row.clone().sum();
    if s < EMPTY_ROW {
        let u = 1.0 / k as f64;
        return (0..k).map(|_| -u * u.ln()).sum();
    }
    row.map(|x| x / s)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// `graph_uncertainty(lp_posterior(f))`.
pub fn lp_uncertainty(f: &Array2<f64>) -> f64 {
    let k = f.ncols();
    f.rows()
        .into_iter()
        .map(|r| normalized_row_entropy(r.iter().copied(), k))
        .sum()
}
