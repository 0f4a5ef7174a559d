//! Hybrid uncertainty reduction scored through label propagation.
//!
//! For a candidate `v` and class `k` the expected information gain is the
//! drop in LP graph uncertainty when `v` is added to the seed with label `k`:
//!
//! ```text
//! ΔH(v, k) = H(LP(V_l)) − H(LP(V_l ∪ {v:k}))
//! φ(v)     = Σ_k p_vk · ΔH(v, k)
//! ```
//!
//! with `p_vk` taken from the current GCN posterior. `LP(V_l)` is shared by
//! every candidate and computed once per query round.
//!
//! Label spreading is linear in its seed, so `LP(V_l ∪ {v:k})` equals
//! `LP(V_l)` plus the spread of `v`'s indicator vector placed in column `k`.
//! [`LpScoring::Superposition`] uses that identity: one single-column run
//! per candidate, cached for the whole experiment because it does not depend
//! on the labeled set. [`LpScoring::Direct`] re-runs the full propagation
//! for every `(v, k)` pair.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{QueryContext, QueryScore, StrategyKind};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::propagation::{lp_uncertainty, normalized_row_entropy, propagate, LabelSeed, LpConfig, EMPTY_ROW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpScoring {
    #[default]
    Superposition,
    Direct,
}

/// Spread indicator columns, keyed by node.
#[derive(Debug, Default)]
pub struct IndicatorCache {
    columns: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl IndicatorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.columns.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spreads `e_node` (or returns the cached result).
    pub fn get(&self, adj: &NormalizedAdjacency, node: usize, lp: &LpConfig) -> Result<Arc<Vec<f64>>> {
        if let Some(col) = self.columns.lock().expect("cache lock").get(&node) {
            return Ok(Arc::clone(col));
        }
        let mut y = Array2::zeros((adj.n(), 1));
        y[[node, 0]] = 1.0;
        let r = propagate(adj, y.view(), lp)?;
        if !r.converged {
            log::warn!("indicator propagation for node {node} stopped after {} iterations", r.iterations);
        }
        let col = Arc::new(r.f.index_axis(Axis(1), 0).to_vec());
        self.columns
            .lock()
            .expect("cache lock")
            .insert(node, Arc::clone(&col));
        Ok(col)
    }

    /// Fills the cache for `nodes` in parallel.
    pub fn warm(&self, adj: &NormalizedAdjacency, nodes: &[usize], lp: &LpConfig) -> Result<()> {
        nodes
            .par_iter()
            .try_for_each(|&v| self.get(adj, v, lp).map(|_| ()))
    }
}

/// Entropy of an L1-normalized row written as `ln S − A/S`, with
/// `S = Σ x` and `A = Σ x ln x`. Shifting one entry only changes `S` and a
/// single term of `A`, so a shifted row costs one extra logarithm per class.
fn entropy_from_sums(s: f64, a: f64, uniform: f64) -> f64 {
    if s < EMPTY_ROW {
        uniform
    } else {
        s.ln() - a / s
    }
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Per-round scorer holding the shared `LP(V_l)` term.
pub struct HybridScorer<'a> {
    ctx: &'a QueryContext<'a>,
    seed: LabelSeed,
    base_f: Array2<f64>,
    /// `x ln x` of every entry of `base_f`.
    base_xlnx: Array2<f64>,
    row_sum: Vec<f64>,
    row_xlnx: Vec<f64>,
    /// Per-row entropies in the `ln S − A/S` form.
    row_h: Vec<f64>,
    uniform_h: f64,
    base_h: f64,
}

impl<'a> HybridScorer<'a> {
    pub fn new(ctx: &'a QueryContext<'a>) -> Result<Self> {
        let seed = LabelSeed::from_state(ctx.state);
        let base = propagate(ctx.lp_adj, seed.matrix().view(), ctx.lp)?;
        if !base.converged {
            log::warn!("base propagation stopped after {} iterations", base.iterations);
        }
        let k = ctx.state.k();
        let uniform_h = normalized_row_entropy(std::iter::repeat_n(0.0, k), k);
        let base_xlnx = base.f.mapv(xlnx);
        let row_sum: Vec<f64> = base.f.rows().into_iter().map(|r| r.iter().sum()).collect();
        let row_xlnx: Vec<f64> = base_xlnx.rows().into_iter().map(|r| r.iter().sum()).collect();
        let row_h: Vec<f64> = row_sum
            .iter()
            .zip(&row_xlnx)
            .map(|(&s, &a)| entropy_from_sums(s, a, uniform_h))
            .collect();
        let base_h = lp_uncertainty(&base.f);
        Ok(Self {
            ctx,
            seed,
            base_f: base.f,
            base_xlnx,
            row_sum,
            row_xlnx,
            row_h,
            uniform_h,
            base_h,
        })
    }

    /// LP graph uncertainty of the current labeled set.
    pub fn base_uncertainty(&self) -> f64 {
        self.base_h
    }

    fn check(&self, candidate: usize, class: usize) -> Result<()> {
        let state = self.ctx.state;
        if candidate >= state.n() {
            return Err(Error::NodeOutOfRange { id: candidate, n: state.n() });
        }
        if !state.is_unlabeled(candidate) {
            return Err(Error::Config(format!("node {candidate} is not an unlabeled candidate")));
        }
        if class >= state.k() {
            return Err(Error::ClassCountMismatch {
                meta: state.k(),
                found: class + 1,
            });
        }
        Ok(())
    }

    /// Uncertainty reduction for every class of `candidate`.
    pub fn delta_h_all(&self, candidate: usize) -> Result<Vec<f64>> {
        self.check(candidate, 0)?;
        let k = self.ctx.state.k();
        match self.ctx.scoring {
            LpScoring::Direct => (0..k)
                .map(|class| {
                    let seed = self.seed.with(candidate, class);
                    let r = propagate(self.ctx.lp_adj, seed.matrix().view(), self.ctx.lp)?;
                    Ok(self.base_h - lp_uncertainty(&r.f))
                })
                .collect(),
            LpScoring::Superposition => {
                let g = self.ctx.indicators.get(self.ctx.lp_adj, candidate, self.ctx.lp)?;
                // Rows the indicator never reaches keep their entropy, so
                // only reached rows contribute to the difference.
                let mut delta = vec![0.0; k];
                for (i, &gi) in g.iter().enumerate() {
                    if gi == 0.0 {
                        continue;
                    }
                    let s = self.row_sum[i] + gi;
                    let hb = self.row_h[i];
                    if s < EMPTY_ROW {
                        let d = hb - self.uniform_h;
                        delta.iter_mut().for_each(|x| *x += d);
                        continue;
                    }
                    let ln_s = s.ln();
                    let row = self.base_f.row(i);
                    let lx = self.base_xlnx.row(i);
                    for c in 0..k {
                        let a = self.row_xlnx[i] - lx[c] + xlnx(row[c] + gi);
                        delta[c] += hb - (ln_s - a / s);
                    }
                }
                Ok(delta)
            }
        }
    }

    pub fn delta_h(&self, candidate: usize, class: usize) -> Result<f64> {
        self.check(candidate, class)?;
        Ok(self.delta_h_all(candidate)?[class])
    }

    /// `φ(v) = Σ_k p_vk ΔH(v, k)`.
    pub fn score(&self, candidate: usize) -> Result<QueryScore> {
        let deltas = self.delta_h_all(candidate)?;
        let probs = self.ctx.posterior.probs.row(candidate);
        let value = probs.iter().zip(&deltas).map(|(p, d)| p * d).sum();
        Ok(QueryScore {
            node: candidate,
            value,
            strategy: StrategyKind::SmartQuery,
        })
    }

    /// Scores every candidate; the order of the output follows `candidates`.
    pub fn score_all(&self, candidates: &[usize]) -> Result<Vec<QueryScore>> {
        candidates.par_iter().map(|&v| self.score(v)).collect()
    }
}
