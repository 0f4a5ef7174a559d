use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelSelection, RunSeeds};
use super::splits::{make_splits, Splits};
use crate::centrality::{CandidatePool, CentralityScores, PageRankConfig};
use crate::error::{Error, Result};
use crate::gcn::{evaluate, Checkpoint, F1Scores, GcnModel};
use crate::graph::bundle::Dataset;
use crate::graph::{AdjacencyKind, FeatureMatrix};
use crate::labels::LabelState;
use crate::propagation::LpConfig;
use crate::strategy::{IndicatorCache, LpScoring, QueryContext, Selector};

/// Source of labels for queried nodes.
pub trait Oracle: Sync {
    fn label(&self, node: usize) -> usize;
}

/// Answers with the dataset's ground truth.
pub struct GroundTruth<'a>(pub &'a [usize]);

impl Oracle for GroundTruth<'_> {
    fn label(&self, node: usize) -> usize {
        self.0[node]
    }
}

fn lp_key(lp: &LpConfig) -> (u64, u64, usize) {
    (lp.alpha.to_bits(), lp.tol.to_bits(), lp.max_iter)
}

fn pr_key(pr: &PageRankConfig) -> (u64, u64, usize) {
    (pr.beta.to_bits(), pr.tol.to_bits(), pr.max_iter)
}

/// Per-dataset state shared by every run on it: preprocessed features,
/// centrality scores and spread indicator columns. None of it depends on
/// splits or seeds, so sharing does not affect results.
pub struct Workspace {
    pub dataset: Dataset,
    raw_features: FeatureMatrix,
    normalized_features: FeatureMatrix,
    centrality: Mutex<HashMap<(u64, u64, usize), Arc<CentralityScores>>>,
    indicators: Mutex<HashMap<(u64, u64, usize), Arc<IndicatorCache>>>,
}

impl Workspace {
    pub fn new(dataset: Dataset) -> Self {
        // Build both adjacencies up front so parallel runs never race on them.
        dataset.graph.normalized(AdjacencyKind::GcnSelfLoop);
        dataset.graph.normalized(AdjacencyKind::PlainSymmetric);
        let normalized_features = dataset.features.row_normalized();
        Self {
            raw_features: dataset.features.clone(),
            normalized_features,
            dataset,
            centrality: Mutex::default(),
            indicators: Mutex::default(),
        }
    }

    pub fn features(&self, normalized: bool) -> &FeatureMatrix {
        if normalized {
            &self.normalized_features
        } else {
            &self.raw_features
        }
    }

    pub fn centrality(&self, cfg: &PageRankConfig) -> Arc<CentralityScores> {
        let mut map = self.centrality.lock().expect("centrality lock");
        Arc::clone(map.entry(pr_key(cfg)).or_insert_with(|| {
            let c = CentralityScores::compute(&self.dataset.graph, cfg);
            if !c.pagerank_converged {
                log::warn!("PageRank did not converge within {} iterations", cfg.max_iter);
            }
            Arc::new(c)
        }))
    }

    pub fn indicators(&self, lp: &LpConfig) -> Arc<IndicatorCache> {
        let mut map = self.indicators.lock().expect("indicator lock");
        Arc::clone(map.entry(lp_key(lp)).or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub node: usize,
    pub score: f64,
    /// Training epochs completed when the query was made.
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_hash: String,
    pub dataset: String,
    pub strategy: String,
    pub l_max: usize,
    pub val_index: usize,
    pub repeat: usize,
    pub seeds: RunSeeds,
    /// Test-set scores; `None` if the run failed.
    pub test: Option<F1Scores>,
    pub best_val_micro_f1: Option<f64>,
    /// Epoch (1-based) whose model produced `test`.
    pub selected_epoch: Option<usize>,
    pub initial: Vec<usize>,
    pub trace: Vec<TraceEntry>,
    pub wall_ms: u64,
    pub failure: Option<String>,
}

impl RunResult {
    pub fn micro_f1(&self) -> Option<f64> {
        self.test.map(|t| t.micro_f1)
    }

    pub fn macro_f1(&self) -> Option<f64> {
        self.test.map(|t| t.macro_f1)
    }

    /// Equal up to wall time.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        RunResult {
            wall_ms: other.wall_ms,
            ..self.clone()
        } == *other
    }
}

/// Active-learning run against the ground-truth oracle.
pub fn run_active_learning(ws: &Workspace, cfg: &ExperimentConfig, val_index: usize, repeat: usize) -> Result<RunResult> {
    run_with_oracle(ws, cfg, val_index, repeat, &GroundTruth(&ws.dataset.labels))
}

pub fn run_with_oracle(
    ws: &Workspace,
    cfg: &ExperimentConfig,
    val_index: usize,
    repeat: usize,
    oracle: &dyn Oracle,
) -> Result<RunResult> {
    run_with_checkpoint(ws, cfg, val_index, repeat, oracle).map(|(r, _)| r)
}

/// Like [`run_with_oracle`], also returning the final model weights of a
/// successful run.
pub fn run_with_checkpoint(
    ws: &Workspace,
    cfg: &ExperimentConfig,
    val_index: usize,
    repeat: usize,
    oracle: &dyn Oracle,
) -> Result<(RunResult, Option<Checkpoint>)> {
    let start = Instant::now();
    let ds = &ws.dataset;
    cfg.validate(ds.k)?;
    let seeds = RunSeeds::for_run(cfg.seed, val_index, repeat);
    let splits = make_splits(&ds.labels, ds.k, cfg, &seeds)?;
    let mut result = RunResult {
        config_hash: cfg.hash(),
        dataset: ds.name.clone(),
        strategy: cfg.strategy.name().to_string(),
        l_max: cfg.l_max,
        val_index,
        repeat,
        seeds,
        test: None,
        best_val_micro_f1: None,
        selected_epoch: None,
        initial: splits.initial.iter().map(|p| p.0).collect(),
        trace: Vec::new(),
        wall_ms: 0,
        failure: None,
    };
    let checkpoint = match run_loop(ws, cfg, &seeds, splits, oracle, &mut result) {
        Ok(c) => Some(c),
        Err(e @ (Error::Diverged { .. } | Error::NonFinite(_))) => {
            log::warn!("run {val_index}/{repeat} ({}) failed: {e}", cfg.strategy);
            result.test = None;
            result.failure = Some(e.to_string());
            None
        }
        Err(e) => return Err(e),
    };
    result.wall_ms = start.elapsed().as_millis() as u64;
    Ok((result, checkpoint))
}

fn run_loop(
    ws: &Workspace,
    cfg: &ExperimentConfig,
    seeds: &RunSeeds,
    splits: Splits,
    oracle: &dyn Oracle,
    result: &mut RunResult,
) -> Result<Checkpoint> {
    let ds = &ws.dataset;
    let k = ds.k;
    let gcn_adj = ds.graph.normalized(AdjacencyKind::GcnSelfLoop);
    let lp_adj = ds.graph.normalized(AdjacencyKind::PlainSymmetric);
    let x = ws.features(cfg.normalize_features);
    let centrality = ws.centrality(&cfg.pagerank);
    let indicators = ws.indicators(&cfg.lp);

    let budget = cfg.budget(k);
    let mut state = LabelState::new(k, splits.test_mask, splits.val_mask, &splits.initial, budget)?;
    let mut model = GcnModel::new(x.d(), k, cfg.gcn.clone(), seeds.stream(1))?;
    let mut selector = Selector::new(cfg.strategy, seeds.stream(2)).with_age_basef(cfg.age_basef);
    let mut pool: Option<CandidatePool> = None;
    let mut best_val = f64::NEG_INFINITY;

    for epoch in 1..=cfg.epochs_total {
        let trained_on_final = state.budget_remaining() == 0;
        model.train_step(gcn_adj, x, &state, cfg.gcn.lr)?;

        if state.budget_remaining() > 0 && epoch % cfg.epochs_per_query == 0 {
            let posterior = model.forward(gcn_adj, x)?;
            if pool.is_none() {
                pool = selector.build_pool(&centrality, &posterior, &state, cfg.l_max);
                if let Some(p) = &pool {
                    if cfg.strategy.uses_lp() && cfg.lp_scoring == LpScoring::Superposition {
                        indicators.warm(lp_adj, p.members(), &cfg.lp)?;
                    }
                }
            }
            let ctx = QueryContext {
                graph: &ds.graph,
                lp_adj,
                posterior: &posterior,
                state: &state,
                pool: pool.as_ref(),
                centrality: &centrality,
                lp: &cfg.lp,
                scoring: cfg.lp_scoring,
                indicators: &indicators,
            };
            let pick = selector.select(&ctx, epoch)?;
            if !pick.value.is_finite() {
                return Err(Error::NonFinite("query score"));
            }
            state.reveal(pick.node, oracle.label(pick.node))?;
            if let Some(p) = pool.as_mut() {
                p.remove(pick.node);
            }
            result.trace.push(TraceEntry {
                node: pick.node,
                score: pick.value,
                epoch,
            });
            if cfg.retrain_from_scratch {
                model.reinitialize();
            }
        }

        let last = epoch == cfg.epochs_total;
        let consider = match cfg.model_selection {
            ModelSelection::BestValidation => trained_on_final,
            ModelSelection::FinalEpoch => last,
        };
        if consider {
            let post = model.forward(gcn_adj, x)?;
            let val = evaluate(&post.probs, &ds.labels, state.val_mask(), k).micro_f1;
            if val > best_val {
                best_val = val;
                result.best_val_micro_f1 = Some(val);
                result.selected_epoch = Some(epoch);
                result.test = Some(evaluate(&post.probs, &ds.labels, state.test_mask(), k));
            }
        }
    }
    if result.test.is_none() {
        // Every query fell on the final epochs; fall back to the last model.
        let post = model.forward(gcn_adj, x)?;
        result.best_val_micro_f1 = Some(evaluate(&post.probs, &ds.labels, state.val_mask(), k).micro_f1);
        result.selected_epoch = Some(cfg.epochs_total);
        result.test = Some(evaluate(&post.probs, &ds.labels, state.test_mask(), k));
    }
    debug_assert_eq!(state.labeled().len(), cfg.l_init * k + budget);
    Ok(model.checkpoint())
}
