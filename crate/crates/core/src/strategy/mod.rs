//! Query strategies: the pooled hybrid-uncertainty selector, its ablations,
//! and the baselines it is compared against.

pub mod baselines;
mod hybrid;
pub mod kmeans;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centrality::{build_pool, rank_desc, CandidatePool, CentralityScores};
use crate::error::{Error, Result};
use crate::gcn::Posterior;
use crate::graph::{NormalizedAdjacency, SparseGraph};
use crate::labels::LabelState;
use crate::propagation::LpConfig;

pub use baselines::{AgeWeights, DEFAULT_AGE_BASEF};
pub use hybrid::{HybridScorer, IndicatorCache, LpScoring};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Centrality pool + LP hybrid uncertainty reduction.
    #[serde(rename = "smartquery")]
    SmartQuery,
    Random,
    Entropy,
    Degree,
    Coreset,
    Age,
    /// Highest pool score among remaining pool members.
    PoolOnly,
    /// Hybrid scoring over a uniformly random pool.
    LpRandomPool,
    /// Hybrid scoring over a pool ranked by embedding density.
    LpEmbedPool,
}

/// How the candidate pool of a strategy is formed, if it uses one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolSource {
    Centrality,
    Random,
    EmbeddingDensity,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 9] = [
        StrategyKind::SmartQuery,
        StrategyKind::Random,
        StrategyKind::Entropy,
        StrategyKind::Degree,
        StrategyKind::Coreset,
        StrategyKind::Age,
        StrategyKind::PoolOnly,
        StrategyKind::LpRandomPool,
        StrategyKind::LpEmbedPool,
    ];

    /// Baselines compared in the main table.
    pub const COMPARISON: [StrategyKind; 6] = [
        StrategyKind::Random,
        StrategyKind::Entropy,
        StrategyKind::Degree,
        StrategyKind::Coreset,
        StrategyKind::Age,
        StrategyKind::SmartQuery,
    ];

    /// Component ablation workflows, in presentation order.
    pub const ABLATION: [StrategyKind; 5] = [
        StrategyKind::Random,
        StrategyKind::PoolOnly,
        StrategyKind::LpRandomPool,
        StrategyKind::LpEmbedPool,
        StrategyKind::SmartQuery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::SmartQuery => "smartquery",
            StrategyKind::Random => "random",
            StrategyKind::Entropy => "entropy",
            StrategyKind::Degree => "degree",
            StrategyKind::Coreset => "coreset",
            StrategyKind::Age => "age",
            StrategyKind::PoolOnly => "pool-only",
            StrategyKind::LpRandomPool => "lp-random-pool",
            StrategyKind::LpEmbedPool => "lp-embed-pool",
        }
    }

    /// Workflow label used in ablation tables.
    pub fn ablation_label(self) -> &'static str {
        match self {
            StrategyKind::Random => "GCN",
            StrategyKind::PoolOnly => "GCN+Pool",
            StrategyKind::LpRandomPool => "GCN+LP",
            StrategyKind::LpEmbedPool => "GCN+emb.+LP",
            StrategyKind::SmartQuery => "GCN+Pool+LP",
            other => other.name(),
        }
    }

    pub fn pool_source(self) -> Option<PoolSource> {
        match self {
            StrategyKind::SmartQuery | StrategyKind::PoolOnly => Some(PoolSource::Centrality),
            StrategyKind::LpRandomPool => Some(PoolSource::Random),
            StrategyKind::LpEmbedPool => Some(PoolSource::EmbeddingDensity),
            _ => None,
        }
    }

    pub fn uses_lp(self) -> bool {
        matches!(
            self,
            StrategyKind::SmartQuery | StrategyKind::LpRandomPool | StrategyKind::LpEmbedPool
        )
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub node: usize,
    pub value: f64,
    pub strategy: StrategyKind,
}

/// Everything a strategy may look at when choosing the next node.
///
/// Holds no ground truth beyond the labels already revealed in `state`.
pub struct QueryContext<'a> {
    pub graph: &'a SparseGraph,
    pub lp_adj: &'a NormalizedAdjacency,
    pub posterior: &'a Posterior,
    pub state: &'a LabelState,
    pub pool: Option<&'a CandidatePool>,
    pub centrality: &'a CentralityScores,
    pub lp: &'a LpConfig,
    pub scoring: LpScoring,
    pub indicators: &'a IndicatorCache,
}

impl QueryContext<'_> {
    /// Nodes a strategy may pick from: remaining pool members for pooled
    /// strategies, every unlabeled node otherwise.
    pub fn candidates(&self, kind: StrategyKind) -> Result<Vec<usize>> {
        let nodes: Vec<usize> = match kind.pool_source() {
            Some(_) => {
                let pool = self
                    .pool
                    .ok_or_else(|| Error::Config(format!("{kind} needs a candidate pool")))?;
                let mut m: Vec<usize> = pool
                    .members()
                    .iter()
                    .copied()
                    .filter(|&v| self.state.is_unlabeled(v))
                    .collect();
                m.sort_unstable();
                m
            }
            None => self.state.unlabeled(),
        };
        if nodes.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        Ok(nodes)
    }
}

/// Highest value wins; equal values go to the lower node id.
pub fn argmax_score(scores: &[QueryScore]) -> Result<QueryScore> {
    scores
        .iter()
        .copied()
        .reduce(|best, s| {
            if s.value > best.value || (s.value == best.value && s.node < best.node) {
                s
            } else {
                best
            }
        })
        .ok_or(Error::EmptyCandidates)
}

/// Stateful selector: owns the strategy's random stream.
#[derive(Debug, Clone)]
pub struct Selector {
    kind: StrategyKind,
    rng: ChaCha8Rng,
    age_basef: f64,
}

impl Selector {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        Self {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
            age_basef: DEFAULT_AGE_BASEF,
        }
    }

    pub fn with_age_basef(mut self, basef: f64) -> Self {
        self.age_basef = basef;
        self
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// Builds the one-time candidate pool (pooled strategies only).
    pub fn build_pool(
        &mut self,
        centrality: &CentralityScores,
        posterior: &Posterior,
        state: &LabelState,
        l_max: usize,
    ) -> Option<CandidatePool> {
        let k = state.k();
        let capacity = crate::centrality::pool_capacity(l_max, k);
        match self.kind.pool_source()? {
            PoolSource::Centrality => Some(build_pool(centrality, state, l_max, k)),
            PoolSource::Random => {
                let mut nodes = state.unlabeled();
                nodes.shuffle(&mut self.rng);
                nodes.truncate(capacity);
                nodes.sort_unstable();
                Some(CandidatePool::from_ranked(nodes, capacity))
            }
            PoolSource::EmbeddingDensity => {
                let mut nodes = state.unlabeled();
                let density = baselines::density_scores(posterior, &nodes, k, &mut self.rng);
                let mut score = vec![f64::NEG_INFINITY; state.n()];
                for (&v, d) in nodes.iter().zip(density) {
                    score[v] = d;
                }
                rank_desc(&mut nodes, &score);
                Some(CandidatePool::from_ranked(nodes, capacity))
            }
        }
    }

    /// Picks the next node to label. `epoch` feeds AGE's time-varying weights.
    pub fn select(&mut self, ctx: &QueryContext<'_>, epoch: usize) -> Result<QueryScore> {
        let candidates = ctx.candidates(self.kind)?;
        let kind = self.kind;
        let tag = |scores: Vec<QueryScore>| -> Vec<QueryScore> {
            scores
                .into_iter()
                .map(|s| QueryScore { strategy: kind, ..s })
                .collect()
        };
        let scores = match kind {
            StrategyKind::SmartQuery | StrategyKind::LpRandomPool | StrategyKind::LpEmbedPool => {
                tag(HybridScorer::new(ctx)?.score_all(&candidates)?)
            }
            StrategyKind::PoolOnly => candidates
                .iter()
                .map(|&v| QueryScore {
                    node: v,
                    value: ctx.centrality.pool_score[v],
                    strategy: kind,
                })
                .collect(),
            StrategyKind::Random => {
                let node = *candidates.choose(&mut self.rng).expect("non-empty");
                return Ok(QueryScore {
                    node,
                    value: 0.0,
                    strategy: kind,
                });
            }
            StrategyKind::Entropy => baselines::entropy_scores(ctx, &candidates),
            StrategyKind::Degree => baselines::degree_scores(ctx, &candidates),
            StrategyKind::Coreset => baselines::coreset_scores(ctx, &candidates),
            StrategyKind::Age => {
                let w = AgeWeights::sample(epoch, self.age_basef, &mut self.rng);
                baselines::age_scores(ctx, &candidates, w, &mut self.rng)
            }
        };
        argmax_score(&scores)
    }
}
