use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::centrality::PageRankConfig;
use crate::error::{Error, Result};
use crate::gcn::GcnConfig;
use crate::graph::bundle::BundleFormat;
use crate::propagation::LpConfig;
use crate::strategy::{LpScoring, StrategyKind, DEFAULT_AGE_BASEF};

/// Which checkpoint the reported test metrics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSelection {
    /// Epoch with the best validation micro-F1 after the last query.
    #[default]
    BestValidation,
    FinalEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub format: BundleFormat,
    pub strategy: StrategyKind,
    /// Initial labels per class.
    pub l_init: usize,
    /// Labels per class once the budget is spent.
    pub l_max: usize,
    pub epochs_total: usize,
    pub epochs_per_query: usize,
    pub n_val_samples: usize,
    pub n_repeats: usize,
    pub test_size: usize,
    pub val_size: usize,
    /// Base seed; fixes the test split and offsets every per-run stream.
    pub seed: u64,
    /// Re-initialize the model after each query instead of continuing.
    pub retrain_from_scratch: bool,
    pub model_selection: ModelSelection,
    /// L1-normalize feature rows before training.
    pub normalize_features: bool,
    pub lp: LpConfig,
    pub lp_scoring: LpScoring,
    pub pagerank: PageRankConfig,
    pub age_basef: f64,
    pub gcn: GcnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: String::new(),
            format: BundleFormat::Auto,
            strategy: StrategyKind::SmartQuery,
            l_init: 1,
            l_max: 5,
            epochs_total: 300,
            epochs_per_query: 5,
            n_val_samples: 10,
            n_repeats: 20,
            test_size: 1000,
            val_size: 500,
            seed: 0,
            retrain_from_scratch: false,
            model_selection: ModelSelection::BestValidation,
            normalize_features: true,
            lp: LpConfig::default(),
            lp_scoring: LpScoring::Superposition,
            pagerank: PageRankConfig::default(),
            age_basef: DEFAULT_AGE_BASEF,
            gcn: GcnConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Number of queries: `(l_max − l_init) · k`.
    pub fn budget(&self, k: usize) -> usize {
        self.l_max.saturating_sub(self.l_init) * k
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.l_init < 1 {
            return Err(Error::Config("l_init must be at least 1".into()));
        }
        if self.l_max < self.l_init {
            return Err(Error::Config(format!(
                "l_max ({}) must be >= l_init ({})",
                self.l_max, self.l_init
            )));
        }
        if self.epochs_per_query == 0 && self.budget(k) > 0 {
            return Err(Error::Config("epochs_per_query must be positive".into()));
        }
        if self.epochs_per_query * self.budget(k) > self.epochs_total {
            return Err(Error::Config(format!(
                "{} queries x {} epochs exceed the {} training epochs",
                self.budget(k),
                self.epochs_per_query,
                self.epochs_total
            )));
        }
        if !(self.lp.alpha > 0.0 && self.lp.alpha < 1.0) {
            return Err(Error::Config(format!("lp alpha {} not in (0, 1)", self.lp.alpha)));
        }
        if !(0.0..1.0).contains(&self.pagerank.beta) {
            return Err(Error::Config(format!("pagerank beta {} not in [0, 1)", self.pagerank.beta)));
        }
        if !(0.0..1.0).contains(&self.gcn.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.gcn.dropout)));
        }
        Ok(())
    }

    /// Largest `epochs_per_query` not above the configured one that fits the
    /// budget into `epochs_total`.
    pub fn fit_epochs_per_query(&mut self, k: usize) {
        if let Some(fit) = self.epochs_total.checked_div(self.budget(k)) {
            self.epochs_per_query = self.epochs_per_query.min(fit).max(1);
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Seeds identifying one run inside a suite cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    /// Seeds the test split; shared by all runs of a suite.
    pub test: u64,
    /// Seeds the validation sample.
    pub val: u64,
    /// Seeds initial labels, model init, dropout and strategy randomness.
    pub run: u64,
}

impl RunSeeds {
    /// Seeds for validation sample `val_index`, repeat `repeat`.
    pub fn for_run(base: u64, val_index: usize, repeat: usize) -> Self {
        let mix = |tag: u64, i: u64| base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag.wrapping_mul(0xBF58_476D_1CE4_E5B9) ^ i;
        Self {
            test: mix(1, 0),
            val: mix(2, val_index as u64),
            run: mix(3, ((val_index as u64) << 32) | repeat as u64),
        }
    }

    /// Independent stream `stream` derived from the run seed.
    pub fn stream(&self, stream: u64) -> u64 {
        self.run
            .wrapping_add(stream.wrapping_mul(0x94D0_49BB_1331_11EB))
            .rotate_left(17)
    }
}
