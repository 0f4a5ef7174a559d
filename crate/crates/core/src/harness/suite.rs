use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_active_learning, RunResult, Workspace};
use crate::error::{Error, Result};
use crate::strategy::StrategyKind;

/// Budgets swept by default (labels per class).
pub const DEFAULT_SWEEP: [usize; 6] = [2, 4, 6, 8, 10, 12];

/// Which table a suite produces.
#[derive(Debug, Clone, PartialEq)]
pub enum SuiteMode {
    /// One row per strategy.
    Compare(Vec<StrategyKind>),
    /// The five component workflows.
    Ablation,
    /// One row per `l_max` for `strategy`.
    BudgetSweep { strategy: StrategyKind, l_max: Vec<usize> },
}

impl SuiteMode {
    /// Expands into one config per table row. Budget sweeps shrink
    /// `epochs_per_query` where needed so every budget fits the epoch count.
    pub fn cells(&self, base: &ExperimentConfig, k: usize) -> Vec<ExperimentConfig> {
        let with = |s: StrategyKind| ExperimentConfig {
            strategy: s,
            ..base.clone()
        };
        match self {
            SuiteMode::Compare(strategies) => strategies.iter().map(|&s| with(s)).collect(),
            SuiteMode::Ablation => StrategyKind::ABLATION.iter().map(|&s| with(s)).collect(),
            SuiteMode::BudgetSweep { strategy, l_max } => l_max
                .iter()
                .map(|&l| {
                    let mut cfg = ExperimentConfig {
                        l_max: l,
                        ..with(*strategy)
                    };
                    cfg.fit_epochs_per_query(k);
                    cfg
                })
                .collect(),
        }
    }

    fn label(&self, cfg: &ExperimentConfig) -> String {
        match self {
            SuiteMode::Ablation => cfg.strategy.ablation_label().to_string(),
            _ => cfg.strategy.name().to_string(),
        }
    }
}

/// Aggregate over the runs of one cell. F1 values are percentages; `std`
/// is the population standard deviation over successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub label: String,
    pub strategy: String,
    pub l_max: usize,
    pub epochs_per_query: usize,
    pub runs: usize,
    pub failed: usize,
    pub micro_mean: f64,
    pub micro_std: f64,
    pub macro_mean: f64,
    pub macro_std: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SummaryRow>,
    pub runs: Vec<RunResult>,
}

impl SuiteReport {
    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "dataset\tlabel\tstrategy\tl_max\tepochs_per_query\truns\tfailed\tmicro_mean\tmicro_std\tmacro_mean\tmacro_std\tconfig_hash\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{}\n",
                r.dataset,
                r.label,
                r.strategy,
                r.l_max,
                r.epochs_per_query,
                r.runs,
                r.failed,
                r.micro_mean,
                r.micro_std,
                r.macro_mean,
                r.macro_std,
                r.config_hash
            ));
        }
        out
    }

    /// Appends runs to `results.jsonl` and writes `summary.tsv` and
    /// `summary.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let jsonl = dir.join("results.jsonl");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&jsonl)
            .map_err(|e| Error::io(&jsonl, e))?;
        for r in &self.runs {
            writeln!(f, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(&jsonl, e))?;
        }
        let tsv = dir.join("summary.tsv");
        fs::write(&tsv, self.to_tsv()).map_err(|e| Error::io(&tsv, e))?;
        let json = dir.join("summary.json");
        fs::write(&json, serde_json::to_string_pretty(&self.rows)?).map_err(|e| Error::io(&json, e))?;
        Ok(())
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(dataset: &str, label: String, cfg: &ExperimentConfig, runs: &[RunResult]) -> SummaryRow {
    let micro: Vec<f64> = runs.iter().filter_map(|r| r.micro_f1()).map(|v| 100.0 * v).collect();
    let macro_: Vec<f64> = runs.iter().filter_map(|r| r.macro_f1()).map(|v| 100.0 * v).collect();
    let (micro_mean, micro_std) = mean_std(&micro);
    let (macro_mean, macro_std) = mean_std(&macro_);
    SummaryRow {
        dataset: dataset.to_string(),
        label,
        strategy: cfg.strategy.name().to_string(),
        l_max: cfg.l_max,
        epochs_per_query: cfg.epochs_per_query,
        runs: runs.len(),
        failed: runs.len() - micro.len(),
        micro_mean,
        micro_std,
        macro_mean,
        macro_std,
        config_hash: cfg.hash(),
    }
}

/// Runs `n_val_samples × n_repeats` experiments per cell. Runs execute in
/// parallel and are merged by index, so the report does not depend on
/// scheduling. A run that errors is recorded as a failure and the suite
/// continues.
pub fn run_suite(ws: &Workspace, base: &ExperimentConfig, mode: &SuiteMode) -> Result<SuiteReport> {
    let k = ws.dataset.k;
    let cells = mode.cells(base, k);
    for cfg in &cells {
        cfg.validate(k)?;
    }
    let per_cell = base.n_val_samples * base.n_repeats;
    let jobs: Vec<(usize, usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..base.n_val_samples).flat_map(move |v| (0..base.n_repeats).map(move |r| (c, v, r))))
        .collect();
    let runs: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(c, v, r)| {
            let cfg = &cells[c];
            run_active_learning(ws, cfg, v, r).unwrap_or_else(|e| failed_run(ws, cfg, v, r, e.to_string()))
        })
        .collect();
    let rows = cells
        .iter()
        .zip(runs.chunks(per_cell.max(1)))
        .map(|(cfg, chunk)| summarize(&ws.dataset.name, mode.label(cfg), cfg, chunk))
        .collect();
    Ok(SuiteReport { rows, runs })
}

fn failed_run(ws: &Workspace, cfg: &ExperimentConfig, v: usize, r: usize, msg: String) -> RunResult {
    log::warn!("run {v}/{r} ({}) failed: {msg}", cfg.strategy);
    RunResult {
        config_hash: cfg.hash(),
        dataset: ws.dataset.name.clone(),
        strategy: cfg.strategy.name().to_string(),
        l_max: cfg.l_max,
        val_index: v,
        repeat: r,
        seeds: super::config::RunSeeds::for_run(cfg.seed, v, r),
        test: None,
        best_val_micro_f1: None,
        selected_epoch: None,
        initial: Vec::new(),
        trace: Vec::new(),
        wall_ms: 0,
        failure: Some(msg),
    }
}
