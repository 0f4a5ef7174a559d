//! `smartquery` command line: single runs, suites, ablations, budget sweeps
//! and inspection tools.
//!
//! Settings resolve as flag > `SMARTQUERY_*` environment variable > config
//! file (`--config`, TOML or JSON) > built-in default.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use smartquery::centrality::build_pool;
use smartquery::graph::bundle::{load, BundleFormat, Dataset};
use smartquery::graph::AdjacencyKind;
use smartquery::harness::{
    run_suite, run_with_checkpoint, ExperimentConfig, GroundTruth, SuiteMode, SuiteReport, Workspace, DEFAULT_SWEEP,
};
use smartquery::labels::LabelState;
use smartquery::propagation::{propagate, LabelSeed};
use smartquery::strategy::StrategyKind;

#[derive(Parser)]
#[command(name = "smartquery", version, about = "Graph active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One active-learning run; prints its result as JSON.
    Run {
        #[command(flatten)]
        opts: Overrides,
        /// Validation-set index of the run.
        #[arg(long, default_value_t = 0)]
        val_index: usize,
        /// Repeat index of the run.
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        /// Write the final model weights here as JSON.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Strategy comparison table.
    Suite {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long, value_delimiter = ',', default_value = "smartquery,random,entropy,degree,coreset,age")]
        strategies: Vec<StrategyKind>,
    },
    /// Component ablation table.
    Ablation {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Accuracy against the per-class label budget.
    SweepBudget {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<usize>>,
    },
    /// Per-node degree, PageRank and pool score as TSV.
    PoolInspect {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Label spreading from a seed file (`node class` per line); prints F as TSV.
    LpDebug {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        seeds: PathBuf,
    },
    /// Prints the resolved configuration as JSON.
    Config {
        #[command(flatten)]
        opts: Overrides,
    },
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// Config file (TOML, or JSON by `.json` extension).
    #[arg(long, env = "SMARTQUERY_CONFIG")]
    config: Option<PathBuf>,
    /// Dataset directory (canonical bundle or LINQS files).
    #[arg(long, env = "SMARTQUERY_DATASET")]
    dataset: Option<String>,
    /// auto, canonical or linqs.
    #[arg(long, env = "SMARTQUERY_FORMAT")]
    format: Option<BundleFormat>,
    #[arg(long, env = "SMARTQUERY_STRATEGY")]
    strategy: Option<StrategyKind>,
    #[arg(long, env = "SMARTQUERY_L_INIT")]
    l_init: Option<usize>,
    #[arg(long, env = "SMARTQUERY_L_MAX")]
    l_max: Option<usize>,
    /// Total training epochs.
    #[arg(long, env = "SMARTQUERY_EPOCHS")]
    epochs: Option<usize>,
    #[arg(long, env = "SMARTQUERY_EPOCHS_PER_QUERY")]
    epochs_per_query: Option<usize>,
    /// Label-spreading α.
    #[arg(long, env = "SMARTQUERY_ALPHA")]
    alpha: Option<f64>,
    /// PageRank damping β.
    #[arg(long, env = "SMARTQUERY_BETA")]
    beta: Option<f64>,
    #[arg(long, env = "SMARTQUERY_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "SMARTQUERY_REPEATS")]
    repeats: Option<usize>,
    #[arg(long, env = "SMARTQUERY_VAL_SAMPLES")]
    val_samples: Option<usize>,
    /// Output directory for results.jsonl / summary files, or output file
    /// for the TSV tools (stdout if absent).
    #[arg(long, env = "SMARTQUERY_OUT")]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.dataset {
            cfg.dataset.clone_from(v);
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            format => cfg.format,
            strategy => cfg.strategy,
            l_init => cfg.l_init,
            l_max => cfg.l_max,
            epochs => cfg.epochs_total,
            epochs_per_query => cfg.epochs_per_query,
            alpha => cfg.lp.alpha,
            beta => cfg.pagerank.beta,
            seed => cfg.seed,
            repeats => cfg.n_repeats,
            val_samples => cfg.n_val_samples,
        }
        Ok(cfg)
    }
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    } else {
        toml::from_str(&text).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    if cfg.dataset.is_empty() {
        bail!("no dataset given (--dataset, SMARTQUERY_DATASET or `dataset` in the config file)");
    }
    let ds = load(Path::new(&cfg.dataset), cfg.format).with_context(|| format!("loading {}", cfg.dataset))?;
    log::info!("{}: n={} d={} K={}", ds.name, ds.graph.n(), ds.features.d(), ds.k);
    Ok(ds)
}

/// Writes to `out` if given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn suite(opts: &Overrides, mode: SuiteMode) -> Result<()> {
    let cfg = opts.resolve()?;
    let ws = Workspace::new(load_dataset(&cfg)?);
    let report: SuiteReport = run_suite(&ws, &cfg, &mode)?;
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    report.write(&dir)?;
    print!("{}", report.to_tsv());
    log::info!("wrote {}", dir.display());
    Ok(())
}

fn run(opts: &Overrides, val_index: usize, repeat: usize, checkpoint: Option<&Path>) -> Result<()> {
    let cfg = opts.resolve()?;
    let ws = Workspace::new(load_dataset(&cfg)?);
    let (result, weights) = run_with_checkpoint(&ws, &cfg, val_index, repeat, &GroundTruth(&ws.dataset.labels))?;
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir)?;
        let line = serde_json::to_string(&result)?;
        let path = dir.join("results.jsonl");
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&path)?;
        writeln!(f, "{line}")?;
    }
    if let (Some(path), Some(w)) = (checkpoint, weights) {
        fs::write(path, serde_json::to_string(&w)?).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", serde_json::to_string_pretty(&result)?);
    if let Some(msg) = &result.failure {
        bail!("run failed: {msg}");
    }
    Ok(())
}

fn pool_inspect(opts: &Overrides) -> Result<()> {
    let cfg = opts.resolve()?;
    let ws = Workspace::new(load_dataset(&cfg)?);
    let ds = &ws.dataset;
    let n = ds.graph.n();
    let scores = ws.centrality(&cfg.pagerank);
    let state = LabelState::new(ds.k, vec![false; n], vec![false; n], &[], 0)?;
    let pool = build_pool(&scores, &state, cfg.l_max, ds.k);
    let mut out = String::from("node\tdegree\tdegree_norm\tpagerank\tpagerank_norm\tpool_score\tin_pool\n");
    for v in 0..n {
        out.push_str(&format!(
            "{v}\t{}\t{:.6}\t{:.8e}\t{:.6}\t{:.6}\t{}\n",
            scores.degree[v],
            scores.degree_norm[v],
            scores.pagerank[v],
            scores.pagerank_norm[v],
            scores.pool_score[v],
            u8::from(pool.contains(v))
        ));
    }
    emit(opts.out.as_deref(), &out)
}

fn read_seeds(path: &Path, n: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split_whitespace().collect();
        let [node, class] = cells[..] else {
            bail!("{}:{}: expected `node class`", path.display(), i + 1);
        };
        let (node, class): (usize, usize) = (node.parse()?, class.parse()?);
        if node >= n || class >= k {
            bail!("{}:{}: node {node} / class {class} out of range (n={n}, K={k})", path.display(), i + 1);
        }
        pairs.push((node, class));
    }
    Ok(pairs)
}

fn lp_debug(opts: &Overrides, seeds: &Path) -> Result<()> {
    let cfg = opts.resolve()?;
    let ds = load_dataset(&cfg)?;
    let (n, k) = (ds.graph.n(), ds.k);
    let seed = LabelSeed::from_pairs(n, k, read_seeds(seeds, n, k)?);
    let res = propagate(ds.graph.normalized(AdjacencyKind::PlainSymmetric), seed.matrix().view(), &cfg.lp)?;
    log::info!("{} iterations, converged: {}", res.iterations, res.converged);
    let mut out = String::from("node");
    for c in 0..k {
        out.push_str(&format!("\tf{c}"));
    }
    out.push('\n');
    for (v, row) in res.f.rows().into_iter().enumerate() {
        out.push_str(&v.to_string());
        for x in row {
            out.push_str(&format!("\t{x:.10e}"));
        }
        out.push('\n');
    }
    emit(opts.out.as_deref(), &out)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            opts,
            val_index,
            repeat,
            checkpoint,
        } => run(&opts, val_index, repeat, checkpoint.as_deref()),
        Command::Suite { opts, strategies } => suite(&opts, SuiteMode::Compare(strategies)),
        Command::Ablation { opts } => suite(&opts, SuiteMode::Ablation),
        Command::SweepBudget { opts, budgets } => {
            let strategy = opts.resolve()?.strategy;
            let l_max = budgets.unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
            suite(&opts, SuiteMode::BudgetSweep { strategy, l_max })
        }
        Command::PoolInspect { opts } => pool_inspect(&opts),
        Command::LpDebug { opts, seeds } => lp_debug(&opts, &seeds),
        Command::Config { opts } => {
            println!("{}", serde_json::to_string_pretty(&opts.resolve()?)?);
            Ok(())
        }
    }
}
