//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The Cora criteria look for the dataset at `$SMARTQUERY_CORA`, falling back
//! to `data/cora` in the workspace root, and print SKIP when it is absent or
//! `SMARTQUERY_ACCEPTANCE_SKIP_CORA=1`. The process exits non-zero on a FAIL
//! only with `SMARTQUERY_ACCEPTANCE_STRICT=1`. `SMARTQUERY_ACCEPTANCE_OUT=dir`
//! keeps the Cora run reports.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use smartquery::centrality::{pagerank, CentralityScores, PageRankConfig};
use smartquery::gcn::{GcnConfig, GcnModel, Posterior};
use smartquery::graph::bundle::{load, BundleFormat};
use smartquery::graph::{AdjacencyKind, FeatureMatrix, SparseGraph};
use smartquery::harness::*;
use smartquery::labels::LabelState;
use smartquery::propagation::{propagate, LabelSeed, LpConfig};
use smartquery::strategy::{HybridScorer, IndicatorCache, LpScoring, QueryContext, StrategyKind};

const RUNS: (usize, usize) = (10, 2);

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, name: &str, verdict: Verdict, detail: String, start: Instant) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                self.failures += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        println!("{tag} {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    }

    fn check(&mut self, name: &str, ok: bool, detail: String, start: Instant) {
        self.line(name, if ok { Verdict::Pass } else { Verdict::Fail }, detail, start);
    }
}

fn lp_closed_form(s: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let n = s.nrows();
    (DMatrix::identity(n, n) - s * alpha).lu().solve(y).unwrap() * (1.0 - alpha)
}

fn random_seed(n: usize, k: usize, r: &mut rand_chacha::ChaCha8Rng) -> LabelSeed {
    let mut pairs = Vec::new();
    for v in 0..n {
        if r.gen_bool(0.3) {
            pairs.push((v, r.gen_range(0..k)));
        }
    }
    LabelSeed::from_pairs(n, k, pairs)
}

fn lp_oracle(rep: &mut Report) {
    let start = Instant::now();
    let mut r = common::rng(100);
    let (mut worst_default, mut worst_tight) = (0.0_f64, 0.0_f64);
    for _ in 0..50 {
        let n = r.gen_range(2..=50);
        let k = r.gen_range(2..6);
        let (g, edges) = common::random_graph(n, r.gen_range(0.03..0.4), &mut r);
        let seed = random_seed(n, k, &mut r);
        let s = common::dense_plain_norm(&common::dense_adjacency(n, &edges));
        let adj = g.normalized(AdjacencyKind::PlainSymmetric);
        for alpha in [0.1, 0.5, 0.9] {
            let exact = lp_closed_form(&s, &common::to_dmatrix(seed.matrix()), alpha);
            let default = LpConfig { alpha, ..Default::default() };
            let f = propagate(adj, seed.matrix().view(), &default).unwrap();
            worst_default = worst_default.max(common::max_abs_diff(&exact, &f.f));
            // stopping threshold scaled so the geometric tail stays below 1e-6
            let tight = LpConfig {
                alpha,
                tol: 1e-6 * (1.0 - alpha) / alpha,
                ..Default::default()
            };
            let f = propagate(adj, seed.matrix().view(), &tight).unwrap();
            worst_tight = worst_tight.max(common::max_abs_diff(&exact, &f.f));
        }
    }
    let ok = worst_tight < 1e-6 && start.elapsed().as_secs_f64() < 10.0;
    rep.check(
        "lp_closed_form_equivalence",
        ok,
        format!("max L∞ {worst_tight:.2e} with tol 1e-6·(1-α)/α (default tol 1e-6 gives {worst_default:.2e}); limit 1e-6, <10s"),
        start,
    );
}

fn gradients(rep: &mut Report) {
    let start = Instant::now();
    let mut r = common::rng(200);
    let mut worst = 0.0_f64;
    for case in 0..20 {
        let n = r.gen_range(4..15);
        let (g, _) = common::random_graph(n, 0.35, &mut r);
        let d = r.gen_range(2..8);
        let k = r.gen_range(2..5);
        let x = FeatureMatrix::new(Array2::from_shape_fn((n, d), |_| r.gen_range(-1.0..1.0))).unwrap();
        let mut labeled = Vec::new();
        for v in (0..n).step_by(2) {
            labeled.push((v, r.gen_range(0..k)));
        }
        let st = LabelState::new(k, vec![false; n], vec![false; n], &labeled, 0).unwrap();
        let cfg = GcnConfig {
            hidden: r.gen_range(2..9),
            dropout: 0.0,
            ..Default::default()
        };
        let model = GcnModel::new(d, k, cfg, case).unwrap();
        worst = worst.max(common::worst_gradient_error(&model, &g, &x, &st));
    }
    let ok = worst < 1e-4 && start.elapsed().as_secs_f64() < 30.0;
    rep.check("gcn_gradients", ok, format!("max relative error {worst:.2e}; limit 1e-4, <30s"), start);
}

/// Dense power iteration; degree-0 columns spread uniformly.
fn pagerank_power(a: &DMatrix<f64>, beta: f64) -> DVector<f64> {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let deg: f64 = a.column(j).sum();
        if deg == 0.0 {
            1.0 / n as f64
        } else {
            a[(i, j)] / deg
        }
    });
    let mut pr = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..100_000 {
        let next = &m * &pr * beta + DVector::from_element(n, (1.0 - beta) / n as f64);
        let change = (&next - &pr).abs().sum();
        pr = next;
        if change < 1e-15 {
            break;
        }
    }
    pr
}

fn pagerank_oracle(rep: &mut Report) {
    let start = Instant::now();
    let mut r = common::rng(300);
    let (mut worst, mut worst_sum) = (0.0_f64, 0.0_f64);
    let mut with_dangling = 0;
    for case in 0..50 {
        let n = r.gen_range(2..=60);
        let mut edges = common::random_edges(n, r.gen_range(0.01..0.3), &mut r);
        if case % 2 == 0 {
            let isolated = r.gen_range(0..n);
            edges.retain(|&(u, v)| u != isolated && v != isolated);
        }
        let g = SparseGraph::from_edges(n, edges.clone()).unwrap();
        with_dangling += usize::from(g.degrees().contains(&0));
        let cfg = PageRankConfig::default();
        let pr = pagerank(&g, &cfg);
        let oracle = pagerank_power(&common::dense_adjacency(n, &edges), cfg.beta);
        for i in 0..n {
            worst = worst.max((pr.scores[i] - oracle[i]).abs());
        }
        worst_sum = worst_sum.max((pr.scores.iter().sum::<f64>() - 1.0).abs());
    }
    rep.check(
        "pagerank_oracle",
        worst < 1e-8 && worst_sum <= 1e-9 && with_dangling >= 25,
        format!("max L∞ {worst:.2e} (limit 1e-8), max |Σ-1| {worst_sum:.2e} (limit 1e-9), {with_dangling}/50 graphs with dangling nodes"),
        start,
    );
}

fn dense_lp(s: &DMatrix<f64>, y: &DMatrix<f64>, lp: &LpConfig) -> DMatrix<f64> {
    let mut f = y.clone();
    for _ in 0..lp.max_iter {
        let next = s * &f * lp.alpha + y * (1.0 - lp.alpha);
        let change = (&next - &f).amax();
        f = next;
        if change < lp.tol {
            break;
        }
    }
    f
}

fn dense_uncertainty(f: &DMatrix<f64>) -> f64 {
    let k = f.ncols();
    let mut h = 0.0;
    for i in 0..f.nrows() {
        let s: f64 = f.row(i).iter().sum();
        for c in 0..k {
            let p = if s < 1e-12 { 1.0 / k as f64 } else { f[(i, c)] / s };
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
    }
    h
}

/// Exhaustive score: two fresh propagations per class, nothing shared.
fn brute_force_score(s: &DMatrix<f64>, labeled: &[(usize, usize)], probs: &Array2<f64>, v: usize, lp: &LpConfig) -> f64 {
    let (n, k) = probs.dim();
    let mut y = DMatrix::zeros(n, k);
    for &(u, c) in labeled {
        y[(u, c)] = 1.0;
    }
    (0..k)
        .map(|c| {
            let before = dense_uncertainty(&dense_lp(s, &y, lp));
            let mut yc = y.clone();
            yc[(v, c)] = 1.0;
            probs[[v, c]] * (before - dense_uncertainty(&dense_lp(s, &yc, lp)))
        })
        .sum()
}

fn score_equivalence(rep: &mut Report) {
    let start = Instant::now();
    let mut r = common::rng(400);
    let (mut worst_super, mut worst_direct, mut super_default) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let n = r.gen_range(4..=30);
        let k = r.gen_range(2..5);
        let (g, edges) = common::random_graph(n, r.gen_range(0.05..0.3), &mut r);
        let s = common::dense_plain_norm(&common::dense_adjacency(n, &edges));
        let mut labeled = Vec::new();
        for v in 0..n {
            if v < k || r.gen_bool(0.15) {
                labeled.push((v, r.gen_range(0..k)));
            }
        }
        let mut probs = Array2::from_shape_fn((n, k), |_| r.gen_range(0.01..1.0));
        for mut row in probs.rows_mut() {
            let t = row.sum();
            row.mapv_inplace(|x| x / t);
        }
        let posterior = Posterior {
            logits: probs.mapv(f64::ln),
            probs: probs.clone(),
            hidden: Array2::zeros((n, 1)),
        };
        let state = LabelState::new(k, vec![false; n], vec![false; n], &labeled, n).unwrap();
        let centrality = CentralityScores::compute(&g, &PageRankConfig::default());
        let tight = LpConfig {
            tol: 1e-14,
            ..Default::default()
        };
        let default = LpConfig::default();
        let measure = |lp: &LpConfig, scoring: LpScoring| -> f64 {
            let indicators = IndicatorCache::new();
            let ctx = QueryContext {
                graph: &g,
                lp_adj: g.normalized(AdjacencyKind::PlainSymmetric),
                posterior: &posterior,
                state: &state,
                pool: None,
                centrality: &centrality,
                lp,
                scoring,
                indicators: &indicators,
            };
            let scorer = HybridScorer::new(&ctx).unwrap();
            let mut worst = 0.0_f64;
            for v in state.unlabeled() {
                let got = scorer.score(v).unwrap().value;
                worst = worst.max((got - brute_force_score(&s, &labeled, &probs, v, lp)).abs());
            }
            worst
        };
        worst_super = worst_super.max(measure(&tight, LpScoring::Superposition));
        worst_direct = worst_direct.max(measure(&default, LpScoring::Direct));
        super_default = super_default.max(measure(&default, LpScoring::Superposition));
    }
    rep.check(
        "score_brute_force_equivalence",
        worst_super < 1e-10 && worst_direct < 1e-10,
        format!(
            "max |Δ| superposition@tol1e-14 {worst_super:.2e}, direct@default {worst_direct:.2e}; limit 1e-10 \
             (info: superposition@default differs by {super_default:.2e}, the LP truncation error)"
        ),
        start,
    );
}

fn cora_dir() -> PathBuf {
    std::env::var_os("SMARTQUERY_CORA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cora"))
}

/// Mean and standard error of paired Micro-F1 differences (points).
fn paired_mean_diff(a: &SuiteReport, la: &str, b: &SuiteReport, lb: &str) -> (f64, f64) {
    let pick = |rep: &SuiteReport, label: &str| -> Vec<(usize, usize, f64)> {
        let strategy = &rep.row(label).unwrap().strategy;
        rep.runs
            .iter()
            .filter(|r| &r.strategy == strategy)
            .filter_map(|r| r.micro_f1().map(|m| (r.val_index, r.repeat, 100.0 * m)))
            .collect()
    };
    let (xa, xb) = (pick(a, la), pick(b, lb));
    let diffs: Vec<f64> = xa
        .iter()
        .filter_map(|&(v, r, m)| xb.iter().find(|p| p.0 == v && p.1 == r).map(|p| m - p.2))
        .collect();
    let (mean, std) = mean_std(&diffs);
    (mean, std / (diffs.len() as f64 - 1.0).max(1.0).sqrt())
}

fn cora(rep: &mut Report) {
    let names = [
        "table2_vicinity",
        "strategy_ordering",
        "ablation_ordering",
        "budget_monotonicity",
        "determinism",
        "no_leak",
    ];
    let dir = cora_dir();
    let start = Instant::now();
    let reason = if std::env::var("SMARTQUERY_ACCEPTANCE_SKIP_CORA").is_ok_and(|v| v == "1") {
        Some("skipped by SMARTQUERY_ACCEPTANCE_SKIP_CORA=1".to_string())
    } else if !dir.exists() {
        Some(format!("Cora not found at {}", dir.display()))
    } else {
        None
    };
    if let Some(reason) = reason {
        for n in names {
            rep.line(n, Verdict::Skip, reason.clone(), start);
        }
        return;
    }
    let ds = load(&dir, BundleFormat::Auto).expect("load Cora");
    let ws = Workspace::new(ds);
    let base = ExperimentConfig {
        dataset: dir.display().to_string(),
        n_val_samples: RUNS.0,
        n_repeats: RUNS.1,
        ..Default::default()
    };

    let t = Instant::now();
    let cmp = run_suite(
        &ws,
        &base,
        &SuiteMode::Compare(vec![StrategyKind::SmartQuery, StrategyKind::Random, StrategyKind::Entropy, StrategyKind::PoolOnly]),
    )
    .unwrap();
    let sq = cmp.row("smartquery").unwrap();
    rep.check(
        "table2_vicinity",
        sq.failed == 0 && (sq.micro_mean - 73.88).abs() <= 6.0 && (sq.macro_mean - 69.33).abs() <= 6.0,
        format!(
            "{} runs: micro {:.2}±{:.2} (target 73.88±6), macro {:.2}±{:.2} (target 69.33±6)",
            sq.runs, sq.micro_mean, sq.micro_std, sq.macro_mean, sq.macro_std
        ),
        t,
    );
    let t = Instant::now();
    let (d_rand, se_rand) = paired_mean_diff(&cmp, "smartquery", &cmp, "random");
    let (d_ent, se_ent) = paired_mean_diff(&cmp, "smartquery", &cmp, "entropy");
    let (rand_row, ent_row) = (cmp.row("random").unwrap(), cmp.row("entropy").unwrap());
    rep.check(
        "strategy_ordering",
        d_rand >= 3.0 && d_ent >= 3.0,
        format!(
            "paired Δ vs random {d_rand:+.2}±{se_rand:.2} (random {:.2}), vs entropy {d_ent:+.2}±{se_ent:.2} (entropy {:.2}); need ≥ +3 each (± is the paired standard error)",
            rand_row.micro_mean, ent_row.micro_mean
        ),
        t,
    );
    let pool = cmp.row("pool-only").unwrap();
    let (d_pool, se_pool) = paired_mean_diff(&cmp, "smartquery", &cmp, "pool-only");
    rep.check(
        "ablation_ordering",
        sq.micro_mean > pool.micro_mean && pool.micro_mean > rand_row.micro_mean,
        format!(
            "GCN+Pool+LP {:.2} > GCN+Pool {:.2} > GCN {:.2} (paired Δ LP vs Pool {d_pool:+.2}±{se_pool:.2})",
            sq.micro_mean, pool.micro_mean, rand_row.micro_mean
        ),
        t,
    );

    let t = Instant::now();
    let sweep = run_suite(
        &ws,
        &base,
        &SuiteMode::BudgetSweep {
            strategy: StrategyKind::SmartQuery,
            l_max: DEFAULT_SWEEP.to_vec(),
        },
    )
    .unwrap();
    let means: Vec<f64> = sweep.rows.iter().map(|r| r.micro_mean).collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0] - 1.0) && sweep.rows.iter().all(|r| r.failed == 0);
    let curve: Vec<String> = sweep.rows.iter().map(|r| format!("{}:{:.2}", r.l_max, r.micro_mean)).collect();
    rep.check(
        "budget_monotonicity",
        monotone,
        format!("micro by l_max {} (1-point allowance)", curve.join(" ")),
        t,
    );

    let t = Instant::now();
    let mut reproduced = 0;
    let mut checked = 0;
    for (report, cells) in [
        (&cmp, SuiteMode::Compare(vec![StrategyKind::SmartQuery, StrategyKind::Random, StrategyKind::Entropy, StrategyKind::PoolOnly]).cells(&base, ws.dataset.k)),
        (&sweep, SuiteMode::BudgetSweep { strategy: StrategyKind::SmartQuery, l_max: DEFAULT_SWEEP.to_vec() }.cells(&base, ws.dataset.k)),
    ] {
        let per_cell = RUNS.0 * RUNS.1;
        for (c, cfg) in cells.iter().enumerate() {
            // one run per cell, re-executed on a cold workspace
            let stored = &report.runs[c * per_cell + (c * 7) % per_cell];
            let fresh = run_active_learning(&Workspace::new(ws.dataset.clone()), cfg, stored.val_index, stored.repeat).unwrap();
            checked += 1;
            reproduced += usize::from(fresh.same_outcome(stored));
        }
    }
    rep.check(
        "determinism",
        reproduced == checked,
        format!("{reproduced}/{checked} re-executed runs identical (metrics, selection, trace)"),
        t,
    );

    let t = Instant::now();
    let mut leaks = 0;
    let mut queries = 0;
    let mut wrong_length = 0;
    for run in cmp.runs.iter().chain(&sweep.runs) {
        let cfg = ExperimentConfig {
            l_max: run.l_max,
            ..base.clone()
        };
        let splits = make_splits(&ws.dataset.labels, ws.dataset.k, &cfg, &run.seeds).unwrap();
        wrong_length += usize::from(run.trace.len() != cfg.budget(ws.dataset.k));
        for q in &run.trace {
            queries += 1;
            leaks += usize::from(splits.test_mask[q.node] || splits.val_mask[q.node] || !q.score.is_finite());
        }
    }
    let runs = cmp.runs.len() + sweep.runs.len();
    rep.check(
        "no_leak",
        leaks == 0 && wrong_length == 0,
        format!("{runs} runs, {queries} queries, {leaks} on test/validation nodes, {wrong_length} traces of wrong length"),
        t,
    );
    if let Some(dir) = std::env::var_os("SMARTQUERY_ACCEPTANCE_OUT").map(PathBuf::from) {
        cmp.write(&dir.join("compare")).unwrap();
        sweep.write(&dir.join("sweep")).unwrap();
    }
    println!("cora criteria total {:.1}s", start.elapsed().as_secs_f64());
}

fn main() -> ExitCode {
    let mut rep = Report { failures: 0 };
    lp_oracle(&mut rep);
    gradients(&mut rep);
    pagerank_oracle(&mut rep);
    score_equivalence(&mut rep);
    cora(&mut rep);
    println!("acceptance: {} failing", rep.failures);
    let strict = std::env::var("SMARTQUERY_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && rep.failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
