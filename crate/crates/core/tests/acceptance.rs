//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use hmvr::autotune::{
    configure, predict_latency, set_gran, AccuracyEvaluator, AutotuneOptions, GranEvent,
    LatencyModel, NdcgEvaluator, SearchRanges, SetGranParams, TConvention,
};
use hmvr::eval::{bench, evaluate, EvalOptions, EvalReport};
use hmvr::scheduler::{kendall_tau, PruneSchedule};
use hmvr::scoring::oracle_topk;
use hmvr::synth::{generate, SynthDataset, SynthSpec};
use hmvr::{
    process_query, Aggregation, DecomposedQuery, HierarchicalIndex, Mode, SchedulerConfig,
    SimilarityKind,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

// ---- independent oracles -------------------------------------------------

fn naive_sim(a: &[f32], b: &[f32], kind: SimilarityKind) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    let mut l1 = 0.0f64;
    for i in 0..a.len() {
        let (x, y) = (a[i] as f64, b[i] as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
        l1 += (x - y).abs();
    }
    match kind {
        SimilarityKind::Dot => dot,
        SimilarityKind::Cosine if na == 0.0 || nb == 0.0 => 0.0,
        SimilarityKind::Cosine => dot / (na.sqrt() * nb.sqrt()),
        SimilarityKind::NegL1 => -l1,
    }
}

/// Exhaustive scores with plain loops, straight from the scoring rules.
fn naive_scores(q: &DecomposedQuery, index: &HierarchicalIndex, cfg: &SchedulerConfig) -> Vec<f64> {
    let levels: Vec<usize> = match cfg.mode {
        Mode::Single => vec![1],
        _ if cfg.levels.is_empty() => index.levels().to_vec(),
        _ => cfg.levels.clone(),
    };
    let mut out = Vec::with_capacity(index.len());
    for i in 0..index.len() {
        let global = naive_sim(&q.global, index.whole_image(i), cfg.similarity);
        if cfg.mode == Mode::Single {
            out.push(global);
            continue;
        }
        let mut agg = match (cfg.mode, cfg.aggregation) {
            (Mode::Hierarchical, Aggregation::LogSum) => 0.0,
            _ => 1.0,
        };
        for sub in &q.subs {
            let mut best = f64::NEG_INFINITY;
            for &n in &levels {
                let g = index.level_position(n).unwrap();
                for seg in index.segments(i, g) {
                    best = best.max(naive_sim(sub, seg, cfg.similarity));
                }
            }
            match (cfg.mode, cfg.aggregation) {
                (Mode::Hierarchical, Aggregation::LogSum) => agg += best.max(1e-9).ln(),
                _ => agg *= best,
            }
        }
        let add_global = cfg.mode == Mode::FlatMvr || cfg.include_global_additive;
        out.push(if add_global { global + agg } else { agg });
    }
    out
}

fn naive_topk(scores: &[f64], index: &HierarchicalIndex, k: usize) -> Vec<(String, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then_with(|| index.image_id(a).cmp(index.image_id(b)))
    });
    order
        .into_iter()
        .take(k)
        .map(|i| (index.image_id(i).to_string(), scores[i]))
        .collect()
}

/// Kendall tau by explicit pair counting over the union of both lists; an
/// id missing from a list ranks just past its end.
fn naive_tau(a: &[u32], b: &[u32]) -> f64 {
    let mut union: Vec<u32> = a.to_vec();
    for x in b {
        if !a.contains(x) {
            union.push(*x);
        }
    }
    let rank = |list: &[u32], x: u32| {
        list.iter()
            .position(|&y| y == x)
            .map_or(list.len() + 1, |p| p + 1)
    };
    let n = union.len();
    if n < 2 {
        return 1.0;
    }
    let (mut c, mut d) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = rank(a, union[i]) as i64 - rank(a, union[j]) as i64;
            let db = rank(b, union[i]) as i64 - rank(b, union[j]) as i64;
            match (da * db).signum() {
                1 => c += 1,
                -1 => d += 1,
                _ => {}
            }
        }
    }
    (c - d) as f64 / (n * (n - 1) / 2) as f64
}

fn permutations(n: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut p: Vec<u32> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

// ---- criteria ------------------------------------------------------------

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let kinds = [
        SimilarityKind::Cosine,
        SimilarityKind::Dot,
        SimilarityKind::NegL1,
    ];
    let levels = [1, 4, 9, 16];
    let (mut instances, mut checks, mut bit_mismatch, mut naive_mismatch) = (0, 0, 0, 0);
    for seed in 0..120u64 {
        let plain = seed % 2 == 0;
        let ds = generate(&SynthSpec {
            images: 200,
            dim: 16,
            levels: levels.to_vec(),
            queries: 3,
            seed,
            leak: if plain { 0.0 } else { 0.4 },
            coherence: if plain { 0.0 } else { 0.9 },
            global_mix: if plain { 0.0 } else { 0.75 },
            ..Default::default()
        })
        .unwrap();
        instances += 1;
        for mode in [Mode::Single, Mode::FlatMvr, Mode::Hierarchical] {
            let cfg = SchedulerConfig {
                mode,
                levels: match mode {
                    Mode::FlatMvr => vec![levels[seed as usize % 4]],
                    Mode::Hierarchical if seed % 3 == 1 => vec![1, 9, 16],
                    _ => vec![],
                },
                aggregation: if seed % 4 == 3 {
                    Aggregation::LogSum
                } else {
                    Aggregation::Product
                },
                include_global_additive: seed % 5 == 0,
                similarity: kinds[seed as usize % 3],
                k: 10,
                ..Default::default()
            }
            .exhaustive();
            for q in &ds.queries {
                checks += 1;
                let (got, _) = process_query(q, &ds.index, &cfg).unwrap();
                let oracle = oracle_topk(q, &ds.index, &cfg).unwrap();
                if !got.bit_eq(&oracle) {
                    bit_mismatch += 1;
                }
                let naive = naive_topk(&naive_scores(q, &ds.index, &cfg), &ds.index, cfg.k);
                let same = naive.len() == got.hits.len()
                    && naive.iter().zip(&got.hits).all(|((id, s), h)| {
                        *id == h.id && (s - h.score).abs() <= 1e-12 * s.abs().max(1.0)
                    });
                if !same {
                    naive_mismatch += 1;
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    (
        instances >= 100 && bit_mismatch == 0 && naive_mismatch == 0 && secs < 60.0,
        format!(
            "{instances} instances x 3 modes ({checks} queries): {bit_mismatch} bit mismatches vs oracle_topk, \
             {naive_mismatch} vs naive loops, {secs:.2}s"
        ),
    )
}

fn kendall() -> Outcome {
    let mut cases = 0usize;
    let mut bad = 0usize;
    for n in 0..=6u32 {
        let perms = permutations(n);
        for x in &perms {
            for y in &perms {
                cases += 1;
                if kendall_tau(x, y) != naive_tau(x, y) {
                    bad += 1;
                }
            }
        }
    }
    let exhaustive = cases;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let base: Vec<u32> = (0..100).collect();
    for _ in 0..1000 {
        let mut x = base.clone();
        let mut y = base.clone();
        x.shuffle(&mut rng);
        y.shuffle(&mut rng);
        cases += 1;
        if kendall_tau(&x, &y) != naive_tau(&x, &y) {
            bad += 1;
        }
    }
    // partially overlapping top-K lists
    for _ in 0..1000 {
        let mut pool: Vec<u32> = (0..25).collect();
        pool.shuffle(&mut rng);
        let x: Vec<u32> = pool[..10].to_vec();
        pool.shuffle(&mut rng);
        let y: Vec<u32> = pool[..rng.random_range(0..=10)].to_vec();
        cases += 1;
        if kendall_tau(&x, &y) != naive_tau(&x, &y) {
            bad += 1;
        }
    }
    let mut extremes_ok = true;
    for n in 2..=100u32 {
        let x: Vec<u32> = (0..n).collect();
        let r: Vec<u32> = x.iter().rev().copied().collect();
        extremes_ok &= kendall_tau(&x, &x) == 1.0 && kendall_tau(&x, &r) == -1.0;
    }
    (
        bad == 0 && extremes_ok,
        format!(
            "{cases} cases ({exhaustive} exhaustive pairs n<=6, 1000 random n=100, 1000 partial overlaps): \
             {bad} mismatches; identity=1 and reverse=-1 for n=2..100: {extremes_ok}"
        ),
    )
}

fn latency_model() -> Outcome {
    let worked =
        predict_latency(&LatencyModel::new(2.0, 100, vec![4, 16], vec![0.5, 0.25]).unwrap());

    // every survivor count N_D * t is integral and above K
    let ds = generate(&SynthSpec {
        images: 200,
        dim: 16,
        queries: 50,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let cfg = SchedulerConfig {
        t: 1.0,
        alpha: 0.5,
        tau: None,
        ..Default::default()
    };
    let report = evaluate(&ds.index, &ds.queries, &cfg, &EvalOptions::default()).unwrap();
    let schedule = PruneSchedule::new(1.0, 0.5).unwrap();
    let n_q = ds.queries.iter().map(|q| q.subs.len() as f64).sum::<f64>() / ds.queries.len() as f64;
    let levels = ds.index.levels().to_vec();
    let entering =
        LatencyModel::from_schedule(n_q, 200, &levels, &schedule, TConvention::SurvivorsEntering)
            .unwrap()
            .predict();
    let printed = LatencyModel::from_schedule(n_q, 200, &levels, &schedule, TConvention::AsPrinted)
        .unwrap()
        .predict();
    // 3 * (1*200 + 4*100 + 9*50 + 16*25)
    let by_hand = 3.0 * (200.0 + 400.0 + 450.0 + 400.0);
    (
        worked == 1200.0 && report.mean_pairs_scored == entering && entering == by_hand,
        format!(
            "worked example = {worked}; mean pairs_scored = {} vs predicted {entering} (survivors-entering \
             convention; as-printed convention gives {printed})",
            report.mean_pairs_scored
        ),
    )
}

fn eval(ds: &SynthDataset, cfg: &SchedulerConfig) -> EvalReport {
    evaluate(&ds.index, &ds.queries, cfg, &EvalOptions::default()).unwrap()
}

fn hierarchical_gain(ds: &SynthDataset, full: &EvalReport) -> Outcome {
    let levels = ds.index.levels().to_vec();
    let flat: Vec<f64> = levels
        .iter()
        .map(|&n| {
            eval(
                ds,
                &SchedulerConfig {
                    mode: Mode::FlatMvr,
                    levels: vec![n],
                    ..Default::default()
                },
            )
            .ndcg_at_10
        })
        .collect();
    let prefixes: Vec<f64> = (1..=levels.len())
        .map(|n| {
            eval(
                ds,
                &SchedulerConfig {
                    levels: levels[..n].to_vec(),
                    ..Default::default()
                },
            )
            .ndcg_at_10
        })
        .collect();
    let min_gain = flat
        .iter()
        .map(|f| full.ndcg_at_10 - f)
        .fold(f64::INFINITY, f64::min);
    let monotone = prefixes.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    (
        min_gain >= 0.02 && monotone,
        format!(
            "hierarchical NDCG@10 {:.4}; flat per level {:?}; min gain {min_gain:.4}; prefix NDCG {:?} monotone: {monotone}",
            full.ndcg_at_10,
            flat.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
            prefixes.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
        ),
    )
}

fn pruning(ds: &SynthDataset, full: &EvalReport) -> Outcome {
    let pruned = eval(
        ds,
        &SchedulerConfig {
            t: 0.2,
            alpha: 0.8,
            ..Default::default()
        },
    );
    let ratio = full.mean_pairs_scored / pruned.mean_pairs_scored;
    let drop = full.ndcg_at_10 - pruned.ndcg_at_10;
    (
        ratio >= 2.0 && drop <= 0.01,
        format!(
            "pairs {:.0} -> {:.0} ({ratio:.2}x fewer); NDCG@10 {:.4} -> {:.4} (drop {drop:.4})",
            full.mean_pairs_scored, pruned.mean_pairs_scored, full.ndcg_at_10, pruned.ndcg_at_10
        ),
    )
}

fn early_exit(ds: &SynthDataset, full: &EvalReport) -> Outcome {
    let r = eval(
        ds,
        &SchedulerConfig {
            tau: Some(0.9),
            ..Default::default()
        },
    );
    let max_level = *ds.index.levels().last().unwrap();
    let n_levels = ds.index.levels().len() as f64;
    let mean_level = r
        .exit_level_histogram
        .iter()
        .map(|(l, c)| (l * c) as f64)
        .sum::<f64>()
        / r.queries as f64;
    let drop = full.ndcg_at_10 - r.ndcg_at_10;
    (
        mean_level < max_level as f64 && r.mean_exit_position < n_levels && drop <= 0.01,
        format!(
            "{} of {} queries exit early; mean exit level {mean_level:.3} segments (max {max_level}), mean exit \
             position {:.3} of {n_levels}; NDCG@10 drop {drop:.4}",
            r.early_exits, r.queries, r.mean_exit_position
        ),
    )
}

fn overhead() -> Outcome {
    let ds = generate(&SynthSpec {
        images: 2000,
        levels: vec![1, 4, 9, 16, 25],
        queries: 200,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let configs = [
        (
            "T=0.2 alpha=0.8 tau=0.9",
            SchedulerConfig {
                t: 0.2,
                alpha: 0.8,
                tau: Some(0.9),
                ..Default::default()
            },
        ),
        ("no pruning, no exit", SchedulerConfig::default()),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, cfg) in configs {
        let r = bench(&ds.index, &ds.queries, &cfg, 1, 3).unwrap();
        ok &= r.mean_overhead_ms <= 1.0;
        parts.push(format!(
            "{name}: mean {:.4} ms, max {:.4} ms",
            r.mean_overhead_ms, r.max_overhead_ms
        ));
    }
    (
        ok,
        format!(
            "2000 images, 5 levels, bound 1 ms per query; {}",
            parts.join("; ")
        ),
    )
}

struct Constant;

impl AccuracyEvaluator for Constant {
    fn accuracy(&self, _: &SchedulerConfig) -> hmvr::Result<f64> {
        Ok(0.5)
    }
}

fn adjacent_consecutive_removals(start: &[usize], trace: &[GranEvent]) -> usize {
    let mut levels = start.to_vec();
    let mut neighbours: Vec<usize> = Vec::new();
    let mut violations = 0;
    for e in trace {
        if let GranEvent::Remove { level, .. } = e {
            if neighbours.contains(level) {
                violations += 1;
            }
            let i = levels.iter().position(|l| l == level).unwrap();
            neighbours = [i.checked_sub(1), Some(i + 1)]
                .into_iter()
                .flatten()
                .filter_map(|j| levels.get(j).copied())
                .collect();
            levels.remove(i);
        }
    }
    violations
}

fn autotune_contract() -> Outcome {
    // trace inspection with the constant stub
    let mut trace_ok = true;
    let mut traces = 0;
    for n in 3..=12usize {
        for min_levels in [3, n] {
            let avail: Vec<usize> = (1..=n).collect();
            let params = SetGranParams {
                min_levels,
                ..Default::default()
            };
            let out = set_gran(&avail, 1, &SchedulerConfig::default(), &Constant, &params).unwrap();
            let grown = match out
                .trace
                .iter()
                .find(|e| matches!(e, GranEvent::Converged { .. }))
            {
                Some(GranEvent::Converged { levels, .. }) => levels.clone(),
                _ => unreachable!(),
            };
            trace_ok &= grown.len() == min_levels.max(2);
            trace_ok &= adjacent_consecutive_removals(&grown, &out.trace) == 0;
            trace_ok &= out.levels.len() >= 2;
            traces += 1;
        }
    }

    // randomized grids on a planted dataset
    let ds = generate(&SynthSpec {
        images: 250,
        queries: 60,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let evaluator = NdcgEvaluator::new(&ds.index, &ds.queries).unwrap();
    let n_q = ds.queries.iter().map(|q| q.subs.len() as f64).sum::<f64>() / ds.queries.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut monotone, mut within_budget, mut filled) = (true, true, 0);
    let mut entries = 0;
    for _ in 0..4 {
        let pick = |rng: &mut ChaCha8Rng, pool: &[f64]| -> Vec<f64> {
            let take = rng.random_range(1..=2);
            let mut v: Vec<f64> = pool.choose_multiple(rng, take).copied().collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let mut budgets: Vec<f64> = (0..5)
            .map(|_| rng.random_range(500.0..60_000.0f64).round())
            .collect();
        budgets.sort_by(f64::total_cmp);
        budgets.dedup();
        let ranges = SearchRanges {
            taus: pick(&mut rng, &[2.0, 0.5, 0.8, 0.9])
                .into_iter()
                .map(|t| (t <= 1.0).then_some(t))
                .collect(),
            strides: pick(&mut rng, &[1.0, 2.0, 3.0])
                .into_iter()
                .map(|s| s as usize)
                .collect(),
            alphas: pick(&mut rng, &[0.6, 0.8, 1.0]),
            ts: pick(&mut rng, &[0.1, 0.2, 0.5, 1.0]),
            budgets,
        };
        let table = configure(
            &ranges,
            &ds.index,
            &ds.queries,
            &SchedulerConfig::default(),
            &evaluator,
            &AutotuneOptions::default(),
        )
        .unwrap();
        let mut last = f64::NEG_INFINITY;
        for e in &table.entries {
            entries += 1;
            let Some(cfg) = &e.config else {
                continue;
            };
            filled += 1;
            let acc = e.accuracy.unwrap();
            monotone &= acc >= last;
            last = acc;
            // by hand: N_q * sum_p N_g * alpha^p * T * N_D
            let lat: f64 = n_q
                * cfg
                    .levels
                    .iter()
                    .enumerate()
                    .map(|(p, &n)| {
                        n as f64 * cfg.alpha.powi(p as i32 + 1) * cfg.t * ds.index.len() as f64
                    })
                    .sum::<f64>();
            within_budget &=
                lat <= e.budget && (lat - e.predicted_latency.unwrap()).abs() <= 1e-9 * lat;
        }
    }
    (
        trace_ok && monotone && within_budget && filled > 0,
        format!(
            "{traces} stub traces free of back-to-back adjacent removals: {trace_ok}; 4 random grids, {entries} \
             budgets ({filled} filled): accuracy non-decreasing {monotone}, latency within budget {within_budget}"
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        println!(
            "{} {name}: {}",
            if outcome.0 { "PASS" } else { "FAIL" },
            outcome.1
        );
        results.push((name, outcome));
    };

    run("oracle equivalence", &oracle_equivalence);
    run("kendall tau", &kendall);
    run("latency model", &latency_model);

    let planted = generate(&SynthSpec::default()).unwrap();
    let full = eval(&planted, &SchedulerConfig::default());
    run("hierarchical accuracy gain", &|| {
        hierarchical_gain(&planted, &full)
    });
    run("pruning speedup", &|| pruning(&planted, &full));
    run("early exit", &|| early_exit(&planted, &full));
    run("scheduling overhead", &overhead);
    run("autotune contract", &autotune_contract);

    let failed = results.iter().filter(|(_, o)| !o.0).count();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
