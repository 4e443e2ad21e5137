use std::io::Write;
use std::path::Path;

use hmvr::autotune::{configure, AutotuneOptions, NdcgEvaluator, SearchRanges};
use hmvr::eval::{bench, evaluate, profile_csv, run_queries, EvalOptions};
use hmvr::model::{load_index, load_queries, save_index, save_queries, validate_ground_truth};
use hmvr::synth::{generate, SynthSpec};
use hmvr::{DecomposedQuery, HierarchicalIndex, Hit, Mode, Scheduler};
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::run_config::RunConfig;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Validate(a) => validate(a),
        Command::Query(a) => {
            let rc = run_config(&a.sched)?;
            in_pool(&rc, || query(&a, &rc))
        }
        Command::Eval(a) => {
            let rc = run_config(&a.sched)?;
            in_pool(&rc, || eval(&a, &rc))
        }
        Command::Profile(a) => {
            let rc = run_config(&a.sched)?;
            in_pool(&rc, || profile(&a, &rc))
        }
        Command::Autotune(a) => {
            let rc = run_config(&a.sched)?;
            in_pool(&rc, || autotune(&a, &rc))
        }
        Command::Bench(a) => {
            let rc = run_config(&a.sched)?;
            in_pool(&rc, || bench_cmd(&a, &rc))
        }
    }
}

/// The config file (if any) with command-line flags applied on top.
fn run_config(args: &SchedulerArgs) -> CliResult<RunConfig> {
    let mut rc = match &args.config {
        Some(path) => RunConfig::load(path, args.budget)?,
        None => RunConfig::default(),
    };
    let cfg = &mut rc.scheduler;
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(mode) = args.mode {
        cfg.mode = match mode {
            ModeArg::Single => Mode::Single,
            ModeArg::FlatMvr => Mode::FlatMvr,
            ModeArg::Hierarchical => Mode::Hierarchical,
        };
    }
    if let Some(levels) = &args.levels {
        cfg.levels = levels.clone();
    }
    if let Some(t) = args.t {
        cfg.t = t;
    }
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if let Some(TauArg(tau)) = args.tau {
        cfg.tau = tau;
    }
    if args.no_prune {
        cfg.t = 1.0;
        cfg.alpha = 1.0;
    }
    if args.no_exit {
        cfg.tau = None;
    }
    if args.workers.is_some() {
        rc.workers = args.workers;
    }
    Ok(rc)
}

fn in_pool(rc: &RunConfig, f: impl FnOnce() -> CliResult<()> + Send) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    match rc.workers {
        Some(0) => return Err(CliError::invalid("--workers must be at least 1")),
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

fn load_data(args: &DataArgs) -> CliResult<(HierarchicalIndex, Vec<DecomposedQuery>)> {
    let index = load_index(&args.index)?;
    let queries = load_queries(&args.queries, index.dim())?;
    validate_ground_truth(&queries, &index)?;
    Ok((index, queries))
}

fn write_out(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn warn_negative(count: usize) {
    if count > 0 {
        eprintln!(
            "warning: {count} queries had a negative per-sub-query maximum; \
             products of negative similarities can reorder results, consider \
             aggregation \"log_sum\""
        );
    }
}

fn synth(args: SynthArgs) -> CliResult<()> {
    let mut spec: SynthSpec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let ds = generate(&spec)?;
    save_index(&ds.index, &args.out)?;
    save_queries(&ds.queries, &args.queries)?;
    println!(
        "wrote {} images (d={}, levels={:?}) to {} and {} queries to {}",
        ds.index.len(),
        ds.index.dim(),
        ds.index.levels(),
        args.out.display(),
        ds.queries.len(),
        args.queries.display()
    );
    Ok(())
}

fn validate(args: ValidateArgs) -> CliResult<()> {
    let index = load_index(&args.container)?;
    println!(
        "ok: {}: N_D={} d={} levels={:?} normalized={}",
        args.container.display(),
        index.len(),
        index.dim(),
        index.levels(),
        index.normalized()
    );
    if let Some(path) = &args.queries {
        let queries = load_queries(path, index.dim())?;
        validate_ground_truth(&queries, &index)?;
        let labelled = queries.iter().filter(|q| q.ground_truth.is_some()).count();
        println!(
            "ok: {}: {} queries, {} with ground truth",
            path.display(),
            queries.len(),
            labelled
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct QueryLine<'a> {
    query_id: &'a str,
    hits: &'a [Hit],
}

fn query(args: &QueryArgs, rc: &RunConfig) -> CliResult<()> {
    let (index, queries) = load_data(&args.data)?;
    let scheduler = Scheduler::new(&index, &rc.scheduler)?;
    let outcomes = run_queries(&scheduler, &queries)?;
    warn_negative(outcomes.iter().filter(|o| o.negative_best).count());

    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| queries[a].query_id.cmp(&queries[b].query_id));
    let mut text = String::new();
    for i in order {
        let line = QueryLine {
            query_id: &queries[i].query_id,
            hits: &outcomes[i].result.hits,
        };
        text.push_str(&serde_json::to_string(&line).expect("result serializes"));
        text.push('\n');
    }
    write_out(args.out.as_deref(), &text)
}

fn eval(args: &EvalArgs, rc: &RunConfig) -> CliResult<()> {
    let (index, queries) = load_data(&args.data)?;
    let options = EvalOptions {
        diagnostics: args.diagnostics,
        diag_sample: args.diag_sample.or(rc.diag_sample).unwrap_or(256),
        ..Default::default()
    };
    let report = evaluate(&index, &queries, &rc.scheduler, &options)?;
    warn_negative(report.negative_best_queries);
    write_out(args.out.as_deref(), &to_json(&report))
}

fn profile(args: &ProfileArgs, rc: &RunConfig) -> CliResult<()> {
    let (index, queries) = load_data(&args.data)?;
    let options = EvalOptions {
        diagnostics: true,
        diag_sample: args.diag_sample.or(rc.diag_sample).unwrap_or(256),
        ..Default::default()
    };
    let report = evaluate(&index, &queries, &rc.scheduler, &options)?;
    warn_negative(report.negative_best_queries);
    let diag = report.diagnostics.as_ref().expect("diagnostics requested");
    write_out(Some(&args.csv), &profile_csv(diag))?;
    write_out(args.out.as_deref(), &to_json(&report))
}

fn autotune(args: &AutotuneArgs, rc: &RunConfig) -> CliResult<()> {
    let (index, queries) = load_data(&args.data)?;
    let mut ranges: SearchRanges = match &args.ranges {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        }
        None => rc.ranges.clone().ok_or_else(|| {
            CliError::invalid(
                "no search ranges: pass --ranges or put \"ranges\" in the config file",
            )
        })?,
    };
    if let Some(budgets) = &args.budgets {
        ranges.budgets = budgets.clone();
    }
    let evaluator = NdcgEvaluator::new(&index, &queries)?;
    let options = AutotuneOptions {
        set_gran: rc.set_gran,
        convention: rc.convention,
    };
    let table = configure(
        &ranges,
        &index,
        &queries,
        &rc.scheduler,
        &evaluator,
        &options,
    )?;
    write_out(args.out.as_deref(), &to_json(&table))
}

fn bench_cmd(args: &BenchArgs, rc: &RunConfig) -> CliResult<()> {
    let (index, queries) = load_data(&args.data)?;
    let report = bench(
        &index,
        &queries,
        &rc.scheduler,
        args.warmup,
        args.iterations,
    )?;
    write_out(args.out.as_deref(), &to_json(&report))
}
