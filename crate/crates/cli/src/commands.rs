use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use grab_core::experiment::{
    log_log_slope, parallel_map, run_study, sparsity_points, topology_points, GraphSpec, OracleMethod,
    SolverMethod,
};
use grab_core::io::{self, BoundRow, NodeValue};
use grab_core::{
    oracle_best_arm, rbf_coordinates, regret_bound, regret_experiment, solver_bench, summarize_regret,
    GrabUcbRun, Instance,
};
use serde::Serialize;

use crate::config::{Config, StudyKind};
use crate::meta::Metadata;
use crate::{Cli, Command};

struct RunContext {
    config: Config,
    out_dir: PathBuf,
}

impl RunContext {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut config = Config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.output.dir = dir.clone();
    }
    if let Some(threads) = cli.threads {
        config.output.threads = threads;
    }
    config.experiment().validate().context("invalid configuration")?;
    let out_dir = config.output.dir.clone();
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let ctx = RunContext { config, out_dir };
    match cli.command {
        Command::GenerateGraph => generate_graph(&ctx),
        Command::BestArm => best_arm(&ctx),
        Command::RunRegret => run_regret(&ctx),
        Command::RunErrorStudy => run_error_study(&ctx),
        Command::RunSolverBench => run_solver_bench(&ctx),
        Command::ShowBounds => show_bounds(&ctx),
    }
}

fn generate_graph(ctx: &RunContext) -> Result<()> {
    let seed = ctx.config.run.seed;
    let mut meta = Metadata::new("generate-graph", &ctx.config, vec![seed]);
    let started = Instant::now();
    let graph = ctx.config.graph.generate(seed)?;
    meta.timing("generate", ms_since(started));
    let path = ctx.path("graph.txt");
    graph.write_edge_list(create(&path)?)?;
    meta.output(&path);
    #[derive(Serialize)]
    struct Details {
        nodes: usize,
        edges: usize,
        components: usize,
    }
    let details = Details {
        nodes: graph.n(),
        edges: graph.edge_count(),
        components: graph.connected_components(),
    };
    println!(
        "wrote {} ({} nodes, {} edges, {} components)",
        path.display(),
        details.nodes,
        details.edges,
        details.components
    );
    meta.details(details)?;
    meta.write(&ctx.path("graph.json"))
}

fn best_arm(ctx: &RunContext) -> Result<()> {
    let exp = ctx.config.experiment();
    let seed = exp.run.seed;
    let mut meta = Metadata::new("best-arm", &ctx.config, vec![seed]);
    let started = Instant::now();
    let instance = Instance::build(&exp, seed)?;
    meta.timing("setup", ms_since(started));
    let started = Instant::now();
    let oracle = oracle_best_arm(
        &instance.env,
        exp.selector.t0,
        OracleMethod::Auto,
        exp.selector.budget as u128,
        exp.run.oracle_restarts,
        seed,
    )?;
    meta.timing("oracle", ms_since(started));
    let n = instance.network.n();
    let coords = match exp.graph {
        GraphSpec::Rbf { n, .. } => Some(rbf_coordinates(n, seed)),
        GraphSpec::Ba { .. } => None,
    };
    let rows: Vec<NodeValue> = (0..n)
        .map(|i| NodeValue {
            node: i,
            position: coords.as_ref().map(|c| c[i]),
            reward_weight: instance.env.reward_weights()[i],
            observed: instance.env.mask().contains(i),
            in_best_arm: oracle.support.contains(&i),
        })
        .collect();
    let path = ctx.path("best_arm.csv");
    io::write_node_values(create(&path)?, &rows)?;
    meta.output(&path);
    println!(
        "best arm {:?} with expected reward {} ({})",
        oracle.support,
        oracle.reward,
        if oracle.exact { "enumerated" } else { "local search, approximate" }
    );
    meta.details(&oracle)?;
    meta.write(&ctx.path("best_arm.json"))
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    oracle_reward: f64,
    oracle_exact: bool,
    final_regret: Vec<(String, f64)>,
    regret_bound: f64,
}

fn run_regret(ctx: &RunContext) -> Result<()> {
    let exp = ctx.config.experiment();
    let mut meta = Metadata::new("run-regret", &ctx.config, exp.seeds());
    let started = Instant::now();
    let results = regret_experiment(&exp, ctx.config.output.threads)?;
    meta.timing("simulate", ms_since(started));
    meta.timing("setup_total", results.iter().map(|r| r.setup_ms).sum());
    for label in ["select", "observe", "ingest"] {
        let total: f64 = results
            .iter()
            .flat_map(|r| &r.runs)
            .map(|run| match label {
                "select" => run.timings.select_ms,
                "observe" => run.timings.observe_ms,
                _ => run.timings.ingest_ms,
            })
            .sum();
        meta.timing(&format!("{label}_total"), total);
    }
    let rows = summarize_regret(&results);
    let path = ctx.path("regret.csv");
    io::write_regret(create(&path)?, &rows)?;
    meta.output(&path);

    let horizon = exp.run.horizon;
    let mut summaries = Vec::new();
    for r in &results {
        let ucb = &r.runs[0];
        let c_final = ucb
            .rounds
            .last()
            .and_then(|round| round.learner.as_ref())
            .map_or(0.0, |l| l.c_exact);
        summaries.push(SeedSummary {
            seed: r.seed,
            oracle_reward: ucb.oracle.reward,
            oracle_exact: ucb.oracle.exact,
            final_regret: r
                .runs
                .iter()
                .map(|run| (run.algorithm.label(), run.cumulative_regret().last().copied().unwrap_or(0.0)))
                .collect(),
            regret_bound: regret_bound(&ucb.hyper, horizon, c_final),
        });
        if ctx.config.output.traces {
            for run in &r.runs {
                let stem = format!("traces/seed{}_{}", r.seed, run.algorithm.label());
                let p = ctx.path(&format!("{stem}_process.csv"));
                io::write_process_trace(create(&p)?, &run.rounds)?;
                let l = ctx.path(&format!("{stem}_learner.csv"));
                io::write_learner_trace(create(&l)?, &run.rounds)?;
                let s = ctx.path(&format!("{stem}_selector.csv"));
                io::write_selector_trace(create(&s)?, &run.rounds)?;
                for path in [p, l, s] {
                    meta.output(&path);
                }
            }
        }
    }
    for row in rows.iter().filter(|row| row.t == horizon) {
        println!(
            "{:<12} T={horizon}: mean regret {:.4} (stderr {:.4})",
            row.algorithm, row.mean_regret, row.stderr_regret
        );
    }
    meta.details(&summaries)?;
    meta.write(&ctx.path("regret.json"))
}

fn run_error_study(ctx: &RunContext) -> Result<()> {
    let study = &ctx.config.study;
    let base = study.base();
    let points = match study.kind {
        StudyKind::Topology => {
            let ms: Vec<usize> = study.values.iter().map(|&v| v.round() as usize).collect();
            let mut points = topology_points(&base, &ms, &study.observability)?;
            // Every noise level for every point.
            let mut expanded = Vec::new();
            for p in points.drain(..) {
                for &var in &study.noise_vars {
                    let mut q = p.clone();
                    q.config.noise_var = var;
                    expanded.push(q);
                }
            }
            expanded
        }
        StudyKind::Sparsity => {
            let mut points = Vec::new();
            for &frac in &study.observability {
                let mut b = base.clone();
                b.mask_fraction = frac;
                points.extend(sparsity_points(&b, &study.values, &study.noise_vars)?);
            }
            points
        }
    };
    let seeds: Vec<u64> = (0..study.realizations as u64)
        .map(|i| ctx.config.run.seed.wrapping_add(i))
        .collect();
    let mut meta = Metadata::new("run-error-study", &ctx.config, seeds.clone());
    let started = Instant::now();
    let rows = run_study(&points, &seeds, ctx.config.output.threads)?;
    meta.timing("study", ms_since(started));
    let path = ctx.path("error_study.csv");
    io::write_study(create(&path)?, &rows)?;
    meta.output(&path);
    for r in &rows {
        println!(
            "parameter {:<6} observability {:<4} noise {:<7} error {:.6} (stderr {:.6})",
            r.parameter, r.observability, r.noise_var, r.mean_error, r.stderr
        );
    }
    meta.write(&ctx.path("error_study.json"))
}

fn run_solver_bench(ctx: &RunContext) -> Result<()> {
    let exp = ctx.config.experiment();
    let bench = &ctx.config.bench;
    let mut meta = Metadata::new("run-solver-bench", &ctx.config, vec![exp.run.seed]);
    let started = Instant::now();
    let rows = solver_bench(&exp, &bench.sizes, bench.warmup_rounds, bench.repetitions, bench.min_batch_ms)?;
    meta.timing("bench", ms_since(started));
    let path = ctx.path("solver_bench.csv");
    io::write_solver_bench(create(&path)?, &rows)?;
    meta.output(&path);
    let walk: Vec<_> = rows.iter().filter(|r| r.method == SolverMethod::Walk).collect();
    let xs: Vec<f64> = walk.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = walk.iter().filter_map(|r| r.time_ms).collect();
    for r in &rows {
        match r.time_ms {
            Some(t) => println!("N={:<5} {:<15} {:>12.6} ms  reward {}", r.n, r.method.label(), t, r.reward.unwrap_or(f64::NAN)),
            None => println!("N={:<5} {:<15} skipped (over enumeration budget)", r.n, r.method.label()),
        }
    }
    #[derive(Serialize)]
    struct Details {
        walk_log_log_slope: Option<f64>,
    }
    let slope = (xs.len() >= 2).then(|| log_log_slope(&xs, &ys));
    if let Some(s) = slope {
        println!("walk time log-log slope: {s:.3}");
    }
    meta.details(Details { walk_log_log_slope: slope })?;
    meta.write(&ctx.path("solver_bench.json"))
}

fn show_bounds(ctx: &RunContext) -> Result<()> {
    let exp = ctx.config.experiment();
    let seed = exp.run.seed;
    let mut meta = Metadata::new("show-bounds", &ctx.config, vec![seed]);
    let started = Instant::now();
    let rows = parallel_map(&[seed], ctx.config.output.threads, |&s| {
        let instance = Instance::build(&exp, s)?;
        let mut run = GrabUcbRun::new(&exp, &instance, false)?;
        let mut cumulative = 0.0;
        let mut rows = Vec::with_capacity(exp.run.horizon);
        for _ in 0..exp.run.horizon {
            let round = run.step()?;
            cumulative += round.regret;
            let l = round.learner.as_ref().expect("optimistic rounds always ingest");
            rows.push(BoundRow {
                t: round.t,
                c_exact: l.c_exact,
                c_bound: l.c_bound,
                logdet: l.logdet,
                log_det_bound: l.log_det_bound,
                regret_bound: regret_bound(run.hyper(), round.t, l.c_exact),
                cumulative_regret: cumulative,
            });
        }
        Ok(rows)
    })?
    .remove(0);
    meta.timing("run", ms_since(started));
    let path = ctx.path("bounds.csv");
    io::write_bounds(create(&path)?, &rows)?;
    meta.output(&path);
    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>14} {:>14} {:>12}",
        "t", "c_exact", "c_bound", "logdet", "logdet_bound", "regret_bound", "regret"
    );
    for r in &rows {
        println!(
            "{:>5} {:>12.5} {:>12.5} {:>12.4} {:>14.4} {:>14.3} {:>12.5}",
            r.t, r.c_exact, r.c_bound, r.logdet, r.log_det_bound, r.regret_bound, r.cumulative_regret
        );
    }
    meta.write(&ctx.path("bounds.json"))
}
