//! CSV output. Floats are written in Rust's shortest round-trip form so that
//! identical runs produce byte-identical files.

use std::io::Write;

use crate::experiment::{RegretRow, RoundRecord, SolverBenchRow, StudyRow};
use crate::error::Result;

fn join(support: &[usize]) -> String {
    support.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `algorithm, t, mean_regret, std_regret, stderr_regret`.
pub fn write_regret<W: Write>(out: W, rows: &[RegretRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "t", "mean_regret", "std_regret", "stderr_regret"])?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.t.to_string(),
            r.mean_regret.to_string(),
            r.std_regret.to_string(),
            r.stderr_regret.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, support, mean_reward, realized_reward`.
pub fn write_process_trace<W: Write>(out: W, rounds: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "support", "mean_reward", "realized_reward"])?;
    for r in rounds {
        w.write_record([
            r.t.to_string(),
            join(&r.support),
            r.mean_reward.to_string(),
            r.realized_reward.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, alpha_0..alpha_{K-1}, c_exact, c_bound, logdet`, one row per ingest.
pub fn write_learner_trace<W: Write>(out: W, rounds: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let k = rounds
        .iter()
        .find_map(|r| r.learner.as_ref().map(|l| l.alpha_hat.len()))
        .unwrap_or(0);
    let mut header = vec!["t".to_string()];
    header.extend((0..k).map(|i| format!("alpha_{i}")));
    header.extend(["c_exact", "c_bound", "logdet"].map(String::from));
    w.write_record(&header)?;
    for r in rounds {
        if let Some(l) = &r.learner {
            let mut row = vec![r.t.to_string()];
            row.extend(l.alpha_hat.iter().map(|a| a.to_string()));
            row.extend([l.c_exact, l.c_bound, l.logdet].map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t, support, objective, linear_term, bonus_term, iterations`.
pub fn write_selector_trace<W: Write>(out: W, rounds: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "support", "objective", "linear_term", "bonus_term", "iterations"])?;
    for r in rounds {
        w.write_record([
            r.t.to_string(),
            join(&r.support),
            r.objective.to_string(),
            r.linear_term.to_string(),
            r.bonus_term.to_string(),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `parameter, observability, noise_var, mean_error, stderr, mean_squared_error`.
pub fn write_study<W: Write>(out: W, rows: &[StudyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "parameter",
        "observability",
        "noise_var",
        "mean_error",
        "stderr",
        "mean_squared_error",
    ])?;
    for r in rows {
        w.write_record([
            r.parameter.to_string(),
            r.observability.to_string(),
            r.noise_var.to_string(),
            r.mean_error.to_string(),
            r.stderr.to_string(),
            r.mean_squared_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `N, method, time_ms, reward, objective`; empty cells mark skipped runs.
pub fn write_solver_bench<W: Write>(out: W, rows: &[SolverBenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "method", "time_ms", "reward", "objective"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.method.label().to_string(),
            opt(r.time_ms),
            opt(r.reward),
            opt(r.objective),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-node values for drawing the best arm on the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValue {
    pub node: usize,
    pub position: Option<[f64; 2]>,
    pub reward_weight: f64,
    pub observed: bool,
    pub in_best_arm: bool,
}

/// `node, x, y, reward_weight, observed, in_best_arm`.
pub fn write_node_values<W: Write>(out: W, rows: &[NodeValue]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "x", "y", "reward_weight", "observed", "in_best_arm"])?;
    for r in rows {
        w.write_record([
            r.node.to_string(),
            opt(r.position.map(|p| p[0])),
            opt(r.position.map(|p| p[1])),
            r.reward_weight.to_string(),
            u8::from(r.observed).to_string(),
            u8::from(r.in_best_arm).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of radius and bound trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub c_exact: f64,
    pub c_bound: f64,
    pub logdet: f64,
    pub log_det_bound: f64,
    pub regret_bound: f64,
    pub cumulative_regret: f64,
}

/// `t, c_exact, c_bound, logdet, log_det_bound, regret_bound, cumulative_regret`.
pub fn write_bounds<W: Write>(out: W, rows: &[BoundRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "c_exact",
        "c_bound",
        "logdet",
        "log_det_bound",
        "regret_bound",
        "cumulative_regret",
    ])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.c_exact.to_string(),
            r.c_bound.to_string(),
            r.logdet.to_string(),
            r.log_det_bound.to_string(),
            r.regret_bound.to_string(),
            r.cumulative_regret.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
