//! Multi-seed experiment sweeps: execute every `(curve, T, seed)` cell,
//! persist the run records, and reduce them to quantile tables, event rates,
//! and power-law fits. Every aggregate is recomputable from the persisted
//! records alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{execute_baseline, execute_run, SweepConfig};
use crate::error::{EceError, Result};
use crate::harness::events::{verify_event_e1, verify_event_e3};
use crate::harness::record::RunRecord;
use crate::harness::regret::{cumulative_regret, fit_loglog_slope, Benchmark, ScalingFit};

/// Curve labels inside a sweep.
pub const CURVE_MAIN: &str = "ece";
pub const CURVE_ORACLE: &str = "oracle";
pub const CURVE_MISSPECIFIED: &str = "misspecified";

/// Stats reduced from one persisted run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub curve: String,
    pub t: usize,
    pub seed: u64,
    pub final_regret: f64,
    /// `(slot, episode)` pairs.
    pub elimination_times: Vec<(usize, usize)>,
    pub event_e1_violations: usize,
    pub event_e3_stat: f64,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub curve: String,
    pub t: usize,
    pub runs: usize,
    pub mean_final_regret: f64,
    pub median_final_regret: f64,
    pub q10_final_regret: f64,
    pub q90_final_regret: f64,
    /// Median elimination episode per slot, among runs that eliminated it.
    pub median_elimination_time: BTreeMap<usize, f64>,
    /// Fraction of runs with at least one count-bound violation.
    pub event_e1_violation_rate: f64,
    /// Fraction of runs whose noise statistic exceeded 1.
    pub event_e3_exceed_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub name: Option<String>,
    pub scenario: serde_json::Value,
    pub t_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Power-law fit of mean final regret against T, per curve.
    pub fits: BTreeMap<String, ScalingFit>,
    pub aggregates: Vec<AggregateRow>,
    pub cells: Vec<CellResult>,
    pub errors: Vec<String>,
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn reduce_record(record: &RunRecord, curve: &str, t: usize, seed: u64, path: PathBuf) -> Result<CellResult> {
    let regret = cumulative_regret(record, Benchmark::VStar)?;
    Ok(CellResult {
        curve: curve.to_string(),
        t,
        seed,
        final_regret: regret.last().copied().unwrap_or(0.0),
        elimination_times: record
            .header
            .eliminations
            .iter()
            .map(|e| (e.old_candidate, e.t))
            .collect(),
        event_e1_violations: verify_event_e1(record).len(),
        event_e3_stat: verify_event_e3(record),
        path,
    })
}

/// Executes (or, with `resume`, reuses) one cell and reduces it.
fn run_cell(
    sweep: &SweepConfig,
    curve: &str,
    t: usize,
    seed: u64,
    out_dir: &Path,
    resume: bool,
) -> Result<CellResult> {
    let path = out_dir.join("cells").join(format!("{curve}-T{t}-seed{seed}.ndjson"));
    if resume && path.exists() {
        let record = RunRecord::read_ndjson(&path)?;
        return reduce_record(&record, curve, t, seed, path);
    }
    let record = match curve {
        CURVE_MAIN => execute_run(&sweep.run, t, seed)?,
        CURVE_ORACLE | CURVE_MISSPECIFIED => {
            let streams = crate::config::cell_streams(sweep.run.seed, t, seed);
            let mat = crate::config::materialize(&sweep.run, t, streams)?;
            let slot = if curve == CURVE_ORACLE { mat.optimal_slot } else { mat.worst_slot };
            let tag = format!("baseline-{curve}");
            execute_baseline(&sweep.run, t, seed, slot, &tag)?
        }
        other => return Err(EceError::config(format!("unknown curve '{other}'"))),
    };
    record.write_ndjson(&path)?;
    reduce_record(&record, curve, t, seed, path)
}

/// Runs the whole grid. Failed cells are recorded as errors and the sweep
/// continues. Results are sorted by `(curve, T, seed)` before the reduce, so
/// aggregates are independent of scheduling and seed order.
pub fn run_sweep(
    sweep: &SweepConfig,
    out_dir: &Path,
    workers: Option<usize>,
    resume: bool,
) -> Result<SweepSummary> {
    fs::create_dir_all(out_dir.join("cells"))?;
    let mut curves = vec![CURVE_MAIN.to_string()];
    if sweep.baselines {
        curves.push(CURVE_ORACLE.to_string());
        curves.push(CURVE_MISSPECIFIED.to_string());
    }
    let mut cells: Vec<(String, usize, u64)> = Vec::new();
    for curve in &curves {
        for &t in &sweep.t_grid {
            for &seed in &sweep.seeds {
                cells.push((curve.clone(), t, seed));
            }
        }
    }

    let execute = || {
        cells
            .par_iter()
            .map(|(curve, t, seed)| {
                run_cell(sweep, curve, *t, *seed, out_dir, resume)
                    .map_err(|e| format!("cell {curve}-T{t}-seed{seed}: {e}"))
            })
            .collect::<Vec<_>>()
    };
    let outcomes = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EceError::runtime(e.to_string()))?
            .install(execute),
        None => execute(),
    };

    let mut results: Vec<CellResult> = Vec::new();
    let mut errors = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(cell) => results.push(cell),
            Err(e) => errors.push(e),
        }
    }
    results.sort_by(|a, b| (&a.curve, a.t, a.seed).cmp(&(&b.curve, b.t, b.seed)));
    results.dedup_by(|a, b| a.curve == b.curve && a.t == b.t && a.seed == b.seed);

    let mut aggregates = Vec::new();
    for curve in &curves {
        for &t in &sweep.t_grid {
            let group: Vec<&CellResult> =
                results.iter().filter(|c| &c.curve == curve && c.t == t).collect();
            if group.is_empty() {
                continue;
            }
            let mut regrets: Vec<f64> = group.iter().map(|c| c.final_regret).collect();
            regrets.sort_by(f64::total_cmp);
            let mean = regrets.iter().sum::<f64>() / regrets.len() as f64;
            let mut elim: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for cell in &group {
                for &(slot, time) in &cell.elimination_times {
                    elim.entry(slot).or_default().push(time as f64);
                }
            }
            let median_elimination_time = elim
                .into_iter()
                .map(|(slot, mut times)| {
                    times.sort_by(f64::total_cmp);
                    (slot, quantile(&times, 0.5))
                })
                .collect();
            aggregates.push(AggregateRow {
                curve: curve.clone(),
                t,
                runs: group.len(),
                mean_final_regret: mean,
                median_final_regret: quantile(&regrets, 0.5),
                q10_final_regret: quantile(&regrets, 0.1),
                q90_final_regret: quantile(&regrets, 0.9),
                median_elimination_time,
                event_e1_violation_rate: group.iter().filter(|c| c.event_e1_violations > 0).count()
                    as f64
                    / group.len() as f64,
                event_e3_exceed_rate: group.iter().filter(|c| c.event_e3_stat > 1.0).count() as f64
                    / group.len() as f64,
            });
        }
    }

    let mut fits = BTreeMap::new();
    for curve in &curves {
        let points: Vec<(f64, f64)> = aggregates
            .iter()
            .filter(|a| &a.curve == curve)
            .map(|a| (a.t as f64, a.mean_final_regret))
            .collect();
        match fit_loglog_slope(&points) {
            Ok(fit) => {
                fits.insert(curve.clone(), fit);
            }
            Err(e) => errors.push(format!("fit for curve {curve}: {e}")),
        }
    }

    let summary = SweepSummary {
        name: sweep.name.clone(),
        scenario: serde_json::to_value(&sweep.run.scenario)?,
        t_grid: sweep.t_grid.clone(),
        seeds: sweep.seeds.clone(),
        fits,
        aggregates,
        cells: results,
        errors,
    };
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(out_dir.join("aggregate.csv"), aggregate_csv(sweep, &summary))?;
    fs::write(
        out_dir.join("sweep.resolved.json"),
        serde_json::to_string_pretty(sweep)?,
    )?;
    Ok(summary)
}

/// Per-run CSV emitted next to the summary.
pub fn aggregate_csv(sweep: &SweepConfig, summary: &SweepSummary) -> String {
    let scenario = sweep.name.clone().unwrap_or_else(|| "unnamed".into());
    let variant = sweep.run.variant.as_str();
    let mut out = String::from(
        "scenario,variant,curve,t,seed,final_regret,elimination_times,event_e1_violations,event_e3_stat\n",
    );
    for cell in &summary.cells {
        let elim = cell
            .elimination_times
            .iter()
            .map(|(slot, t)| format!("{slot}:{t}"))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{scenario},{variant},{curve},{t},{seed},{regret:.6},{elim},{e1},{e3:.6}\n",
            curve = cell.curve,
            t = cell.t,
            seed = cell.seed,
            regret = cell.final_regret,
            e1 = cell.event_e1_violations,
            e3 = cell.event_e3_stat,
        ));
    }
    out
}
