//! Command-line entry point: reproducible runs, sweeps, analysis, and record
//! validation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ece::config::{preset, preset_names, RunConfig, SweepConfig, Variant};
use ece::error::EceError;
use ece::harness::record::RunRecord;
use ece::harness::regret::{cumulative_regret, fit_loglog_slope, Benchmark};
use ece::harness::sweep::run_sweep;
use ece::harness::{verify_event_e1, verify_event_e3};

#[derive(Parser)]
#[command(name = "ece", version, about = "Online model selection over episodic-RL base learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named scenario preset (overrides the config's scenario and meta).
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Variant override: ece | ece-gap | ece-vstar-known | ece-vhat.
    #[arg(long)]
    variant: Option<String>,
    /// Overwrite existing artifacts.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and persist its record.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Execute a (T x seed) sweep and persist records plus aggregates.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Complete only missing cells of an interrupted sweep.
        #[arg(long)]
        resume: bool,
    },
    /// Emit plot-ready CSVs (regret curves, slope fits) from stored records.
    Analyze {
        /// Directory containing .ndjson run records (searched recursively).
        records: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
    },
    /// Audit stored records: structural invariants plus event checks.
    Validate {
        /// Directory containing .ndjson run records (searched recursively).
        records: PathBuf,
        /// Where to write the JSON report (defaults to stdout only).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                EceError::Config(_) | EceError::Json(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, EceError> {
    match cli.command {
        Command::Run { common } => cmd_run(common),
        Command::Sweep { common, workers, resume } => cmd_sweep(common, workers, resume),
        Command::Analyze { records, out } => cmd_analyze(&records, &out),
        Command::Validate { records, report } => cmd_validate(&records, report.as_deref()),
    }
}

/// Loads the run config from --config / --scenario and applies overrides.
fn resolve_run_config(common: &CommonArgs) -> Result<RunConfig, EceError> {
    let mut cfg = match (&common.config, &common.scenario) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)?;
            RunConfig::from_json(&text)?
        }
        (None, Some(name)) | (Some(_), Some(name)) => preset(name).ok_or_else(|| {
            EceError::config(format!(
                "unknown scenario preset '{name}' (available: {})",
                preset_names().join(", ")
            ))
        })?,
        (None, None) => {
            return Err(EceError::config("provide --config or --scenario"));
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(variant) = &common.variant {
        cfg.variant = Variant::parse(variant)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn artifact_dir(common: &CommonArgs, cfg_name: &Option<String>) -> PathBuf {
    let name = cfg_name.clone().unwrap_or_else(|| "run".into());
    common.out.join(name)
}

fn refuse_existing(dir: &Path, force: bool) -> Result<(), EceError> {
    if dir.exists() && dir.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false) {
        if !force {
            return Err(EceError::runtime(format!(
                "artifacts exist at {} (pass --force to overwrite)",
                dir.display()
            )));
        }
        fs::remove_dir_all(dir)?;
    }
    Ok(())
}

fn cmd_run(common: CommonArgs) -> Result<ExitCode, EceError> {
    let cfg = resolve_run_config(&common)?;
    let dir = artifact_dir(&common, &cfg.name);
    refuse_existing(&dir, common.force)?;
    fs::create_dir_all(&dir)?;

    let record = ece::config::execute_run(&cfg, cfg.meta.num_episodes, cfg.seed)?;
    record.write_ndjson(&dir.join("record.ndjson"))?;
    fs::write(
        dir.join("config.resolved.json"),
        serde_json::to_string_pretty(&record.header.resolved_config)?,
    )?;
    // The exact environment, for reproduction without re-deriving it.
    let streams = ece::config::cell_streams(cfg.seed, cfg.meta.num_episodes, cfg.seed);
    let mat = ece::config::materialize(&cfg, cfg.meta.num_episodes, streams)?;
    fs::write(dir.join("env.json"), mat.env.document().to_json()?)?;
    let regret = cumulative_regret(&record, Benchmark::VStar)?;
    println!(
        "run complete: variant={} T={} eliminations={} final_regret={:.3} -> {}",
        record.header.variant,
        record.rows.len(),
        record.header.eliminations.len(),
        regret.last().copied().unwrap_or(0.0),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(common: CommonArgs, workers: Option<usize>, resume: bool) -> Result<ExitCode, EceError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| EceError::config("sweep requires --config with a sweep document"))?;
    let text = fs::read_to_string(path)?;
    let mut sweep = SweepConfig::from_json(&text)?;
    if let Some(seed) = common.seed {
        sweep.run.seed = seed;
    }
    if let Some(variant) = &common.variant {
        sweep.run.variant = Variant::parse(variant)?;
    }
    let dir = artifact_dir(&common, &sweep.name);
    if !resume {
        refuse_existing(&dir, common.force)?;
    }
    fs::create_dir_all(&dir)?;
    let summary = run_sweep(&sweep, &dir, workers, resume)?;
    println!(
        "sweep complete: {} cells, {} errors -> {}",
        summary.cells.len(),
        summary.errors.len(),
        dir.display()
    );
    for (curve, fit) in &summary.fits {
        println!("  {curve}: slope {:.3} (r^2 {:.3})", fit.slope, fit.r_squared);
    }
    if summary.errors.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} cells failed", summary.errors.len());
        Ok(ExitCode::from(1))
    }
}

fn find_records(dir: &Path) -> Result<Vec<PathBuf>, EceError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in fs::read_dir(&current)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().map(|e| e == "ndjson").unwrap_or(false) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn cmd_analyze(records_dir: &Path, out: &Path) -> Result<ExitCode, EceError> {
    let paths = find_records(records_dir)?;
    if paths.is_empty() {
        return Err(EceError::runtime(format!(
            "no .ndjson records under {}",
            records_dir.display()
        )));
    }
    fs::create_dir_all(out)?;

    let mut curves_csv = String::from("record,variant,t,cumulative_regret\n");
    let mut finals: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for path in &paths {
        let record = RunRecord::read_ndjson(path)?;
        let name = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let curve = cumulative_regret(&record, Benchmark::VStar)?;
        for (i, r) in curve.iter().enumerate() {
            curves_csv.push_str(&format!("{name},{},{},{r:.6}\n", record.header.variant, i + 1));
        }
        finals
            .entry((record.header.variant.clone(), record.rows.len()))
            .or_default()
            .push(curve.last().copied().unwrap_or(0.0));
    }
    fs::write(out.join("regret_curves.csv"), curves_csv)?;

    let mut slope_csv = String::from("variant,t,runs,mean_final_regret\n");
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((variant, t), values) in &finals {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        slope_csv.push_str(&format!("{variant},{t},{},{mean:.6}\n", values.len()));
        groups.entry(variant.clone()).or_default().push((*t as f64, mean));
    }
    fs::write(out.join("final_regrets.csv"), slope_csv)?;

    let mut fits = BTreeMap::new();
    for (variant, points) in &groups {
        if let Ok(fit) = fit_loglog_slope(points) {
            fits.insert(variant.clone(), fit);
        }
    }
    fs::write(out.join("fits.json"), serde_json::to_string_pretty(&fits)?)?;
    println!("analyzed {} records -> {}", paths.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct FileReport {
    path: String,
    rows: usize,
    structural_violations: Vec<String>,
    event_e1_violations: usize,
    event_e3_stat: f64,
}

#[derive(serde::Serialize)]
struct ValidationReport {
    files: Vec<FileReport>,
    unreadable: Vec<String>,
    hard_violations: usize,
    event_e1_violation_rate: f64,
    event_e3_exceed_rate: f64,
}

fn cmd_validate(records_dir: &Path, report_path: Option<&Path>) -> Result<ExitCode, EceError> {
    let paths = find_records(records_dir)?;
    let mut files = Vec::new();
    let mut unreadable = Vec::new();
    for path in &paths {
        match RunRecord::read_ndjson(path) {
            Ok(record) => {
                files.push(FileReport {
                    path: path.display().to_string(),
                    rows: record.rows.len(),
                    structural_violations: record.audit(),
                    event_e1_violations: verify_event_e1(&record).len(),
                    event_e3_stat: verify_event_e3(&record),
                });
            }
            Err(e) => unreadable.push(format!("{}: {e}", path.display())),
        }
    }
    let hard: usize = files.iter().map(|f| f.structural_violations.len()).sum();
    let n = files.len().max(1) as f64;
    let report = ValidationReport {
        hard_violations: hard,
        event_e1_violation_rate: files.iter().filter(|f| f.event_e1_violations > 0).count() as f64
            / n,
        event_e3_exceed_rate: files.iter().filter(|f| f.event_e3_stat > 1.0).count() as f64 / n,
        files,
        unreadable: unreadable.clone(),
    };
    let text = serde_json::to_string_pretty(&report)?;
    match report_path {
        Some(path) => {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, &text)?;
            println!("report -> {}", path.display());
        }
        None => println!("{text}"),
    }
    if !unreadable.is_empty() {
        eprintln!("{} unreadable records", unreadable.len());
        return Ok(ExitCode::from(1));
    }
    if hard > 0 {
        eprintln!("{hard} structural violations");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
