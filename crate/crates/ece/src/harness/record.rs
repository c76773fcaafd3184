//! Run records: the per-episode log every meta-algorithm run emits and every
//! downstream analysis recomputes from.
//!
//! Persistence format: one JSON header line (resolved config, benchmark
//! values, eliminations) followed by one JSON object per episode row.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EceError, Result};
use crate::meta::EceConfig;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

/// One episode of a run. `candidate` and `b_set_size` describe the state
/// while the episode was played (before any elimination at its end);
/// `explored` marks episodes played as an exploration draw from the
/// candidate set's complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub t: usize,
    pub chosen_index: usize,
    pub explored: bool,
    pub g: f64,
    pub policy_value: f64,
    pub candidate: usize,
    pub b_set_size: usize,
}

/// An elimination event: at the end of episode `t` the candidate
/// `old_candidate` was rejected; `witnesses` lists every comparison index
/// whose test fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub t: usize,
    pub old_candidate: usize,
    pub witnesses: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema_version: u32,
    /// Which meta-algorithm produced this run (ece, ece-gap, ece-vstar-known,
    /// ece-vhat, or a baseline tag).
    pub variant: String,
    pub ece: EceConfig,
    pub v_star: f64,
    /// Best-in-class value per slot.
    pub per_level_values: Vec<f64>,
    pub eliminations: Vec<Elimination>,
    /// Seed of the run's stream bundle.
    pub seed: u64,
    /// Fully resolved invocation config (all defaults materialized); set by
    /// the layer that owns the config document.
    pub resolved_config: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub header: RunHeader,
    pub rows: Vec<RunRow>,
}

impl RunRecord {
    pub fn num_episodes(&self) -> usize {
        self.rows.len()
    }

    /// Per-slot play counts reconstructed from the row stream.
    pub fn final_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.header.ece.num_slots];
        for row in &self.rows {
            counts[row.chosen_index] += 1;
        }
        counts
    }

    /// First episode at which `slot` was the candidate, or `None` if never.
    pub fn candidacy_start(&self, slot: usize) -> Option<usize> {
        self.rows.iter().find(|r| r.candidate == slot).map(|r| r.t)
    }

    /// Elimination episode of `slot` (the episode whose test rejected it).
    pub fn elimination_time(&self, slot: usize) -> Option<usize> {
        self.header.eliminations.iter().find(|e| e.old_candidate == slot).map(|e| e.t)
    }

    pub fn write_ndjson(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&self.header)?);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row)?);
            out.push('\n');
        }
        let mut file = fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_ndjson(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| EceError::runtime(format!("{}: empty record", path.display())))??;
        let header: RunHeader = serde_json::from_str(&header_line)?;
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(&line)?);
        }
        Ok(RunRecord { header, rows })
    }

    /// Audits the structural invariants a well-formed record must satisfy.
    /// Returns human-readable violations, each naming the offending row.
    pub fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        let cfg = &self.header.ece;
        let h = cfg.horizon as f64;
        let mut prev_candidate = 0usize;
        for (i, row) in self.rows.iter().enumerate() {
            if row.t != i + 1 {
                out.push(format!("row {i}: episode index {} breaks the 1..=T sequence", row.t));
            }
            if row.chosen_index >= cfg.num_slots {
                out.push(format!("row {i}: chosen index {} out of range", row.chosen_index));
                continue;
            }
            if row.candidate < prev_candidate || row.candidate > prev_candidate + 1 {
                out.push(format!(
                    "row {i}: candidate jumps from {prev_candidate} to {}",
                    row.candidate
                ));
            }
            prev_candidate = row.candidate;
            if row.b_set_size != cfg.num_slots - 1 - row.candidate {
                out.push(format!("row {i}: b_set_size {} inconsistent", row.b_set_size));
            }
            if row.explored && row.chosen_index <= row.candidate {
                out.push(format!("row {i}: exploration episode played a non-exploration slot"));
            }
            if !row.explored && row.chosen_index != row.candidate {
                out.push(format!("row {i}: exploitation episode did not play the candidate"));
            }
            if row.policy_value < -1e-9 || row.policy_value > self.header.v_star + 1e-9 {
                out.push(format!(
                    "row {i}: policy value {} outside [0, v_star]",
                    row.policy_value
                ));
            }
            if (row.g - row.policy_value).abs() > h + 1e-9 {
                out.push(format!("row {i}: return noise exceeds the horizon bound"));
            }
            if row.g < -1e-9 || row.g > h + 1e-9 {
                out.push(format!("row {i}: return {} outside [0, H]", row.g));
            }
        }
        for (k, e) in self.header.eliminations.iter().enumerate() {
            if e.old_candidate != k {
                out.push(format!("elimination {k}: old candidate {} out of order", e.old_candidate));
            }
            if e.t == 0 || e.t > self.rows.len() {
                out.push(format!("elimination {k}: episode {} out of range", e.t));
            }
            // The known-optimal-value test has no comparison slot, so its
            // eliminations legitimately carry no witnesses.
            if e.witnesses.is_empty() && self.header.variant != "ece-vstar-known" {
                out.push(format!("elimination {k}: no witnesses recorded"));
            }
        }
        out
    }
}
