//! Exact regret accounting and log-log scaling fits.

use serde::{Deserialize, Serialize};

use crate::error::{EceError, Result};
use crate::harness::record::RunRecord;

/// Benchmark a regret curve is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    /// The unrestricted optimal value.
    VStar,
    /// The best value achievable by the given slot's policy class.
    BestInClass(usize),
}

/// Prefix sums of `benchmark - V^{pi_t}`, from the exact per-episode policy
/// values in the record (never the sampled returns).
pub fn cumulative_regret(record: &RunRecord, benchmark: Benchmark) -> Result<Vec<f64>> {
    let target = match benchmark {
        Benchmark::VStar => record.header.v_star,
        Benchmark::BestInClass(slot) => *record
            .header
            .per_level_values
            .get(slot)
            .ok_or_else(|| EceError::config(format!("no benchmark value for slot {slot}")))?,
    };
    let mut out = Vec::with_capacity(record.rows.len());
    let mut acc = 0.0;
    for row in &record.rows {
        acc += target - row.policy_value;
        out.push(acc);
    }
    Ok(out)
}

/// A least-squares power-law fit `R ~ exp(intercept) * T^slope` computed in
/// log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// The `(T, R)` points that entered the fit.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points dropped because the regret was not positive.
    pub dropped: usize,
}

/// Fits `ln R` on `ln T` by least squares. Nonpositive regrets cannot be
/// log-transformed and are dropped (counted in `dropped`); at least two
/// distinct horizons must survive.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<ScalingFit> {
    let kept: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(t, r)| t > 0.0 && r > 0.0).collect();
    let dropped = points.len() - kept.len();
    let mut ts: Vec<f64> = kept.iter().map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 2 {
        return Err(EceError::runtime(
            "power-law fit needs at least two distinct horizons with positive regret",
        ));
    }
    let n = kept.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, r) in &kept {
        let (x, y) = (t.ln(), r.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ss_tot = syy - sy * sy / n;
    let ss_res: f64 = kept
        .iter()
        .map(|&(t, r)| {
            let e = r.ln() - (intercept + slope * t.ln());
            e * e
        })
        .sum();
    let r_squared = if ss_tot <= 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(ScalingFit { points: kept, slope, intercept, r_squared, dropped })
}
