//! Side-information variants of the elimination test.
//!
//! Three drop-in replacements for the main loop's statistic:
//!
//! - **Gap-estimator test** ([`run_ece_gap`]): exploration episodes roll out
//!   dedicated exploration learners and feed a fast estimator of the value
//!   gaps; the candidate is rejected when some estimated gap exceeds
//!   `Z(n, V) = V / sqrt(n)` at the *comparison* slot's sample count.
//! - **Known optimal value** ([`run_ece_vstar_known`]): no forced exploration
//!   at all; the candidate is rejected when its cumulative shortfall against
//!   the supplied optimal value exceeds a two-term threshold.
//! - **Estimated optimal value** ([`run_ece_vhat`]): exploration feeds
//!   per-slot estimators of the optimal value; the candidate is rejected when
//!   its shortfall against some estimate exceeds a four-term threshold mixing
//!   the estimator's rates with the candidate's regret coefficient.
//!
//! All variants share the bookkeeping, record format, and terminal behavior
//! of the main loop: after `L - 1` eliminations they play the last slot to
//! the end of time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{sample_episode, PolicyEvaluator, SimEnv};
use crate::error::{EceError, Result};
use crate::harness::record::{Elimination, RunHeader, RunRecord, RunRow, RECORD_SCHEMA_VERSION};
use crate::learners::{check_slot_ordering, BaseLearner, BaseLearnerSlot};
use crate::meta::{
    burn_in, choose_index, effective_delta, empty_record, exploration_draw, EceConfig, EceState,
};
use crate::nominal::NominalCoefficient;
use crate::rng::RunStreams;
use serde::{Deserialize, Serialize};

/// Gap-estimator threshold `Z(n, v) = v / sqrt(n)`.
pub fn threshold_z(n: u64, v: f64) -> f64 {
    v / (n as f64).sqrt()
}

/// Known-optimal-value threshold
/// `c_w * [ R(d, H, ln(1/delta)) sqrt(n) + H sqrt(n ln(1/delta)) ]`.
pub fn threshold_w_vstar(
    n: u64,
    nominal: &NominalCoefficient,
    config: &EceConfig,
    delta: f64,
) -> f64 {
    let n = n as f64;
    let h = config.horizon as f64;
    let log_d = (1.0 / delta).ln();
    config.c_w * nominal.evaluate(config.horizon, log_d) * n.sqrt()
        + config.c_w * h * (n * log_d).sqrt()
}

/// Estimation rates of an optimal-value estimator for one slot: error decays
/// as `v / n^alpha + v_prime / n^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VhatRates {
    pub alpha: f64,
    pub beta: f64,
    pub v: f64,
    pub v_prime: f64,
}

/// Estimated-optimal-value threshold, mixing the comparison slot's estimator
/// rates with the candidate's regret coefficient:
/// `c_z * [ v L^a n^(1-(1-k)a) + v' L^b n^(1-(1-k)b) + H sqrt(n ln(1/d)) + R_i sqrt(n) ]`
/// with `R_i` evaluated at `(d_i, H, ln(T/d))`.
pub fn threshold_zv(
    n: u64,
    rates: &VhatRates,
    candidate_nominal: &NominalCoefficient,
    config: &EceConfig,
    delta: f64,
) -> f64 {
    let n = n as f64;
    let h = config.horizon as f64;
    let l = config.num_slots as f64;
    let k = config.kappa;
    let log_d = (1.0 / delta).ln();
    let log_t = (config.num_episodes as f64 / delta).ln();
    config.c_z
        * (rates.v * l.powf(rates.alpha) * n.powf(1.0 - (1.0 - k) * rates.alpha)
            + rates.v_prime * l.powf(rates.beta) * n.powf(1.0 - (1.0 - k) * rates.beta)
            + h * (n * log_d).sqrt()
            + candidate_nominal.evaluate(config.horizon, log_t) * n.sqrt())
}

/// Noise placement for the oracle estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Seeded uniform draw over the admissible error interval.
    Uniform,
    /// Pins the estimate at the top of the interval.
    WorstCasePositive,
    /// Pins the estimate at the bottom of the interval.
    WorstCaseNegative,
}

/// Estimates value gaps `gap(i, j) = V*_j - V*_i` from exploration feedback.
///
/// Consistent implementations keep
/// `|estimate(i, j) - gap(i, j)| <= |gap| / C + V_j / sqrt(n)` where `n` is
/// the exploration count of slot `j`.
pub trait GapEstimator: Send {
    /// Called once before episode 1 with the run's horizon and rescaled
    /// failure probability, so evaluators can be materialized.
    fn init(&mut self, horizon: usize, delta: f64);
    fn observe_exploration(&mut self, j: usize, trace: &crate::types::EpisodeTrace, g: f64);
    /// Candidate episodes, for estimators that track slot means.
    fn observe_exploit(&mut self, _i: usize, _trace: &crate::types::EpisodeTrace, _g: f64) {}
    /// `None` until slot `j` has exploration data.
    fn estimate(&mut self, i: usize, j: usize) -> Option<f64>;
    /// Evaluated `V_j` used by the threshold.
    fn v_value(&self, j: usize) -> f64;
    fn exploration_count(&self, j: usize) -> u64;
}

/// Test double satisfying the gap-consistency bound exactly: it knows the
/// true per-slot values and perturbs the true gap by seeded noise confined to
/// the admissible interval.
pub struct OracleGapEstimator {
    slot_values: Vec<f64>,
    c: f64,
    v_coeffs: Vec<NominalCoefficient>,
    v_evaluated: Vec<f64>,
    mode: NoiseMode,
    rng: ChaCha8Rng,
    counts: Vec<u64>,
}

impl OracleGapEstimator {
    pub fn new(
        slot_values: Vec<f64>,
        c: f64,
        v_coeffs: Vec<NominalCoefficient>,
        mode: NoiseMode,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if c <= 1.0 {
            return Err(EceError::config("gap-consistency constant C must exceed 1"));
        }
        if v_coeffs.len() != slot_values.len() {
            return Err(EceError::config("one V evaluator per slot required"));
        }
        let n = slot_values.len();
        Ok(OracleGapEstimator {
            slot_values,
            c,
            v_coeffs,
            v_evaluated: vec![0.0; n],
            mode,
            rng,
            counts: vec![0; n],
        })
    }

    pub fn true_gap(&self, i: usize, j: usize) -> f64 {
        self.slot_values[j] - self.slot_values[i]
    }
}

impl GapEstimator for OracleGapEstimator {
    fn init(&mut self, horizon: usize, delta: f64) {
        let log_d = (1.0 / delta).ln();
        self.v_evaluated =
            self.v_coeffs.iter().map(|c| c.evaluate(horizon, log_d)).collect();
    }

    fn observe_exploration(&mut self, j: usize, _trace: &crate::types::EpisodeTrace, _g: f64) {
        self.counts[j] += 1;
    }

    fn estimate(&mut self, i: usize, j: usize) -> Option<f64> {
        let n = self.counts[j];
        if n == 0 {
            return None;
        }
        let gap = self.true_gap(i, j);
        let bound = gap.abs() / self.c + self.v_evaluated[j] / (n as f64).sqrt();
        let eta = match self.mode {
            NoiseMode::WorstCasePositive => bound,
            NoiseMode::WorstCaseNegative => -bound,
            NoiseMode::Uniform => self.rng.gen_range(-1.0..=1.0) * bound,
        };
        Some(gap + eta)
    }

    fn v_value(&self, j: usize) -> f64 {
        self.v_evaluated[j]
    }

    fn exploration_count(&self, j: usize) -> u64 {
        self.counts[j]
    }
}

/// Plain difference of running means: mean exploration return of the
/// comparison slot minus mean return of slot `i` over all its episodes.
/// Carries no consistency guarantee; configs label it "heuristic".
pub struct EmpiricalGapEstimator {
    v_coeffs: Vec<NominalCoefficient>,
    v_evaluated: Vec<f64>,
    explore_sums: Vec<f64>,
    explore_counts: Vec<u64>,
    all_sums: Vec<f64>,
    all_counts: Vec<u64>,
}

impl EmpiricalGapEstimator {
    pub fn new(v_coeffs: Vec<NominalCoefficient>) -> Self {
        let n = v_coeffs.len();
        EmpiricalGapEstimator {
            v_coeffs,
            v_evaluated: vec![0.0; n],
            explore_sums: vec![0.0; n],
            explore_counts: vec![0; n],
            all_sums: vec![0.0; n],
            all_counts: vec![0; n],
        }
    }
}

impl GapEstimator for EmpiricalGapEstimator {
    fn init(&mut self, horizon: usize, delta: f64) {
        let log_d = (1.0 / delta).ln();
        self.v_evaluated =
            self.v_coeffs.iter().map(|c| c.evaluate(horizon, log_d)).collect();
    }

    fn observe_exploration(&mut self, j: usize, _trace: &crate::types::EpisodeTrace, g: f64) {
        self.explore_sums[j] += g;
        self.explore_counts[j] += 1;
        self.all_sums[j] += g;
        self.all_counts[j] += 1;
    }

    fn observe_exploit(&mut self, i: usize, _trace: &crate::types::EpisodeTrace, g: f64) {
        self.all_sums[i] += g;
        self.all_counts[i] += 1;
    }

    fn estimate(&mut self, i: usize, j: usize) -> Option<f64> {
        if self.explore_counts[j] == 0 || self.all_counts[i] == 0 {
            return None;
        }
        Some(
            self.explore_sums[j] / self.explore_counts[j] as f64
                - self.all_sums[i] / self.all_counts[i] as f64,
        )
    }

    fn v_value(&self, j: usize) -> f64 {
        self.v_evaluated[j]
    }

    fn exploration_count(&self, j: usize) -> u64 {
        self.explore_counts[j]
    }
}

/// Estimates the optimal value from exploration feedback, with per-slot
/// error `v / n^alpha + v' / n^beta`.
pub trait VStarEstimator: Send {
    fn init(&mut self, horizon: usize, delta: f64);
    fn observe_exploration(&mut self, i: usize, trace: &crate::types::EpisodeTrace, g: f64);
    /// `None` until slot `i` has exploration data.
    fn estimate(&mut self, i: usize) -> Option<f64>;
    /// Rates of slot `i`'s estimator, with `v`, `v_prime` already evaluated.
    fn rates(&self, i: usize) -> VhatRates;
    fn exploration_count(&self, i: usize) -> u64;
}

/// Test double for the optimal-value estimator: returns the true optimal
/// value perturbed by seeded noise inside the assumed error envelope.
/// With zero rate coefficients it is the perfect estimator.
pub struct OracleVStarEstimator {
    v_star: f64,
    alpha: f64,
    beta: f64,
    v_coeffs: Vec<NominalCoefficient>,
    v_prime_coeffs: Vec<NominalCoefficient>,
    evaluated: Vec<VhatRates>,
    mode: NoiseMode,
    rng: ChaCha8Rng,
    counts: Vec<u64>,
}

impl OracleVStarEstimator {
    pub fn new(
        v_star: f64,
        alpha: f64,
        beta: f64,
        v_coeffs: Vec<NominalCoefficient>,
        v_prime_coeffs: Vec<NominalCoefficient>,
        mode: NoiseMode,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(EceError::config("estimator rates must lie in (0, 1)"));
        }
        if v_coeffs.len() != v_prime_coeffs.len() {
            return Err(EceError::config("rate evaluator lists must have equal length"));
        }
        let n = v_coeffs.len();
        Ok(OracleVStarEstimator {
            v_star,
            alpha,
            beta,
            v_coeffs,
            v_prime_coeffs,
            evaluated: vec![VhatRates { alpha, beta, v: 0.0, v_prime: 0.0 }; n],
            mode,
            rng,
            counts: vec![0; n],
        })
    }

    /// Estimator that returns the optimal value exactly.
    pub fn perfect(v_star: f64, num_slots: usize, rng: ChaCha8Rng) -> Self {
        OracleVStarEstimator::new(
            v_star,
            0.5,
            0.5,
            vec![NominalCoefficient::zero(1); num_slots],
            vec![NominalCoefficient::zero(1); num_slots],
            NoiseMode::Uniform,
            rng,
        )
        .expect("fixed rates are valid")
    }
}

impl VStarEstimator for OracleVStarEstimator {
    fn init(&mut self, horizon: usize, delta: f64) {
        let log_d = (1.0 / delta).ln();
        self.evaluated = self
            .v_coeffs
            .iter()
            .zip(&self.v_prime_coeffs)
            .map(|(v, vp)| VhatRates {
                alpha: self.alpha,
                beta: self.beta,
                v: v.evaluate(horizon, log_d),
                v_prime: vp.evaluate(horizon, log_d),
            })
            .collect();
    }

    fn observe_exploration(&mut self, i: usize, _trace: &crate::types::EpisodeTrace, _g: f64) {
        self.counts[i] += 1;
    }

    fn estimate(&mut self, i: usize) -> Option<f64> {
        let n = self.counts[i];
        if n == 0 {
            return None;
        }
        let r = &self.evaluated[i];
        let bound = r.v / (n as f64).powf(r.alpha) + r.v_prime / (n as f64).powf(r.beta);
        let eta = match self.mode {
            NoiseMode::WorstCasePositive => bound,
            NoiseMode::WorstCaseNegative => -bound,
            NoiseMode::Uniform => {
                if bound == 0.0 {
                    0.0
                } else {
                    self.rng.gen_range(-1.0..=1.0) * bound
                }
            }
        };
        Some(self.v_star + eta)
    }

    fn rates(&self, i: usize) -> VhatRates {
        self.evaluated[i]
    }

    fn exploration_count(&self, i: usize) -> u64 {
        self.counts[i]
    }
}

/// Shared loop chassis for the two exploration-driven variants.
struct VariantRunner<'a> {
    config: EceConfig,
    env: &'a SimEnv,
    slots: &'a mut [BaseLearnerSlot],
    exploration: &'a mut [Box<dyn BaseLearner>],
    state: EceState,
    delta: f64,
    gate: u64,
    meta_rng: ChaCha8Rng,
    env_rng: ChaCha8Rng,
    evaluator: PolicyEvaluator<'a>,
    rows: Vec<RunRow>,
    eliminations: Vec<Elimination>,
    seed: u64,
}

impl<'a> VariantRunner<'a> {
    fn new(
        slots: &'a mut [BaseLearnerSlot],
        exploration: &'a mut [Box<dyn BaseLearner>],
        config: &EceConfig,
        env: &'a SimEnv,
        streams: RunStreams,
    ) -> Result<Self> {
        config.validate()?;
        if slots.len() != config.num_slots {
            return Err(EceError::config("slot count does not match config"));
        }
        if exploration.len() != slots.len() {
            return Err(EceError::config("one exploration learner per slot required"));
        }
        check_slot_ordering(slots, config.horizon)?;
        let delta = effective_delta(config.delta_prime, config.num_slots, config.num_episodes)?;
        let gate = burn_in(delta, config.num_slots, config.kappa, config.c_min);
        Ok(VariantRunner {
            config: config.clone(),
            state: EceState::new(slots.len()),
            slots,
            exploration,
            env,
            delta,
            gate,
            meta_rng: streams.meta.rng(),
            env_rng: streams.env.rng(),
            evaluator: PolicyEvaluator::new(&env.mdp),
            rows: Vec::with_capacity(config.num_episodes),
            eliminations: Vec::new(),
            seed: streams.meta.seed,
        })
    }

    /// Plays one episode; exploration episodes roll out the exploration
    /// learner of the drawn slot. Returns `(explored, chosen, g, trace)`
    /// with the row already logged.
    fn play(&mut self) -> Result<(bool, usize, f64, crate::types::EpisodeTrace)> {
        let t = self.state.episode + 1;
        let (explore_drawn, chosen) = if self.state.terminal {
            (false, self.state.candidate)
        } else {
            let u = exploration_draw(t, self.config.kappa, &mut self.meta_rng);
            (u, choose_index(&self.state, u, &mut self.meta_rng))
        };
        let explored = explore_drawn && chosen != self.state.candidate;
        let policy = if explored {
            self.exploration[chosen].propose_policy(t)
        } else {
            self.slots[chosen].learner.propose_policy(t)
        };
        let trace = sample_episode(&self.env.mdp, &policy, &mut self.env_rng, t)?;
        let g = trace.ret();
        let value = self.evaluator.value(&policy)?;
        if explored {
            self.exploration[chosen].observe(t, &trace, g);
        } else {
            self.slots[chosen].learner.observe(t, &trace, g);
        }
        self.rows.push(RunRow {
            t,
            chosen_index: chosen,
            explored,
            g,
            policy_value: value,
            candidate: self.state.candidate,
            b_set_size: self.state.explore_set.len(),
        });
        self.state.record_play(chosen, g);
        Ok((explored, chosen, g, trace))
    }

    fn eliminate(&mut self, witnesses: Vec<usize>) {
        self.eliminations.push(Elimination {
            t: self.state.episode,
            old_candidate: self.state.candidate,
            witnesses,
        });
        self.state.advance_candidate();
    }

    fn test_is_due(&self) -> bool {
        !self.state.terminal && self.state.episode as u64 >= self.gate
    }

    fn into_record(self, variant: &str) -> RunRecord {
        RunRecord {
            header: RunHeader {
                schema_version: RECORD_SCHEMA_VERSION,
                variant: variant.into(),
                ece: self.config,
                v_star: self.env.v_star,
                per_level_values: self.env.per_slot_values.clone(),
                eliminations: self.eliminations,
                seed: self.seed,
                resolved_config: serde_json::Value::Null,
            },
            rows: self.rows,
        }
    }
}

/// Gap-estimator variant. Identical control flow to the main loop except
/// that exploration episodes roll out and update the exploration learners
/// and the estimator, and the test compares `estimate(candidate, j)` against
/// `Z(n_j, V_j)` at the comparison slot's exploration count.
pub fn run_ece_gap(
    slots: &mut [BaseLearnerSlot],
    exploration: &mut [Box<dyn BaseLearner>],
    estimator: &mut dyn GapEstimator,
    config: &EceConfig,
    env: &SimEnv,
    streams: RunStreams,
) -> Result<RunRecord> {
    if config.num_episodes == 0 {
        return Ok(empty_record("ece-gap", config, env, streams.meta.seed));
    }
    let mut run = VariantRunner::new(slots, exploration, config, env, streams)?;
    estimator.init(config.horizon, run.delta);
    for _ in 0..config.num_episodes {
        let (explored, chosen, g, trace) = run.play()?;
        if explored {
            estimator.observe_exploration(chosen, &trace, g);
        } else {
            estimator.observe_exploit(chosen, &trace, g);
        }
        if run.test_is_due() {
            let candidate = run.state.candidate;
            let witnesses: Vec<usize> = run
                .state
                .explore_set
                .iter()
                .copied()
                .filter(|&j| {
                    let n = estimator.exploration_count(j);
                    n > 0
                        && estimator
                            .estimate(candidate, j)
                            .map(|d| d > threshold_z(n, estimator.v_value(j)))
                            .unwrap_or(false)
                })
                .collect();
            if !witnesses.is_empty() {
                run.eliminate(witnesses);
            }
        }
    }
    Ok(run.into_record("ece-gap"))
}

/// Known-optimal-value variant: no forced exploration, every episode plays
/// the candidate, and the candidate is rejected when
/// `n * v_star - s > threshold_w_vstar(n, R_candidate)`. The test needs no
/// burn-in because it never divides by an exploration count.
pub fn run_ece_vstar_known(
    slots: &mut [BaseLearnerSlot],
    v_star: f64,
    config: &EceConfig,
    env: &SimEnv,
    streams: RunStreams,
) -> Result<RunRecord> {
    config.validate()?;
    if config.num_episodes == 0 {
        return Ok(empty_record("ece-vstar-known", config, env, streams.meta.seed));
    }
    if slots.len() != config.num_slots {
        return Err(EceError::config("slot count does not match config"));
    }
    check_slot_ordering(slots, config.horizon)?;
    let delta = effective_delta(config.delta_prime, config.num_slots, config.num_episodes)?;
    let mut state = EceState::new(slots.len());
    let mut env_rng = streams.env.rng();
    let mut evaluator = PolicyEvaluator::new(&env.mdp);
    let mut rows = Vec::with_capacity(config.num_episodes);
    let mut eliminations = Vec::new();
    for t in 1..=config.num_episodes {
        let chosen = state.candidate;
        let policy = slots[chosen].learner.propose_policy(t);
        let trace = sample_episode(&env.mdp, &policy, &mut env_rng, t)?;
        let g = trace.ret();
        let value = evaluator.value(&policy)?;
        slots[chosen].learner.observe(t, &trace, g);
        rows.push(RunRow {
            t,
            chosen_index: chosen,
            explored: false,
            g,
            policy_value: value,
            candidate: chosen,
            b_set_size: config.num_slots - 1 - chosen,
        });
        state.record_play(chosen, g);
        if !state.terminal {
            let n = state.play_counts[chosen];
            let shortfall = n as f64 * v_star - state.return_sums[chosen];
            if shortfall > threshold_w_vstar(n, &slots[chosen].nominal, config, delta) {
                eliminations.push(Elimination { t, old_candidate: chosen, witnesses: vec![] });
                state.advance_candidate();
            }
        }
    }
    Ok(RunRecord {
        header: RunHeader {
            schema_version: RECORD_SCHEMA_VERSION,
            variant: "ece-vstar-known".into(),
            ece: config.clone(),
            v_star: env.v_star,
            per_level_values: env.per_slot_values.clone(),
            eliminations,
            seed: streams.meta.seed,
            resolved_config: serde_json::Value::Null,
        },
        rows,
    })
}

/// Estimated-optimal-value variant: exploration feeds the per-slot
/// estimators; the candidate is rejected when its cumulative shortfall
/// against some comparison slot's estimate, `n_i * vhat_j - s_i`, exceeds
/// `threshold_zv` at the candidate's count with that slot's rates.
pub fn run_ece_vhat(
    slots: &mut [BaseLearnerSlot],
    exploration: &mut [Box<dyn BaseLearner>],
    estimator: &mut dyn VStarEstimator,
    config: &EceConfig,
    env: &SimEnv,
    streams: RunStreams,
) -> Result<RunRecord> {
    if config.num_episodes == 0 {
        return Ok(empty_record("ece-vhat", config, env, streams.meta.seed));
    }
    let mut run = VariantRunner::new(slots, exploration, config, env, streams)?;
    estimator.init(config.horizon, run.delta);
    for _ in 0..config.num_episodes {
        let (explored, chosen, g, trace) = run.play()?;
        if explored {
            estimator.observe_exploration(chosen, &trace, g);
        }
        if run.test_is_due() {
            let candidate = run.state.candidate;
            let n_i = run.state.play_counts[candidate];
            if n_i == 0 {
                continue;
            }
            let s_i = run.state.return_sums[candidate];
            let witnesses: Vec<usize> = run
                .state
                .explore_set
                .iter()
                .copied()
                .filter(|&j| {
                    estimator
                        .estimate(j)
                        .map(|vhat| {
                            let shortfall = n_i as f64 * vhat - s_i;
                            let bound = threshold_zv(
                                n_i,
                                &estimator.rates(j),
                                &run.slots[candidate].nominal,
                                &run.config,
                                run.delta,
                            );
                            shortfall > bound
                        })
                        .unwrap_or(false)
                })
                .collect();
            if !witnesses.is_empty() {
                run.eliminate(witnesses);
            }
        }
    }
    Ok(run.into_record("ece-vhat"))
}

#[cfg(test)]
mod tests;
