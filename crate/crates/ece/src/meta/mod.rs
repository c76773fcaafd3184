//! The explore-commit-eliminate meta-algorithm.
//!
//! Control flow per episode `t`:
//!
//! 1. Draw the exploration coin `U_t ~ Bernoulli(t^-kappa)`.
//! 2. Play the candidate if `U_t = 0`, else a uniform draw from the
//!    exploration set `B_t` of more complex slots.
//! 3. Roll out the chosen learner's proposed policy, feed the episode back to
//!    that learner only, and update that slot's play count and return sum.
//! 4. After a burn-in, eliminate the candidate as soon as some explored slot's
//!    scaled return excess exceeds a threshold built from the *candidate's*
//!    nominal regret coefficient. The candidate index only ever moves up, by
//!    exactly one per elimination; once it reaches the last slot the run
//!    commits to that slot for the remaining episodes.
//!
//! Natural logarithms are used wherever a threshold has a log term; the base
//! choice is absorbed by the `c_w` constant.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{sample_episode, PolicyEvaluator, SimEnv};
use crate::error::{EceError, Result};
use crate::harness::record::{Elimination, RunHeader, RunRecord, RunRow, RECORD_SCHEMA_VERSION};
use crate::learners::{check_slot_ordering, BaseLearnerSlot};
use crate::nominal::NominalCoefficient;
use crate::rng::RunStreams;

fn default_c_z() -> f64 {
    1.0
}

/// Meta-algorithm parameters. `c_w`, `c_min`, and `c_z` are the "sufficiently
/// large constants" of the elimination thresholds and burn-in; theory-faithful
/// values make desk-scale elimination hopeless, so they are experiment knobs
/// with these documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EceConfig {
    /// Exploration decay exponent, in (0, 1/2].
    pub kappa: f64,
    /// Outer failure budget, in (0, 1/e).
    pub delta_prime: f64,
    /// Number of episodes T.
    pub num_episodes: usize,
    /// Threshold constant C_W.
    pub c_w: f64,
    /// Burn-in constant C_min.
    pub c_min: f64,
    /// Threshold constant C_Z for the estimated-optimal-value variant.
    #[serde(default = "default_c_z")]
    pub c_z: f64,
    /// Episode length H.
    pub horizon: usize,
    /// Number of slots L.
    pub num_slots: usize,
}

impl EceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 0.5) {
            return Err(EceError::config(format!(
                "kappa = {} violates the constraint kappa in (0, 1/2]",
                self.kappa
            )));
        }
        let inv_e = (-1.0f64).exp();
        if !(self.delta_prime > 0.0 && self.delta_prime < inv_e) {
            return Err(EceError::config(format!(
                "delta_prime = {} must lie in (0, 1/e)",
                self.delta_prime
            )));
        }
        if self.num_episodes == 1 {
            return Err(EceError::config(
                "num_episodes must be 0 (empty run) or at least 2",
            ));
        }
        if self.c_w <= 0.0 || self.c_min <= 0.0 || self.c_z <= 0.0 {
            return Err(EceError::config("threshold constants must be positive"));
        }
        if self.horizon == 0 || self.num_slots == 0 {
            return Err(EceError::config("horizon and num_slots must be positive"));
        }
        Ok(())
    }
}

/// Live state of a run: the candidate, the exploration set, and per-slot
/// play counts and return sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EceState {
    pub candidate: usize,
    /// Ordered set of slots above the candidate that are still explored.
    pub explore_set: Vec<usize>,
    pub play_counts: Vec<u64>,
    pub return_sums: Vec<f64>,
    /// Completed episodes.
    pub episode: usize,
    /// Set once the candidate reaches the last slot; from then on the run
    /// plays that slot without testing.
    pub terminal: bool,
}

impl EceState {
    pub fn new(num_slots: usize) -> Self {
        EceState {
            candidate: 0,
            explore_set: (1..num_slots).collect(),
            play_counts: vec![0; num_slots],
            return_sums: vec![0.0; num_slots],
            episode: 0,
            terminal: num_slots == 1,
        }
    }

    /// Advances the candidate after an elimination: the new candidate leaves
    /// the exploration set.
    pub fn advance_candidate(&mut self) {
        self.candidate += 1;
        self.explore_set.retain(|&j| j != self.candidate);
        if self.candidate + 1 == self.play_counts.len() {
            self.terminal = true;
        }
    }

    pub fn record_play(&mut self, slot: usize, g: f64) {
        self.play_counts[slot] += 1;
        self.return_sums[slot] += g;
        self.episode += 1;
    }
}

/// Rescaled per-test failure probability
/// `delta = delta' / (10 L T^2 max(1, log2 T))`.
///
/// The `log2` clamp keeps the expression finite at T = 2; smaller horizons are
/// a configuration error.
pub fn effective_delta(delta_prime: f64, num_slots: usize, num_episodes: usize) -> Result<f64> {
    if num_episodes < 2 {
        return Err(EceError::config("effective_delta needs at least 2 episodes"));
    }
    let t = num_episodes as f64;
    let log2t = t.log2().max(1.0);
    Ok(delta_prime / (10.0 * num_slots as f64 * t * t * log2t))
}

/// Burn-in `ceil(c_min * L^(2 / (1 - kappa)) * ln(1/delta)^(1 / (1 - kappa)))`.
/// The elimination test is consulted only from this episode on.
pub fn burn_in(delta: f64, num_slots: usize, kappa: f64, c_min: f64) -> u64 {
    let e = 1.0 / (1.0 - kappa);
    let l = num_slots as f64;
    (c_min * l.powf(2.0 * e) * (1.0 / delta).ln().powf(e)).ceil() as u64
}

/// Exploration coin: `Bernoulli(min(1, t^-kappa))`.
pub fn exploration_draw(t: usize, kappa: f64, rng: &mut ChaCha8Rng) -> bool {
    let p = (t as f64).powf(-kappa).min(1.0);
    rng.gen::<f64>() < p
}

/// Slot choice for the episode: the candidate when not exploring, else a
/// uniform draw from the exploration set (candidate fallback if it is empty).
pub fn choose_index(state: &EceState, explore: bool, rng: &mut ChaCha8Rng) -> usize {
    if explore && !state.explore_set.is_empty() {
        state.explore_set[rng.gen_range(0..state.explore_set.len())]
    } else {
        state.candidate
    }
}

/// Scaled excess-gap statistic `(n_i / n_j) * s_j - s_i`, comparing slot `j`'s
/// exploration returns against candidate `i`'s. `None` when either side has
/// no data yet.
pub fn excess_gap_statistic(state: &EceState, i: usize, j: usize) -> Option<f64> {
    let (n_i, n_j) = (state.play_counts[i], state.play_counts[j]);
    if n_i == 0 || n_j == 0 {
        return None;
    }
    Some((n_i as f64 / n_j as f64) * state.return_sums[j] - state.return_sums[i])
}

/// Elimination threshold, evaluated with the *candidate's* coefficient and
/// complexity:
/// `c_w * [ R(d, H, ln(T/d)) sqrt(n) + H sqrt(L n^(1+k) ln(1/d)) + H sqrt(n ln(1/d)) ]`.
pub fn threshold_w(
    n: u64,
    nominal: &NominalCoefficient,
    config: &EceConfig,
    delta: f64,
) -> f64 {
    let n = n as f64;
    let h = config.horizon as f64;
    let l = config.num_slots as f64;
    let log_t = (config.num_episodes as f64 / delta).ln();
    let log_d = (1.0 / delta).ln();
    let r = nominal.evaluate(config.horizon, log_t);
    config.c_w * (r * n.sqrt())
        + config.c_w * h * (l * n.powf(1.0 + config.kappa) * log_d).sqrt()
        + config.c_w * h * (n * log_d).sqrt()
}

/// Runs the test for the current state: fires iff the burn-in has passed and
/// some explored slot with data pushes the statistic above the candidate's
/// threshold. Returns the full witness list.
pub fn elimination_test(
    state: &EceState,
    slots: &[BaseLearnerSlot],
    config: &EceConfig,
    delta: f64,
) -> (bool, Vec<usize>) {
    if state.terminal || (state.episode as u64) < burn_in(delta, config.num_slots, config.kappa, config.c_min) {
        return (false, Vec::new());
    }
    let candidate = state.candidate;
    if state.play_counts[candidate] == 0 {
        return (false, Vec::new());
    }
    let bound = threshold_w(state.play_counts[candidate], &slots[candidate].nominal, config, delta);
    let witnesses: Vec<usize> = state
        .explore_set
        .iter()
        .copied()
        .filter(|&j| matches!(excess_gap_statistic(state, candidate, j), Some(stat) if stat > bound))
        .collect();
    (!witnesses.is_empty(), witnesses)
}

/// One run in progress. [`EceRunner::step`] executes a single episode of the
/// main loop; [`run_ece`] drives it to completion.
pub struct EceRunner<'a> {
    config: EceConfig,
    env: &'a SimEnv,
    slots: &'a mut [BaseLearnerSlot],
    pub state: EceState,
    delta: f64,
    meta_rng: ChaCha8Rng,
    env_rng: ChaCha8Rng,
    evaluator: PolicyEvaluator<'a>,
    rows: Vec<RunRow>,
    eliminations: Vec<Elimination>,
    seed: u64,
}

impl<'a> EceRunner<'a> {
    pub fn new(
        slots: &'a mut [BaseLearnerSlot],
        config: &EceConfig,
        env: &'a SimEnv,
        streams: RunStreams,
    ) -> Result<Self> {
        config.validate()?;
        if slots.len() != config.num_slots {
            return Err(EceError::config(format!(
                "config declares {} slots but {} were supplied",
                config.num_slots,
                slots.len()
            )));
        }
        check_slot_ordering(slots, config.horizon)?;
        if env.mdp.horizon != config.horizon {
            return Err(EceError::config("environment horizon does not match config"));
        }
        let delta = effective_delta(config.delta_prime, config.num_slots, config.num_episodes)?;
        Ok(EceRunner {
            config: config.clone(),
            state: EceState::new(slots.len()),
            slots,
            env,
            delta,
            meta_rng: streams.meta.rng(),
            env_rng: streams.env.rng(),
            evaluator: PolicyEvaluator::new(&env.mdp),
            rows: Vec::with_capacity(config.num_episodes),
            eliminations: Vec::new(),
            seed: streams.meta.seed,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Executes episode `state.episode + 1`.
    pub fn step(&mut self) -> Result<()> {
        let t = self.state.episode + 1;
        let (explore_drawn, chosen) = if self.state.terminal {
            (false, self.state.candidate)
        } else {
            let u = exploration_draw(t, self.config.kappa, &mut self.meta_rng);
            (u, choose_index(&self.state, u, &mut self.meta_rng))
        };
        let candidate_now = self.state.candidate;
        let b_size_now = self.state.explore_set.len();

        let policy = self.slots[chosen].learner.propose_policy(t);
        let trace = sample_episode(&self.env.mdp, &policy, &mut self.env_rng, t)?;
        let g = trace.ret();
        let value = self.evaluator.value(&policy)?;
        self.slots[chosen].learner.observe(t, &trace, g);
        self.state.record_play(chosen, g);

        self.rows.push(RunRow {
            t,
            chosen_index: chosen,
            // The coin may come up explore while B is empty; the fallback
            // plays the candidate and the row is not an exploration row.
            explored: explore_drawn && chosen != candidate_now,
            g,
            policy_value: value,
            candidate: candidate_now,
            b_set_size: b_size_now,
        });

        if !self.state.terminal {
            let (reject, witnesses) =
                elimination_test(&self.state, self.slots, &self.config, self.delta);
            if reject {
                self.eliminations.push(Elimination {
                    t,
                    old_candidate: self.state.candidate,
                    witnesses,
                });
                self.state.advance_candidate();
            }
        }
        Ok(())
    }

    pub fn into_record(self, variant: &str) -> RunRecord {
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

/// Empty record for a zero-episode run.
pub(crate) fn empty_record(
    variant: &str,
    config: &EceConfig,
    env: &SimEnv,
    seed: u64,
) -> RunRecord {
    RunRecord {
        header: RunHeader {
            schema_version: RECORD_SCHEMA_VERSION,
            variant: variant.into(),
            ece: config.clone(),
            v_star: env.v_star,
            per_level_values: env.per_slot_values.clone(),
            eliminations: Vec::new(),
            seed,
            resolved_config: serde_json::Value::Null,
        },
        rows: Vec::new(),
    }
}

/// Runs the meta-algorithm for `config.num_episodes` episodes.
pub fn run_ece(
    slots: &mut [BaseLearnerSlot],
    config: &EceConfig,
    env: &SimEnv,
    streams: RunStreams,
) -> Result<RunRecord> {
    if config.num_episodes == 0 {
        check_slot_ordering(slots, config.horizon)?;
        return Ok(empty_record("ece", config, env, streams.meta.seed));
    }
    let mut runner = EceRunner::new(slots, config, env, streams)?;
    for _ in 0..config.num_episodes {
        runner.step()?;
    }
    Ok(runner.into_record("ece"))
}
