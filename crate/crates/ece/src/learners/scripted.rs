//! Deterministic test doubles.
//!
//! Scripted learners play a fixed list of policies and stand in for base
//! algorithms whose value trajectory we want to control exactly: a single
//! optimal policy emulates a compatible learner with zero coefficient, a
//! single suboptimal policy a misspecified learner with constant shortfall.

use crate::error::{EceError, Result};
use crate::learners::BaseLearner;
use crate::rng::splitmix64;
use crate::types::{DeterministicPolicy, EpisodeTrace};

/// Plays `policies[min(local_plays, len - 1)]`; `observe` advances the local
/// play count.
pub struct ScriptedLearner {
    policies: Vec<DeterministicPolicy>,
    local_plays: usize,
}

impl ScriptedLearner {
    pub fn new(policies: Vec<DeterministicPolicy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(EceError::config("scripted learner needs a nonempty script"));
        }
        Ok(ScriptedLearner { policies, local_plays: 0 })
    }

    pub fn constant(policy: DeterministicPolicy) -> Self {
        ScriptedLearner { policies: vec![policy], local_plays: 0 }
    }
}

impl BaseLearner for ScriptedLearner {
    fn propose_policy(&self, _t: usize) -> DeterministicPolicy {
        self.policies[self.local_plays.min(self.policies.len() - 1)].clone()
    }

    fn observe(&mut self, _t: usize, _trace: &EpisodeTrace, _g: f64) {
        self.local_plays += 1;
    }

    fn reset(&mut self) {
        self.local_plays = 0;
    }
}

/// The policy that plays action `a` everywhere.
pub fn constant_action_policy(horizon: usize, num_states: usize, a: usize) -> DeterministicPolicy {
    DeterministicPolicy::new(vec![vec![a; num_states]; horizon])
}

/// Stateless exploration learner: episode `t` gets a fresh pseudorandom
/// action table derived from `(seed, t)`. Proposals are uniform over action
/// tables yet side-effect free, so this satisfies the learner contract while
/// behaving like a uniform-random-action policy.
pub struct UniformRandomLearner {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl BaseLearner for UniformRandomLearner {
    fn propose_policy(&self, t: usize) -> DeterministicPolicy {
        let mut x = splitmix64(self.seed ^ splitmix64(t as u64));
        let actions = (0..self.horizon)
            .map(|_| {
                (0..self.num_states)
                    .map(|_| {
                        x = splitmix64(x);
                        (x % self.num_actions as u64) as usize
                    })
                    .collect()
            })
            .collect();
        DeterministicPolicy::new(actions)
    }

    fn observe(&mut self, _t: usize, _trace: &EpisodeTrace, _g: f64) {}

    fn reset(&mut self) {}
}
