//! Episode simulation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EceError, Result};
use crate::types::{DeterministicPolicy, EpisodeTrace, TabularMdp};

/// Draws an index from a probability vector via inverse CDF. Rows are
/// renormalized on construction, so falling off the end can only happen via
/// float drift; the last positive entry absorbs it.
pub fn sample_categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Rolls out `policy` for one episode: `s_1 ~ initial_dist`,
/// `u_h = policy(h, s_h)`, `s_{h+1} ~ P_h(. | s_h, u_h)`.
pub fn sample_episode(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    rng: &mut ChaCha8Rng,
    episode_index: usize,
) -> Result<EpisodeTrace> {
    if !policy.matches(mdp) {
        return Err(EceError::config("policy dimensions do not match the MDP"));
    }
    let mut states = Vec::with_capacity(mdp.horizon + 1);
    let mut actions = Vec::with_capacity(mdp.horizon);
    let mut rewards = Vec::with_capacity(mdp.horizon);
    let mut s = sample_categorical(rng, &mdp.initial_dist);
    states.push(s);
    for h in 0..mdp.horizon {
        let a = policy.actions[h][s];
        actions.push(a);
        rewards.push(mdp.rewards[h][s][a]);
        s = sample_categorical(rng, &mdp.transitions[h][s][a]);
        states.push(s);
    }
    Ok(EpisodeTrace { states, actions, rewards, episode_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn deterministic_chain_gives_unique_path() {
        // All transition mass on (s + 1) mod S.
        let s_n = 3;
        let mut transitions = vec![vec![vec![vec![0.0; s_n]; 1]; s_n]; 2];
        for h in 0..2 {
            for s in 0..s_n {
                transitions[h][s][0][(s + 1) % s_n] = 1.0;
            }
        }
        let mdp = TabularMdp {
            num_states: s_n,
            num_actions: 1,
            horizon: 2,
            rewards: vec![vec![vec![0.5; 1]; s_n]; 2],
            transitions,
            initial_dist: vec![1.0, 0.0, 0.0],
        };
        let policy = DeterministicPolicy::zeros(2, s_n);
        let mut rng = RngStream::new(1, 0).rng();
        let trace = sample_episode(&mdp, &policy, &mut rng, 0).unwrap();
        assert_eq!(trace.states, vec![0, 1, 2]);
    }

    #[test]
    fn single_state_mdp_stays_at_zero() {
        let mdp = TabularMdp {
            num_states: 1,
            num_actions: 1,
            horizon: 4,
            rewards: vec![vec![vec![0.25]]; 4],
            transitions: vec![vec![vec![vec![1.0]]]; 4],
            initial_dist: vec![1.0],
        };
        let policy = DeterministicPolicy::zeros(4, 1);
        let mut rng = RngStream::new(2, 0).rng();
        let trace = sample_episode(&mdp, &policy, &mut rng, 0).unwrap();
        assert!(trace.states.iter().all(|&s| s == 0));
        assert_eq!(trace.states.len(), 5);
        assert!((trace.ret() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coin_flip_chain_visit_frequency() {
        // Symmetric 2-state chain: every transition is a fair coin flip, so
        // each step's state distribution is exactly (1/2, 1/2).
        let row = vec![0.5, 0.5];
        let mdp = TabularMdp {
            num_states: 2,
            num_actions: 1,
            horizon: 1,
            rewards: vec![vec![vec![0.0], vec![1.0]]],
            transitions: vec![vec![vec![row.clone()], vec![row.clone()]]],
            initial_dist: row.clone(),
        };
        let policy = DeterministicPolicy::zeros(1, 2);
        let mut rng = RngStream::new(7, 3).rng();
        let n = 10_000;
        let mut ones = 0usize;
        for t in 0..n {
            let trace = sample_episode(&mdp, &policy, &mut rng, t).unwrap();
            ones += trace.states[0];
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "visit frequency {freq}");
    }

    #[test]
    fn mismatched_policy_is_config_error() {
        let mdp = TabularMdp {
            num_states: 1,
            num_actions: 1,
            horizon: 2,
            rewards: vec![vec![vec![0.0]]; 2],
            transitions: vec![vec![vec![vec![1.0]]]; 2],
            initial_dist: vec![1.0],
        };
        let policy = DeterministicPolicy::zeros(1, 1);
        let mut rng = RngStream::new(0, 0).rng();
        assert!(sample_episode(&mdp, &policy, &mut rng, 0).is_err());
    }
}
