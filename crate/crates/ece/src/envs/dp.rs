//! Exact dynamic-programming oracles: optimal values, policy evaluation, and
//! best-in-class values over cluster-measurable policy sets.

use std::collections::HashMap;

use crate::envs::family::{check_realizability, NestedFeatureFamily};
use crate::error::{EceError, Result};
use crate::types::{DeterministicPolicy, TabularMdp};

/// Output of [`value_iteration`].
#[derive(Debug, Clone)]
pub struct ValueIterationResult {
    pub v_star: f64,
    /// `q_star[h][s][a]`, exact optimal action values.
    pub q_star: Vec<Vec<Vec<f64>>>,
    /// Greedy policy with lowest-index tie-break.
    pub pi_star: DeterministicPolicy,
}

/// Finite-horizon backward induction. Exact; no iteration-to-convergence is
/// involved since the horizon is finite.
pub fn value_iteration(mdp: &TabularMdp) -> ValueIterationResult {
    let (s_n, a_n, h_n) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    let mut q_star = vec![vec![vec![0.0; a_n]; s_n]; h_n];
    let mut pi = vec![vec![0usize; s_n]; h_n];
    // v_next[s] = optimal value-to-go from step h+1.
    let mut v_next = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        let mut v_here = vec![0.0; s_n];
        for s in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_n {
                let mut q = mdp.rewards[h][s][a];
                let row = &mdp.transitions[h][s][a];
                for (next, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        q += p * v_next[next];
                    }
                }
                q_star[h][s][a] = q;
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            v_here[s] = best;
            pi[h][s] = best_a;
        }
        v_next = v_here;
    }
    let v_star = mdp.initial_dist.iter().zip(&v_next).map(|(p, v)| p * v).sum();
    ValueIterationResult { v_star, q_star, pi_star: DeterministicPolicy::new(pi) }
}

/// Exact expected return of a deterministic policy, by forward propagation of
/// the state distribution. No sampling.
pub fn policy_value(mdp: &TabularMdp, policy: &DeterministicPolicy) -> Result<f64> {
    if !policy.matches(mdp) {
        return Err(EceError::config("policy dimensions do not match the MDP"));
    }
    let mut dist = mdp.initial_dist.clone();
    let mut value = 0.0;
    for h in 0..mdp.horizon {
        let mut next = vec![0.0; mdp.num_states];
        for s in 0..mdp.num_states {
            let mass = dist[s];
            if mass == 0.0 {
                continue;
            }
            let a = policy.actions[h][s];
            value += mass * mdp.rewards[h][s][a];
            for (nxt, &p) in mdp.transitions[h][s][a].iter().enumerate() {
                if p > 0.0 {
                    next[nxt] += mass * p;
                }
            }
        }
        dist = next;
    }
    Ok(value)
}

/// Memoizing policy evaluator keyed by policy content. Evaluation is exact,
/// so the cache only saves repeated forward passes.
pub struct PolicyEvaluator<'a> {
    mdp: &'a TabularMdp,
    cache: HashMap<DeterministicPolicy, f64>,
}

impl<'a> PolicyEvaluator<'a> {
    pub fn new(mdp: &'a TabularMdp) -> Self {
        PolicyEvaluator { mdp, cache: HashMap::new() }
    }

    pub fn value(&mut self, policy: &DeterministicPolicy) -> Result<f64> {
        if let Some(&v) = self.cache.get(policy) {
            return Ok(v);
        }
        let v = policy_value(self.mdp, policy)?;
        self.cache.insert(policy.clone(), v);
        Ok(v)
    }
}

/// Policies above this count are not enumerated exhaustively.
pub const EXHAUSTIVE_POLICY_CAP: u64 = 1 << 20;

/// Expands a cluster action table to a full policy.
fn expand_table(
    table: &[Vec<usize>],
    cluster_of_state: &[usize],
    num_states: usize,
) -> DeterministicPolicy {
    let actions = table
        .iter()
        .map(|per_cluster| (0..num_states).map(|s| per_cluster[cluster_of_state[s]]).collect())
        .collect();
    DeterministicPolicy::new(actions)
}

/// Exact maximum value over policies measurable with respect to the level's
/// clusters (the action may depend only on `(h, cluster(s))`).
///
/// Three routes, in order:
/// - if the level is realizable, the unrestricted optimum is itself
///   cluster-measurable, so this equals `v_star`;
/// - if the table count `A^(m*H)` is at most [`EXHAUSTIVE_POLICY_CAP`],
///   enumerate all cluster action tables;
/// - otherwise run deterministic greedy coordinate ascent over table entries,
///   seeded from the greedy policy of the unrestricted optimum (a lower
///   bound, flagged as such in the docs).
pub fn best_in_class_value(
    mdp: &TabularMdp,
    family: &NestedFeatureFamily,
    level: usize,
) -> Result<f64> {
    if level >= family.num_levels() {
        return Err(EceError::config(format!("level {level} out of range")));
    }
    if family.num_actions != mdp.num_actions
        || family.levels[level].cluster_of_state.len() != mdp.num_states
    {
        return Err(EceError::config("feature family does not match the MDP"));
    }
    let vi = value_iteration(mdp);
    if check_realizability(mdp, family, level) {
        return Ok(vi.v_star);
    }

    let clusters = family.levels[level].num_clusters;
    let cluster_of_state = &family.levels[level].cluster_of_state;
    let cells = clusters * mdp.horizon;
    let table_count = (mdp.num_actions as f64).powi(cells as i32);

    if table_count <= EXHAUSTIVE_POLICY_CAP as f64 {
        // Odometer over all A^(m*H) cluster action tables.
        let mut table = vec![vec![0usize; clusters]; mdp.horizon];
        let mut best = f64::NEG_INFINITY;
        loop {
            let v = policy_value(mdp, &expand_table(&table, cluster_of_state, mdp.num_states))?;
            if v > best {
                best = v;
            }
            let mut carry = true;
            'advance: for h in 0..mdp.horizon {
                for c in 0..clusters {
                    table[h][c] += 1;
                    if table[h][c] < mdp.num_actions {
                        carry = false;
                        break 'advance;
                    }
                    table[h][c] = 0;
                }
            }
            if carry {
                break;
            }
        }
        return Ok(best);
    }

    // Greedy coordinate ascent. Start from the unrestricted greedy policy
    // projected onto clusters by majority vote (ties to the lower action).
    let mut table = vec![vec![0usize; clusters]; mdp.horizon];
    for h in 0..mdp.horizon {
        for c in 0..clusters {
            let mut votes = vec![0usize; mdp.num_actions];
            for s in 0..mdp.num_states {
                if cluster_of_state[s] == c {
                    votes[vi.pi_star.actions[h][s]] += 1;
                }
            }
            table[h][c] = votes
                .iter()
                .enumerate()
                .max_by(|(ai, av), (bi, bv)| av.cmp(bv).then(bi.cmp(ai)))
                .map(|(a, _)| a)
                .unwrap_or(0);
        }
    }
    let mut best = policy_value(mdp, &expand_table(&table, cluster_of_state, mdp.num_states))?;
    for _sweep in 0..64 {
        let mut improved = false;
        for h in 0..mdp.horizon {
            for c in 0..clusters {
                let incumbent = table[h][c];
                let mut chosen = incumbent;
                for a in 0..mdp.num_actions {
                    if a == incumbent {
                        continue;
                    }
                    table[h][c] = a;
                    let v =
                        policy_value(mdp, &expand_table(&table, cluster_of_state, mdp.num_states))?;
                    if v > best + 1e-12 {
                        best = v;
                        chosen = a;
                    }
                }
                if chosen != incumbent {
                    improved = true;
                }
                table[h][c] = chosen;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(best)
}
