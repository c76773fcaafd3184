//! Nested state-aggregation feature families.
//!
//! A level assigns every state to a cluster; the level's features are one-hot
//! in `(cluster, action)`, so its linear model class can represent exactly
//! those MDPs whose reward and transition rows agree within each cluster.
//! Levels are ordered coarse to fine and each finer level refines the
//! partition of the coarser one, which makes the model classes nested.

use serde::{Deserialize, Serialize};

use crate::types::{TabularMdp, PROB_TOL};

/// One aggregation level: a partition of the state space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationLevel {
    /// `cluster_of_state[s]` is the cluster index of state `s`.
    pub cluster_of_state: Vec<usize>,
    pub num_clusters: usize,
}

impl AggregationLevel {
    pub fn identity(num_states: usize) -> Self {
        AggregationLevel { cluster_of_state: (0..num_states).collect(), num_clusters: num_states }
    }

    /// Groups states by cluster, in cluster order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (s, &c) in self.cluster_of_state.iter().enumerate() {
            out[c].push(s);
        }
        out
    }
}

/// Ordered feature maps of nondecreasing dimension, realized as nested
/// state aggregations over a common action space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedFeatureFamily {
    pub num_actions: usize,
    /// Coarsest first; `levels[i+1]` refines `levels[i]`.
    pub levels: Vec<AggregationLevel>,
}

impl NestedFeatureFamily {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Feature dimension of a level: clusters times actions.
    pub fn dimension(&self, level: usize) -> usize {
        self.levels[level].num_clusters * self.num_actions
    }

    /// Index of the one-hot feature for `(s, a)` at `level`.
    pub fn feature_index(&self, level: usize, s: usize, a: usize) -> usize {
        self.levels[level].cluster_of_state[s] * self.num_actions + a
    }

    /// Checks dimension ordering and the refinement chain. Returns all
    /// violations as human-readable strings.
    pub fn validate(&self, num_states: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.num_actions == 0 {
            out.push("num_actions must be positive".into());
        }
        if self.levels.is_empty() {
            out.push("family must have at least one level".into());
            return out;
        }
        for (i, level) in self.levels.iter().enumerate() {
            if level.cluster_of_state.len() != num_states {
                out.push(format!("level {i}: cluster map has wrong length"));
                continue;
            }
            if level.num_clusters == 0
                || level.cluster_of_state.iter().any(|&c| c >= level.num_clusters)
            {
                out.push(format!("level {i}: cluster index out of range"));
            }
        }
        for i in 0..self.levels.len().saturating_sub(1) {
            if self.dimension(i) > self.dimension(i + 1) {
                out.push(format!("dimensions decrease from level {i} to {}", i + 1));
            }
            // Refinement: same fine cluster implies same coarse cluster.
            let coarse = &self.levels[i].cluster_of_state;
            let fine = &self.levels[i + 1].cluster_of_state;
            if coarse.len() == fine.len() {
                let mut coarse_of_fine = vec![usize::MAX; self.levels[i + 1].num_clusters];
                for s in 0..fine.len() {
                    let fc = fine[s];
                    if coarse_of_fine[fc] == usize::MAX {
                        coarse_of_fine[fc] = coarse[s];
                    } else if coarse_of_fine[fc] != coarse[s] {
                        out.push(format!(
                            "level {} does not refine level {i}: fine cluster {fc} straddles coarse clusters",
                            i + 1
                        ));
                        break;
                    }
                }
            }
        }
        out
    }
}

/// True iff every pair of same-cluster states at `level` has identical reward
/// rows and identical transition rows (entrywise within tolerance) at every
/// step and action. That is exactly the condition under which the level's
/// one-hot cluster features predict rewards and transition probabilities with
/// zero approximation error.
pub fn check_realizability(mdp: &TabularMdp, family: &NestedFeatureFamily, level: usize) -> bool {
    let members = family.levels[level].members();
    for group in &members {
        if group.len() < 2 {
            continue;
        }
        let first = group[0];
        for &s in &group[1..] {
            for h in 0..mdp.horizon {
                for a in 0..mdp.num_actions {
                    if (mdp.rewards[h][s][a] - mdp.rewards[h][first][a]).abs() > PROB_TOL {
                        return false;
                    }
                    let (ra, rb) = (&mdp.transitions[h][s][a], &mdp.transitions[h][first][a]);
                    if ra.iter().zip(rb).any(|(x, y)| (x - y).abs() > PROB_TOL) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// A ground-truth MDP bundled with a nested family, the coarsest realizable
/// level, and the exact best-in-class value of every level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapControlledFamily {
    pub mdp: TabularMdp,
    pub features: NestedFeatureFamily,
    /// Coarsest realizable level (0-based).
    pub true_level: usize,
    /// `per_level_optimal_values[i]` is the exact best value achievable by
    /// level-`i`-measurable policies; equals `v_star` for `i >= true_level`.
    pub per_level_optimal_values: Vec<f64>,
    pub v_star: f64,
    /// Smallest value gap of a misspecified level to the true level.
    pub achieved_gap: f64,
    /// Set when the generator could not reach the requested gap; the achieved
    /// gap above is best-effort in that case.
    pub gap_warning: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(maps: Vec<(Vec<usize>, usize)>) -> NestedFeatureFamily {
        NestedFeatureFamily {
            num_actions: 2,
            levels: maps
                .into_iter()
                .map(|(cluster_of_state, num_clusters)| AggregationLevel {
                    cluster_of_state,
                    num_clusters,
                })
                .collect(),
        }
    }

    #[test]
    fn refinement_chain_validates() {
        let fam = family(vec![(vec![0, 0, 0, 0], 1), (vec![0, 0, 1, 1], 2), (vec![0, 1, 2, 3], 4)]);
        assert!(fam.validate(4).is_empty());
    }

    #[test]
    fn straddling_cluster_is_rejected() {
        // Fine cluster 0 holds states 0 and 2, which sit in different coarse clusters.
        let fam = family(vec![(vec![0, 0, 1, 1], 2), (vec![0, 1, 0, 1], 2)]);
        let problems = fam.validate(4);
        assert!(problems.iter().any(|p| p.contains("does not refine")));
    }

    #[test]
    fn feature_indices_are_one_hot_layout() {
        let fam = family(vec![(vec![0, 0, 1, 1], 2)]);
        assert_eq!(fam.dimension(0), 4);
        assert_eq!(fam.feature_index(0, 0, 1), 1);
        assert_eq!(fam.feature_index(0, 3, 0), 2);
    }

    #[test]
    fn identity_clustering_is_always_realizable() {
        let mdp = crate::envs::generator::make_two_state_bandit(&[0.3, 0.7], 0.2, 2).unwrap();
        let fam = NestedFeatureFamily {
            num_actions: 2,
            levels: vec![AggregationLevel::identity(2)],
        };
        assert!(check_realizability(&mdp, &fam, 0));
    }

    #[test]
    fn differing_reward_rows_break_realizability() {
        // The two states of the bandit MDP have different reward rows, so
        // merging them is misspecified.
        let mdp = crate::envs::generator::make_two_state_bandit(&[0.3, 0.7], 0.2, 2).unwrap();
        let fam = family(vec![(vec![0, 0], 1)]);
        assert!(!check_realizability(&mdp, &fam, 0));
    }
}
