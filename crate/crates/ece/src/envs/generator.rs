//! Environment generators.
//!
//! [`generate_gap_family`] builds the nested realizable/misspecified families
//! used in the model-selection experiments: a latent clustering gives the
//! ground-truth dynamics, duplicate states make finer refinements available,
//! and coarser levels merge latent clusters whose optimal actions disagree so
//! that the best coarse-measurable policy provably loses value. The size of
//! that loss is steered toward a target by calibrating a reward bonus.
//!
//! [`make_two_state_bandit`] is the workhorse for scripted scenarios: two
//! hidden states with symmetric occupancy so that the value of every
//! constant-action policy is exact and the per-episode return noise is a
//! bounded, zero-mean function of the state sequence.

use rand::Rng;

use crate::envs::dp::{best_in_class_value, value_iteration};
use crate::envs::family::{
    check_realizability, AggregationLevel, GapControlledFamily, NestedFeatureFamily,
};
use crate::error::{EceError, Result};
use crate::rng::RngStream;
use crate::types::TabularMdp;

/// Actions in generated gap families. Two is enough to make merged clusters
/// disagree on the optimal action.
const GEN_ACTIONS: usize = 2;
/// Mixing weight of the random part of each transition row; the rest is
/// uniform, which keeps cluster occupancy close to uniform and the achieved
/// gap close to linear in the reward bonus.
const TRANSITION_JITTER: f64 = 0.35;
const MAX_BASE_REWARD: f64 = 0.35;
const MAX_BONUS: f64 = 0.6;
const CALIBRATION_ROUNDS: usize = 8;

/// Latent description drawn once; the calibration loop rescales only `bonus`.
struct LatentDraw {
    /// `base[h][c]` background reward, action-independent.
    base: Vec<Vec<f64>>,
    /// `weight[h][c]` per-cell multiplier on the preferred-action bonus, so
    /// action gaps span a range of scales instead of one.
    weight: Vec<Vec<f64>>,
    /// `jitter[h][c][a]` random transition row over clusters.
    jitter: Vec<Vec<Vec<Vec<f64>>>>,
}

/// Decay of the bonus ladder on clusters beyond the first merged pair.
const LADDER_RATIO: f64 = 0.4;

fn draw_latent(m: usize, horizon: usize, rng: &mut rand_chacha::ChaCha8Rng) -> LatentDraw {
    let mut base = vec![vec![0.0; m]; horizon];
    let mut weight = vec![vec![0.0; m]; horizon];
    let mut jitter = vec![vec![vec![vec![0.0; m]; GEN_ACTIONS]; m]; horizon];
    for h in 0..horizon {
        for c in 0..m {
            base[h][c] = rng.gen::<f64>() * MAX_BASE_REWARD;
            // Clusters 0 and 1 carry the full bonus: coarser levels merge
            // them first, so these cells produce the misspecification gap.
            // The remaining cells get a geometric ladder of ever-smaller
            // action gaps, which keeps even a well-specified learner paying
            // exploration cost across all sample scales.
            weight[h][c] = if c < 2 {
                1.0
            } else {
                LADDER_RATIO.powi(((c - 2) * horizon + h + 1) as i32)
            };
            for a in 0..GEN_ACTIONS {
                let row: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let sum: f64 = row.iter().sum();
                jitter[h][c][a] = row.into_iter().map(|p| p / sum).collect();
            }
        }
    }
    LatentDraw { base, weight, jitter }
}

/// Expands the latent cluster MDP to `m * k` states, each state duplicating
/// its cluster's rows exactly (so the latent level is realizable by
/// construction). Rows are renormalized before emitting.
fn expand_mdp(draw: &LatentDraw, m: usize, k: usize, horizon: usize, bonus: f64) -> TabularMdp {
    let s_n = m * k;
    let mut rewards = vec![vec![vec![0.0; GEN_ACTIONS]; s_n]; horizon];
    let mut transitions = vec![vec![vec![vec![0.0; s_n]; GEN_ACTIONS]; s_n]; horizon];
    for h in 0..horizon {
        for s in 0..s_n {
            let c = s / k;
            let preferred = c % GEN_ACTIONS;
            for a in 0..GEN_ACTIONS {
                let r = draw.base[h][c]
                    + if a == preferred { bonus * draw.weight[h][c] } else { 0.0 };
                rewards[h][s][a] = r.clamp(0.0, 1.0);
                let row = &mut transitions[h][s][a];
                for c_next in 0..m {
                    let p = (1.0 - TRANSITION_JITTER) / m as f64
                        + TRANSITION_JITTER * draw.jitter[h][c][a][c_next];
                    for j in 0..k {
                        row[c_next * k + j] = p / k as f64;
                    }
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
    }
    TabularMdp {
        num_states: s_n,
        num_actions: GEN_ACTIONS,
        horizon,
        rewards,
        transitions,
        initial_dist: vec![1.0 / s_n as f64; s_n],
    }
}

/// Latent partition after `steps` chain-merges of the leading blocks. Each
/// extra step coarsens the previous partition, so levels built from
/// decreasing step counts are nested.
fn merged_level(m: usize, k: usize, steps: usize) -> AggregationLevel {
    // After `steps` merges the blocks are {0..=steps} and singletons beyond.
    let steps = steps.min(m - 1);
    let cluster_of_latent: Vec<usize> = (0..m).map(|c| c.saturating_sub(steps)).collect();
    let num_clusters = m - steps;
    let cluster_of_state = (0..m * k).map(|s| cluster_of_latent[s / k]).collect();
    AggregationLevel { cluster_of_state, num_clusters }
}

fn build_levels(m: usize, k: usize, levels: usize, true_level: usize) -> NestedFeatureFamily {
    let mut out = Vec::with_capacity(levels);
    for i in 0..levels {
        if i < true_level {
            out.push(merged_level(m, k, true_level - i));
        } else if i == true_level {
            out.push(merged_level(m, k, 0));
        } else {
            // Finer than the latent clustering: identity over states.
            out.push(AggregationLevel::identity(m * k));
        }
    }
    NestedFeatureFamily { num_actions: GEN_ACTIONS, levels: out }
}

/// Builds a gap-controlled nested family.
///
/// The coarsest realizable level sits at `levels - 2` when duplication allows
/// a strictly finer refinement (`k >= 2` and `levels >= 3`), else at the top.
/// The reward bonus is calibrated so that the smallest gap of a misspecified
/// level to the true level lands near `gap_target`; the achieved gap is
/// recorded, with `gap_warning` set when the target was out of reach.
pub fn generate_gap_family(
    num_clusters: usize,
    duplication: usize,
    levels: usize,
    horizon: usize,
    gap_target: f64,
    stream: RngStream,
) -> Result<GapControlledFamily> {
    if levels < 2 {
        return Err(EceError::config("need at least 2 levels"));
    }
    if num_clusters < 2 {
        return Err(EceError::config("need at least 2 latent clusters"));
    }
    if duplication == 0 {
        return Err(EceError::config("duplication must be positive"));
    }
    if !(gap_target > 0.0 && gap_target < horizon as f64 / 2.0) {
        return Err(EceError::config("gap target must lie in (0, H/2)"));
    }

    let true_level =
        if duplication >= 2 && levels >= 3 { levels - 2 } else { levels - 1 };
    let family = build_levels(num_clusters, duplication, levels, true_level);
    let mut rng = stream.rng();
    let draw = draw_latent(num_clusters, horizon, &mut rng);

    let mut bonus =
        (gap_target * num_clusters as f64 / horizon as f64).clamp(0.02, MAX_BONUS);
    let mut best: Option<(f64, f64)> = None; // (bonus, achieved)
    for _ in 0..CALIBRATION_ROUNDS {
        let mdp = expand_mdp(&draw, num_clusters, duplication, horizon, bonus);
        let v_star = value_iteration(&mdp).v_star;
        let mut achieved = f64::INFINITY;
        for i in 0..true_level {
            achieved = achieved.min(v_star - best_in_class_value(&mdp, &family, i)?);
        }
        match best {
            Some((_, a)) if (a - gap_target).abs() <= (achieved - gap_target).abs() => {}
            _ => best = Some((bonus, achieved)),
        }
        if (achieved - gap_target).abs() <= 0.02 * gap_target {
            break;
        }
        if achieved <= 1e-12 {
            bonus = (bonus * 2.0).min(MAX_BONUS);
        } else {
            bonus = (bonus * gap_target / achieved).clamp(0.02, MAX_BONUS);
        }
    }

    let (bonus, _) = best.expect("at least one calibration round");
    let mdp = expand_mdp(&draw, num_clusters, duplication, horizon, bonus);
    let v_star = value_iteration(&mdp).v_star;
    let mut per_level = Vec::with_capacity(levels);
    let mut achieved = f64::INFINITY;
    for i in 0..levels {
        let v = best_in_class_value(&mdp, &family, i)?;
        if i < true_level {
            achieved = achieved.min(v_star - v);
        }
        per_level.push(v);
    }
    debug_assert!(check_realizability(&mdp, &family, true_level));
    Ok(GapControlledFamily {
        mdp,
        features: family,
        true_level,
        per_level_optimal_values: per_level,
        v_star,
        achieved_gap: achieved,
        gap_warning: achieved + 1e-9 < 0.95 * gap_target,
    })
}

/// A two-state MDP whose constant-action policies have exactly the values
/// `horizon * means[a]`.
///
/// Both states are reached with probability 1/2 at every step regardless of
/// the action; the reward of action `a` is `means[a] - noise` in state 0 and
/// `means[a] + noise` in state 1. Return noise is therefore zero-mean and
/// bounded by `horizon * noise`, and vanishes when `noise == 0`.
pub fn make_two_state_bandit(means: &[f64], noise: f64, horizon: usize) -> Result<TabularMdp> {
    if means.is_empty() || horizon == 0 {
        return Err(EceError::config("need at least one action and a positive horizon"));
    }
    if noise < 0.0 {
        return Err(EceError::config("noise must be nonnegative"));
    }
    for &m in means {
        if m - noise < -1e-12 || m + noise > 1.0 + 1e-12 {
            return Err(EceError::config(format!(
                "mean {m} with noise {noise} leaves the [0,1] reward range"
            )));
        }
    }
    let a_n = means.len();
    let mut rewards = vec![vec![vec![0.0; a_n]; 2]; horizon];
    for h in 0..horizon {
        for (a, &m) in means.iter().enumerate() {
            rewards[h][0][a] = (m - noise).clamp(0.0, 1.0);
            rewards[h][1][a] = (m + noise).clamp(0.0, 1.0);
        }
    }
    let row = vec![0.5, 0.5];
    Ok(TabularMdp {
        num_states: 2,
        num_actions: a_n,
        horizon,
        rewards,
        transitions: vec![vec![vec![row.clone(); a_n]; 2]; horizon],
        initial_dist: row,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::dp::policy_value;
    use crate::types::{validate_mdp, DeterministicPolicy};

    #[test]
    fn minimal_family_shape() {
        // m=2, k=1, 2 levels: top level realizable, bottom level merges
        // everything into one cluster and is misspecified.
        let fam = generate_gap_family(2, 1, 2, 3, 0.4, RngStream::new(3, 0)).unwrap();
        assert_eq!(fam.true_level, 1);
        assert_eq!(fam.features.levels[0].num_clusters, 1);
        assert!(check_realizability(&fam.mdp, &fam.features, 1));
        assert!(!check_realizability(&fam.mdp, &fam.features, 0));
    }

    #[test]
    fn generated_family_hits_gap_and_realizability() {
        let target = 0.3;
        let fam = generate_gap_family(4, 2, 3, 4, target, RngStream::new(5, 0)).unwrap();
        assert_eq!(fam.true_level, 1);
        assert!(check_realizability(&fam.mdp, &fam.features, fam.true_level));
        assert!(validate_mdp(&fam.mdp).is_empty());
        for i in 0..fam.true_level {
            let gap = fam.v_star - fam.per_level_optimal_values[i];
            assert!(gap >= target * 0.5, "level {i} gap {gap} below half target");
        }
        assert!(!fam.gap_warning, "achieved {}", fam.achieved_gap);
        assert!((fam.achieved_gap - target).abs() < 0.25 * target);
    }

    #[test]
    fn per_level_values_are_nondecreasing() {
        let fam = generate_gap_family(4, 2, 4, 3, 0.25, RngStream::new(8, 1)).unwrap();
        for w in fam.per_level_optimal_values.windows(2) {
            assert!(w[0] <= w[1] + 1e-9);
        }
        for i in fam.true_level..fam.features.num_levels() {
            assert!((fam.per_level_optimal_values[i] - fam.v_star).abs() < 1e-9);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_gap_family(3, 2, 3, 3, 0.2, RngStream::new(11, 4)).unwrap();
        let b = generate_gap_family(3, 2, 3, 3, 0.2, RngStream::new(11, 4)).unwrap();
        assert_eq!(a.mdp, b.mdp);
        assert_eq!(a.per_level_optimal_values, b.per_level_optimal_values);
    }

    #[test]
    fn bandit_constant_policies_have_exact_values() {
        let means = [0.7, 0.5, 0.3];
        let mdp = make_two_state_bandit(&means, 0.25, 3).unwrap();
        assert!(validate_mdp(&mdp).is_empty());
        for (a, &m) in means.iter().enumerate() {
            let policy = DeterministicPolicy::new(vec![vec![a; 2]; 3]);
            let v = policy_value(&mdp, &policy).unwrap();
            assert!((v - 3.0 * m).abs() < 1e-12);
        }
        assert!((value_iteration(&mdp).v_star - 2.1).abs() < 1e-12);
    }

    #[test]
    fn bandit_rejects_out_of_range_noise() {
        assert!(make_two_state_bandit(&[0.9], 0.2, 2).is_err());
    }
}
