//! Rate checks on the base learners themselves: the optimistic learner on
//! realizable features behaves like a root-t learner inside a single run,
//! and the doubling wrapper keeps that sublinear.

use ece::envs::generator::generate_gap_family;
use ece::envs::{GapControlledFamily, SimEnv};
use ece::harness::regret::{cumulative_regret, fit_loglog_slope, Benchmark};
use ece::learners::lsvi_ucb::OneHotFeatures;
use ece::learners::{doubling_wrapper, BaseLearner, BaseLearnerSlot, LsviUcb, LsviUcbParams};
use ece::meta::{run_ece, EceConfig};
use ece::nominal::NominalCoefficient;
use ece::rng::{RngStream, RunStreams};

fn realizable_setup(fam: GapControlledFamily) -> (SimEnv, OneHotFeatures, usize) {
    let level = &fam.features.levels[fam.true_level];
    let features = OneHotFeatures {
        cluster_of_state: level.cluster_of_state.clone(),
        num_clusters: level.num_clusters,
        num_actions: fam.mdp.num_actions,
    };
    let horizon = fam.mdp.horizon;
    let env = SimEnv {
        v_star: fam.v_star,
        per_slot_values: vec![fam.v_star],
        mdp: fam.mdp,
    };
    (env, features, horizon)
}

fn single_slot_config(t: usize, horizon: usize) -> EceConfig {
    EceConfig {
        kappa: 1.0 / 3.0,
        delta_prime: 0.05,
        num_episodes: t,
        c_w: 1.0,
        c_min: 1.0,
        c_z: 1.0,
        horizon,
        num_slots: 1,
    }
}

/// Mean cumulative regret at log-spaced checkpoints within single runs.
fn mean_curve_points(
    env: &SimEnv,
    make: impl Fn() -> Box<dyn BaseLearner>,
    t: usize,
    horizon: usize,
    checkpoints: &[usize],
    seeds: u64,
) -> Vec<(f64, f64)> {
    let mut sums = vec![0.0; checkpoints.len()];
    for seed in 0..seeds {
        let mut slots = vec![BaseLearnerSlot::new(make(), NominalCoefficient::zero(1), "solo")];
        let config = single_slot_config(t, horizon);
        let record =
            run_ece(&mut slots, &config, env, RunStreams::from_seed(7_000 + seed)).unwrap();
        let curve = cumulative_regret(&record, Benchmark::VStar).unwrap();
        for (k, &cp) in checkpoints.iter().enumerate() {
            sums[k] += curve[cp - 1];
        }
    }
    checkpoints
        .iter()
        .zip(&sums)
        .map(|(&cp, &s)| (cp as f64, s / seeds as f64))
        .collect()
}

#[test]
fn realizable_lsvi_regret_has_root_t_slope() {
    // The sweep environment, with a slightly more exploratory bonus scale so
    // the learner is still discriminating at the top of the range.
    let fam = generate_gap_family(4, 4, 3, 3, 0.3, RngStream::new(7, 0)).unwrap();
    let (env, features, horizon) = realizable_setup(fam);
    let t = 20_000;
    let params = LsviUcbParams { lambda: 1.0, c_beta: 0.06, delta: 0.05, horizon_t: t };
    let points = mean_curve_points(
        &env,
        || Box::new(LsviUcb::new(features.clone(), env.mdp.num_states, horizon, params)),
        t,
        horizon,
        &[500, 2000, 8000, 20_000],
        5,
    );
    let fit = fit_loglog_slope(&points).unwrap();
    assert!(
        (0.40..=0.62).contains(&fit.slope),
        "slope {:.3} outside [0.40, 0.62]; points {points:?}",
        fit.slope
    );
}

#[test]
fn doubling_wrapped_lsvi_stays_sublinear() {
    // A fast-locking family (no distractor spectrum), so the wrapper's
    // restart overhead is what the fit sees.
    let fam = generate_gap_family(2, 2, 2, 2, 0.3, RngStream::new(3, 0)).unwrap();
    let (env, features, horizon) = realizable_setup(fam);
    let t = 5000;
    let states = env.mdp.num_states;
    let params = LsviUcbParams { lambda: 1.0, c_beta: 0.06, delta: 0.05, horizon_t: t };
    let points = mean_curve_points(
        &env,
        || {
            let features = features.clone();
            Box::new(doubling_wrapper(Box::new(move || {
                Box::new(LsviUcb::new(features.clone(), states, horizon, params))
            })))
        },
        t,
        horizon,
        &[200, 1000, 5000],
        5,
    );
    let fit = fit_loglog_slope(&points).unwrap();
    assert!(
        fit.slope <= 0.6,
        "wrapped slope {:.3} exceeds 0.6; points {points:?}",
        fit.slope
    );
}
