use super::*;
use crate::learners::scripted::constant_action_policy;
use crate::learners::{ScriptedLearner, UniformRandomLearner};
use crate::meta::tests::{scripted_setup, test_config};
use crate::rng::RngStream;

fn uniform_explorers(count: usize, num_states: usize, num_actions: usize, horizon: usize) -> Vec<Box<dyn BaseLearner>> {
    (0..count)
        .map(|i| {
            Box::new(UniformRandomLearner {
                num_states,
                num_actions,
                horizon,
                seed: 1000 + i as u64,
            }) as Box<dyn BaseLearner>
        })
        .collect()
}

/// Exploration learners that keep playing each slot's own arm, so empirical
/// exploration means estimate the slot values.
fn mirror_explorers(count: usize, horizon: usize) -> Vec<Box<dyn BaseLearner>> {
    (0..count)
        .map(|a| {
            Box::new(ScriptedLearner::constant(constant_action_policy(horizon, 2, a)))
                as Box<dyn BaseLearner>
        })
        .collect()
}

#[test]
fn threshold_z_values_and_scaling() {
    assert_eq!(threshold_z(4, 2.0), 1.0);
    assert_eq!(threshold_z(1, 0.0), 0.0);
    assert!((threshold_z(64, 3.0) - threshold_z(16, 3.0) / 2.0).abs() < 1e-15);
}

#[test]
fn threshold_w_vstar_direct_values() {
    let config = test_config(1, 10);
    let delta = (-1.0f64).exp();
    let got = threshold_w_vstar(4, &NominalCoefficient::constant(1, 1.0), &config, delta);
    assert!((got - 4.0).abs() < 1e-12);
    let got = threshold_w_vstar(9, &NominalCoefficient::zero(1), &config, delta);
    assert!((got - 3.0).abs() < 1e-12);
    let mut prev = 0.0;
    for n in 1..50 {
        let w = threshold_w_vstar(n, &NominalCoefficient::constant(1, 0.3), &config, 0.01);
        assert!(w > prev);
        prev = w;
    }
}

#[test]
fn threshold_zv_direct_values() {
    let config = test_config(1, 10);
    let delta = (-1.0f64).exp();
    let rates = VhatRates { alpha: 0.5, beta: 0.5, v: 0.0, v_prime: 0.0 };
    let got = threshold_zv(4, &rates, &NominalCoefficient::constant(1, 1.0), &config, delta);
    assert!((got - 4.0).abs() < 1e-12, "{got}");

    // Symmetric rates make the first two terms equal.
    let rates = VhatRates { alpha: 0.3, beta: 0.3, v: 1.7, v_prime: 1.7 };
    let l = config.num_slots as f64;
    let term = 1.7 * l.powf(0.3) * 16f64.powf(1.0 - (1.0 - config.kappa) * 0.3);
    let base = threshold_zv(
        16,
        &VhatRates { v: 0.0, v_prime: 0.0, ..rates },
        &NominalCoefficient::zero(1),
        &config,
        delta,
    );
    let full = threshold_zv(16, &rates, &NominalCoefficient::zero(1), &config, delta);
    assert!((full - base - 2.0 * term).abs() < 1e-9);

    // kappa = 1/2, alpha = 1/2: exponent 3/4, so n = 16 contributes a factor 8.
    let mut config = test_config(1, 10);
    config.kappa = 0.5;
    let rates = VhatRates { alpha: 0.5, beta: 0.5, v: 1.0, v_prime: 0.0 };
    let got = threshold_zv(16, &rates, &NominalCoefficient::zero(1), &config, delta);
    let first = 1.0 * 1.0 * 8.0; // v * L^alpha * 16^(3/4)
    assert!((got - (first + 4.0)).abs() < 1e-9, "{got}");
}

#[test]
fn oracle_noise_respects_consistency_bound() {
    // 1e5 seeded estimates never violate |est - gap| <= |gap|/C + V/sqrt(n).
    let values = vec![0.2, 0.7];
    let v = NominalCoefficient::constant(1, 0.4);
    let mut est = OracleGapEstimator::new(
        values,
        2.0,
        vec![v; 2],
        NoiseMode::Uniform,
        RngStream::new(77, 0).rng(),
    )
    .unwrap();
    est.init(1, 0.05);
    let trace = crate::types::EpisodeTrace {
        states: vec![0, 0],
        actions: vec![0],
        rewards: vec![0.0],
        episode_index: 0,
    };
    for k in 0..100_000 {
        if k % 1000 == 0 {
            est.observe_exploration(1, &trace, 0.0);
        }
        let n = est.exploration_count(1) as f64;
        let got = est.estimate(0, 1).unwrap();
        let bound = 0.5 / 2.0 + 0.4 / n.sqrt();
        assert!((got - 0.5).abs() <= bound + 1e-12, "call {k}: {got}");
    }
}

#[test]
fn oracle_worst_case_positive_is_exact() {
    let mut est = OracleGapEstimator::new(
        vec![0.0, 0.4],
        4.0,
        vec![NominalCoefficient::constant(1, 0.9); 2],
        NoiseMode::WorstCasePositive,
        RngStream::new(1, 0).rng(),
    )
    .unwrap();
    est.init(1, (-1.0f64).exp());
    let trace = crate::types::EpisodeTrace {
        states: vec![0, 0],
        actions: vec![0],
        rewards: vec![0.0],
        episode_index: 0,
    };
    for _ in 0..4 {
        est.observe_exploration(1, &trace, 0.0);
    }
    // estimate = gap (1 + 1/C) + V / sqrt(n) with gap 0.4, C 4, V 0.9, n 4.
    let got = est.estimate(0, 1).unwrap();
    assert!((got - (0.4 * 1.25 + 0.45)).abs() < 1e-12);
}

#[test]
fn oracle_vanishing_noise_tracks_truth() {
    let mut est = OracleGapEstimator::new(
        vec![0.1, 0.6],
        1e6,
        vec![NominalCoefficient::zero(1); 2],
        NoiseMode::Uniform,
        RngStream::new(2, 0).rng(),
    )
    .unwrap();
    est.init(1, 0.05);
    let trace = crate::types::EpisodeTrace {
        states: vec![0, 0],
        actions: vec![0],
        rewards: vec![0.0],
        episode_index: 0,
    };
    est.observe_exploration(1, &trace, 0.0);
    let got = est.estimate(0, 1).unwrap();
    assert!((got - 0.5).abs() <= 0.5 * 1e-6 + 1e-12);
}

#[test]
fn gap_variant_zero_gaps_sit_on_the_boundary() {
    // All slots equal: worst-case-positive noise puts the estimate exactly at
    // the threshold, and the strict inequality never fires.
    let (env, mut slots) = scripted_setup(&[0.0, 0.0, 0.0], 0.1, 1);
    let mut config = test_config(3, 400);
    config.c_min = 1e-6;
    let mut explorers = uniform_explorers(3, 2, 3, 1);
    let mut est = OracleGapEstimator::new(
        env.per_slot_values.clone(),
        2.0,
        vec![NominalCoefficient::constant(1, 0.5); 3],
        NoiseMode::WorstCasePositive,
        RngStream::new(3, 9).rng(),
    )
    .unwrap();
    let record = run_ece_gap(
        &mut slots,
        &mut explorers,
        &mut est,
        &config,
        &env,
        crate::rng::RunStreams::from_seed(17),
    )
    .unwrap();
    assert!(record.header.eliminations.is_empty());
    assert!(record.audit().is_empty());
}

#[test]
fn gap_variant_worst_negative_never_eliminates_best_slot() {
    // Slot 0 is the best (all gaps to it are <= 0): pessimistic noise keeps
    // every estimate strictly below the threshold.
    let (env, mut slots) = scripted_setup(&[0.0, 0.2, 0.3], 0.1, 1);
    let mut config = test_config(3, 600);
    config.c_min = 1e-6;
    for seed in 0..5 {
        let mut explorers = uniform_explorers(3, 2, 3, 1);
        let mut est = OracleGapEstimator::new(
            env.per_slot_values.clone(),
            2.0,
            vec![NominalCoefficient::constant(1, 0.2); 3],
            NoiseMode::WorstCaseNegative,
            RngStream::new(seed, 5).rng(),
        )
        .unwrap();
        let record = run_ece_gap(
            &mut slots,
            &mut explorers,
            &mut est,
            &config,
            &env,
            crate::rng::RunStreams::from_seed(seed),
        )
        .unwrap();
        assert!(record.header.eliminations.is_empty(), "seed {seed}");
    }
}

#[test]
fn gap_variant_elimination_matches_hand_solved_count() {
    // Gap 0.5, C = 2, V = 0.2, worst-case-negative: the pessimistic estimate
    // crosses Z once 0.5/2 > 2 * 0.2 / sqrt(n), i.e. n > 2.56, so the third
    // exploration episode of the better slot triggers the rejection.
    let (env, mut slots) = scripted_setup(&[0.5, 0.0], 0.05, 1);
    let mut config = test_config(2, 400);
    config.c_min = 1e-6;
    let mut explorers = uniform_explorers(2, 2, 2, 1);
    let mut est = OracleGapEstimator::new(
        env.per_slot_values.clone(),
        2.0,
        vec![NominalCoefficient::constant(1, 0.2); 2],
        NoiseMode::WorstCaseNegative,
        RngStream::new(8, 3).rng(),
    )
    .unwrap();
    let record = run_ece_gap(
        &mut slots,
        &mut explorers,
        &mut est,
        &config,
        &env,
        crate::rng::RunStreams::from_seed(31),
    )
    .unwrap();
    assert_eq!(record.header.eliminations.len(), 1);
    let tau = record.header.eliminations[0].t;
    let explored_before: usize =
        record.rows.iter().take(tau).filter(|r| r.chosen_index == 1 && r.explored).count();
    assert_eq!(explored_before, 3, "eliminated at exploration count {explored_before}");
}

#[test]
fn gap_variant_requires_one_explorer_per_slot() {
    let (env, mut slots) = scripted_setup(&[0.4, 0.0], 0.1, 1);
    let config = test_config(2, 100);
    let mut explorers = uniform_explorers(1, 2, 2, 1);
    let mut est = OracleGapEstimator::new(
        env.per_slot_values.clone(),
        2.0,
        vec![NominalCoefficient::constant(1, 0.3); 2],
        NoiseMode::Uniform,
        RngStream::new(1, 1).rng(),
    )
    .unwrap();
    let err = run_ece_gap(
        &mut slots,
        &mut explorers,
        &mut est,
        &config,
        &env,
        crate::rng::RunStreams::from_seed(1),
    )
    .unwrap_err();
    assert!(err.to_string().contains("exploration learner"), "{err}");
}

#[test]
fn gap_variant_is_deterministic() {
    let build = || {
        let (env, slots) = scripted_setup(&[0.4, 0.0], 0.15, 1);
        (env, slots)
    };
    let mut records = Vec::new();
    for _ in 0..2 {
        let (env, mut slots) = build();
        let mut config = test_config(2, 300);
        config.c_min = 1e-6;
        let mut explorers = uniform_explorers(2, 2, 2, 1);
        let mut est = OracleGapEstimator::new(
            env.per_slot_values.clone(),
            2.0,
            vec![NominalCoefficient::constant(1, 0.3); 2],
            NoiseMode::Uniform,
            RngStream::new(12, 1).rng(),
        )
        .unwrap();
        records.push(
            run_ece_gap(
                &mut slots,
                &mut explorers,
                &mut est,
                &config,
                &env,
                crate::rng::RunStreams::from_seed(9),
            )
            .unwrap(),
        );
    }
    assert_eq!(records[0].rows, records[1].rows);
    assert_eq!(records[0].header.eliminations, records[1].header.eliminations);
}

#[test]
fn empirical_estimator_tracks_slot_means() {
    let (env, mut slots) = scripted_setup(&[0.6, 0.0], 0.1, 1);
    let mut config = test_config(2, 800);
    config.c_min = 1e-6;
    // Threshold left conservative: with V = 2 the heuristic should still
    // reject the gapped candidate once means settle.
    let mut explorers = mirror_explorers(2, 1);
    let mut est = EmpiricalGapEstimator::new(vec![NominalCoefficient::constant(1, 2.0); 2]);
    let record = run_ece_gap(
        &mut slots,
        &mut explorers,
        &mut est,
        &config,
        &env,
        crate::rng::RunStreams::from_seed(14),
    )
    .unwrap();
    assert_eq!(record.header.eliminations.len(), 1);
    assert_eq!(record.rows.last().unwrap().candidate, 1);
}

#[test]
fn vstar_known_optimal_candidate_survives() {
    let (env, mut slots) = scripted_setup(&[0.0, 0.1], 0.0, 1);
    let config = test_config(2, 300);
    let record =
        run_ece_vstar_known(&mut slots, env.v_star, &config, &env, crate::rng::RunStreams::from_seed(3))
            .unwrap();
    assert!(record.header.eliminations.is_empty());
    assert!(record.rows.iter().all(|r| r.chosen_index == 0));
    assert!(record.audit().is_empty());
}

#[test]
fn vstar_known_elimination_at_hand_solved_crossing() {
    // Noise-free shortfall Delta per episode, R = 0, c_w = 1: the test fires
    // at the first n with n * Delta > sqrt(n * ln(1/delta)).
    for delta_gap in [0.2f64, 0.4] {
        let (env, mut slots) = scripted_setup(&[delta_gap, 0.0], 0.0, 1);
        let config = test_config(2, 2000);
        let delta = crate::meta::effective_delta(config.delta_prime, 2, 2000).unwrap();
        let crossing = (1..).find(|&n| {
            n as f64 * delta_gap > (n as f64 * (1.0 / delta).ln()).sqrt()
        });
        let record = run_ece_vstar_known(
            &mut slots,
            env.v_star,
            &config,
            &env,
            crate::rng::RunStreams::from_seed(6),
        )
        .unwrap();
        assert_eq!(record.header.eliminations.len(), 1);
        assert_eq!(Some(record.header.eliminations[0].t), crossing, "gap {delta_gap}");
    }
}

#[test]
fn vstar_known_walks_to_the_last_slot() {
    // Slots 0 and 1 fall short of the best slot's value: two eliminations,
    // and the final candidate is the last slot (never tested once terminal).
    let (env, mut slots) = scripted_setup(&[0.2, 0.1, 0.0], 0.0, 1);
    let config = test_config(3, 6000);
    let record =
        run_ece_vstar_known(&mut slots, env.v_star, &config, &env, crate::rng::RunStreams::from_seed(4))
            .unwrap();
    assert_eq!(record.header.eliminations.len(), 2);
    assert_eq!(record.rows.last().unwrap().candidate, 2);
    assert!(record.audit().is_empty());
}

#[test]
fn vhat_perfect_estimator_keeps_optimal_candidate() {
    let (env, mut slots) = scripted_setup(&[0.0, 0.1], 0.1, 1);
    let mut config = test_config(2, 500);
    config.c_min = 1e-6;
    let mut explorers = uniform_explorers(2, 2, 2, 1);
    let mut est = OracleVStarEstimator::perfect(env.v_star, 2, RngStream::new(4, 4).rng());
    let record = run_ece_vhat(
        &mut slots,
        &mut explorers,
        &mut est,
        &config,
        &env,
        crate::rng::RunStreams::from_seed(2),
    )
    .unwrap();
    assert!(record.header.eliminations.is_empty());
    assert!(record.audit().is_empty());
}

#[test]
fn vhat_elimination_matches_hand_solved_crossing() {
    // Perfect estimate of the optimal value, noise-free candidate shortfall
    // Delta, R = 0: rejection at the first candidate count n with
    // n * Delta > c_z * H * sqrt(n * ln(1/delta)).
    let delta_gap = 0.4;
    let (env, mut slots) = scripted_setup(&[delta_gap, 0.0], 0.0, 1);
    let mut config = test_config(2, 4000);
    config.c_min = 1e-6;
    let delta = crate::meta::effective_delta(config.delta_prime, 2, 4000).unwrap();
    let crossing = (1u64..)
        .find(|&n| n as f64 * delta_gap > (n as f64 * (1.0 / delta).ln()).sqrt())
        .unwrap();
    let mut explorers = uniform_explorers(2, 2, 2, 1);
    let mut est = OracleVStarEstimator::perfect(env.v_star, 2, RngStream::new(5, 5).rng());
    let record = run_ece_vhat(
        &mut slots,
        &mut explorers,
        &mut est,
        &config,
        &env,
        crate::rng::RunStreams::from_seed(10),
    )
    .unwrap();
    assert_eq!(record.header.eliminations.len(), 1);
    let tau = record.header.eliminations[0].t;
    let candidate_count =
        record.rows.iter().take(tau).filter(|r| r.chosen_index == 0).count() as u64;
    assert_eq!(candidate_count, crossing);
    assert_eq!(record.rows.last().unwrap().candidate, 1);
}
