//! JSON configuration layer: run documents, scenario construction, and the
//! single-run executor shared by the CLI and the sweep harness.
//!
//! Config documents are strict: unknown fields are errors, so typos in
//! threshold constants fail loudly instead of silently running defaults.

use serde::{Deserialize, Serialize};

use crate::envs::{generate_gap_family, make_two_state_bandit, value_iteration, SimEnv};
use crate::error::{EceError, Result};
use crate::harness::record::RunRecord;
use crate::learners::lsvi_ucb::OneHotFeatures;
use crate::learners::scripted::constant_action_policy;
use crate::learners::{
    BaseLearner, BaseLearnerSlot, LsviUcb, LsviUcbParams, ScriptedLearner, UniformRandomLearner,
};
use crate::meta::{run_ece, EceConfig};
use crate::nominal::NominalCoefficient;
use crate::rng::{splitmix64, RngStream, RunStreams};
use crate::variants::{
    run_ece_gap, run_ece_vhat, run_ece_vstar_known, EmpiricalGapEstimator, GapEstimator,
    NoiseMode, OracleGapEstimator, OracleVStarEstimator, VStarEstimator,
};

pub const CONFIG_VERSION: u32 = 1;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Ece,
    EceGap,
    EceVstarKnown,
    EceVhat,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Ece => "ece",
            Variant::EceGap => "ece-gap",
            Variant::EceVstarKnown => "ece-vstar-known",
            Variant::EceVhat => "ece-vhat",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "ece" => Ok(Variant::Ece),
            "ece-gap" => Ok(Variant::EceGap),
            "ece-vstar-known" => Ok(Variant::EceVstarKnown),
            "ece-vhat" => Ok(Variant::EceVhat),
            other => Err(EceError::config(format!(
                "unknown variant '{other}' (expected ece | ece-gap | ece-vstar-known | ece-vhat)"
            ))),
        }
    }
}

/// Meta-algorithm knobs as they appear in config documents. `num_episodes`
/// may be overridden per sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaParams {
    pub kappa: f64,
    pub delta_prime: f64,
    pub num_episodes: usize,
    #[serde(default = "one")]
    pub c_w: f64,
    #[serde(default = "one")]
    pub c_min: f64,
    #[serde(default = "one")]
    pub c_z: f64,
}

/// Estimator wiring for the gap / estimated-value variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub kind: EstimatorKind,
    /// Consistency constant C > 1 of the oracle gap estimator.
    #[serde(default = "default_consistency")]
    pub consistency_c: f64,
    #[serde(default = "default_noise_mode")]
    pub noise_mode: NoiseMode,
    /// Constant V used for every slot's estimation-rate evaluator.
    #[serde(default = "one")]
    pub v_scale: f64,
    /// Secondary rate coefficient of the estimated-value oracle.
    #[serde(default)]
    pub v_prime_scale: f64,
    #[serde(default = "default_rate")]
    pub alpha: f64,
    #[serde(default = "default_rate")]
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    #[default]
    Oracle,
    /// Running-mean difference; no consistency guarantee.
    Heuristic,
}

fn default_consistency() -> f64 {
    2.0
}

fn default_noise_mode() -> NoiseMode {
    NoiseMode::Uniform
}

fn default_rate() -> f64 {
    0.5
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            kind: EstimatorKind::Oracle,
            consistency_c: default_consistency(),
            noise_mode: default_noise_mode(),
            v_scale: 1.0,
            v_prime_scale: 0.0,
            alpha: default_rate(),
            beta: default_rate(),
        }
    }
}

/// Experiment scenarios: how to build the environment and the slot list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    /// Constant-action scripted slots on a two-state bandit MDP.
    /// `shortfalls[i]` is slot i's value deficit; the first zero entry plays
    /// the role of the compatible slot.
    ScriptedGap {
        shortfalls: Vec<f64>,
        noise: f64,
        horizon: usize,
        #[serde(default)]
        estimator: Option<EstimatorConfig>,
    },
    /// Scripted constant-shortfall slot 0 against a tabular optimistic
    /// learner (slot 1) on the same bandit MDP.
    ScriptedVsLearner {
        gap: f64,
        noise: f64,
        horizon: usize,
        c_beta: f64,
        /// Constant nominal coefficient advertised for the learner slot.
        r_scale: f64,
        /// Value deficits of distractor arms available only to the learner;
        /// small deficits keep it paying exploration cost at every scale.
        #[serde(default)]
        extra_arm_gaps: Vec<f64>,
    },
    /// One LSVI-UCB instance per level of a generated gap-controlled family.
    LsviNested {
        num_clusters: usize,
        duplication: usize,
        levels: usize,
        horizon: usize,
        gap_target: f64,
        c_beta: f64,
        c_r: f64,
        env_seed: u64,
    },
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        match self {
            Scenario::ScriptedGap { horizon, .. } => *horizon,
            Scenario::ScriptedVsLearner { horizon, .. } => *horizon,
            Scenario::LsviNested { horizon, .. } => *horizon,
        }
    }

    pub fn num_slots(&self) -> usize {
        match self {
            Scenario::ScriptedGap { shortfalls, .. } => shortfalls.len(),
            Scenario::ScriptedVsLearner { .. } => 2,
            Scenario::LsviNested { levels, .. } => *levels,
        }
    }
}

/// A full run document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub variant: Variant,
    pub scenario: Scenario,
    pub meta: MetaParams,
    #[serde(default)]
    pub seed: u64,
}

/// A sweep document: the embedded run is executed at every `(T, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub run: RunConfig,
    pub t_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Also run the designated compatible slot and the worst misspecified
    /// slot alone, as baseline curves.
    #[serde(default)]
    pub baselines: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(EceError::config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.ece_config(self.meta.num_episodes).validate()
    }

    /// The meta-algorithm config this document resolves to at horizon `t`.
    pub fn ece_config(&self, num_episodes: usize) -> EceConfig {
        EceConfig {
            kappa: self.meta.kappa,
            delta_prime: self.meta.delta_prime,
            num_episodes,
            c_w: self.meta.c_w,
            c_min: self.meta.c_min,
            c_z: self.meta.c_z,
            horizon: self.scenario.horizon(),
            num_slots: self.scenario.num_slots(),
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(EceError::config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        if cfg.t_grid.is_empty() || cfg.seeds.is_empty() {
            return Err(EceError::config("sweep needs nonempty t_grid and seeds"));
        }
        for &t in &cfg.t_grid {
            cfg.run.ece_config(t).validate()?;
        }
        Ok(cfg)
    }
}

/// Everything a single run needs, built from a scenario.
pub struct Materialized {
    pub env: SimEnv,
    pub slots: Vec<BaseLearnerSlot>,
    pub exploration: Vec<Box<dyn BaseLearner>>,
    pub gap_estimator: Option<Box<dyn GapEstimator>>,
    pub vstar_estimator: Option<Box<dyn VStarEstimator>>,
    pub ece: EceConfig,
    /// Slot whose class is compatible (baseline "oracle" curve).
    pub optimal_slot: usize,
    /// Most misspecified slot (baseline "misspecified" curve).
    pub worst_slot: usize,
}

fn scripted_bandit(
    shortfalls: &[f64],
    noise: f64,
    horizon: usize,
) -> Result<(SimEnv, Vec<BaseLearnerSlot>)> {
    if shortfalls.is_empty() {
        return Err(EceError::config("need at least one slot"));
    }
    let top = 0.95 - noise;
    let h = horizon as f64;
    let means: Vec<f64> = shortfalls.iter().map(|d| top - d / h).collect();
    let mdp = make_two_state_bandit(&means, noise, horizon)?;
    let v_star = value_iteration(&mdp).v_star;
    let slots = (0..shortfalls.len())
        .map(|a| {
            BaseLearnerSlot::new(
                Box::new(ScriptedLearner::constant(constant_action_policy(horizon, 2, a)))
                    as Box<dyn BaseLearner>,
                NominalCoefficient::zero(a + 1),
                format!("script-{a}"),
            )
        })
        .collect();
    let per_slot_values = shortfalls.iter().map(|d| h * top - d).collect();
    Ok((SimEnv { mdp, v_star, per_slot_values }, slots))
}

fn uniform_explorers(
    num_slots: usize,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    aux: RngStream,
) -> Vec<Box<dyn BaseLearner>> {
    (0..num_slots)
        .map(|i| {
            Box::new(UniformRandomLearner {
                num_states,
                num_actions,
                horizon,
                seed: splitmix64(aux.seed ^ splitmix64(i as u64)),
            }) as Box<dyn BaseLearner>
        })
        .collect()
}

/// Builds environment, slots, exploration learners, and estimators for one
/// cell of a run or sweep.
pub fn materialize(cfg: &RunConfig, num_episodes: usize, streams: RunStreams) -> Result<Materialized> {
    let ece = cfg.ece_config(num_episodes);
    ece.validate()?;
    match &cfg.scenario {
        Scenario::ScriptedGap { shortfalls, noise, horizon, estimator } => {
            let (env, slots) = scripted_bandit(shortfalls, *noise, *horizon)?;
            let exploration = uniform_explorers(
                slots.len(),
                env.mdp.num_states,
                env.mdp.num_actions,
                *horizon,
                streams.aux,
            );
            let est_cfg = estimator.clone().unwrap_or_default();
            let gap_estimator: Box<dyn GapEstimator> = match est_cfg.kind {
                EstimatorKind::Oracle => Box::new(OracleGapEstimator::new(
                    env.per_slot_values.clone(),
                    est_cfg.consistency_c,
                    vec![NominalCoefficient::constant(1, est_cfg.v_scale); slots.len()],
                    est_cfg.noise_mode,
                    streams.aux.rng(),
                )?),
                EstimatorKind::Heuristic => Box::new(EmpiricalGapEstimator::new(vec![
                    NominalCoefficient::constant(1, est_cfg.v_scale);
                    slots.len()
                ])),
            };
            let vstar_estimator: Box<dyn VStarEstimator> = Box::new(OracleVStarEstimator::new(
                env.v_star,
                est_cfg.alpha,
                est_cfg.beta,
                vec![NominalCoefficient::constant(1, est_cfg.v_scale); slots.len()],
                vec![NominalCoefficient::constant(1, est_cfg.v_prime_scale); slots.len()],
                est_cfg.noise_mode,
                streams.aux.child(1).rng(),
            )?);
            let optimal_slot = shortfalls
                .iter()
                .position(|&d| d == 0.0)
                .unwrap_or(shortfalls.len() - 1);
            let worst_slot = shortfalls
                .iter()
                .enumerate()
                .max_by(|(ai, av), (bi, bv)| av.total_cmp(bv).then(bi.cmp(ai)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            Ok(Materialized {
                env,
                slots,
                exploration,
                gap_estimator: Some(gap_estimator),
                vstar_estimator: Some(vstar_estimator),
                ece,
                optimal_slot,
                worst_slot,
            })
        }
        Scenario::ScriptedVsLearner { gap, noise, horizon, c_beta, r_scale, extra_arm_gaps } => {
            let top = 0.95 - noise;
            let h = *horizon as f64;
            let mut means = vec![top - gap / h, top];
            means.extend(extra_arm_gaps.iter().map(|g| top - g / h));
            let num_actions = means.len();
            let mdp = make_two_state_bandit(&means, *noise, *horizon)?;
            let v_star = value_iteration(&mdp).v_star;
            let env = SimEnv {
                mdp,
                v_star,
                per_slot_values: vec![h * top - gap, v_star],
            };
            let scripted = BaseLearnerSlot::new(
                Box::new(ScriptedLearner::constant(constant_action_policy(
                    *horizon,
                    2,
                    0,
                ))),
                NominalCoefficient::zero(1),
                "scripted-gapped",
            );
            let learner = LsviUcb::new(
                OneHotFeatures::identity(2, num_actions),
                2,
                *horizon,
                LsviUcbParams {
                    lambda: 1.0,
                    c_beta: *c_beta,
                    delta: cfg.meta.delta_prime,
                    horizon_t: num_episodes,
                },
            );
            let optimistic = BaseLearnerSlot::new(
                Box::new(learner),
                NominalCoefficient::constant(2 * num_actions, *r_scale),
                "lsvi-identity",
            );
            let exploration = uniform_explorers(2, 2, num_actions, *horizon, streams.aux);
            Ok(Materialized {
                env,
                slots: vec![scripted, optimistic],
                exploration,
                gap_estimator: None,
                vstar_estimator: None,
                ece,
                optimal_slot: 1,
                worst_slot: 0,
            })
        }
        Scenario::LsviNested {
            num_clusters,
            duplication,
            levels,
            horizon,
            gap_target,
            c_beta,
            c_r,
            env_seed,
        } => {
            let family = generate_gap_family(
                *num_clusters,
                *duplication,
                *levels,
                *horizon,
                *gap_target,
                RngStream::new(*env_seed, 0),
            )?;
            let num_states = family.mdp.num_states;
            let num_actions = family.mdp.num_actions;
            let slots = (0..*levels)
                .map(|level| {
                    let agg = &family.features.levels[level];
                    let features = OneHotFeatures {
                        cluster_of_state: agg.cluster_of_state.clone(),
                        num_clusters: agg.num_clusters,
                        num_actions,
                    };
                    let dim = features.dim();
                    let learner = LsviUcb::new(
                        features,
                        num_states,
                        *horizon,
                        LsviUcbParams {
                            lambda: 1.0,
                            c_beta: *c_beta,
                            delta: cfg.meta.delta_prime,
                            horizon_t: num_episodes,
                        },
                    );
                    BaseLearnerSlot::new(
                        Box::new(learner) as Box<dyn BaseLearner>,
                        NominalCoefficient::linear_mdp(dim, *c_r),
                        format!("lsvi-level-{level}"),
                    )
                })
                .collect();
            let exploration =
                uniform_explorers(*levels, num_states, num_actions, *horizon, streams.aux);
            let optimal_slot = family.true_level;
            let env = SimEnv {
                mdp: family.mdp,
                v_star: family.v_star,
                per_slot_values: family.per_level_optimal_values,
            };
            Ok(Materialized {
                env,
                slots,
                exploration,
                gap_estimator: None,
                vstar_estimator: None,
                ece,
                optimal_slot,
                worst_slot: 0,
            })
        }
    }
}

/// Stream bundle for a `(T, seed)` cell, mixing the config's base seed, the
/// horizon, and the cell seed.
pub fn cell_streams(base_seed: u64, num_episodes: usize, cell_seed: u64) -> RunStreams {
    RunStreams::from_seed(splitmix64(
        splitmix64(base_seed) ^ splitmix64(num_episodes as u64) ^ cell_seed.wrapping_mul(0x9e3779b97f4a7c15),
    ))
}

/// Executes one run of the configured variant at horizon `num_episodes` with
/// the given cell seed, embedding the resolved config into the record.
pub fn execute_run(cfg: &RunConfig, num_episodes: usize, cell_seed: u64) -> Result<RunRecord> {
    let streams = cell_streams(cfg.seed, num_episodes, cell_seed);
    let mut mat = materialize(cfg, num_episodes, streams)?;
    let mut record = match cfg.variant {
        Variant::Ece => run_ece(&mut mat.slots, &mat.ece, &mat.env, streams)?,
        Variant::EceGap => {
            let mut estimator = mat.gap_estimator.ok_or_else(|| {
                EceError::config("scenario provides no gap estimator for the ece-gap variant")
            })?;
            run_ece_gap(
                &mut mat.slots,
                &mut mat.exploration,
                estimator.as_mut(),
                &mat.ece,
                &mat.env,
                streams,
            )?
        }
        Variant::EceVstarKnown => {
            run_ece_vstar_known(&mut mat.slots, mat.env.v_star, &mat.ece, &mat.env, streams)?
        }
        Variant::EceVhat => {
            let mut estimator = mat.vstar_estimator.ok_or_else(|| {
                EceError::config("scenario provides no value estimator for the ece-vhat variant")
            })?;
            run_ece_vhat(
                &mut mat.slots,
                &mut mat.exploration,
                estimator.as_mut(),
                &mat.ece,
                &mat.env,
                streams,
            )?
        }
    };
    let mut resolved = cfg.clone();
    resolved.meta.num_episodes = num_episodes;
    record.header.resolved_config = serde_json::json!({
        "config": resolved,
        "cell_seed": cell_seed,
    });
    record.header.seed = cell_seed;
    Ok(record)
}

/// Runs a single slot alone (the degenerate one-slot meta-algorithm) as a
/// baseline curve; `tag` becomes the record's variant label.
pub fn execute_baseline(
    cfg: &RunConfig,
    num_episodes: usize,
    cell_seed: u64,
    slot_index: usize,
    tag: &str,
) -> Result<RunRecord> {
    let streams = cell_streams(cfg.seed, num_episodes, cell_seed ^ 0xb5ea_11ce).child_bundle(slot_index as u64);
    let mat = materialize(cfg, num_episodes, streams)?;
    if slot_index >= mat.slots.len() {
        return Err(EceError::config(format!("baseline slot {slot_index} out of range")));
    }
    let mut slots: Vec<BaseLearnerSlot> = mat
        .slots
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i == slot_index)
        .map(|(_, s)| s)
        .collect();
    let env = SimEnv {
        mdp: mat.env.mdp,
        v_star: mat.env.v_star,
        per_slot_values: vec![mat.env.per_slot_values[slot_index]],
    };
    let mut config = mat.ece;
    config.num_slots = 1;
    let mut record = run_ece(&mut slots, &config, &env, streams)?;
    record.header.variant = tag.into();
    let mut resolved = cfg.clone();
    resolved.meta.num_episodes = num_episodes;
    record.header.resolved_config = serde_json::json!({
        "config": resolved,
        "cell_seed": cell_seed,
        "baseline_slot": slot_index,
    });
    record.header.seed = cell_seed;
    Ok(record)
}

/// Named scenario presets, selectable from the CLI.
pub fn preset(name: &str) -> Option<RunConfig> {
    let cfg = match name {
        // Three scripted slots: a deeply misspecified slot0, the compatible
        // slot 1, and a mildly worse slot 2.
        "nonrejection-scripted" => RunConfig {
            version: CONFIG_VERSION,
            name: Some(name.into()),
            variant: Variant::Ece,
            scenario: Scenario::ScriptedGap {
                shortfalls: vec![0.85, 0.0, 0.1],
                noise: 0.05,
                horizon: 1,
                estimator: None,
            },
            meta: MetaParams {
                kappa: 1.0 / 3.0,
                delta_prime: 0.05,
                num_episodes: 5000,
                c_w: 1.0,
                c_min: 0.1,
                c_z: 1.0,
            },
            seed: 0,
        },
        // LSVI-UCB at three nested levels of a gap-controlled family.
        "lsvi-nested" => RunConfig {
            version: CONFIG_VERSION,
            name: Some(name.into()),
            variant: Variant::Ece,
            scenario: Scenario::LsviNested {
                num_clusters: 4,
                duplication: 4,
                levels: 3,
                horizon: 3,
                gap_target: 0.3,
                c_beta: 0.035,
                c_r: 0.002,
                env_seed: 7,
            },
            meta: MetaParams {
                kappa: 1.0 / 3.0,
                delta_prime: 0.05,
                num_episodes: 10_000,
                c_w: 0.05,
                c_min: 0.01,
                c_z: 1.0,
            },
            seed: 0,
        },
        // Constant-gap instance experiments with aggressive exploration.
        "gap-instance" => RunConfig {
            version: CONFIG_VERSION,
            name: Some(name.into()),
            variant: Variant::Ece,
            scenario: Scenario::ScriptedVsLearner {
                gap: 0.2,
                noise: 0.1,
                horizon: 1,
                c_beta: 0.027,
                r_scale: 1.0,
                extra_arm_gaps: vec![0.12, 0.05, 0.02, 0.008],
            },
            meta: MetaParams {
                kappa: 0.5,
                delta_prime: 0.05,
                num_episodes: 8000,
                c_w: 0.04,
                c_min: 1e-4,
                c_z: 1.0,
            },
            seed: 0,
        },
        // Known optimal value, noise-free scripted shortfall.
        "vstar-known" => RunConfig {
            version: CONFIG_VERSION,
            name: Some(name.into()),
            variant: Variant::EceVstarKnown,
            scenario: Scenario::ScriptedGap {
                shortfalls: vec![0.2, 0.0],
                noise: 0.0,
                horizon: 1,
                estimator: None,
            },
            meta: MetaParams {
                kappa: 1.0 / 3.0,
                delta_prime: 0.05,
                num_episodes: 4000,
                c_w: 1.0,
                c_min: 1.0,
                c_z: 1.0,
            },
            seed: 0,
        },
        // Oracle gap estimator driving eliminations.
        "ece-gap-oracle" => RunConfig {
            version: CONFIG_VERSION,
            name: Some(name.into()),
            variant: Variant::EceGap,
            scenario: Scenario::ScriptedGap {
                shortfalls: vec![0.5, 0.0],
                noise: 0.1,
                horizon: 1,
                estimator: Some(EstimatorConfig {
                    kind: EstimatorKind::Oracle,
                    consistency_c: 2.0,
                    noise_mode: NoiseMode::Uniform,
                    v_scale: 0.25,
                    v_prime_scale: 0.0,
                    alpha: 0.5,
                    beta: 0.5,
                }),
            },
            meta: MetaParams {
                kappa: 1.0 / 3.0,
                delta_prime: 0.05,
                num_episodes: 2000,
                c_w: 1.0,
                c_min: 1e-4,
                c_z: 1.0,
            },
            seed: 0,
        },
        _ => return None,
    };
    Some(cfg)
}

pub fn preset_names() -> &'static [&'static str] {
    &["nonrejection-scripted", "lsvi-nested", "gap-instance", "vstar-known", "ece-gap-oracle"]
}
