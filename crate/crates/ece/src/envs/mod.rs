//! Environments: construction, simulation, and exact value oracles.

pub mod dp;
pub mod family;
pub mod generator;
pub mod simulate;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::TabularMdp;

pub use dp::{best_in_class_value, policy_value, value_iteration, PolicyEvaluator};
pub use family::{check_realizability, AggregationLevel, GapControlledFamily, NestedFeatureFamily};
pub use generator::{generate_gap_family, make_two_state_bandit};
pub use simulate::sample_episode;

/// Versioned serialization wrapper for an environment, for experiment
/// reproducibility. Probabilities are stored as plain decimal arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvDocument {
    pub version: u32,
    pub mdp: TabularMdp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<NestedFeatureFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_level_values: Option<Vec<f64>>,
    pub v_star: f64,
}

pub const ENV_DOC_VERSION: u32 = 1;

impl EnvDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// What a meta-algorithm run needs from its environment: the ground truth
/// plus precomputed benchmark values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimEnv {
    pub mdp: TabularMdp,
    pub v_star: f64,
    /// Best-in-class value per slot (used for gap estimators and the
    /// best-in-class regret benchmark). One entry per slot; `v_star` for
    /// slots whose class contains an optimal policy.
    pub per_slot_values: Vec<f64>,
}

impl SimEnv {
    pub fn document(&self) -> EnvDocument {
        EnvDocument {
            version: ENV_DOC_VERSION,
            mdp: self.mdp.clone(),
            family: None,
            true_level: None,
            per_level_values: Some(self.per_slot_values.clone()),
            v_star: self.v_star,
        }
    }
}
