//! Shared domain types: tabular MDPs, deterministic policies, episode traces.
//!
//! States and actions are plain index sets `0..S` and `0..A`. Rewards are
//! deterministic functions of `(h, s, a)`; all return noise comes from
//! transition stochasticity, which keeps per-episode noise bounded by `H`
//! automatically.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Tolerance for probability-vector sums. Generators renormalize rows before
/// emitting, so anything outside this is a real bug, not float drift.
pub const PROB_TOL: f64 = 1e-9;

/// Finite episodic MDP with step-indexed rewards and transitions.
///
/// Layout: `rewards[h][s][a]` in `[0, 1]`, `transitions[h][s][a]` a
/// probability vector over successor states, `initial_dist` over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub rewards: Vec<Vec<Vec<f64>>>,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub initial_dist: Vec<f64>,
}

/// One invariant violation found by [`validate_mdp`], with enough indices to
/// locate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MdpViolation {
    BadShape { what: String },
    RewardOutOfRange { h: usize, s: usize, a: usize, value: f64 },
    TransitionRowSum { h: usize, s: usize, a: usize, sum: f64 },
    NegativeTransition { h: usize, s: usize, a: usize, next: usize, value: f64 },
    InitialDistSum { sum: f64 },
    NegativeInitialMass { s: usize, value: f64 },
}

impl fmt::Display for MdpViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MdpViolation::BadShape { what } => write!(f, "bad shape: {what}"),
            MdpViolation::RewardOutOfRange { h, s, a, value } => {
                write!(f, "reward out of [0,1] at (h={h}, s={s}, a={a}): {value}")
            }
            MdpViolation::TransitionRowSum { h, s, a, sum } => {
                write!(f, "transition row at (h={h}, s={s}, a={a}) sums to {sum}")
            }
            MdpViolation::NegativeTransition { h, s, a, next, value } => {
                write!(f, "negative transition mass at (h={h}, s={s}, a={a} -> {next}): {value}")
            }
            MdpViolation::InitialDistSum { sum } => {
                write!(f, "initial distribution sums to {sum}")
            }
            MdpViolation::NegativeInitialMass { s, value } => {
                write!(f, "negative initial mass at s={s}: {value}")
            }
        }
    }
}

/// Checks every invariant and returns all violations; never aborts early.
pub fn validate_mdp(mdp: &TabularMdp) -> Vec<MdpViolation> {
    let mut out = Vec::new();
    let (s_n, a_n, h_n) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    if s_n == 0 || a_n == 0 || h_n == 0 {
        out.push(MdpViolation::BadShape {
            what: format!("S={s_n}, A={a_n}, H={h_n} must all be positive"),
        });
        return out;
    }
    if mdp.rewards.len() != h_n
        || mdp.transitions.len() != h_n
        || mdp.rewards.iter().any(|per_s| per_s.len() != s_n || per_s.iter().any(|r| r.len() != a_n))
        || mdp.transitions.iter().any(|per_s| {
            per_s.len() != s_n
                || per_s.iter().any(|per_a| {
                    per_a.len() != a_n || per_a.iter().any(|row| row.len() != s_n)
                })
        })
        || mdp.initial_dist.len() != s_n
    {
        out.push(MdpViolation::BadShape {
            what: "reward/transition/initial arrays do not match (H, S, A)".into(),
        });
        return out;
    }

    for h in 0..h_n {
        for s in 0..s_n {
            for a in 0..a_n {
                let r = mdp.rewards[h][s][a];
                if !(0.0..=1.0).contains(&r) || !r.is_finite() {
                    out.push(MdpViolation::RewardOutOfRange { h, s, a, value: r });
                }
                let row = &mdp.transitions[h][s][a];
                let mut sum = 0.0;
                for (next, &p) in row.iter().enumerate() {
                    if p < 0.0 || !p.is_finite() {
                        out.push(MdpViolation::NegativeTransition { h, s, a, next, value: p });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    out.push(MdpViolation::TransitionRowSum { h, s, a, sum });
                }
            }
        }
    }

    let mut sum = 0.0;
    for (s, &p) in mdp.initial_dist.iter().enumerate() {
        if p < 0.0 || !p.is_finite() {
            out.push(MdpViolation::NegativeInitialMass { s, value: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        out.push(MdpViolation::InitialDistSum { sum });
    }
    out
}

impl TabularMdp {
    pub fn validate(&self) -> Vec<MdpViolation> {
        validate_mdp(self)
    }
}

/// A deterministic policy: `actions[h][s]` is the action taken at step `h`
/// in state `s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    pub actions: Vec<Vec<usize>>,
}

impl DeterministicPolicy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        DeterministicPolicy { actions }
    }

    /// All-zero policy of the given shape.
    pub fn zeros(horizon: usize, num_states: usize) -> Self {
        DeterministicPolicy { actions: vec![vec![0; num_states]; horizon] }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn matches(&self, mdp: &TabularMdp) -> bool {
        self.actions.len() == mdp.horizon
            && self.actions.iter().all(|row| {
                row.len() == mdp.num_states && row.iter().all(|&a| a < mdp.num_actions)
            })
    }
}

/// The observed trajectory of one episode: `H + 1` states, `H` actions and
/// rewards, plus the global episode index that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub episode_index: usize,
}

/// Realized return `g = sum of step rewards`; always in `[0, H]`.
pub fn episode_return(trace: &EpisodeTrace) -> f64 {
    trace.rewards.iter().sum()
}

impl EpisodeTrace {
    pub fn ret(&self) -> f64 {
        episode_return(self)
    }
}
