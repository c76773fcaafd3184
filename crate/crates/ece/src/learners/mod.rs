//! Base learners and the behavioral contract the meta-algorithm consumes.

pub mod doubling;
pub mod lsvi_ucb;
pub mod scripted;

use crate::error::{EceError, Result};
use crate::nominal::NominalCoefficient;
use crate::types::{DeterministicPolicy, EpisodeTrace};

pub use doubling::{doubling_wrapper, DoublingWrapper};
pub use lsvi_ucb::{LsviUcb, LsviUcbParams};
pub use scripted::{constant_action_policy, ScriptedLearner, UniformRandomLearner};

/// Behavioral contract of a base algorithm.
///
/// `propose_policy` must be side-effect free: the returned policy is a pure
/// function of everything observed so far. Only `observe` mutates state, and
/// the meta-algorithm guarantees a learner is updated exactly with the
/// episodes it played.
pub trait BaseLearner: Send {
    fn propose_policy(&self, t: usize) -> DeterministicPolicy;
    fn observe(&mut self, t: usize, trace: &EpisodeTrace, g: f64);
    fn reset(&mut self);
}

/// A base algorithm paired with its advertised regret coefficient and a
/// label for records.
pub struct BaseLearnerSlot {
    pub learner: Box<dyn BaseLearner>,
    pub nominal: NominalCoefficient,
    pub label: String,
}

impl BaseLearnerSlot {
    pub fn new(
        learner: Box<dyn BaseLearner>,
        nominal: NominalCoefficient,
        label: impl Into<String>,
    ) -> Self {
        BaseLearnerSlot { learner, nominal, label: label.into() }
    }
}

/// Verifies the slot ordering `R_i(d_i, H, x) <= R_{i+1}(d_{i+1}, H, x)` on a
/// sampled grid of `(H, x)`. Runs reject slot lists violating it before
/// episode 1.
pub fn check_slot_ordering(slots: &[BaseLearnerSlot], horizon: usize) -> Result<()> {
    let horizons = [1usize, horizon.max(1), 2 * horizon.max(1)];
    let logs = [0.5f64, 1.0, 5.0, 20.0, 60.0];
    for i in 0..slots.len().saturating_sub(1) {
        for &h in &horizons {
            for &x in &logs {
                let lo = slots[i].nominal.evaluate(h, x);
                let hi = slots[i + 1].nominal.evaluate(h, x);
                if lo > hi + 1e-12 {
                    return Err(EceError::config(format!(
                        "slot ordering violated: R[{i}](H={h}, x={x}) = {lo} exceeds R[{}] = {hi}",
                        i + 1
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(nominal: NominalCoefficient) -> BaseLearnerSlot {
        BaseLearnerSlot::new(
            Box::new(ScriptedLearner::new(vec![DeterministicPolicy::zeros(1, 1)]).unwrap()),
            nominal,
            "s",
        )
    }

    #[test]
    fn ordering_accepts_nondecreasing() {
        let slots = vec![
            slot(NominalCoefficient::zero(1)),
            slot(NominalCoefficient::constant(2, 0.5)),
            slot(NominalCoefficient::linear_mdp(4, 0.5)),
        ];
        assert!(check_slot_ordering(&slots, 3).is_ok());
    }

    #[test]
    fn ordering_rejects_inversion() {
        let slots = vec![
            slot(NominalCoefficient::constant(4, 5.0)),
            slot(NominalCoefficient::constant(2, 1.0)),
        ];
        assert!(check_slot_ordering(&slots, 3).is_err());
    }
}
