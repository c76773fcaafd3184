//! Doubling-trick wrapper.
//!
//! Converts a fixed-horizon-optimized learner into an anytime one up to
//! constants: the inner learner is reset at local play counts 1, 2, 4, 8, ...
//! and sees episode indices re-based to the start of its current epoch.

use crate::learners::BaseLearner;

pub struct DoublingWrapper {
    factory: Box<dyn Fn() -> Box<dyn BaseLearner> + Send>,
    inner: Box<dyn BaseLearner>,
    /// Completed plays overall.
    plays: usize,
    /// Completed plays before the current epoch began.
    epoch_start: usize,
}

impl DoublingWrapper {
    pub fn new(factory: Box<dyn Fn() -> Box<dyn BaseLearner> + Send>) -> Self {
        let mut inner = factory();
        // The epoch starting at play 1 counts as a reset.
        inner.reset();
        DoublingWrapper { factory, inner, plays: 0, epoch_start: 0 }
    }

    fn local_index(&self) -> usize {
        self.plays - self.epoch_start + 1
    }
}

/// Wraps a learner factory in the doubling schedule.
pub fn doubling_wrapper(factory: Box<dyn Fn() -> Box<dyn BaseLearner> + Send>) -> DoublingWrapper {
    DoublingWrapper::new(factory)
}

impl BaseLearner for DoublingWrapper {
    fn propose_policy(&self, _t: usize) -> crate::types::DeterministicPolicy {
        self.inner.propose_policy(self.local_index())
    }

    fn observe(&mut self, _t: usize, trace: &crate::types::EpisodeTrace, g: f64) {
        let local = self.local_index();
        self.inner.observe(local, trace, g);
        self.plays += 1;
        // Reset when the next play count is a power of two.
        let next = self.plays + 1;
        if next.is_power_of_two() {
            self.inner.reset();
            self.epoch_start = self.plays;
        }
    }

    fn reset(&mut self) {
        self.inner = (self.factory)();
        self.inner.reset();
        self.plays = 0;
        self.epoch_start = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::scripted::constant_action_policy;
    use crate::learners::ScriptedLearner;
    use crate::types::{DeterministicPolicy, EpisodeTrace};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Counts resets and the local indices it is proposed/observed with.
    /// `reset` clears learning state (the observed indices) but keeps the
    /// meta-counter so the test can see every reset.
    struct CountingLearner {
        resets: Arc<AtomicUsize>,
        observed_locals: Vec<usize>,
    }

    impl BaseLearner for CountingLearner {
        fn propose_policy(&self, _t: usize) -> DeterministicPolicy {
            DeterministicPolicy::zeros(1, 1)
        }
        fn observe(&mut self, t: usize, _trace: &EpisodeTrace, _g: f64) {
            self.observed_locals.push(t);
        }
        fn reset(&mut self) {
            self.resets.fetch_add(1, Ordering::SeqCst);
            self.observed_locals.clear();
        }
    }

    fn dummy_trace() -> EpisodeTrace {
        EpisodeTrace { states: vec![0, 0], actions: vec![0], rewards: vec![0.1], episode_index: 0 }
    }

    #[test]
    fn resets_fire_at_one_two_four_eight() {
        let resets = Arc::new(AtomicUsize::new(0));
        let handle = resets.clone();
        let mut wrapper = DoublingWrapper::new(Box::new(move || {
            Box::new(CountingLearner { resets: handle.clone(), observed_locals: vec![] })
        }));
        let mut after_each_play = Vec::new();
        for t in 1..=8 {
            wrapper.propose_policy(t);
            wrapper.observe(t, &dummy_trace(), 0.1);
            after_each_play.push(resets.load(Ordering::SeqCst));
        }
        // Reset before play 1 (construction) plus after plays 1, 3, 7,
        // i.e. the inner learner saw resets at local counts 1, 2, 4, 8.
        assert_eq!(after_each_play, vec![2, 2, 3, 3, 3, 3, 4, 4]);
    }

    #[test]
    fn local_reindexing_restarts_each_epoch() {
        let resets = Arc::new(AtomicUsize::new(0));
        let handle = resets.clone();
        let mut wrapper = DoublingWrapper::new(Box::new(move || {
            Box::new(CountingLearner { resets: handle.clone(), observed_locals: vec![] })
        }));
        for t in 1..=7 {
            wrapper.observe(t, &dummy_trace(), 0.0);
        }
        // Epoch {4..7} has seen locals 1..4 when play 7 completes, and the
        // reset right after play 7 clears them.
        assert_eq!(wrapper.plays, 7);
        assert_eq!(wrapper.epoch_start, 7);
    }

    #[test]
    fn wrapped_script_follows_local_index() {
        let a = constant_action_policy(1, 1, 0);
        let b = constant_action_policy(1, 1, 1);
        let (pa, pb) = (a.clone(), b.clone());
        let mut wrapper = DoublingWrapper::new(Box::new(move || {
            Box::new(ScriptedLearner::new(vec![pa.clone(), pb.clone()]).unwrap())
        }));
        // Epochs: {1}, {2,3}, {4..7}. Scripts restart at epoch boundaries.
        let mut seen = Vec::new();
        for t in 1..=7 {
            seen.push(wrapper.propose_policy(t).actions[0][0]);
            wrapper.observe(t, &dummy_trace(), 0.0);
        }
        assert_eq!(seen, vec![0, 0, 1, 0, 1, 1, 1]);
    }
}
