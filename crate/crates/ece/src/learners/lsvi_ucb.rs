//! Least-squares value iteration with optimistic bonuses on one-hot
//! aggregation features.
//!
//! Per step `h` the learner keeps the ridge Gram matrix
//! `Lambda_h = lambda I + sum phi phi^T` and regresses backed-up targets onto
//! the features at every `propose_policy` call (full recomputation, no
//! incremental approximation). The features here are one-hot in
//! `(cluster, action)`, so `Lambda_h` stays diagonal and is stored as its
//! diagonal; `phi^T Lambda^{-1} phi` reduces to one lookup.

use serde::{Deserialize, Serialize};

use crate::learners::BaseLearner;
use crate::types::{DeterministicPolicy, EpisodeTrace};

/// One-hot feature map: `(s, a) -> e_{cluster(s) * A + a}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotFeatures {
    pub cluster_of_state: Vec<usize>,
    pub num_clusters: usize,
    pub num_actions: usize,
}

impl OneHotFeatures {
    pub fn identity(num_states: usize, num_actions: usize) -> Self {
        OneHotFeatures {
            cluster_of_state: (0..num_states).collect(),
            num_clusters: num_states,
            num_actions,
        }
    }

    pub fn dim(&self) -> usize {
        self.num_clusters * self.num_actions
    }

    #[inline]
    fn index(&self, s: usize, a: usize) -> usize {
        self.cluster_of_state[s] * self.num_actions + a
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LsviUcbParams {
    /// Ridge regularizer; must be positive so the Gram matrix stays PD.
    pub lambda: f64,
    /// Bonus scale: `beta = c_beta * d * H * sqrt(ln(2 d T H / delta))`.
    pub c_beta: f64,
    pub delta: f64,
    pub horizon_t: usize,
}

impl Default for LsviUcbParams {
    fn default() -> Self {
        LsviUcbParams { lambda: 1.0, c_beta: 0.1, delta: 0.05, horizon_t: 1000 }
    }
}

/// Stored step transition: `(s, a, r, s_next)`.
type Step = (usize, usize, f64, usize);

pub struct LsviUcb {
    features: OneHotFeatures,
    num_states: usize,
    horizon: usize,
    beta: f64,
    lambda: f64,
    /// Diagonal of `Lambda_h - lambda I`, i.e. per-feature visit counts.
    counts: Vec<Vec<f64>>,
    /// Episode steps per `h`, in arrival order.
    data: Vec<Vec<Step>>,
}

impl LsviUcb {
    pub fn new(features: OneHotFeatures, num_states: usize, horizon: usize, params: LsviUcbParams) -> Self {
        let d = features.dim();
        let beta = params.c_beta
            * d as f64
            * horizon as f64
            * (2.0 * d as f64 * params.horizon_t.max(1) as f64 * horizon as f64 / params.delta)
                .ln()
                .max(0.0)
                .sqrt();
        LsviUcb {
            features,
            num_states,
            horizon,
            beta,
            lambda: params.lambda,
            counts: vec![vec![0.0; d]; horizon],
            data: vec![Vec::new(); horizon],
        }
    }

    /// Directly pins `beta` (tests and closed-form checks).
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Gram-matrix trace above the ridge floor, `sum_i counts[h][i]`.
    pub fn gram_trace(&self, h: usize) -> f64 {
        self.counts[h].iter().sum()
    }

    /// Backward pass: regress targets, add the optimism bonus, clip to
    /// `[0, H]`. Returns the clipped Q table per `(h, s, a)`.
    fn q_tables(&self) -> Vec<Vec<f64>> {
        let h_n = self.horizon;
        let (s_n, a_n) = (self.num_states, self.features.num_actions);
        let d = self.features.dim();
        let cap = h_n as f64;
        let mut q = vec![vec![0.0; s_n * a_n]; h_n];
        // q_next[s] = max_a Q_{h+1}(s, a); zero beyond the horizon.
        let mut v_next = vec![0.0; s_n];
        for h in (0..h_n).rev() {
            let mut b = vec![0.0; d];
            for &(s, a, r, s_next) in &self.data[h] {
                b[self.features.index(s, a)] += r + v_next[s_next];
            }
            let counts = &self.counts[h];
            // w = Lambda^{-1} b and bonus = beta * sqrt(phi^T Lambda^{-1} phi),
            // both elementwise because Lambda is diagonal.
            let table = &mut q[h];
            for s in 0..s_n {
                for a in 0..a_n {
                    let idx = self.features.index(s, a);
                    let inv = 1.0 / (self.lambda + counts[idx]);
                    let raw = b[idx] * inv + self.beta * inv.sqrt();
                    table[s * a_n + a] = raw.clamp(0.0, cap);
                }
            }
            for s in 0..s_n {
                let row = &table[s * a_n..(s + 1) * a_n];
                v_next[s] = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        q
    }

    /// Exposes Q estimates for tests.
    pub fn q_value(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q_tables()[h][s * self.features.num_actions + a]
    }
}

impl BaseLearner for LsviUcb {
    fn propose_policy(&self, _t: usize) -> DeterministicPolicy {
        let q = self.q_tables();
        let a_n = self.features.num_actions;
        let actions = q
            .iter()
            .map(|table| {
                (0..self.num_states)
                    .map(|s| {
                        let row = &table[s * a_n..(s + 1) * a_n];
                        let mut best = 0usize;
                        for a in 1..a_n {
                            if row[a] > row[best] {
                                best = a;
                            }
                        }
                        best
                    })
                    .collect()
            })
            .collect();
        DeterministicPolicy::new(actions)
    }

    fn observe(&mut self, _t: usize, trace: &EpisodeTrace, _g: f64) {
        for h in 0..self.horizon.min(trace.actions.len()) {
            let (s, a) = (trace.states[h], trace.actions[h]);
            self.counts[h][self.features.index(s, a)] += 1.0;
            self.data[h].push((s, a, trace.rewards[h], trace.states[h + 1]));
        }
    }

    fn reset(&mut self) {
        for row in self.counts.iter_mut() {
            row.iter_mut().for_each(|c| *c = 0.0);
        }
        for row in self.data.iter_mut() {
            row.clear();
        }
    }
}
