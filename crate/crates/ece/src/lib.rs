//! Online model selection over episodic-RL base learners.
//!
//! The centerpiece is the explore-commit-eliminate (ECE) meta-algorithm: given
//! a list of base learners ordered by their nominal regret coefficients, it
//! commits to the cheapest candidate, force-explores the more complex ones on
//! a decaying schedule, and permanently eliminates the candidate when a simple
//! return-gap test says a more complex learner is doing significantly better.
//!
//! The crate also ships:
//!
//! - a tabular episodic-MDP simulator with exact value oracles ([`envs`]),
//! - nested state-aggregation feature families with controllable
//!   misspecification gaps ([`envs::generator`]),
//! - LSVI-UCB on aggregation features, scripted test learners, and a
//!   doubling-trick wrapper ([`learners`]),
//! - the side-information variants of the elimination test (known optimal
//!   value, oracle gap estimators, estimated optimal value) ([`variants`]),
//! - an experiment harness with run records, event validators, power-law
//!   fits, and multi-seed sweeps ([`harness`]),
//! - a CLI (`ece run | sweep | analyze | validate`) bound together by the
//!   JSON config layer in [`config`].
//!
//! All slot indices are 0-based throughout the crate and its artifacts.

pub mod config;
pub mod envs;
pub mod error;
pub mod harness;
pub mod learners;
pub mod meta;
pub mod nominal;
pub mod rng;
pub mod types;
pub mod variants;

pub use error::EceError;
pub use types::{DeterministicPolicy, EpisodeTrace, TabularMdp};
