//! Experiment harness: run records, exact regret accounting, event
//! validators, scaling fits, and multi-seed sweeps.

pub mod events;
pub mod record;
pub mod regret;
pub mod sweep;

pub use events::{event_e3_statistic, verify_event_e1, verify_event_e3, CountBoundViolation};
pub use record::{Elimination, RunHeader, RunRecord, RunRow};
pub use regret::{cumulative_regret, fit_loglog_slope, Benchmark, ScalingFit};
pub use sweep::{run_sweep, AggregateRow, CellResult, SweepSummary};
