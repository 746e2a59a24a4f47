//! Adaptive binning and exploration (ABE) for nonparametric learning and
//! earning with covariates.
//!
//! The crate provides the policy itself ([`abe`]), its parameter schedule,
//! simulated pricing environments, comparison policies and a seeded harness
//! that measures cumulative regret across horizons.

pub mod abe;
pub mod baselines;
pub mod decision_set;
pub mod environment;
pub mod harness;
pub mod partition;
pub mod policy;
pub mod schedule;

pub use abe::{AbeError, AbePolicy, DecisionToken, TokenTarget};
pub use baselines::{solve_normal_equations, Clairvoyant, FixedPrice, IlsState, StaticGrid};
pub use decision_set::{make_decision_set, DecisionSet};
pub use environment::{CovariateProcess, Feedback, LowerBoundClass, RewardModel};
pub use harness::{
    fit_loglog_slope, run_episode, run_sweep, EpisodeTrace, LogLogFit, OutputRow, RunConfig, Scenario,
    SlopeOutcome, SweepConfig, SweepResults,
};
pub use partition::{Bin, BinId, Cell, PartitionTree, Payload};
pub use policy::{Policy, PolicyKind};
pub use schedule::{build_schedule, Schedule};
