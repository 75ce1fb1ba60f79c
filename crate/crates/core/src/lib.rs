//! Fully distributed multi-player bandits for uncoordinated spectrum access.
//!
//! Players see heterogeneous channel means that depend on how many players
//! share a channel, collisions pay reduced but nonzero rewards, and nobody
//! communicates. Each epoch runs uniform exploration with 1-D clustering,
//! a content/discontent matching game, and a doubling exploitation phase.
//!
//! Alongside the protocol live two checkers: a brute-force [`oracle`] for
//! the optimal matching and regret, and an exact [`chain`] analyzer for the
//! matching dynamics on small instances.

pub mod chain;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod estimator;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod runner;
pub mod schedule;

pub use env::{ActionProfile, Environment, MeanRewardTable, NoiseKind, RewardModel};
pub use error::{Error, Issue, Result};
pub use oracle::{MatchingSolution, Oracle};
pub use runner::{run_horizon, RunTrace};
pub use schedule::{EpochPlan, ScheduleParams};
