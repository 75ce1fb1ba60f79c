//! Machine-readable run summaries and cross-seed aggregates.

use serde::Serialize;

use crate::env::ActionProfile;
use crate::oracle::Oracle;
use crate::runner::{EpochRecord, PhaseRegret, RunTrace};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Checkpoint {
    pub time: u64,
    pub regret: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub horizon: u64,
    pub elapsed: u64,
    pub truncated: bool,
    pub completed_epochs: usize,
    pub total_regret: Option<f64>,
    pub regret_by_phase: Option<PhaseRegret>,
    pub checkpoints: Vec<Checkpoint>,
    pub final_profile: Option<ActionProfile>,
    pub final_is_optimal: Option<bool>,
    pub epochs: Vec<EpochRecord>,
}

impl RunSummary {
    pub fn new(trace: &RunTrace, oracle: Option<&Oracle>) -> Self {
        let with_regret = oracle.is_some() && trace.has_regret();
        let final_profile = trace.final_profile().cloned();
        Self {
            seed: trace.seed,
            horizon: trace.horizon,
            elapsed: trace.elapsed(),
            truncated: trace.truncated,
            completed_epochs: trace.completed_epochs(),
            total_regret: with_regret.then(|| trace.total_regret()),
            regret_by_phase: with_regret.then(|| trace.regret_by_phase()),
            checkpoints: if with_regret {
                trace
                    .checkpoints()
                    .into_iter()
                    .map(|(time, regret)| Checkpoint { time, regret })
                    .collect()
            } else {
                Vec::new()
            },
            final_is_optimal: oracle.and_then(|o| {
                final_profile
                    .as_ref()
                    .map(|p| p == &o.solution().optimal_profile)
            }),
            final_profile,
            epochs: trace.epochs.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub optimal_profile: Option<ActionProfile>,
    /// Fraction of seeds whose final exploitation profile is optimal.
    pub fraction_optimal: Option<f64>,
    pub mean_total_regret: Option<f64>,
    /// Mean cumulative regret at checkpoints every seed reached.
    pub mean_checkpoints: Vec<Checkpoint>,
}

impl Aggregate {
    pub fn new(runs: &[RunSummary], oracle: Option<&Oracle>) -> Self {
        let n = runs.len() as f64;
        let fraction_optimal = oracle.filter(|_| !runs.is_empty()).map(|_| {
            runs.iter().filter(|r| r.final_is_optimal == Some(true)).count() as f64 / n
        });
        let regrets: Option<Vec<f64>> = runs.iter().map(|r| r.total_regret).collect();
        let mean_total_regret = regrets
            .filter(|r| !r.is_empty())
            .map(|r| r.iter().sum::<f64>() / n);
        let shared = runs.iter().map(|r| r.checkpoints.len()).min().unwrap_or(0);
        let mean_checkpoints = (0..shared)
            .map(|i| Checkpoint {
                time: runs[0].checkpoints[i].time,
                regret: runs.iter().map(|r| r.checkpoints[i].regret).sum::<f64>() / n,
            })
            .collect();
        Self {
            seeds: runs.iter().map(|r| r.seed).collect(),
            optimal_profile: oracle.map(|o| o.solution().optimal_profile.clone()),
            fraction_optimal,
            mean_total_regret,
            mean_checkpoints,
        }
    }
}
