//! Instance and run configuration (TOML).
//!
//! ```toml
//! [instance]
//! num_players = 2
//! num_channels = 2
//! max_occupancy = 2
//! # one row per (player, channel), player-major; max_occupancy columns
//! means = [[0.9, 0.3], [0.5, 0.2], [0.8, 0.25], [0.6, 0.15]]
//!
//! [noise]
//! kind = "truncated-gaussian"   # or "deterministic"
//! sigma = 0.05
//!
//! [schedule]          # every key optional
//! t0 = 1000           # default: ceil(8 / gap^2 * ln(4KMN))
//! c_eps = 232         # default: derived from eps, exp_c and the bounds
//! eps = 0.1
//! exp_c = 5.0         # default: M*N + 1
//!
//! [bounds]            # optional; defaults to the oracle's exact values
//! delta_gap = 0.025
//! nu_min = 0.3
//!
//! [run]
//! horizon = 1000000
//! seeds = [1, 2, 3]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, MeanRewardTable, NoiseKind, RewardModel};
use crate::error::{Error, Issue, Result};
use crate::oracle::{self, Oracle, SeparabilityReport, DEFAULT_ENUMERATION_CAP};
use crate::schedule::{derive_c_eps, heuristic_t0, ScheduleParams};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub instance: RawInstance,
    pub noise: RawNoise,
    #[serde(default)]
    pub schedule: RawSchedule,
    #[serde(default)]
    pub bounds: RawBounds,
    #[serde(default)]
    pub separability: RawSeparability,
    #[serde(default)]
    pub oracle: RawOracle,
    #[serde(default)]
    pub run: RawRun,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub num_players: usize,
    pub num_channels: usize,
    pub max_occupancy: usize,
    pub means: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawNoise {
    pub kind: NoiseKind,
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawSchedule {
    pub t0: Option<u64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c_eps: Option<u64>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub eps: Option<f64>,
    pub exp_c: Option<f64>,
    pub beta: Option<usize>,
    pub reset_each_epoch: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawBounds {
    pub delta_gap: Option<f64>,
    pub nu_min: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawSeparability {
    pub c_sep: f64,
    pub eps2: f64,
}

impl Default for RawSeparability {
    fn default() -> Self {
        Self {
            c_sep: 0.1,
            eps2: 0.0025,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawOracle {
    pub enumeration_cap: u64,
}

impl Default for RawOracle {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_ENUMERATION_CAP as u64,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub horizon: u64,
    pub seeds: Vec<u64>,
}

impl Default for RawRun {
    fn default() -> Self {
        Self {
            horizon: 1_000_000,
            seeds: vec![1],
        }
    }
}

/// A configuration that passed every check, with defaults resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// The configuration text exactly as read.
    pub source: String,
    pub raw: RawConfig,
    pub env: Environment,
    pub schedule: ScheduleParams,
    /// `None` when the instance exceeds the enumeration cap.
    pub oracle: Option<Oracle>,
    pub separability: SeparabilityReport,
    /// Gap and identifiability bounds handed to the players.
    pub delta_gap: f64,
    pub nu_min: Option<f64>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub warnings: Vec<Issue>,
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    validate_config(&text)
}

pub fn parse(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses and checks a configuration. Every violated constraint is reported.
pub fn validate_config(text: &str) -> Result<RunConfig> {
    let raw = parse(text)?;
    let inst = &raw.instance;
    let mut issues = MeanRewardTable::check(inst.num_players, inst.num_channels, inst.max_occupancy, &inst.means);
    let mut warnings = Vec::new();

    if !(raw.noise.sigma >= 0.0 && raw.noise.sigma.is_finite()) {
        issues.push(Issue::new("noise.sigma", format!("{} must be a nonnegative number", raw.noise.sigma)));
    }
    if raw.noise.kind == NoiseKind::TruncatedGaussian && raw.noise.sigma == 0.0 {
        warnings.push(Issue::new("noise.sigma", "zero sigma makes the gaussian model deterministic"));
    }
    let sep = &raw.separability;
    if !(sep.c_sep > 0.0) {
        issues.push(Issue::new("separability.c_sep", "must be positive"));
    }
    if !(sep.eps2 > 0.0 && sep.eps2 < 1.0) {
        issues.push(Issue::new("separability.eps2", "must lie in (0,1)"));
    }
    for (path, v) in [("bounds.delta_gap", raw.bounds.delta_gap), ("bounds.nu_min", raw.bounds.nu_min)] {
        if let Some(v) = v {
            if !(v > 0.0) {
                issues.push(Issue::new(path, format!("{v} must be positive")));
            }
        }
    }
    if raw.run.seeds.is_empty() {
        issues.push(Issue::new("run.seeds", "at least one seed is required"));
    }
    if !issues.is_empty() {
        return Err(Error::Invalid(issues));
    }

    let table = MeanRewardTable::new(inst.num_players, inst.num_channels, inst.max_occupancy, &inst.means)?;
    let noise = RewardModel {
        kind: raw.noise.kind,
        sigma: raw.noise.sigma,
    };
    let separability = oracle::check_separability(&table, noise.sigma, sep.c_sep, sep.eps2);
    if !separability.passed {
        warnings.push(Issue::new(
            "instance.means",
            format!(
                "{} occupancy gaps below the separability threshold {:.4}",
                separability.offending.len(),
                separability.sep_threshold
            ),
        ));
    }

    let oracle = match Oracle::new(table.clone(), raw.oracle.enumeration_cap as u128) {
        Ok(o) => {
            if !o.solution().unique {
                warnings.push(Issue::new("instance.means", "the optimal matching is not unique"));
            }
            Some(o)
        }
        Err(Error::OracleTooLarge { profiles, cap }) => {
            warnings.push(Issue::new(
                "oracle.enumeration_cap",
                format!("{profiles} profiles exceed the cap {cap}; running without ground-truth regret"),
            ));
            None
        }
        Err(e) => return Err(e),
    };

    let delta_gap = raw
        .bounds
        .delta_gap
        .or_else(|| oracle.as_ref().map(|o| o.solution().delta))
        .filter(|&d| d > 0.0);
    let nu_min = raw.bounds.nu_min.or_else(|| oracle::compute_nu_min(&table));

    let (m, n) = (inst.num_channels, inst.max_occupancy);
    let defaults = ScheduleParams::desk_defaults(m, n);
    let s = &raw.schedule;
    let mut schedule = ScheduleParams {
        t0: 0,
        c2: s.c2.unwrap_or(defaults.c2),
        c3: s.c3.unwrap_or(defaults.c3),
        c_eps: 0,
        delta: s.delta.unwrap_or(defaults.delta),
        rho: s.rho.unwrap_or(defaults.rho),
        eps: s.eps.unwrap_or(defaults.eps),
        exp_c: s.exp_c.unwrap_or(defaults.exp_c),
        beta: s.beta.unwrap_or(defaults.beta),
        reset_each_epoch: s.reset_each_epoch.unwrap_or(false),
    };
    let needs_gap = s.t0.is_none() || s.c_eps.is_none();
    match delta_gap {
        Some(gap) => {
            schedule.t0 = s.t0.unwrap_or_else(|| heuristic_t0(gap, inst.num_players, m, n));
            schedule.c_eps = s.c_eps.unwrap_or_else(|| derive_c_eps(schedule.eps, schedule.exp_c, gap, nu_min));
        }
        None if needs_gap => issues.push(Issue::new(
            "bounds.delta_gap",
            "no positive gap bound available (oracle skipped or matching not unique); set bounds.delta_gap or both schedule.t0 and schedule.c_eps",
        )),
        None => {
            schedule.t0 = s.t0.unwrap_or(0);
            schedule.c_eps = s.c_eps.unwrap_or(0);
        }
    }
    issues.extend(schedule.check(m, n));
    if !issues.is_empty() {
        return Err(Error::Invalid(issues));
    }

    Ok(RunConfig {
        source: text.to_string(),
        horizon: raw.run.horizon,
        seeds: raw.run.seeds.clone(),
        env: Environment::new(table, noise),
        schedule,
        oracle,
        separability,
        delta_gap: delta_gap.unwrap_or(0.0),
        nu_min,
        warnings,
        raw,
    })
}
