//! Ground-truth reward model.
//!
//! Each player sees its own mean reward for every (channel, occupancy) pair.
//! Means fall strictly with occupancy until they hit zero and stay zero from
//! there on; beyond `max_occupancy` they are always zero. The environment
//! samples rewards around those means and is the only thing players share.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Issue, Result};

/// A joint action: entry `j` is the zero-based channel chosen by player `j`.
///
/// Displayed and serialized with one-based channels, e.g. `(1,2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionProfile(Vec<usize>);

impl ActionProfile {
    pub fn new(actions: Vec<usize>, num_channels: usize) -> Result<Self> {
        let issues: Vec<Issue> = actions
            .iter()
            .enumerate()
            .filter(|(_, &a)| a >= num_channels)
            .map(|(j, &a)| {
                Issue::new(
                    format!("profile[{j}]"),
                    format!("channel {} outside 1..={num_channels}", a + 1),
                )
            })
            .collect();
        if issues.is_empty() {
            Ok(Self(actions))
        } else {
            Err(Error::Invalid(issues))
        }
    }

    /// Builds a profile from one-based channel numbers.
    pub fn from_one_based(actions: &[usize], num_channels: usize) -> Result<Self> {
        if let Some(j) = actions.iter().position(|&a| a == 0) {
            return Err(Error::Invalid(vec![Issue::new(
                format!("profile[{j}]"),
                "channels are numbered from 1",
            )]));
        }
        Self::new(actions.iter().map(|a| a - 1).collect(), num_channels)
    }

    pub(crate) fn from_raw(actions: Vec<usize>) -> Self {
        Self(actions)
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn num_players(&self) -> usize {
        self.0.len()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|a| a + 1).collect()
    }
}

impl fmt::Display for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| (a + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for ActionProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(serializer)
    }
}

/// Per-channel occupancy counts `k(m)` for a profile over `num_channels` channels.
pub fn occupancy(profile: &ActionProfile, num_channels: usize) -> Vec<usize> {
    let mut counts = vec![0; num_channels];
    for &a in profile.actions() {
        counts[a] += 1;
    }
    counts
}

/// Ground-truth means `mu_j(m, k)` for `k = 1..=max_occupancy`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRewardTable {
    num_players: usize,
    num_channels: usize,
    max_occupancy: usize,
    // index: (player * num_channels + channel) * max_occupancy + (k - 1)
    mu: Vec<f64>,
}

impl MeanRewardTable {
    /// `rows` holds one row per (player, channel) in player-major order, each
    /// with `max_occupancy` columns.
    pub fn new(
        num_players: usize,
        num_channels: usize,
        max_occupancy: usize,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let issues = Self::check(num_players, num_channels, max_occupancy, rows);
        if !issues.is_empty() {
            return Err(Error::Invalid(issues));
        }
        Ok(Self {
            num_players,
            num_channels,
            max_occupancy,
            mu: rows.iter().flatten().copied().collect(),
        })
    }

    /// Every constraint the table violates, with the offending field path.
    pub fn check(
        num_players: usize,
        num_channels: usize,
        max_occupancy: usize,
        rows: &[Vec<f64>],
    ) -> Vec<Issue> {
        let mut issues = Vec::new();
        for (name, v) in [
            ("instance.num_players", num_players),
            ("instance.num_channels", num_channels),
            ("instance.max_occupancy", max_occupancy),
        ] {
            if v == 0 {
                issues.push(Issue::new(name, "must be positive"));
            }
        }
        if !issues.is_empty() {
            return issues;
        }
        if num_players > num_channels * max_occupancy {
            issues.push(Issue::new(
                "instance.num_players",
                format!(
                    "K <= M*N violated: {num_players} players > {num_channels} channels * {max_occupancy} occupancy levels"
                ),
            ));
        }
        let expected = num_players * num_channels;
        if rows.len() != expected {
            issues.push(Issue::new(
                "instance.means",
                format!("expected {expected} rows (one per player and channel), found {}", rows.len()),
            ));
            return issues;
        }
        for (r, row) in rows.iter().enumerate() {
            let path = format!(
                "instance.means[{r}] (player {}, channel {})",
                r / num_channels + 1,
                r % num_channels + 1
            );
            if row.len() != max_occupancy {
                issues.push(Issue::new(
                    path,
                    format!("expected {max_occupancy} columns, found {}", row.len()),
                ));
                continue;
            }
            let mut hit_zero = false;
            for (i, &v) in row.iter().enumerate() {
                if !(0.0..1.0).contains(&v) {
                    issues.push(Issue::new(
                        path.clone(),
                        format!("mean at occupancy {} is {v}; nonzero means must lie in (0,1)", i + 1),
                    ));
                    continue;
                }
                if v == 0.0 {
                    hit_zero = true;
                } else if hit_zero {
                    issues.push(Issue::new(
                        path.clone(),
                        format!("mean at occupancy {} is nonzero after a zero", i + 1),
                    ));
                } else if i > 0 && v >= row[i - 1] {
                    issues.push(Issue::new(
                        path.clone(),
                        format!(
                            "means must strictly decrease with occupancy: {} at k={} then {v} at k={}",
                            row[i - 1],
                            i,
                            i + 1
                        ),
                    ));
                }
            }
        }
        issues
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn max_occupancy(&self) -> usize {
        self.max_occupancy
    }

    /// `mu_j(m, k)` with zero-based player and channel, `k >= 1`; zero for `k > N`.
    pub fn true_mean(&self, player: usize, channel: usize, k: usize) -> f64 {
        assert!(player < self.num_players, "player {player} out of range");
        assert!(channel < self.num_channels, "channel {channel} out of range");
        assert!(k >= 1, "occupancy must be at least 1");
        if k > self.max_occupancy {
            return 0.0;
        }
        self.mu[(player * self.num_channels + channel) * self.max_occupancy + k - 1]
    }

    /// The `N` means of one (player, channel) pair.
    pub fn row(&self, player: usize, channel: usize) -> &[f64] {
        let start = (player * self.num_channels + channel) * self.max_occupancy;
        &self.mu[start..start + self.max_occupancy]
    }

    /// Expected reward of every player under `profile`.
    pub fn profile_means(&self, profile: &ActionProfile) -> Vec<f64> {
        let counts = occupancy(profile, self.num_channels);
        profile
            .actions()
            .iter()
            .enumerate()
            .map(|(j, &m)| self.true_mean(j, m, counts[m]))
            .collect()
    }

    /// Rows in the same layout `new` accepts.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.mu.chunks(self.max_occupancy).map(<[f64]>::to_vec).collect()
    }

    /// Same structure with every mean multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let rows: Vec<Vec<f64>> = self
            .rows()
            .into_iter()
            .map(|r| r.into_iter().map(|v| v * factor).collect())
            .collect();
        Self::new(self.num_players, self.num_channels, self.max_occupancy, &rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    TruncatedGaussian,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl RewardModel {
    pub fn deterministic() -> Self {
        Self {
            kind: NoiseKind::Deterministic,
            sigma: 0.0,
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::TruncatedGaussian,
            sigma,
        }
    }

    /// One reward draw around `mean`, clipped to [0,1]. Zero means give exactly zero.
    pub fn draw<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        if mean == 0.0 {
            return 0.0;
        }
        match self.kind {
            NoiseKind::Deterministic => mean,
            NoiseKind::TruncatedGaussian => {
                let z: f64 = rng.sample(StandardNormal);
                (mean + self.sigma * z).clamp(0.0, 1.0)
            }
        }
    }
}

/// The hidden environment: means plus the noise law.
#[derive(Debug, Clone)]
pub struct Environment {
    pub table: MeanRewardTable,
    pub noise: RewardModel,
}

impl Environment {
    pub fn new(table: MeanRewardTable, noise: RewardModel) -> Self {
        Self { table, noise }
    }

    pub fn num_players(&self) -> usize {
        self.table.num_players()
    }

    pub fn num_channels(&self) -> usize {
        self.table.num_channels()
    }

    pub fn true_mean(&self, player: usize, channel: usize, k: usize) -> f64 {
        self.table.true_mean(player, channel, k)
    }

    pub fn occupancy(&self, profile: &ActionProfile) -> Vec<usize> {
        occupancy(profile, self.num_channels())
    }

    /// One reward per player for a single time unit under `profile`.
    pub fn sample_rewards<R: Rng + ?Sized>(&self, profile: &ActionProfile, rng: &mut R) -> Vec<f64> {
        let mut out = self.table.profile_means(profile);
        for r in out.iter_mut() {
            *r = self.noise.draw(*r, rng);
        }
        out
    }
}
