//! Tunables of the epoch schedule and the per-epoch lengths they imply.

use serde::{Deserialize, Serialize};

use crate::error::Issue;

/// Smallest value `eps^c` may take when deriving the play length.
pub const EXPERIMENT_PROB_FLOOR: f64 = 1e-12;

// Guards ceilings against values like 10 * 4^1.5 = 80.00000000000001.
fn ceil_tol(x: f64) -> u64 {
    (x - 1e-9).ceil().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Exploration time units per epoch.
    pub t0: u64,
    pub c2: f64,
    pub c3: f64,
    /// Time units per matching play.
    pub c_eps: u64,
    pub delta: f64,
    pub rho: f64,
    pub eps: f64,
    /// Experimentation exponent; must exceed `M * N`.
    pub exp_c: f64,
    /// Clusters per channel.
    pub beta: usize,
    /// Start each matching phase with every player discontent.
    pub reset_each_epoch: bool,
}

impl ScheduleParams {
    /// Desk defaults for an instance with `M` channels and `N` occupancy levels.
    /// `t0` and `c_eps` still need to be filled in.
    pub fn desk_defaults(num_channels: usize, max_occupancy: usize) -> Self {
        Self {
            t0: 0,
            c2: 10.0,
            c3: 100.0,
            c_eps: 0,
            delta: 0.5,
            rho: 0.5,
            eps: 0.1,
            exp_c: (num_channels * max_occupancy + 1) as f64,
            beta: max_occupancy,
            reset_each_epoch: false,
        }
    }

    /// Probability a content player leaves its baseline action.
    pub fn experiment_prob(&self) -> f64 {
        self.eps.powf(self.exp_c)
    }

    pub fn check(&self, num_channels: usize, max_occupancy: usize) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mn = (num_channels * max_occupancy) as f64;
        if !(self.exp_c > mn) {
            issues.push(Issue::new(
                "schedule.exp_c",
                format!("experimentation exponent {} must exceed M*N = {mn}", self.exp_c),
            ));
        }
        for (path, v) in [
            ("schedule.delta", self.delta),
            ("schedule.rho", self.rho),
            ("schedule.eps", self.eps),
        ] {
            if !(v > 0.0 && v < 1.0) {
                issues.push(Issue::new(path, format!("{v} outside the open interval (0,1)")));
            }
        }
        for (path, v) in [("schedule.c2", self.c2), ("schedule.c3", self.c3)] {
            if !(v > 0.0 && v.is_finite()) {
                issues.push(Issue::new(path, format!("{v} must be positive")));
            }
        }
        if self.t0 == 0 {
            issues.push(Issue::new("schedule.t0", "must be at least 1"));
        }
        if self.c_eps == 0 {
            issues.push(Issue::new("schedule.c_eps", "must be at least 1"));
        }
        if self.beta == 0 {
            issues.push(Issue::new("schedule.beta", "must be at least 1"));
        }
        issues
    }
}

/// Play length that makes a utility misreading at most `eps^c` likely:
/// `ceil(2 ln(2 / eps^c) / (gap + nu_min)^2)`, with `eps^c` floored at
/// [`EXPERIMENT_PROB_FLOOR`]. Without `nu_min` the gap is used alone.
pub fn derive_c_eps(eps: f64, exp_c: f64, delta_gap: f64, nu_min: Option<f64>) -> u64 {
    let p = eps.powf(exp_c).max(EXPERIMENT_PROB_FLOOR);
    let width = delta_gap + nu_min.unwrap_or(0.0);
    ceil_tol(2.0 * (2.0 / p).ln() / (width * width)).max(1)
}

/// `ceil((8 / gap^2) ln(4 K M N))`.
pub fn heuristic_t0(delta_gap: f64, num_players: usize, num_channels: usize, max_occupancy: usize) -> u64 {
    let kmn = (4 * num_players * num_channels * max_occupancy) as f64;
    ceil_tol(8.0 / (delta_gap * delta_gap) * kmn.ln()).max(1)
}

/// Lengths of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpochPlan {
    pub epoch: u32,
    pub explore_len: u64,
    pub matching_plays: u64,
    /// First play (one-based) whose outcome is counted.
    pub count_start: u64,
    pub exploit_len: u64,
    pub c_eps: u64,
}

impl EpochPlan {
    pub fn new(epoch: u32, params: &ScheduleParams) -> Self {
        assert!(epoch >= 1, "epochs are numbered from 1");
        let growth = (epoch as f64).powf(1.0 + params.delta);
        let matching_plays = ceil_tol(params.c2 * growth).max(1);
        let count_start = ceil_tol(params.rho * params.c2 * growth).clamp(1, matching_plays);
        let exploit_len = ceil_tol(params.c3 * 2f64.powi(epoch as i32)).max(1);
        Self {
            epoch,
            explore_len: params.t0,
            matching_plays,
            count_start,
            exploit_len,
            c_eps: params.c_eps,
        }
    }

    pub fn matching_len(&self) -> u64 {
        self.matching_plays * self.c_eps
    }

    pub fn total_len(&self) -> u64 {
        self.explore_len + self.matching_len() + self.exploit_len
    }

    pub fn counted_plays(&self) -> u64 {
        self.matching_plays - self.count_start + 1
    }
}
