//! Epoch orchestration: exploration, matching, exploitation, repeated until
//! the horizon runs out.
//!
//! Players are [`Agent`]s that own their state, samples, estimates and
//! random stream. The runner only routes each player's own reward back to
//! it; agents never see one another.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{self, Mood, PlayerState};
use crate::env::{ActionProfile, Environment};
use crate::estimator::{self, ClusterOptions, EstimateTable, SampleStore};
use crate::oracle::Oracle;
use crate::rng::{cluster_stream, player_stream, substream, ENV_STREAM};
use crate::schedule::{EpochPlan, ScheduleParams};

pub struct Agent {
    num_channels: usize,
    state: PlayerState,
    store: SampleStore,
    estimates: EstimateTable,
    rng: ChaCha8Rng,
    cluster_rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(id: usize, num_channels: usize, beta: usize, seed: u64) -> Self {
        Self {
            num_channels,
            state: PlayerState::initial(num_channels),
            store: SampleStore::new(num_channels),
            estimates: EstimateTable::zeros(num_channels, beta),
            rng: substream(seed, player_stream(id)),
            cluster_rng: substream(seed, cluster_stream(id)),
        }
    }

    /// An agent that skips estimation and starts from the given table.
    pub fn with_estimates(id: usize, estimates: EstimateTable, seed: u64) -> Self {
        let mut agent = Self::new(id, estimates.num_channels(), estimates.beta, seed);
        agent.estimates = estimates;
        agent
    }

    pub fn state(&self) -> &PlayerState {
        &self.state
    }

    pub fn estimates(&self) -> &EstimateTable {
        &self.estimates
    }

    pub fn samples(&self) -> &SampleStore {
        &self.store
    }

    pub fn explore_choice(&mut self) -> usize {
        estimator::explore_step(self.num_channels, &mut self.rng)
    }

    pub fn record_exploration(&mut self, channel: usize, reward: f64) {
        self.store.push(channel, reward);
    }

    /// Re-clusters all samples. A baseline utility taken from the old table
    /// moves to the new estimate of the same occupancy level.
    pub fn refresh_estimates(&mut self, beta: usize, opts: ClusterOptions) {
        let fresh = estimator::rebuild_estimates(&self.store, beta, opts, &mut self.cluster_rng);
        let a = self.state.baseline_action;
        let u = self.state.baseline_utility;
        if u != 0.0 {
            let level = self.estimates.channel(a).iter().position(|&v| v == u);
            self.state.baseline_utility = match level.map(|n| fresh.get(a, n)) {
                Some(v) if v != 0.0 => v,
                _ => dynamics::utility_from_estimate(a, u, &fresh).1,
            };
        }
        self.estimates = fresh;
    }

    pub fn reset_state(&mut self) {
        self.state = PlayerState::initial(self.num_channels);
    }

    pub fn choose(&mut self, params: &ScheduleParams) -> usize {
        dynamics::choose_action(&self.state, self.num_channels, params.experiment_prob(), &mut self.rng)
    }

    /// Infers the play's utility from its mean reward and updates the state.
    pub fn conclude_play(&mut self, action: usize, mean_reward: f64, eps: f64) -> f64 {
        let (_, utility) = dynamics::utility_from_estimate(action, mean_reward, &self.estimates);
        dynamics::update_state(&mut self.state, action, utility, eps, &mut self.rng);
        utility
    }

    fn clear_counts(&mut self) {
        self.state.content_counts.iter_mut().for_each(|f| *f = 0);
    }

    pub fn exploit_action(&self) -> (usize, bool) {
        dynamics::exploit_action(&self.state.content_counts, &self.estimates)
    }
}

/// Outcome of one synchronous play.
#[derive(Debug, Clone)]
pub struct Play {
    pub profile: ActionProfile,
    pub mean_rewards: Vec<f64>,
    pub utilities: Vec<f64>,
}

fn choose_profile(agents: &mut [Agent], params: &ScheduleParams) -> ActionProfile {
    ActionProfile::from_raw(agents.iter_mut().map(|a| a.choose(params)).collect())
}

/// Mean of `units` reward draws per player with `profile` held fixed.
pub fn measure_play<R: Rng + ?Sized>(env: &Environment, profile: &ActionProfile, units: u64, rng: &mut R) -> Vec<f64> {
    let means = env.table.profile_means(profile);
    let mut sums = vec![0.0; means.len()];
    for _ in 0..units {
        for (s, &m) in sums.iter_mut().zip(&means) {
            *s += env.noise.draw(m, rng);
        }
    }
    sums.iter().map(|s| s / units as f64).collect()
}

/// Every agent picks an action, all hold it for `c_eps` time units, then each
/// updates from its own average reward.
pub fn play_round<R: Rng + ?Sized>(
    agents: &mut [Agent],
    env: &Environment,
    params: &ScheduleParams,
    env_rng: &mut R,
) -> Play {
    let profile = choose_profile(agents, params);
    let mean_rewards = measure_play(env, &profile, params.c_eps, env_rng);
    let utilities = agents
        .iter_mut()
        .zip(profile.actions())
        .zip(&mean_rewards)
        .map(|((agent, &a), &r)| agent.conclude_play(a, r, params.eps))
        .collect();
    Play {
        profile,
        mean_rewards,
        utilities,
    }
}

#[derive(Debug, Clone)]
pub struct MatchingOutcome {
    pub plays_completed: u64,
    pub time_used: u64,
    /// Set when the budget ran out mid-phase.
    pub truncated: bool,
}

/// Runs one matching phase within `budget` time units. From play
/// `count_start` on, each play that leaves a player content on channel `m`
/// increments that player's `content_counts[m]`. `on_play` sees each play
/// and the time units it consumed.
pub fn run_matching_phase<R: Rng + ?Sized>(
    agents: &mut [Agent],
    env: &Environment,
    plan: &EpochPlan,
    params: &ScheduleParams,
    budget: u64,
    env_rng: &mut R,
    mut on_play: impl FnMut(&Play, u64),
) -> MatchingOutcome {
    agents.iter_mut().for_each(Agent::clear_counts);
    let mut used = 0;
    for p in 1..=plan.matching_plays {
        if budget - used < params.c_eps {
            // Cut short: the play starts but never finishes.
            let partial = budget - used;
            if partial > 0 {
                let profile = choose_profile(agents, params);
                let play = Play {
                    mean_rewards: vec![f64::NAN; profile.num_players()],
                    utilities: vec![f64::NAN; profile.num_players()],
                    profile,
                };
                on_play(&play, partial);
            }
            return MatchingOutcome {
                plays_completed: p - 1,
                time_used: budget,
                truncated: true,
            };
        }
        let play = play_round(agents, env, params, env_rng);
        used += params.c_eps;
        if p >= plan.count_start {
            for (agent, &a) in agents.iter_mut().zip(play.profile.actions()) {
                if agent.state.mood == Mood::Content {
                    agent.state.content_counts[a] += 1;
                }
            }
        }
        on_play(&play, params.c_eps);
    }
    MatchingOutcome {
        plays_completed: plan.matching_plays,
        time_used: used,
        truncated: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Exploration,
    Matching,
    Exploitation,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Exploration => "explore",
            Phase::Matching => "match",
            Phase::Exploitation => "exploit",
        }
    }
}

/// A run of consecutive time units with one profile.
#[derive(Debug, Clone)]
pub struct Segment {
    pub start: u64,
    pub len: u64,
    pub epoch: u32,
    pub phase: Phase,
    pub profile: ActionProfile,
    /// Per-time-unit regret; `None` without an oracle.
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub plan: EpochPlan,
    pub start: u64,
    pub matching_start: Option<u64>,
    pub exploitation_start: Option<u64>,
    pub end: u64,
    pub exploit_profile: Option<ActionProfile>,
    /// Players that fell back to their best solo estimate.
    pub fallback: Vec<bool>,
    pub completed: bool,
    pub content_counts: Vec<Vec<u64>>,
    pub estimates: Vec<EstimateTable>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub seed: u64,
    pub horizon: u64,
    pub num_players: usize,
    pub segments: Vec<Segment>,
    pub epochs: Vec<EpochRecord>,
    /// The last epoch was cut off by the horizon.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseRegret {
    pub exploration: f64,
    pub matching: f64,
    pub exploitation: f64,
}

impl PhaseRegret {
    pub fn total(&self) -> f64 {
        self.exploration + self.matching + self.exploitation
    }
}

impl RunTrace {
    pub fn elapsed(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.start + s.len)
    }

    pub fn has_regret(&self) -> bool {
        self.segments.iter().all(|s| s.regret.is_some())
    }

    pub fn total_regret(&self) -> f64 {
        self.segments.iter().map(|s| s.regret.unwrap_or(0.0) * s.len as f64).sum()
    }

    pub fn regret_by_phase(&self) -> PhaseRegret {
        let mut out = PhaseRegret::default();
        for s in &self.segments {
            let r = s.regret.unwrap_or(0.0) * s.len as f64;
            match s.phase {
                Phase::Exploration => out.exploration += r,
                Phase::Matching => out.matching += r,
                Phase::Exploitation => out.exploitation += r,
            }
        }
        out
    }

    /// Cumulative regret after each of the given (sorted) times.
    pub fn cumulative_regret_at(&self, times: &[u64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let mut acc = 0.0;
        let mut seg = 0;
        for &t in times {
            while seg < self.segments.len() && self.segments[seg].start + self.segments[seg].len <= t {
                let s = &self.segments[seg];
                acc += s.regret.unwrap_or(0.0) * s.len as f64;
                seg += 1;
            }
            let partial = self
                .segments
                .get(seg)
                .filter(|s| s.start < t)
                .map_or(0.0, |s| s.regret.unwrap_or(0.0) * (t - s.start) as f64);
            out.push(acc + partial);
        }
        out
    }

    /// Powers of two up to the elapsed time, with cumulative regret.
    pub fn checkpoints(&self) -> Vec<(u64, f64)> {
        let end = self.elapsed();
        let times: Vec<u64> = (0..64).map(|i| 1u64 << i).take_while(|&t| t <= end).collect();
        let values = self.cumulative_regret_at(&times);
        times.into_iter().zip(values).collect()
    }

    /// Exploitation profile of the last epoch that ran to completion.
    pub fn final_profile(&self) -> Option<&ActionProfile> {
        self.epochs
            .iter()
            .rev()
            .find(|e| e.completed)
            .and_then(|e| e.exploit_profile.as_ref())
    }

    pub fn completed_epochs(&self) -> usize {
        self.epochs.iter().filter(|e| e.completed).count()
    }

    /// One row per time unit: `time,epoch,phase,a1..aK,regret`, times one-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "time,epoch,phase")?;
        for j in 1..=self.num_players {
            write!(w, ",a{j}")?;
        }
        writeln!(w, ",regret")?;
        for s in &self.segments {
            let actions: String = s.profile.one_based().iter().map(|a| format!(",{a}")).collect();
            let regret = s.regret.map_or_else(String::new, |r| r.to_string());
            for t in s.start..s.start + s.len {
                writeln!(w, "{},{},{}{},{}", t + 1, s.epoch, s.phase.label(), actions, regret)?;
            }
        }
        w.flush()
    }
}

struct Recorder<'a> {
    oracle: Option<&'a Oracle>,
    segments: Vec<Segment>,
    now: u64,
}

impl Recorder<'_> {
    fn push(&mut self, epoch: u32, phase: Phase, profile: ActionProfile, len: u64) {
        if len == 0 {
            return;
        }
        let regret = self.oracle.map(|o| o.regret_increment(&profile));
        if let Some(last) = self.segments.last_mut() {
            if last.epoch == epoch && last.phase == phase && last.profile == profile {
                last.len += len;
                self.now += len;
                return;
            }
        }
        self.segments.push(Segment {
            start: self.now,
            len,
            epoch,
            phase,
            profile,
            regret,
        });
        self.now += len;
    }
}

/// Runs the full protocol for `horizon` time units from a single seed.
pub fn run_horizon(
    env: &Environment,
    oracle: Option<&Oracle>,
    params: &ScheduleParams,
    horizon: u64,
    seed: u64,
) -> RunTrace {
    let k = env.num_players();
    let mut agents: Vec<Agent> = (0..k)
        .map(|j| Agent::new(j, env.num_channels(), params.beta, seed))
        .collect();
    let mut env_rng = substream(seed, ENV_STREAM);
    let mut rec = Recorder {
        oracle,
        segments: Vec::new(),
        now: 0,
    };
    let mut epochs = Vec::new();
    let mut truncated = false;

    let mut epoch = 1u32;
    while rec.now < horizon {
        let plan = EpochPlan::new(epoch, params);
        let start = rec.now;
        let mut record = EpochRecord {
            plan,
            start,
            matching_start: None,
            exploitation_start: None,
            end: start,
            exploit_profile: None,
            fallback: vec![false; k],
            completed: false,
            content_counts: Vec::new(),
            estimates: Vec::new(),
        };

        // Exploration
        let steps = plan.explore_len.min(horizon - rec.now);
        for _ in 0..steps {
            let profile = ActionProfile::from_raw(agents.iter_mut().map(Agent::explore_choice).collect());
            let rewards = env.sample_rewards(&profile, &mut env_rng);
            for ((agent, &a), &r) in agents.iter_mut().zip(profile.actions()).zip(&rewards) {
                agent.record_exploration(a, r);
            }
            rec.push(epoch, Phase::Exploration, profile, 1);
        }
        if steps < plan.explore_len {
            truncated = true;
            record.end = rec.now;
            epochs.push(record);
            break;
        }
        for agent in agents.iter_mut() {
            agent.refresh_estimates(params.beta, ClusterOptions::default());
            if params.reset_each_epoch {
                agent.reset_state();
            }
        }
        record.estimates = agents.iter().map(|a| a.estimates().clone()).collect();

        // Matching
        record.matching_start = Some(rec.now);
        let budget = plan.matching_len().min(horizon - rec.now);
        let outcome = run_matching_phase(&mut agents, env, &plan, params, budget, &mut env_rng, |play, len| {
            rec.push(epoch, Phase::Matching, play.profile.clone(), len);
        });
        record.content_counts = agents.iter().map(|a| a.state().content_counts.clone()).collect();
        if outcome.truncated {
            truncated = true;
            record.end = rec.now;
            epochs.push(record);
            break;
        }

        // Exploitation
        let choices: Vec<(usize, bool)> = agents.iter().map(Agent::exploit_action).collect();
        let profile = ActionProfile::from_raw(choices.iter().map(|c| c.0).collect());
        record.fallback = choices.iter().map(|c| c.1).collect();
        record.exploitation_start = Some(rec.now);
        let len = plan.exploit_len.min(horizon - rec.now);
        rec.push(epoch, Phase::Exploitation, profile.clone(), len);
        record.exploit_profile = Some(profile);
        record.completed = len == plan.exploit_len;
        record.end = rec.now;
        truncated = !record.completed;
        epochs.push(record);
        epoch += 1;
    }

    RunTrace {
        seed,
        horizon,
        num_players: k,
        segments: rec.segments,
        epochs,
        truncated,
    }
}
