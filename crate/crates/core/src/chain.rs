//! Exact analysis of the matching dynamics on small instances.
//!
//! The joint state of all players (baseline action, baseline utility, mood)
//! is finite once utilities are restricted to the values a player can ever
//! compute. This module enumerates that space, builds the one-play
//! transition kernel, finds the recurrent classes of the unperturbed kernel
//! and solves for stationary distributions of the perturbed one.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::dynamics::{self, Mood, PlayerState};
use crate::env::{occupancy, ActionProfile, MeanRewardTable};
use crate::error::{Error, Result};
use crate::estimator::EstimateTable;
use crate::oracle::for_each_profile;

pub const DEFAULT_STATE_CAP: u128 = 100_000;
pub const DEFAULT_DENSE_LIMIT: usize = 10_000;
pub const DEFAULT_POWER_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_POWER_MAX_ITERATIONS: usize = 1_000_000;

/// One player's part of a joint state. `utility` indexes the player's utility set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocalState {
    pub action: usize,
    pub utility: usize,
    pub mood: Mood,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointState(pub Vec<LocalState>);

/// How a player's utility is read off a play.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityModel {
    /// Always the estimate nearest the true mean.
    Exact,
    /// With probability `p_eps`, the nearest *other* nonzero estimate of the
    /// same channel instead.
    Miscalculation { p_eps: f64 },
}

/// Enumerated joint state space.
#[derive(Debug, Clone)]
pub struct StateSpace {
    table: MeanRewardTable,
    estimates: Vec<EstimateTable>,
    /// Per player: distinct nonzero estimates, descending, then 0.
    utilities: Vec<Vec<f64>>,
    local_sizes: Vec<usize>,
    len: usize,
}

impl StateSpace {
    /// Utility sets come from the ground-truth means.
    pub fn exact(table: &MeanRewardTable, cap: u128) -> Result<Self> {
        let estimates = (0..table.num_players()).map(|j| EstimateTable::exact(table, j)).collect();
        Self::with_estimates(table, estimates, cap)
    }

    /// Utility sets come from the given per-player estimate tables.
    pub fn with_estimates(table: &MeanRewardTable, estimates: Vec<EstimateTable>, cap: u128) -> Result<Self> {
        assert_eq!(estimates.len(), table.num_players());
        let m = table.num_channels();
        let utilities: Vec<Vec<f64>> = estimates
            .iter()
            .map(|e| {
                let mut vals: Vec<f64> = e.means.iter().flatten().copied().filter(|&v| v != 0.0).collect();
                vals.sort_by(|a, b| b.total_cmp(a));
                vals.dedup();
                vals.push(0.0);
                vals
            })
            .collect();
        let local_sizes: Vec<usize> = utilities.iter().map(|u| m * u.len() * 2).collect();
        let states = local_sizes.iter().fold(1u128, |acc, &s| acc.saturating_mul(s as u128));
        if states > cap {
            return Err(Error::StateSpaceTooLarge { states, cap });
        }
        Ok(Self {
            table: table.clone(),
            estimates,
            utilities,
            local_sizes,
            len: states as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_players(&self) -> usize {
        self.local_sizes.len()
    }

    pub fn utilities(&self, player: usize) -> &[f64] {
        &self.utilities[player]
    }

    fn local_index(&self, player: usize, s: LocalState) -> usize {
        let mood = usize::from(s.mood == Mood::Discontent);
        (s.action * self.utilities[player].len() + s.utility) * 2 + mood
    }

    fn local_state(&self, player: usize, idx: usize) -> LocalState {
        let mood = if idx.is_multiple_of(2) { Mood::Content } else { Mood::Discontent };
        let rest = idx / 2;
        let nu = self.utilities[player].len();
        LocalState {
            action: rest / nu,
            utility: rest % nu,
            mood,
        }
    }

    /// Position of a joint state; player 0 is the most significant digit.
    pub fn index(&self, state: &JointState) -> usize {
        state
            .0
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &s)| acc * self.local_sizes[j] + self.local_index(j, s))
    }

    pub fn state(&self, mut index: usize) -> JointState {
        let mut locals = vec![
            LocalState {
                action: 0,
                utility: 0,
                mood: Mood::Content
            };
            self.num_players()
        ];
        for j in (0..self.num_players()).rev() {
            locals[j] = self.local_state(j, index % self.local_sizes[j]);
            index /= self.local_sizes[j];
        }
        JointState(locals)
    }

    /// All states in index order.
    pub fn states(&self) -> Vec<JointState> {
        (0..self.len).map(|i| self.state(i)).collect()
    }

    pub fn utility_index(&self, player: usize, value: f64) -> Option<usize> {
        self.utilities[player].iter().position(|&u| u == value)
    }

    /// Maps live player states onto a state index, if their utilities are in the sets.
    pub fn index_of_players(&self, players: &[PlayerState]) -> Option<usize> {
        let locals = players
            .iter()
            .enumerate()
            .map(|(j, p)| {
                Some(LocalState {
                    action: p.baseline_action,
                    utility: self.utility_index(j, p.baseline_utility)?,
                    mood: p.mood,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(self.index(&JointState(locals)))
    }

    pub fn utility_value(&self, player: usize, s: LocalState) -> f64 {
        self.utilities[player][s.utility]
    }

    /// Utility player `j` computes under `profile` with an exact reading.
    pub fn play_utility(&self, player: usize, profile: &ActionProfile) -> f64 {
        let counts = occupancy(profile, self.table.num_channels());
        let a = profile.actions()[player];
        let observed = self.table.true_mean(player, a, counts[a]);
        dynamics::utility_from_estimate(a, observed, &self.estimates[player]).1
    }

    /// Nearest nonzero estimate on `channel` other than `value`.
    fn misread(&self, player: usize, channel: usize, value: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for &v in self.estimates[player].channel(channel) {
            if v == 0.0 || v == value {
                continue;
            }
            if best.is_none_or(|b| (v - value).abs() < (b - value).abs()) {
                best = Some(v);
            }
        }
        best
    }

    /// The state where every player is content on `profile` with the
    /// utility that profile yields.
    pub fn aligned_state(&self, profile: &ActionProfile) -> usize {
        let locals = (0..self.num_players())
            .map(|j| LocalState {
                action: profile.actions()[j],
                utility: self
                    .utility_index(j, self.play_utility(j, profile))
                    .expect("play utility is in the utility set"),
                mood: Mood::Content,
            })
            .collect();
        self.index(&JointState(locals))
    }

    /// Aligned all-content states, one per profile, in lexicographic profile order.
    pub fn aligned_states(&self) -> Vec<(ActionProfile, usize)> {
        let mut out = Vec::new();
        for_each_profile(self.num_players(), self.table.num_channels(), |p| {
            out.push((p.clone(), self.aligned_state(p)));
        });
        out
    }

    pub fn is_all_discontent(&self, index: usize) -> bool {
        self.state(index).0.iter().all(|s| s.mood == Mood::Discontent)
    }

    /// `[(1,2),(0.9,0.6),(C,C)]`: one-based actions, utilities, moods.
    pub fn describe(&self, index: usize) -> String {
        let s = self.state(index);
        let join = |parts: Vec<String>| parts.join(",");
        let actions = join(s.0.iter().map(|l| (l.action + 1).to_string()).collect());
        let utils = join(
            s.0.iter()
                .enumerate()
                .map(|(j, &l)| self.utility_value(j, l).to_string())
                .collect(),
        );
        let moods = join(
            s.0.iter()
                .map(|l| if l.mood == Mood::Content { "C" } else { "D" }.to_string())
                .collect(),
        );
        format!("[({actions}),({utils}),({moods})]")
    }
}

/// Row-stochastic one-play kernel in sparse row form.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub eps: f64,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from]
            .binary_search_by_key(&to, |&(c, _)| c)
            .map_or(0.0, |i| self.rows[from][i].1)
    }

    pub fn max_row_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `pi * P`.
    pub fn left_multiply(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; pi.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if pi[i] == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += pi[i] * p;
            }
        }
        out
    }
}

/// One-play transition kernel at perturbation `eps` with experimentation exponent `exp_c`.
pub fn build_kernel(space: &StateSpace, eps: f64, exp_c: f64, model: UtilityModel) -> TransitionMatrix {
    let m = space.table.num_channels();
    let k = space.num_players();
    let experiment = eps.powf(exp_c);
    let mut rows = Vec::with_capacity(space.len());

    for index in 0..space.len() {
        let state = space.state(index);
        let action_dists: Vec<Vec<(usize, f64)>> = state
            .0
            .iter()
            .map(|s| {
                dynamics::action_probabilities(s.mood, s.action, m, experiment)
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, p)| p > 0.0)
                    .collect()
            })
            .collect();

        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for_each_choice(&action_dists, |choice| {
            let profile = ActionProfile::from_raw(choice.iter().map(|&(a, _)| a).collect());
            let p_profile: f64 = choice.iter().map(|&(_, p)| p).product();
            let outcomes: Vec<Vec<(usize, f64)>> = (0..k)
                .map(|j| player_outcomes(space, j, state.0[j], &profile, eps, model))
                .collect();
            for_each_choice(&outcomes, |next| {
                let to = next
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (j, &(local, _))| acc * space.local_sizes[j] + local);
                let p: f64 = p_profile * next.iter().map(|&(_, p)| p).product::<f64>();
                if p > 0.0 {
                    *row.entry(to).or_insert(0.0) += p;
                }
            });
        });
        rows.push(row.into_iter().collect());
    }
    TransitionMatrix { eps, rows }
}

/// Distribution of player `j`'s next local state (as a local index) given the profile.
fn player_outcomes(
    space: &StateSpace,
    j: usize,
    current: LocalState,
    profile: &ActionProfile,
    eps: f64,
    model: UtilityModel,
) -> Vec<(usize, f64)> {
    let a = profile.actions()[j];
    let exact = space.play_utility(j, profile);
    let readings = match model {
        UtilityModel::Exact => vec![(exact, 1.0)],
        UtilityModel::Miscalculation { p_eps } => match space.misread(j, a, exact) {
            Some(wrong) if p_eps > 0.0 => vec![(exact, 1.0 - p_eps), (wrong, p_eps)],
            _ => vec![(exact, 1.0)],
        },
    };
    let baseline = space.utility_value(j, current);
    let mut out = Vec::with_capacity(4);
    for (u, pr) in readings {
        let keep = current.mood == Mood::Content && a == current.action && u == baseline;
        if keep {
            out.push((space.local_index(j, current), pr));
            continue;
        }
        let ui = space.utility_index(j, u).expect("reading is in the utility set");
        let accept = dynamics::acceptance_probability(eps, u);
        for (mood, p) in [(Mood::Content, accept), (Mood::Discontent, 1.0 - accept)] {
            if p > 0.0 {
                let next = LocalState {
                    action: a,
                    utility: ui,
                    mood,
                };
                out.push((space.local_index(j, next), pr * p));
            }
        }
    }
    out
}

/// Calls `f` on every combination picking one entry from each list.
fn for_each_choice<T: Copy>(lists: &[Vec<T>], mut f: impl FnMut(&[T])) {
    if lists.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; lists.len()];
    let mut pick: Vec<T> = lists.iter().map(|l| l[0]).collect();
    loop {
        f(&pick);
        let mut j = lists.len();
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < lists[j].len() {
                pick[j] = lists[j][idx[j]];
                break;
            }
            idx[j] = 0;
            pick[j] = lists[j][0];
        }
    }
}

/// Strongly connected components of the kernel's support graph, each sorted.
pub fn strongly_connected_components(kernel: &TransitionMatrix) -> Vec<Vec<usize>> {
    let mut graph = DiGraph::<(), ()>::with_capacity(kernel.len(), 0);
    let nodes: Vec<_> = (0..kernel.len()).map(|_| graph.add_node(())).collect();
    for (i, row) in kernel.rows.iter().enumerate() {
        for &(j, p) in row {
            if p > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    comps.sort();
    comps
}

/// Closed communicating classes: components no positive transition leaves.
pub fn recurrence_classes(kernel: &TransitionMatrix) -> Vec<Vec<usize>> {
    let comps = strongly_connected_components(kernel);
    let mut owner = vec![0usize; kernel.len()];
    for (c, members) in comps.iter().enumerate() {
        for &s in members {
            owner[s] = c;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&s| kernel.rows[s].iter().all(|&(t, p)| p == 0.0 || owner[t] == *c))
        })
        .map(|(_, members)| members.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Dense,
    Power,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub dense_limit: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            dense_limit: DEFAULT_DENSE_LIMIT,
            tolerance: DEFAULT_POWER_TOLERANCE,
            max_iterations: DEFAULT_POWER_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stationary {
    pub pi: Vec<f64>,
    /// `max_i |(pi P)_i - pi_i|`.
    pub residual: f64,
    pub method: SolveMethod,
}

fn residual(kernel: &TransitionMatrix, pi: &[f64]) -> f64 {
    kernel
        .left_multiply(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Solves `pi = pi P`, `sum(pi) = 1`. Requires a single closed class.
pub fn stationary_distribution(kernel: &TransitionMatrix, opts: SolveOptions) -> Result<Stationary> {
    let n = kernel.len();
    if n <= opts.dense_limit {
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, row) in kernel.rows.iter().enumerate() {
            for &(j, p) in row {
                a[(j, i)] += p;
            }
        }
        for i in 0..n {
            a[(i, i)] -= 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Solve("singular system; the chain has more than one closed class".into()))?;
        let mut pi: Vec<f64> = x.iter().copied().collect();
        if let Some(&worst) = pi.iter().filter(|&&v| v < -1e-9).min_by(|a, b| a.total_cmp(b)) {
            return Err(Error::Solve(format!("negative stationary mass {worst:e}")));
        }
        for v in pi.iter_mut() {
            *v = v.max(0.0);
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= total);
        let residual = residual(kernel, &pi);
        return Ok(Stationary {
            pi,
            residual,
            method: SolveMethod::Dense,
        });
    }

    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..opts.max_iterations {
        let next = kernel.left_multiply(&pi);
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change <= opts.tolerance {
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|v| *v /= total);
            let residual = residual(kernel, &pi);
            return Ok(Stationary {
                pi,
                residual,
                method: SolveMethod::Power,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual: residual(kernel, &pi),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub eps: f64,
    pub pi_optimal: f64,
    pub pi_aligned_content: f64,
    pub pi_all_discontent: f64,
    /// Largest mass on any other aligned content state.
    pub pi_best_other_aligned: f64,
    pub residual: f64,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub optimal_profile: ActionProfile,
    pub rows: Vec<StabilityRow>,
    /// Some grid point puts more than half the mass on the optimal state.
    pub majority_reached: bool,
}

/// Stationary mass on the optimal aligned state, all aligned states and the
/// all-discontent set, per perturbation level.
pub fn stability_report(
    space: &StateSpace,
    optimal: &ActionProfile,
    eps_grid: &[f64],
    exp_c: f64,
    model: UtilityModel,
    opts: SolveOptions,
) -> Result<StabilityReport> {
    let aligned = space.aligned_states();
    let target = space.aligned_state(optimal);
    let discontent: Vec<usize> = (0..space.len()).filter(|&i| space.is_all_discontent(i)).collect();
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let kernel = build_kernel(space, eps, exp_c, model);
        let st = stationary_distribution(&kernel, opts)?;
        rows.push(StabilityRow {
            eps,
            pi_optimal: st.pi[target],
            pi_aligned_content: aligned.iter().map(|&(_, i)| st.pi[i]).sum(),
            pi_all_discontent: discontent.iter().map(|&i| st.pi[i]).sum(),
            pi_best_other_aligned: aligned
                .iter()
                .filter(|&&(_, i)| i != target)
                .map(|&(_, i)| st.pi[i])
                .fold(0.0, f64::max),
            residual: st.residual,
            method: st.method,
        });
    }
    Ok(StabilityReport {
        optimal_profile: optimal.clone(),
        majority_reached: rows.iter().any(|r| r.pi_optimal > 0.5),
        rows,
    })
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> MeanRewardTable {
        MeanRewardTable::new(
            2,
            2,
            2,
            &[vec![0.9, 0.3], vec![0.5, 0.2], vec![0.8, 0.25], vec![0.6, 0.15]],
        )
        .unwrap()
    }

    fn single() -> MeanRewardTable {
        MeanRewardTable::new(1, 2, 1, &[vec![0.7], vec![0.4]]).unwrap()
    }

    #[test]
    fn desk_state_count() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        assert_eq!(space.len(), 400);
        assert_eq!(space.utilities(0), &[0.9, 0.5, 0.3, 0.2, 0.0]);
        assert_eq!(space.utilities(1), &[0.8, 0.6, 0.25, 0.15, 0.0]);
    }

    #[test]
    fn tiny_state_count() {
        let t = MeanRewardTable::new(1, 1, 1, &[vec![0.5]]).unwrap();
        assert_eq!(StateSpace::exact(&t, DEFAULT_STATE_CAP).unwrap().len(), 4);
    }

    #[test]
    fn state_cap_enforced() {
        assert!(matches!(
            StateSpace::exact(&desk(), 399),
            Err(Error::StateSpaceTooLarge { states: 400, cap: 399 })
        ));
    }

    #[test]
    fn index_round_trips() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        let states = space.states();
        for (i, s) in states.iter().enumerate() {
            assert_eq!(space.index(s), i);
        }
        assert_eq!(states, space.states());
    }

    #[test]
    fn optimal_state_description() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        let z = space.aligned_state(&ActionProfile::from_one_based(&[1, 2], 2).unwrap());
        assert_eq!(space.describe(z), "[(1,2),(0.9,0.6),(C,C)]");
    }

    #[test]
    fn rows_are_stochastic() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        for eps in [0.0, 0.1, 0.5] {
            let k = build_kernel(&space, eps, 5.0, UtilityModel::Exact);
            assert!(k.max_row_error() < 1e-12);
            assert!(k.rows.iter().flatten().all(|&(_, p)| p >= 0.0));
        }
        let k = build_kernel(&space, 0.2, 5.0, UtilityModel::Miscalculation { p_eps: 0.01 });
        assert!(k.max_row_error() < 1e-12);
    }

    #[test]
    fn unperturbed_aligned_states_absorb() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        let k = build_kernel(&space, 0.0, 5.0, UtilityModel::Exact);
        for (_, i) in space.aligned_states() {
            assert_eq!(k.prob(i, i), 1.0);
        }
    }

    #[test]
    fn unperturbed_discontent_stays_discontent() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        let k = build_kernel(&space, 0.0, 5.0, UtilityModel::Exact);
        for i in (0..space.len()).filter(|&i| space.is_all_discontent(i)) {
            let leave: f64 = k.rows[i]
                .iter()
                .filter(|&&(j, _)| !space.is_all_discontent(j))
                .map(|&(_, p)| p)
                .sum();
            assert_eq!(leave, 0.0);
        }
    }

    fn check_unperturbed_classes(table: &MeanRewardTable, expected_singletons: usize) {
        let space = StateSpace::exact(table, DEFAULT_STATE_CAP).unwrap();
        let k = build_kernel(&space, 0.0, 5.0, UtilityModel::Exact);
        let classes = recurrence_classes(&k);
        assert_eq!(classes.len(), 1 + expected_singletons);
        let aligned: Vec<usize> = space.aligned_states().into_iter().map(|(_, i)| i).collect();
        let mut singles = 0;
        let mut discontent_classes = 0;
        for c in &classes {
            if c.len() == 1 && aligned.contains(&c[0]) {
                singles += 1;
            } else {
                assert!(c.iter().all(|&i| space.is_all_discontent(i)));
                discontent_classes += 1;
            }
        }
        assert_eq!((singles, discontent_classes), (expected_singletons, 1));
        // mixed-mood states are all transient
        let recurrent: Vec<usize> = classes.concat();
        for i in 0..space.len() {
            let moods: Vec<Mood> = space.state(i).0.iter().map(|s| s.mood).collect();
            if moods.contains(&Mood::Content) && moods.contains(&Mood::Discontent) {
                assert!(!recurrent.contains(&i));
            }
        }
    }

    #[test]
    fn unperturbed_classes_desk() {
        check_unperturbed_classes(&desk(), 4);
    }

    #[test]
    fn unperturbed_classes_single_player() {
        check_unperturbed_classes(&single(), 2);
    }

    #[test]
    fn perturbed_chain_has_one_closed_class() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        for eps in [0.05, 0.3, 0.9] {
            let k = build_kernel(&space, eps, 5.0, UtilityModel::Exact);
            assert_eq!(recurrence_classes(&k).len(), 1);
        }
    }

    #[test]
    fn stationary_is_a_distribution() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        let k = build_kernel(&space, 0.2, 5.0, UtilityModel::Exact);
        let st = stationary_distribution(&k, SolveOptions::default()).unwrap();
        assert!((st.pi.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(st.pi.iter().all(|&v| v >= 0.0));
        assert!(st.residual < 1e-10);
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        let k = build_kernel(&space, 0.3, 5.0, UtilityModel::Exact);
        let dense = stationary_distribution(&k, SolveOptions::default()).unwrap();
        let power = stationary_distribution(
            &k,
            SolveOptions {
                dense_limit: 0,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(power.method, SolveMethod::Power);
        assert!(total_variation(&dense.pi, &power.pi) < 1e-8);
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        let k = build_kernel(&space, 0.05, 5.0, UtilityModel::Exact);
        let err = stationary_distribution(
            &k,
            SolveOptions {
                dense_limit: 0,
                tolerance: 1e-15,
                max_iterations: 3,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 3, .. }));
    }

    #[test]
    fn report_consistent_with_solve() {
        let t = desk();
        let space = StateSpace::exact(&t, DEFAULT_STATE_CAP).unwrap();
        let opt = ActionProfile::from_one_based(&[1, 2], 2).unwrap();
        let report = stability_report(&space, &opt, &[0.1], 5.0, UtilityModel::Exact, SolveOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 1);
        let k = build_kernel(&space, 0.1, 5.0, UtilityModel::Exact);
        let st = stationary_distribution(&k, SolveOptions::default()).unwrap();
        assert_eq!(report.rows[0].pi_optimal, st.pi[space.aligned_state(&opt)]);
    }

    #[test]
    fn discontent_mass_vanishes() {
        let space = StateSpace::exact(&desk(), DEFAULT_STATE_CAP).unwrap();
        let opt = ActionProfile::from_one_based(&[1, 2], 2).unwrap();
        let report = stability_report(
            &space,
            &opt,
            &[0.3, 0.2, 0.1, 0.05],
            5.0,
            UtilityModel::Exact,
            SolveOptions::default(),
        )
        .unwrap();
        for w in report.rows.windows(2) {
            assert!(w[1].pi_all_discontent < w[0].pi_all_discontent);
        }
        assert!(report.rows.last().unwrap().pi_all_discontent < 1e-3);
    }
}
