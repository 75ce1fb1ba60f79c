//! Content/discontent trial-and-error dynamics of a single player.
//!
//! A content player repeats its baseline action except for rare
//! experiments; a discontent player picks uniformly. After each play the
//! player either keeps its state (content and nothing changed) or adopts the
//! play's action and utility, becoming content with probability
//! `eps^(1 - u)`.

use rand::Rng;
use serde::Serialize;

use crate::estimator::EstimateTable;

/// Distances closer than this count as ties when inferring occupancy.
const NEAREST_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mood {
    Content,
    Discontent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerState {
    pub baseline_action: usize,
    pub baseline_utility: f64,
    pub mood: Mood,
    /// Per-channel count of counted plays that ended content on that channel.
    pub content_counts: Vec<u64>,
}

impl PlayerState {
    /// Discontent on channel 0 with zero utility.
    pub fn initial(num_channels: usize) -> Self {
        Self {
            baseline_action: 0,
            baseline_utility: 0.0,
            mood: Mood::Discontent,
            content_counts: vec![0; num_channels],
        }
    }

    pub fn is_content(&self) -> bool {
        self.mood == Mood::Content
    }
}

/// Probability of each channel under the action rule.
pub fn action_probabilities(mood: Mood, baseline: usize, num_channels: usize, experiment_prob: f64) -> Vec<f64> {
    match mood {
        Mood::Discontent => vec![1.0 / num_channels as f64; num_channels],
        Mood::Content if num_channels == 1 => vec![1.0],
        Mood::Content => {
            let mut p = vec![experiment_prob / (num_channels - 1) as f64; num_channels];
            p[baseline] = 1.0 - experiment_prob;
            p
        }
    }
}

/// Draws the player's next channel.
pub fn choose_action<R: Rng + ?Sized>(
    state: &PlayerState,
    num_channels: usize,
    experiment_prob: f64,
    rng: &mut R,
) -> usize {
    match state.mood {
        Mood::Discontent => rng.random_range(0..num_channels),
        Mood::Content => {
            if num_channels == 1 || rng.random::<f64>() >= experiment_prob {
                state.baseline_action
            } else {
                let other = rng.random_range(0..num_channels - 1);
                if other >= state.baseline_action {
                    other + 1
                } else {
                    other
                }
            }
        }
    }
}

/// Infers the occupancy level whose estimate is nearest the observed mean
/// reward, ignoring zero estimates. Returns the zero-based level and the
/// utility it implies; `(None, 0.0)` when the channel has no nonzero estimate.
pub fn utility_from_estimate(channel: usize, observed: f64, estimates: &EstimateTable) -> (Option<usize>, f64) {
    let mut best: Option<(usize, f64)> = None;
    for (n, &v) in estimates.channel(channel).iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let d = (observed - v).abs();
        if best.is_none_or(|(_, bd)| d < bd - NEAREST_TIE) {
            best = Some((n, d));
        }
    }
    match best {
        Some((n, _)) => (Some(n), estimates.get(channel, n)),
        None => (None, 0.0),
    }
}

/// Probability of turning content after adopting utility `u`.
pub fn acceptance_probability(eps: f64, utility: f64) -> f64 {
    eps.powf(1.0 - utility)
}

/// Whether the state is left untouched by a play with this action and utility.
pub fn keeps_state(state: &PlayerState, action: usize, utility: f64) -> bool {
    state.mood == Mood::Content && action == state.baseline_action && utility == state.baseline_utility
}

/// Applies the post-play state update.
pub fn update_state<R: Rng + ?Sized>(state: &mut PlayerState, action: usize, utility: f64, eps: f64, rng: &mut R) {
    if keeps_state(state, action, utility) {
        return;
    }
    state.baseline_action = action;
    state.baseline_utility = utility;
    state.mood = if rng.random::<f64>() < acceptance_probability(eps, utility) {
        Mood::Content
    } else {
        Mood::Discontent
    };
}

/// Channel played during exploitation: the most-often-content channel,
/// smallest index on ties. A player that was never content falls back to
/// its best solo estimate. The flag reports the fallback.
pub fn exploit_action(content_counts: &[u64], estimates: &EstimateTable) -> (usize, bool) {
    if content_counts.iter().any(|&f| f > 0) {
        (argmax_first(content_counts.iter().map(|&f| f as f64)), false)
    } else {
        let solo = (0..estimates.num_channels()).map(|m| estimates.get(m, 0));
        (argmax_first(solo), true)
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn est(rows: &[&[f64]]) -> EstimateTable {
        EstimateTable {
            beta: rows[0].len(),
            means: rows.iter().map(|r| r.to_vec()).collect(),
            empty_channels: vec![],
        }
    }

    fn content(a: usize, u: f64, m: usize) -> PlayerState {
        PlayerState {
            baseline_action: a,
            baseline_utility: u,
            mood: Mood::Content,
            content_counts: vec![0; m],
        }
    }

    #[test]
    fn content_action_probabilities() {
        let eps_c = 0.1f64.powi(5);
        let p = action_probabilities(Mood::Content, 1, 3, eps_c);
        assert!((p[1] - (1.0 - 1e-5)).abs() < 1e-15);
        assert!((p[0] - 5e-6).abs() < 1e-15);
        assert!((p[2] - 5e-6).abs() < 1e-15);
        assert_eq!(action_probabilities(Mood::Discontent, 0, 4, eps_c), vec![0.25; 4]);
        assert_eq!(action_probabilities(Mood::Content, 0, 1, 0.5), vec![1.0]);
    }

    #[test]
    fn unperturbed_content_never_experiments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = content(2, 0.5, 4);
        assert!((0..10_000).all(|_| choose_action(&s, 4, 0.0, &mut rng) == 2));
        assert!((0..100).all(|_| choose_action(&content(0, 0.5, 1), 1, 0.9, &mut rng) == 0));
    }

    #[test]
    fn sampled_actions_follow_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = content(0, 0.5, 3);
        let n = 200_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[choose_action(&s, 3, 0.3, &mut rng)] += 1;
        }
        assert!((counts[0] as f64 / n as f64 - 0.7).abs() < 0.005);
        assert!((counts[1] as f64 / n as f64 - 0.15).abs() < 0.005);
        assert!((counts[2] as f64 / n as f64 - 0.15).abs() < 0.005);
    }

    #[test]
    fn nearest_estimate() {
        let e = est(&[&[0.89, 0.31]]);
        assert_eq!(utility_from_estimate(0, 0.35, &e), (Some(1), 0.31));
        assert_eq!(utility_from_estimate(0, 0.60, &e), (Some(0), 0.89));
        let single = est(&[&[0.9, 0.0]]);
        assert_eq!(utility_from_estimate(0, 0.05, &single), (Some(0), 0.9));
        let empty = est(&[&[0.0, 0.0]]);
        assert_eq!(utility_from_estimate(0, 0.4, &empty), (None, 0.0));
    }

    #[test]
    fn aligned_content_state_is_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = content(1, 0.6, 2);
        let before = s.clone();
        update_state(&mut s, 1, 0.6, 0.1, &mut rng);
        assert_eq!(s, before);
    }

    #[test]
    fn full_utility_always_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let mut s = PlayerState::initial(2);
            update_state(&mut s, 1, 1.0, 0.1, &mut rng);
            assert_eq!(s.mood, Mood::Content);
        }
    }

    #[test]
    fn discontent_acceptance_rate() {
        assert!((acceptance_probability(0.04, 0.5) - 0.2).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 200_000;
        let accepted = (0..n)
            .filter(|_| {
                let mut s = PlayerState::initial(2);
                update_state(&mut s, 1, 0.5, 0.04, &mut rng);
                assert_eq!((s.baseline_action, s.baseline_utility), (1, 0.5));
                s.is_content()
            })
            .count();
        assert!((accepted as f64 / n as f64 - 0.2).abs() < 0.005);
    }

    #[test]
    fn exploitation_choice() {
        let e = est(&[&[0.4, 0.1], &[0.7, 0.2], &[0.1, 0.0]]);
        assert_eq!(exploit_action(&[3, 40, 1], &e), (1, false));
        assert_eq!(exploit_action(&[5, 5], &est(&[&[0.1], &[0.2]])), (0, false));
        assert_eq!(exploit_action(&[0, 0], &est(&[&[0.4], &[0.7]])), (1, true));
    }
}
