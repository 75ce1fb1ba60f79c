//! Brute-force ground truth: optimal matching, the value gap it implies, the
//! occupancy-identifiability gap, and per-time-unit regret.
//!
//! Utilities depend on how many players share a channel, so the welfare
//! problem is not a linear assignment. The oracle enumerates all `M^K`
//! profiles instead.

use serde::Serialize;

use crate::env::{ActionProfile, MeanRewardTable};
use crate::error::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// System rewards closer than this are treated as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Sum of expected rewards of all players under `profile`.
pub fn system_reward(table: &MeanRewardTable, profile: &ActionProfile) -> f64 {
    table.profile_means(profile).iter().sum()
}

/// Visits every profile in lexicographic order.
pub(crate) fn for_each_profile(
    num_players: usize,
    num_channels: usize,
    mut visit: impl FnMut(&ActionProfile),
) {
    let mut actions = vec![0usize; num_players];
    loop {
        visit(&ActionProfile::from_raw(actions.clone()));
        let mut j = num_players;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            actions[j] += 1;
            if actions[j] < num_channels {
                break;
            }
            actions[j] = 0;
        }
    }
}

pub fn profile_count(num_players: usize, num_channels: usize) -> u128 {
    (0..num_players).fold(1u128, |acc, _| acc.saturating_mul(num_channels as u128))
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchingSolution {
    pub optimal_profile: ActionProfile,
    pub j1: f64,
    /// Best system reward strictly below `j1`; equals `j1` when every profile ties.
    pub j2: f64,
    pub delta: f64,
    pub unique: bool,
}

/// Exhaustive search for the welfare-maximizing profile. Ties go to the
/// lexicographically smallest profile.
pub fn solve_matching(table: &MeanRewardTable, cap: u128) -> Result<MatchingSolution> {
    let (k, m) = (table.num_players(), table.num_channels());
    let profiles = profile_count(k, m);
    if profiles > cap {
        return Err(Error::OracleTooLarge { profiles, cap });
    }

    let mut values = Vec::with_capacity(profiles as usize);
    let mut best: Option<(f64, ActionProfile)> = None;
    for_each_profile(k, m, |p| {
        let v = system_reward(table, p);
        values.push(v);
        if best.as_ref().is_none_or(|(b, _)| v > b + TIE_TOLERANCE) {
            best = Some((v, p.clone()));
        }
    });
    let (j1, optimal_profile) = best.expect("at least one profile");
    let attaining = values.iter().filter(|&&v| v >= j1 - TIE_TOLERANCE).count();
    let j2 = values
        .iter()
        .copied()
        .filter(|&v| v < j1 - TIE_TOLERANCE)
        .fold(f64::NEG_INFINITY, f64::max);
    let j2 = if j2.is_finite() { j2 } else { j1 };
    let delta = (j1 - j2) / (2.0 * (m * table.max_occupancy()) as f64);

    Ok(MatchingSolution {
        optimal_profile,
        j1,
        j2,
        delta,
        unique: attaining == 1,
    })
}

/// Smallest gap between two nonzero means of the same (player, channel).
/// `None` when no pair exists, e.g. with a single occupancy level.
pub fn compute_nu_min(table: &MeanRewardTable) -> Option<f64> {
    let mut best: Option<f64> = None;
    for j in 0..table.num_players() {
        for m in 0..table.num_channels() {
            let nz: Vec<f64> = table.row(j, m).iter().copied().filter(|&v| v != 0.0).collect();
            for (a, &x) in nz.iter().enumerate() {
                for &y in &nz[a + 1..] {
                    let gap = (x - y).abs();
                    best = Some(best.map_or(gap, |b| b.min(gap)));
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparabilityViolation {
    /// One-based player, channel and occupancy levels.
    pub player: usize,
    pub channel: usize,
    pub n1: usize,
    pub n2: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparabilityReport {
    pub nu_min: Option<f64>,
    pub sep_threshold: f64,
    pub passed: bool,
    pub offending: Vec<SeparabilityViolation>,
}

/// `4 M c_sep exp((K-1)/(M-1)) sqrt(sigma^2 + eps2)`.
pub fn separability_threshold(num_players: usize, num_channels: usize, sigma: f64, c_sep: f64, eps2: f64) -> f64 {
    let exponent = if num_channels == 1 {
        if num_players == 1 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num_players - 1) as f64 / (num_channels - 1) as f64
    };
    4.0 * num_channels as f64 * c_sep * exponent.exp() * (sigma * sigma + eps2).sqrt()
}

/// Checks every nonzero occupancy gap against the separability threshold.
/// Report-only: a failed check is a warning.
pub fn check_separability(table: &MeanRewardTable, sigma: f64, c_sep: f64, eps2: f64) -> SeparabilityReport {
    let sep_threshold = separability_threshold(table.num_players(), table.num_channels(), sigma, c_sep, eps2);
    let mut offending = Vec::new();
    for j in 0..table.num_players() {
        for m in 0..table.num_channels() {
            let row = table.row(j, m);
            for n1 in 0..row.len() {
                for n2 in n1 + 1..row.len() {
                    if row[n1] == 0.0 || row[n2] == 0.0 {
                        continue;
                    }
                    let gap = (row[n1] - row[n2]).abs();
                    if gap < sep_threshold {
                        offending.push(SeparabilityViolation {
                            player: j + 1,
                            channel: m + 1,
                            n1: n1 + 1,
                            n2: n2 + 1,
                            gap,
                        });
                    }
                }
            }
        }
    }
    SeparabilityReport {
        nu_min: compute_nu_min(table),
        sep_threshold,
        passed: offending.is_empty(),
        offending,
    }
}

/// Ground truth for one instance, used for regret accounting.
#[derive(Debug, Clone)]
pub struct Oracle {
    table: MeanRewardTable,
    solution: MatchingSolution,
}

impl Oracle {
    pub fn new(table: MeanRewardTable, cap: u128) -> Result<Self> {
        let solution = solve_matching(&table, cap)?;
        Ok(Self { table, solution })
    }

    pub fn solution(&self) -> &MatchingSolution {
        &self.solution
    }

    pub fn table(&self) -> &MeanRewardTable {
        &self.table
    }

    /// Regret of one time unit spent in `profile`.
    pub fn regret_increment(&self, profile: &ActionProfile) -> f64 {
        (self.solution.j1 - system_reward(&self.table, profile)).max(0.0)
    }
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

    fn p(a: &[usize]) -> ActionProfile {
        ActionProfile::from_one_based(a, 2).unwrap()
    }

    #[test]
    fn desk_system_rewards() {
        let t = desk();
        assert!((system_reward(&t, &p(&[1, 2])) - 1.5).abs() < 1e-12);
        assert!((system_reward(&t, &p(&[1, 1])) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn single_player_reward_is_solo_mean() {
        let t = MeanRewardTable::new(1, 3, 2, &[vec![0.4, 0.1], vec![0.7, 0.2], vec![0.3, 0.0]]).unwrap();
        for m in 1..=3 {
            let prof = ActionProfile::from_one_based(&[m], 3).unwrap();
            assert_eq!(system_reward(&t, &prof), t.true_mean(0, m - 1, 1));
        }
    }

    #[test]
    fn desk_matching() {
        let s = solve_matching(&desk(), DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(s.optimal_profile, p(&[1, 2]));
        assert!((s.j1 - 1.5).abs() < 1e-12);
        assert!((s.j2 - 1.3).abs() < 1e-12);
        assert!((s.delta - 0.025).abs() < 1e-12);
        assert!(s.unique);
    }

    #[test]
    fn single_player_two_channels() {
        let t = MeanRewardTable::new(1, 2, 3, &[vec![0.9, 0.5, 0.1], vec![0.5, 0.2, 0.0]]).unwrap();
        let s = solve_matching(&t, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(s.optimal_profile.one_based(), vec![1]);
        assert_eq!(s.j1, 0.9);
        assert_eq!(s.j2, 0.5);
        assert!((s.delta - 0.4 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_tie_is_not_unique() {
        let t = MeanRewardTable::new(2, 2, 2, &vec![vec![0.7, 0.2]; 4]).unwrap();
        let s = solve_matching(&t, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!(!s.unique);
        assert_eq!(s.optimal_profile, p(&[1, 2]));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let t = desk();
        assert!(matches!(solve_matching(&t, 3), Err(Error::OracleTooLarge { profiles: 4, cap: 3 })));
    }

    #[test]
    fn nu_min_cases() {
        assert!((compute_nu_min(&desk()).unwrap() - 0.3).abs() < 1e-12);
        let single = MeanRewardTable::new(2, 2, 1, &vec![vec![0.5]; 4]).unwrap();
        assert_eq!(compute_nu_min(&single), None);
        let zeros = MeanRewardTable::new(1, 2, 2, &[vec![0.8, 0.0], vec![0.6, 0.5]]).unwrap();
        assert!((compute_nu_min(&zeros).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn separability_desk_passes() {
        let r = check_separability(&desk(), 0.05, 0.1, 0.0025);
        let expected = 0.8 * std::f64::consts::E * 0.005f64.sqrt();
        assert!((r.sep_threshold - expected).abs() < 1e-12);
        assert!((r.sep_threshold - 0.1538).abs() < 1e-4);
        assert!(r.passed);
    }

    #[test]
    fn separability_fails_with_huge_constant() {
        let r = check_separability(&desk(), 0.05, 10.0, 0.0025);
        assert!(r.sep_threshold > 1.0);
        assert!(!r.passed);
        assert_eq!(r.offending.len(), 4);
    }

    #[test]
    fn separability_vacuous_without_pairs() {
        let t = MeanRewardTable::new(2, 2, 1, &vec![vec![0.5]; 4]).unwrap();
        assert!(check_separability(&t, 0.05, 100.0, 0.5).passed);
    }

    #[test]
    fn regret_increments() {
        let o = Oracle::new(desk(), DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(o.regret_increment(&p(&[1, 2])), 0.0);
        assert!((o.regret_increment(&p(&[2, 1])) - 0.2).abs() < 1e-12);
        assert!((o.regret_increment(&p(&[2, 2])) - 1.15).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_table() -> impl Strategy<Value = MeanRewardTable> {
            (1usize..=3, 1usize..=3)
                .prop_flat_map(|(m, n)| (1..=(m * n).min(3), Just(m), Just(n)))
                .prop_flat_map(|(k, m, n)| {
                let rows = proptest::collection::vec(
                    proptest::collection::vec(0.01f64..0.99, n),
                    k * m,
                );
                rows.prop_filter_map("needs distinct means per row", move |mut rows| {
                    for r in rows.iter_mut() {
                        r.sort_by(|a, b| b.partial_cmp(a).unwrap());
                        r.dedup();
                        if r.len() < n {
                            return None;
                        }
                    }
                    MeanRewardTable::new(k, m, n, &rows).ok()
                })
            })
        }

        // A deliberately naive second enumeration: recursion instead of an odometer.
        fn naive_best(t: &MeanRewardTable, prefix: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
            if prefix.len() == t.num_players() {
                let mut total = 0.0;
                for (j, &a) in prefix.iter().enumerate() {
                    let k = prefix.iter().filter(|&&b| b == a).count();
                    total += if k > t.max_occupancy() { 0.0 } else { t.row(j, a)[k - 1] };
                }
                if total > best.0 + TIE_TOLERANCE {
                    *best = (total, prefix.clone());
                }
                return;
            }
            for a in 0..t.num_channels() {
                prefix.push(a);
                naive_best(t, prefix, best);
                prefix.pop();
            }
        }

        proptest! {
            #[test]
            fn matches_naive_enumeration(t in arb_table()) {
                let s = solve_matching(&t, DEFAULT_ENUMERATION_CAP).unwrap();
                let mut best = (f64::NEG_INFINITY, vec![]);
                naive_best(&t, &mut Vec::new(), &mut best);
                prop_assert!((s.j1 - best.0).abs() < 1e-9);
                prop_assert_eq!(s.optimal_profile.actions(), &best.1[..]);
                prop_assert!(s.j1 >= s.j2);
                prop_assert!(s.delta <= (s.j1 - s.j2) / 2.0 + 1e-15);
            }

            #[test]
            fn regret_nonnegative_and_zero_only_at_optimum(t in arb_table()) {
                let o = Oracle::new(t.clone(), DEFAULT_ENUMERATION_CAP).unwrap();
                for_each_profile(t.num_players(), t.num_channels(), |p| {
                    let r = o.regret_increment(p);
                    assert!(r >= 0.0);
                    let attains = system_reward(&t, p) >= o.solution().j1 - TIE_TOLERANCE;
                    assert_eq!(r <= TIE_TOLERANCE, attains);
                });
            }

            #[test]
            fn argmax_invariant_under_scaling(t in arb_table(), gamma in 0.05f64..=1.0) {
                let s = solve_matching(&t, DEFAULT_ENUMERATION_CAP).unwrap();
                prop_assume!(s.unique && s.j1 - s.j2 > 1e-6);
                let scaled = solve_matching(&t.scaled(gamma).unwrap(), DEFAULT_ENUMERATION_CAP).unwrap();
                prop_assert_eq!(s.optimal_profile, scaled.optimal_profile);
            }
        }
    }
}
