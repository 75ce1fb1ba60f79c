//! Exploration-phase estimation.
//!
//! Each player samples channels uniformly, keeps every nonzero reward it has
//! ever seen per channel, and at the end of each exploration phase clusters
//! those rewards into at most `beta` groups. Cluster means, largest first,
//! become the player's estimates for occupancy levels `1..=beta`.

use rand::Rng;
use serde::Serialize;

use crate::env::MeanRewardTable;

/// Uniform channel choice for one exploration time unit.
pub fn explore_step<R: Rng + ?Sized>(num_channels: usize, rng: &mut R) -> usize {
    rng.random_range(0..num_channels)
}

/// Observed rewards per channel. Only grows.
#[derive(Debug, Clone, Default)]
pub struct SampleStore {
    samples: Vec<Vec<f64>>,
    zeros: Vec<usize>,
}

impl SampleStore {
    pub fn new(num_channels: usize) -> Self {
        Self {
            samples: vec![Vec::new(); num_channels],
            zeros: vec![0; num_channels],
        }
    }

    /// Records a reward. Exact zeros (overcrowded channel) are counted but
    /// kept out of the clustering input.
    pub fn push(&mut self, channel: usize, reward: f64) {
        debug_assert!((0.0..=1.0).contains(&reward));
        if reward == 0.0 {
            self.zeros[channel] += 1;
        } else {
            self.samples[channel].push(reward);
        }
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.samples[channel]
    }

    pub fn num_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn zero_count(&self, channel: usize) -> usize {
        self.zeros[channel]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterOptions {
    pub max_iterations: usize,
    pub restarts: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            restarts: 5,
        }
    }
}

/// Result of one Lloyd run from a given initialization.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub centers: Vec<f64>,
    /// Within-cluster sum of squares after each update step.
    pub objective: Vec<f64>,
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (r, c) in centers.iter().enumerate().skip(1) {
        if (x - c).abs() < (x - centers[best]).abs() {
            best = r;
        }
    }
    best
}

fn sse(points: &[f64], centers: &[f64]) -> f64 {
    points
        .iter()
        .map(|&x| {
            let d = x - centers[nearest(centers, x)];
            d * d
        })
        .sum()
}

/// Lloyd iterations on 1-D points. Empty clusters keep their previous center.
pub fn lloyd(points: &[f64], init: Vec<f64>, max_iterations: usize) -> LloydRun {
    let mut centers = init;
    let mut assignment = vec![usize::MAX; points.len()];
    let mut objective = Vec::new();
    for _ in 0..max_iterations {
        let mut changed = false;
        for (i, &x) in points.iter().enumerate() {
            let r = nearest(&centers, x);
            if assignment[i] != r {
                assignment[i] = r;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (&x, &r) in points.iter().zip(&assignment) {
            sums[r] += x;
            counts[r] += 1;
        }
        for r in 0..centers.len() {
            if counts[r] > 0 {
                centers[r] = sums[r] / counts[r] as f64;
            }
        }
        objective.push(
            points
                .iter()
                .zip(&assignment)
                .map(|(&x, &r)| (x - centers[r]).powi(2))
                .sum(),
        );
    }
    LloydRun { centers, objective }
}

/// k-means++ seeding: first center uniform, then proportional to squared distance.
pub fn kmeans_plus_plus<R: Rng + ?Sized>(points: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut dist: Vec<f64> = points.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, &d) in dist.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = points[pick];
        centers.push(c);
        for (d, &x) in dist.iter_mut().zip(points) {
            *d = d.min((x - c).powi(2));
        }
    }
    centers
}

/// Groups 1-D samples into at most `beta` clusters and returns the mean of
/// each nonempty cluster, largest first.
///
/// Uses k-means++ seeding with Lloyd refinement, keeping the best of
/// several restarts. Input order does not matter.
pub fn cluster<R: Rng + ?Sized>(samples: &[f64], beta: usize, opts: ClusterOptions, rng: &mut R) -> Vec<f64> {
    assert!(!samples.is_empty(), "cluster needs at least one sample");
    assert!(beta >= 1, "beta must be positive");

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= beta {
        distinct.reverse();
        return distinct;
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..opts.restarts.max(1) {
        let init = kmeans_plus_plus(&sorted, beta, rng);
        let run = lloyd(&sorted, init, opts.max_iterations);
        let score = sse(&sorted, &run.centers);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, run.centers));
        }
    }
    let centers = best.expect("at least one restart").1;

    // Final assignment to the chosen centers, then plain group means.
    let mut sums = vec![0.0; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for &x in &sorted {
        let r = nearest(&centers, x);
        sums[r] += x;
        counts[r] += 1;
    }
    let mut means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| s / n as f64)
        .collect();
    means.sort_by(|a, b| b.total_cmp(a));
    means.dedup();
    means
}

/// A player's estimates `mu_hat(m, n)` for `n = 1..=beta`, zero-padded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateTable {
    pub beta: usize,
    pub means: Vec<Vec<f64>>,
    /// Zero-based channels that had no nonzero samples at the last rebuild.
    pub empty_channels: Vec<usize>,
}

impl EstimateTable {
    pub fn zeros(num_channels: usize, beta: usize) -> Self {
        Self {
            beta,
            means: vec![vec![0.0; beta]; num_channels],
            empty_channels: (0..num_channels).collect(),
        }
    }

    /// The ground truth of one player, as if estimation were perfect.
    pub fn exact(table: &MeanRewardTable, player: usize) -> Self {
        let beta = table.max_occupancy();
        let means = (0..table.num_channels())
            .map(|m| table.row(player, m).to_vec())
            .collect();
        Self {
            beta,
            means,
            empty_channels: Vec::new(),
        }
    }

    pub fn num_channels(&self) -> usize {
        self.means.len()
    }

    /// Estimate for zero-based channel and zero-based level.
    pub fn get(&self, channel: usize, level: usize) -> f64 {
        self.means[channel].get(level).copied().unwrap_or(0.0)
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.means[channel]
    }

    /// Largest deviation from the truth over all channels and levels. Levels
    /// the estimate lacks compare as zero.
    pub fn max_error(&self, table: &MeanRewardTable, player: usize) -> f64 {
        let levels = self.beta.max(table.max_occupancy());
        let mut worst = 0.0f64;
        for m in 0..self.num_channels() {
            for n in 0..levels {
                let truth = table.true_mean(player, m, n + 1);
                worst = worst.max((self.get(m, n) - truth).abs());
            }
        }
        worst
    }
}

/// Clusters every channel's samples and maps cluster means to occupancy
/// levels in descending order.
pub fn rebuild_estimates<R: Rng + ?Sized>(
    store: &SampleStore,
    beta: usize,
    opts: ClusterOptions,
    rng: &mut R,
) -> EstimateTable {
    let mut table = EstimateTable::zeros(store.num_channels(), beta);
    table.empty_channels.clear();
    for m in 0..store.num_channels() {
        let xs = store.channel(m);
        if xs.is_empty() {
            table.empty_channels.push(m);
            continue;
        }
        for (n, v) in cluster(xs, beta, opts, rng).into_iter().enumerate() {
            table.means[m][n] = v;
        }
    }
    table
}
