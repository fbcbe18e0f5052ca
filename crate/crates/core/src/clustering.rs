//! Deterministic k-means used to split a class into subspaces.
//!
//! Seeding is k-means++ driven by a ChaCha RNG, followed by Lloyd iterations
//! until the assignment reaches a fixpoint or [`MAX_LLOYD_ITER`] rounds.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_LLOYD_ITER: usize = 300;
pub const DEFAULT_CLUSTERS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub n_c: usize,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl ClusterAssignment {
    /// Cluster ids that have at least one member, ascending.
    pub fn non_empty(&self) -> Vec<usize> {
        let mut ids = self.labels.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Everyone in cluster 0.
    pub fn single(n: usize) -> Self {
        Self { labels: vec![0; n], n_c: 1, inertia: 0.0, inertia_history: Vec::new() }
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centroids(features: &Array2<f64>, n_c: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = features.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = features.rows().into_iter().map(|row| sq_dist(row, features.row(chosen[0]))).collect();
    while chosen.len() < n_c {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total has a positive term")
        } else {
            // all remaining points coincide with a centroid
            (0..n).find(|i| !chosen.contains(i)).expect("n >= n_c")
        };
        chosen.push(next);
        for (i, row) in features.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(row, features.row(next)));
        }
    }
    chosen
}

fn assign(features: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    features
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.rows().into_iter().enumerate() {
                let d = sq_dist(row, c);
                // strict comparison: lowest index wins ties
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

fn update_centroids(features: &Array2<f64>, labels: &[usize], centroids: &mut Array2<f64>) {
    let mut counts = vec![0usize; centroids.nrows()];
    let mut sums = Array2::<f64>::zeros(centroids.dim());
    for (row, &j) in features.rows().into_iter().zip(labels) {
        counts[j] += 1;
        let mut s = sums.row_mut(j);
        s += &row;
    }
    for (j, &count) in counts.iter().enumerate() {
        if count > 0 {
            let mean = &sums.row(j) / count as f64;
            centroids.row_mut(j).assign(&mean);
        }
    }
}

/// Moves the point farthest from its centroid into each empty cluster.
/// Only points whose cluster keeps at least one member are eligible, and a
/// cluster stays empty when every point sits exactly on its centroid.
fn repair_empty(labels: &mut [usize], dists: &mut [f64], n_c: usize) -> bool {
    let mut counts = vec![0usize; n_c];
    for &j in labels.iter() {
        counts[j] += 1;
    }
    let mut changed = false;
    for empty in 0..n_c {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, (&j, &d)) in labels.iter().zip(dists.iter()).enumerate() {
            if counts[j] >= 2 && d > 0.0 && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            counts[labels[i]] -= 1;
            counts[empty] += 1;
            labels[i] = empty;
            dists[i] = 0.0;
            changed = true;
        }
    }
    changed
}

/// k-means++ / Lloyd clustering of the rows of `features`.
pub fn cluster(features: &Array2<f64>, n_c: usize, seed: u64) -> Result<ClusterAssignment> {
    let (n, d) = features.dim();
    if n_c == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!("cluster count {n_c} and feature dimension {d} must be positive")));
    }
    if n < n_c {
        return Err(Error::TooFewSubjects { subjects: n, clusters: n_c });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = seed_centroids(features, n_c, &mut rng);
    let mut centroids = Array2::zeros((n_c, d));
    for (j, &i) in seeds.iter().enumerate() {
        centroids.row_mut(j).assign(&features.row(i));
    }

    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITER {
        let (mut next, mut dists) = assign(features, &centroids);
        history.push(dists.iter().sum());
        let repaired = repair_empty(&mut next, &mut dists, n_c);
        if !repaired && next == labels {
            break;
        }
        labels = next;
        update_centroids(features, &labels, &mut centroids);
    }
    let inertia = features.rows().into_iter().zip(&labels).map(|(row, &j)| sq_dist(row, centroids.row(j))).sum();
    Ok(ClusterAssignment { labels, n_c, inertia, inertia_history: history })
}
