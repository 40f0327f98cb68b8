//! Lloyd's k-means with k-means++ seeding.

use super::{ClusterError, FeatureMatrix};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_ITER: usize = 300;
const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    /// Cluster index per row.
    pub labels: Vec<usize>,
    /// k x n_cols, row major; each centroid is the exact mean of its rows.
    pub centroids: Vec<f64>,
    /// Sum of squared Euclidean distances to assigned centroids.
    pub distortion: f64,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &[f64], k: usize, d: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..k {
        let dd = dist2(row, &centroids[c * d..(c + 1) * d]);
        if dd < best_d {
            best_d = dd;
            best = c;
        }
    }
    (best, best_d)
}

/// k-means++ choice of k initial centroids (row indices).
fn seed_centroids(x: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.n_rows;
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|r| dist2(x.row(r), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            WeightedIndex::new(&d2).expect("positive weights").sample(rng)
        } else {
            // all remaining points coincide with a centroid; take the first
            // index not yet chosen so duplicates cannot stall seeding
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for r in 0..n {
            let dd = dist2(x.row(r), x.row(next));
            if dd < d2[r] {
                d2[r] = dd;
            }
        }
    }
    chosen
}

fn means(x: &FeatureMatrix, labels: &[usize], k: usize) -> (Vec<f64>, Vec<usize>) {
    let d = x.n_cols;
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (r, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        let row = x.row(r);
        for j in 0..d {
            sums[c * d + j] += row[j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for j in 0..d {
                sums[c * d + j] *= inv;
            }
        }
    }
    (sums, counts)
}

/// Cluster means for `labels`, relabelling rows into empty clusters first:
/// each empty cluster takes the row farthest from its current centroid,
/// drawn from clusters with more than one member (ties: lowest row index).
/// Requires `labels.len() >= k`, which guarantees a donor exists.
fn means_with_repair(x: &FeatureMatrix, labels: &mut [usize], k: usize) -> Vec<f64> {
    let d = x.n_cols;
    let (mut centroids, mut counts) = means(x, labels, k);
    loop {
        let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
        let mut far_row = usize::MAX;
        let mut far_d = -1.0;
        for r in 0..x.n_rows {
            let c = labels[r];
            if counts[c] <= 1 {
                continue; // do not empty a singleton
            }
            let dd = dist2(x.row(r), &centroids[c * d..(c + 1) * d]);
            if dd > far_d {
                far_d = dd;
                far_row = r;
            }
        }
        labels[far_row] = empty;
        let refreshed = means(x, labels, k);
        centroids = refreshed.0;
        counts = refreshed.1;
    }
    centroids
}

/// Clusters rows into `k` groups; deterministic for a given seed.
///
/// Iterations stop when labels stop changing, when the relative distortion
/// improvement drops below 1e-10, or at 300 iterations; an empty cluster is
/// reseeded to the row farthest from its current centroid. The returned
/// centroids are always the exact means of their assigned rows.
pub fn kmeans(x: &FeatureMatrix, k: usize, seed: u64) -> Result<KMeansFit, ClusterError> {
    let n = x.n_rows;
    if n == 0 {
        return Err(ClusterError::EmptyMatrix);
    }
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    let d = x.n_cols;
    if k == n {
        // saturated: every row is its own centroid
        return Ok(KMeansFit {
            labels: (0..n).collect(),
            centroids: x.data.clone(),
            distortion: 0.0,
            iterations: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = seed_centroids(x, k, &mut rng);
    let mut init_centroids = Vec::with_capacity(k * d);
    for &r in &init {
        init_centroids.extend_from_slice(x.row(r));
    }

    let mut labels: Vec<usize> =
        (0..n).map(|r| nearest(x.row(r), &init_centroids, k, d).0).collect();
    let mut prev_distortion = f64::INFINITY;
    let mut iterations = 0;

    loop {
        iterations += 1;
        let new_centroids = means_with_repair(x, &mut labels, k);

        let mut new_labels = Vec::with_capacity(n);
        let mut distortion = 0.0;
        for r in 0..n {
            let (c, dd) = nearest(x.row(r), &new_centroids, k, d);
            new_labels.push(c);
            distortion += dd;
        }
        assert!(
            distortion <= prev_distortion * (1.0 + 1e-12) + 1e-12,
            "distortion increased: {prev_distortion} -> {distortion}"
        );

        let converged = new_labels == labels
            || (prev_distortion.is_finite()
                && (prev_distortion - distortion).abs() <= REL_TOL * prev_distortion.max(1e-300))
            || iterations >= MAX_ITER;
        labels = new_labels;
        if converged {
            // one final mean update so centroids match the returned labels
            let final_centroids = means_with_repair(x, &mut labels, k);
            let mut final_distortion = 0.0;
            for r in 0..n {
                let c = labels[r];
                final_distortion += dist2(x.row(r), &final_centroids[c * d..(c + 1) * d]);
            }
            return Ok(KMeansFit {
                labels,
                centroids: final_centroids,
                distortion: final_distortion,
                iterations,
            });
        }
        prev_distortion = distortion;
    }
}
