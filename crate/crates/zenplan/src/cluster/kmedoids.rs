//! PAM k-medoids: seeded greedy build, then swaps until no single
//! (medoid, non-medoid) exchange lowers the total cost.

use super::{ClusterError, FeatureMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IMPROVE_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KMedoidsFit {
    /// Cluster index per row (cluster c is served by `medoids[c]`).
    pub labels: Vec<usize>,
    /// Row indices of the chosen medoids.
    pub medoids: Vec<usize>,
    /// Sum of squared Euclidean distances to assigned medoids.
    pub cost: f64,
    pub passes: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest and second-nearest medoid distances per row; `near_slot` is the
/// cluster (slot in `medoids`) of the nearest one.
struct Cache {
    near_slot: Vec<usize>,
    near_d: Vec<f64>,
    seco_d: Vec<f64>,
}

fn rebuild_cache(dm: &[f64], n: usize, medoids: &[usize]) -> Cache {
    let mut near_slot = vec![0; n];
    let mut near_d = vec![f64::INFINITY; n];
    let mut seco_d = vec![f64::INFINITY; n];
    for j in 0..n {
        for (slot, &m) in medoids.iter().enumerate() {
            let d = dm[j * n + m];
            if d < near_d[j] {
                seco_d[j] = near_d[j];
                near_d[j] = d;
                near_slot[j] = slot;
            } else if d < seco_d[j] {
                seco_d[j] = d;
            }
        }
    }
    Cache { near_slot, near_d, seco_d }
}

/// Clusters rows around `k` of the rows themselves; deterministic for a
/// given seed (it only randomizes the first build medoid).
pub fn kmedoids(x: &FeatureMatrix, k: usize, seed: u64) -> Result<KMedoidsFit, ClusterError> {
    let n = x.n_rows;
    if n == 0 {
        return Err(ClusterError::EmptyMatrix);
    }
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    if k == n {
        return Ok(KMedoidsFit {
            labels: (0..n).collect(),
            medoids: (0..n).collect(),
            cost: 0.0,
            passes: 0,
        });
    }

    // full squared-distance matrix; horizon-scale inputs stay small
    // (720 hour-objects -> ~4 MB)
    let mut dm = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist2(x.row(i), x.row(j));
            dm[i * n + j] = d;
            dm[j * n + i] = d;
        }
    }

    // build: seeded first medoid, then greedy largest-cost-reduction adds
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..n);
    let mut medoids = vec![first];
    let mut is_medoid = vec![false; n];
    is_medoid[first] = true;
    let mut near: Vec<f64> = (0..n).map(|j| dm[j * n + first]).collect();
    while medoids.len() < k {
        let mut best_c = usize::MAX;
        let mut best_red = f64::NEG_INFINITY;
        for c in 0..n {
            if is_medoid[c] {
                continue;
            }
            let red: f64 =
                (0..n).map(|j| (near[j] - dm[j * n + c]).max(0.0)).sum();
            if red > best_red {
                best_red = red;
                best_c = c;
            }
        }
        medoids.push(best_c);
        is_medoid[best_c] = true;
        for j in 0..n {
            let d = dm[j * n + best_c];
            if d < near[j] {
                near[j] = d;
            }
        }
    }

    // swap phase: accept any improving swap as soon as it is found, stop
    // after a full pass without improvement
    let mut cache = rebuild_cache(&dm, n, &medoids);
    let mut passes = 0;
    loop {
        passes += 1;
        let mut improved = false;
        for slot in 0..k {
            for c in 0..n {
                if is_medoid[c] {
                    continue;
                }
                let mut delta = 0.0;
                for j in 0..n {
                    let djc = dm[j * n + c];
                    if cache.near_slot[j] == slot {
                        delta += djc.min(cache.seco_d[j]) - cache.near_d[j];
                    } else if djc < cache.near_d[j] {
                        delta += djc - cache.near_d[j];
                    }
                }
                if delta < -IMPROVE_EPS {
                    is_medoid[medoids[slot]] = false;
                    is_medoid[c] = true;
                    medoids[slot] = c;
                    cache = rebuild_cache(&dm, n, &medoids);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let cost = cache.near_d.iter().sum();
    Ok(KMedoidsFit {
        labels: cache.near_slot,
        medoids,
        cost,
        passes,
    })
}
