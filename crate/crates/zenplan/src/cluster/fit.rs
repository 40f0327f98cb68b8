//! End-to-end reduction: feature assembly, optional extreme-object pinning,
//! normalization, clustering with restarts, and de-normalized representatives.

use super::kmeans::kmeans;
use super::kmedoids::kmedoids;
use super::{
    assemble, normalize, select_extremes, Algorithm, ClusterError, FeatureMatrix, Granularity,
    Normalization,
};
use crate::timeseries::TimeSeriesBundle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub granularity: Granularity,
    pub algorithm: Algorithm,
    pub normalization: Normalization,
    /// Pin the peak-load and minimum-irradiance objects as their own clusters.
    pub heuristic: bool,
    pub k: usize,
    pub seed: u64,
    pub n_restarts: usize,
}

impl FitConfig {
    pub fn new(
        granularity: Granularity,
        algorithm: Algorithm,
        normalization: Normalization,
        heuristic: bool,
        k: usize,
        seed: u64,
    ) -> Self {
        FitConfig { granularity, algorithm, normalization, heuristic, k, seed, n_restarts: 1 }
    }
}

/// A reduced time structure: `k` weighted representative objects plus the
/// object-to-cluster map needed to expand results back to the full horizon.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub granularity: Granularity,
    pub algorithm: Algorithm,
    pub normalization: Normalization,
    pub heuristic: bool,
    pub k: usize,
    pub seed: u64,
    pub series: Vec<String>,
    pub n_objects: usize,
    /// k rows of `series.len() * block` values, in original units.
    pub representatives: Vec<f64>,
    /// Cluster index for every original object.
    pub xi: Vec<usize>,
    /// Objects represented by each cluster; sums to `n_objects`.
    pub sigma: Vec<usize>,
    /// Objects pinned by the extreme heuristic, ascending.
    pub forced: Vec<usize>,
    /// Final clustering objective on the normalized feature matrix.
    pub objective: f64,
}

impl ClusterModel {
    pub fn n_cols(&self) -> usize {
        self.series.len() * self.granularity.block()
    }

    pub fn representative(&self, cluster: usize) -> &[f64] {
        let w = self.n_cols();
        &self.representatives[cluster * w..(cluster + 1) * w]
    }

    /// Value of one series at an offset within a representative object
    /// (offset is 0..24 for days, always 0 for hours).
    pub fn rep_value(&self, cluster: usize, series: usize, offset: usize) -> f64 {
        self.representative(cluster)[series * self.granularity.block() + offset]
    }

    /// Trivial reduction keeping every object as its own cluster. Useful as
    /// an exact baseline: representatives equal the original objects.
    pub fn identity(
        bundle: &TimeSeriesBundle,
        granularity: Granularity,
    ) -> Result<Self, ClusterError> {
        let x = assemble(bundle, granularity)?;
        let n = x.n_rows;
        Ok(ClusterModel {
            granularity,
            algorithm: Algorithm::KMeans,
            normalization: Normalization::Range,
            heuristic: false,
            k: n,
            seed: 0,
            series: x.series.clone(),
            n_objects: n,
            representatives: x.data,
            xi: (0..n).collect(),
            sigma: vec![1; n],
            forced: Vec::new(),
            objective: 0.0,
        })
    }
}

fn restart_seed(base: u64, restart: usize) -> u64 {
    base.wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn mean_rows(x: &FeatureMatrix, members: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; x.n_cols];
    for &m in members {
        for (o, v) in out.iter_mut().zip(x.row(m)) {
            *o += v;
        }
    }
    let inv = 1.0 / members.len() as f64;
    for o in &mut out {
        *o *= inv;
    }
    out
}

/// Reduces a bundle to `cfg.k` representative objects.
///
/// Representatives stay in original units: cluster means for k-means (an
/// actual data row when the cluster is a singleton), data rows for
/// k-medoids, and exact copies for pinned extreme objects.
pub fn fit(bundle: &TimeSeriesBundle, cfg: &FitConfig) -> Result<ClusterModel, ClusterError> {
    let x = assemble(bundle, cfg.granularity)?;
    let n = x.n_rows;
    if cfg.k == 0 || cfg.k > n {
        return Err(ClusterError::BadK { k: cfg.k, n });
    }
    if cfg.heuristic && cfg.k < 3 {
        return Err(ClusterError::HeuristicNeedsK3 { k: cfg.k });
    }

    let forced = if cfg.heuristic { select_extremes(bundle, cfg.granularity)? } else { Vec::new() };
    let free: Vec<usize> = (0..n).filter(|i| !forced.contains(i)).collect();
    let k_free = cfg.k - forced.len();
    if k_free > free.len() {
        return Err(ClusterError::BadK { k: cfg.k, n });
    }

    let x_free = x.take_rows(&free);
    let (xn, _records) = normalize(&x_free, cfg.normalization);

    // clusters 0..forced.len() are the pinned singletons, in object order
    let n_forced = forced.len();
    let mut xi = vec![usize::MAX; n];
    let mut sigma = vec![0usize; cfg.k];
    let mut representatives = vec![0.0; cfg.k * x.n_cols];
    for (c, &obj) in forced.iter().enumerate() {
        xi[obj] = c;
        sigma[c] = 1;
        representatives[c * x.n_cols..(c + 1) * x.n_cols].copy_from_slice(x.row(obj));
    }

    let restarts = cfg.n_restarts.max(1);
    let (free_labels, objective) = match cfg.algorithm {
        Algorithm::KMeans => {
            let mut best: Option<crate::cluster::KMeansFit> = None;
            for r in 0..restarts {
                let f = kmeans(&xn, k_free, restart_seed(cfg.seed, r))?;
                if best.as_ref().map_or(true, |b| f.distortion < b.distortion) {
                    best = Some(f);
                }
            }
            let f = best.unwrap();
            // representatives as means of the original member rows; for a
            // singleton this copies the row exactly
            for c in 0..k_free {
                let members: Vec<usize> =
                    (0..free.len()).filter(|&p| f.labels[p] == c).collect();
                let rep = mean_rows(&x_free, &members);
                let at = (n_forced + c) * x.n_cols;
                representatives[at..at + x.n_cols].copy_from_slice(&rep);
            }
            (f.labels, f.distortion)
        }
        Algorithm::KMedoids => {
            let mut best: Option<crate::cluster::KMedoidsFit> = None;
            for r in 0..restarts {
                let f = kmedoids(&xn, k_free, restart_seed(cfg.seed, r))?;
                if best.as_ref().map_or(true, |b| f.cost < b.cost) {
                    best = Some(f);
                }
            }
            let f = best.unwrap();
            for (c, &m) in f.medoids.iter().enumerate() {
                let at = (n_forced + c) * x.n_cols;
                representatives[at..at + x.n_cols].copy_from_slice(x_free.row(m));
            }
            (f.labels, f.cost)
        }
    };

    for (p, &obj) in free.iter().enumerate() {
        let c = n_forced + free_labels[p];
        xi[obj] = c;
        sigma[c] += 1;
    }
    debug_assert!(xi.iter().all(|&c| c < cfg.k));
    debug_assert_eq!(sigma.iter().sum::<usize>(), n);

    Ok(ClusterModel {
        granularity: cfg.granularity,
        algorithm: cfg.algorithm,
        normalization: cfg.normalization,
        heuristic: cfg.heuristic,
        k: cfg.k,
        seed: cfg.seed,
        series: x.series,
        n_objects: n,
        representatives,
        xi,
        sigma,
        forced,
        objective,
    })
}
