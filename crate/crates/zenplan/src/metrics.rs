//! Error metrics for a reduced time structure: rebuild the full horizon
//! from the representatives and compare it series by series against the
//! original, plus sweeps over cluster counts.

use crate::cluster::{
    fit, series_names, Algorithm, ClusterError, ClusterModel, FitConfig, Granularity,
    Normalization,
};
use crate::timeseries::TimeSeriesBundle;
use rayon::prelude::*;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Debug)]
pub enum MetricsError {
    ShapeMismatch { expected: usize, found: usize },
    SeriesMismatch,
    Cluster(ClusterError),
    Io(std::io::Error),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::ShapeMismatch { expected, found } => {
                write!(f, "model covers {expected} objects but the bundle has {found}")
            }
            MetricsError::SeriesMismatch => {
                write!(f, "model and bundle disagree on the clustered series")
            }
            MetricsError::Cluster(e) => write!(f, "clustering failed: {e}"),
            MetricsError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for MetricsError {}

impl From<ClusterError> for MetricsError {
    fn from(e: ClusterError) -> Self {
        MetricsError::Cluster(e)
    }
}

impl From<std::io::Error> for MetricsError {
    fn from(e: std::io::Error) -> Self {
        MetricsError::Io(e)
    }
}

/// sqrt of the mean squared difference, in the series' own units.
pub fn rmsd(original: &[f64], reconstructed: &[f64]) -> f64 {
    assert_eq!(original.len(), reconstructed.len());
    let n = original.len() as f64;
    let ss: f64 = original
        .iter()
        .zip(reconstructed)
        .map(|(o, r)| (r - o) * (r - o))
        .sum();
    (ss / n).sqrt()
}

/// [`rmsd`] divided by the original series' range; 0 for a flat series.
pub fn nrmsd(original: &[f64], reconstructed: &[f64]) -> f64 {
    let min = original.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = original.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        rmsd(original, reconstructed) / (max - min)
    } else {
        0.0
    }
}

/// Mean signed difference (reconstructed minus original); negative means
/// the reconstruction under-represents the quantity.
pub fn yae(original: &[f64], reconstructed: &[f64]) -> f64 {
    assert_eq!(original.len(), reconstructed.len());
    let n = original.len() as f64;
    original.iter().zip(reconstructed).map(|(o, r)| r - o).sum::<f64>() / n
}

fn check_shape(model: &ClusterModel, shape: &TimeSeriesBundle) -> Result<(), MetricsError> {
    let n = match model.granularity {
        Granularity::Day => shape.n_days(),
        Granularity::Hour => shape.horizon_hours,
    };
    if model.n_objects != n {
        return Err(MetricsError::ShapeMismatch { expected: model.n_objects, found: n });
    }
    if model.series != series_names(shape) {
        return Err(MetricsError::SeriesMismatch);
    }
    Ok(())
}

/// Hourly values of one clustered series over the full horizon implied by
/// the model: hour `t` takes its cluster representative's value.
pub fn expand_series(model: &ClusterModel, series: usize) -> Vec<f64> {
    let block = model.granularity.block();
    let hours = model.n_objects * block;
    let mut out = Vec::with_capacity(hours);
    for t in 0..hours {
        let (object, offset) = (t / block, t % block);
        out.push(model.rep_value(model.xi[object], series, offset));
    }
    out
}

/// Rebuilds a full-horizon bundle from the model: every clustered series is
/// replaced hour by hour with its representative values; non-clustered
/// series (dhi, dni, sun positions) are kept from the shape bundle.
pub fn reconstruct(
    model: &ClusterModel,
    shape: &TimeSeriesBundle,
) -> Result<TimeSeriesBundle, MetricsError> {
    check_shape(model, shape)?;
    let mut out = shape.clone();
    for (s, name) in model.series.iter().enumerate() {
        let values = expand_series(model, s);
        let target: &mut Vec<f64> = if let Some(rest) = name.strip_prefix("el_") {
            &mut out.buildings.iter_mut().find(|b| b.id == rest).unwrap().el
        } else if let Some(rest) = name.strip_prefix("dhw_") {
            &mut out.buildings.iter_mut().find(|b| b.id == rest).unwrap().dhw
        } else if let Some(rest) = name.strip_prefix("sh_") {
            &mut out.buildings.iter_mut().find(|b| b.id == rest).unwrap().sh
        } else {
            match name.as_str() {
                "temperature" => &mut out.temperature,
                "irr_tilt" => out.irr_tilt.as_mut().unwrap(),
                "spot_price" => &mut out.spot_price,
                "co2_el" => &mut out.co2_el,
                other => panic!("unknown series '{other}'"),
            }
        };
        *target = values;
    }
    Ok(out)
}

/// Per-series reduction errors for one cluster count.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub k: usize,
    pub algorithm: Algorithm,
    pub normalization: Normalization,
    pub heuristic: bool,
    pub granularity: Granularity,
    pub seed: u64,
    pub series: Vec<String>,
    pub rmsd: Vec<f64>,
    pub nrmsd: Vec<f64>,
    pub yae: Vec<f64>,
    pub mean_nrmsd: f64,
}

/// Compares a fitted model against the bundle it was built from.
pub fn evaluate(
    model: &ClusterModel,
    bundle: &TimeSeriesBundle,
) -> Result<MetricsReport, MetricsError> {
    check_shape(model, bundle)?;
    let names = series_names(bundle);
    let mut r_rmsd = Vec::with_capacity(names.len());
    let mut r_nrmsd = Vec::with_capacity(names.len());
    let mut r_yae = Vec::with_capacity(names.len());
    for (s, name) in names.iter().enumerate() {
        let rec = expand_series(model, s);
        let orig = original_series(bundle, name);
        r_rmsd.push(rmsd(orig, &rec));
        r_nrmsd.push(nrmsd(orig, &rec));
        r_yae.push(yae(orig, &rec));
    }
    let mean_nrmsd = r_nrmsd.iter().sum::<f64>() / r_nrmsd.len() as f64;
    Ok(MetricsReport {
        k: model.k,
        algorithm: model.algorithm,
        normalization: model.normalization,
        heuristic: model.heuristic,
        granularity: model.granularity,
        seed: model.seed,
        series: names,
        rmsd: r_rmsd,
        nrmsd: r_nrmsd,
        yae: r_yae,
        mean_nrmsd,
    })
}

fn original_series<'a>(bundle: &'a TimeSeriesBundle, name: &str) -> &'a [f64] {
    if let Some(rest) = name.strip_prefix("el_") {
        return &bundle.buildings.iter().find(|b| b.id == rest).unwrap().el;
    }
    if let Some(rest) = name.strip_prefix("dhw_") {
        return &bundle.buildings.iter().find(|b| b.id == rest).unwrap().dhw;
    }
    if let Some(rest) = name.strip_prefix("sh_") {
        return &bundle.buildings.iter().find(|b| b.id == rest).unwrap().sh;
    }
    match name {
        "temperature" => &bundle.temperature,
        "irr_tilt" => bundle.irr_tilt.as_ref().unwrap(),
        "spot_price" => &bundle.spot_price,
        "co2_el" => &bundle.co2_el,
        other => panic!("unknown series '{other}'"),
    }
}

/// Upper bounds on the cluster count per granularity, and the restart count
/// forwarded to every fit.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub k_limit_days: usize,
    pub k_limit_hours: usize,
    pub n_restarts: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { k_limit_days: 100, k_limit_hours: 2400, n_restarts: 1 }
    }
}

/// One [`MetricsReport`] per requested cluster count; entries run in
/// parallel and come back in `k_list` order.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    bundle: &TimeSeriesBundle,
    granularity: Granularity,
    algorithm: Algorithm,
    normalization: Normalization,
    heuristic: bool,
    k_list: &[usize],
    seed: u64,
    options: SweepOptions,
) -> Result<Vec<MetricsReport>, MetricsError> {
    let limit = match granularity {
        Granularity::Day => options.k_limit_days,
        Granularity::Hour => options.k_limit_hours,
    };
    for &k in k_list {
        if k > limit {
            return Err(ClusterError::KLimit { k, limit }.into());
        }
    }
    k_list
        .par_iter()
        .map(|&k| {
            let mut cfg =
                FitConfig::new(granularity, algorithm, normalization, heuristic, k, seed);
            cfg.n_restarts = options.n_restarts;
            let model = fit(bundle, &cfg)?;
            evaluate(&model, bundle)
        })
        .collect()
}

/// Long-format CSV: one row per (cluster count, series).
pub fn write_sweep_csv(reports: &[MetricsReport], path: &Path) -> Result<(), MetricsError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,algorithm,normalization,heuristic,granularity,series,rmsd,nrmsd,yae,seed")?;
    for rep in reports {
        for (s, name) in rep.series.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                rep.k,
                rep.algorithm,
                rep.normalization,
                if rep.heuristic { 1 } else { 0 },
                rep.granularity,
                name,
                rep.rmsd[s],
                rep.nrmsd[s],
                rep.yae[s],
                rep.seed,
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Elbow-curve data: one row per cluster count with the mean NRMSD.
pub fn write_elbow_csv(reports: &[MetricsReport], path: &Path) -> Result<(), MetricsError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,algorithm,normalization,heuristic,granularity,mean_nrmsd,seed")?;
    for rep in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            rep.k,
            rep.algorithm,
            rep.normalization,
            if rep.heuristic { 1 } else { 0 },
            rep.granularity,
            rep.mean_nrmsd,
            rep.seed,
        )?;
    }
    w.flush()?;
    Ok(())
}
