//! Reduction of the hourly horizon to representative days or hours.
//!
//! Objects to cluster are whole days (rows of 24 values per series) or
//! single hours (one value per series). Series enter in a fixed order:
//! el/dhw/sh per building, then temperature, irr_tilt, spot_price, co2_el.
//! Rows are normalized per series, clustered with k-means or k-medoids,
//! optionally after forcing the peak-load and darkest objects into
//! singleton clusters, and the result maps every original object to a
//! representative with a weight.

mod fit;
mod kmeans;
mod kmedoids;

pub use fit::{fit, ClusterModel, FitConfig};
pub use kmeans::{kmeans, KMeansFit};
pub use kmedoids::{kmedoids, KMedoidsFit};

use crate::timeseries::TimeSeriesBundle;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Day,
    Hour,
}

impl Granularity {
    /// Feature columns each series contributes to one object row.
    pub fn block(self) -> usize {
        match self {
            Granularity::Day => 24,
            Granularity::Hour => 1,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Day => "day",
            Granularity::Hour => "hour",
        })
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "day" | "days" => Ok(Granularity::Day),
            "hour" | "hours" => Ok(Granularity::Hour),
            other => Err(format!("unknown granularity '{other}' (expected day or hour)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    KMeans,
    KMedoids,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::KMedoids => "kmedoids",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Algorithm::KMeans),
            "kmedoids" | "k-medoids" => Ok(Algorithm::KMedoids),
            other => Err(format!("unknown algorithm '{other}' (expected kmeans or kmedoids)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// x' = (x - min) / (max - min) per series.
    Range,
    /// x' = x / std (population standard deviation) per series.
    Std,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Range => "range",
            Normalization::Std => "std",
        })
    }
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "range" => Ok(Normalization::Range),
            "std" => Ok(Normalization::Std),
            other => Err(format!("unknown normalization '{other}' (expected range or std)")),
        }
    }
}

/// Objects-by-features matrix, row major. Column `s * block + h` holds
/// series `s` at within-object offset `h`. `object_index` maps rows back to
/// original day/hour indices (rows can be a subset after extreme removal).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub granularity: Granularity,
    pub series: Vec<String>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
    pub object_index: Vec<usize>,
}

impl FeatureMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn block(&self) -> usize {
        self.granularity.block()
    }

    /// Copy of the matrix containing only the given rows (ascending order
    /// irrelevant; `object_index` follows along).
    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        let mut object_index = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            object_index.push(self.object_index[r]);
        }
        FeatureMatrix {
            granularity: self.granularity,
            series: self.series.clone(),
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
            object_index,
        }
    }
}

/// How one series was scaled: `x' = (x - offset) / scale`. Degenerate
/// series (zero range or zero std) pass through unscaled with
/// `passthrough` set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormRecord {
    pub series: String,
    pub method: Normalization,
    pub offset: f64,
    pub scale: f64,
    pub passthrough: bool,
}

#[derive(Debug)]
pub enum ClusterError {
    MissingTiltIrradiance,
    BadK { k: usize, n: usize },
    HeuristicNeedsK3 { k: usize },
    KLimit { k: usize, limit: usize },
    EmptyMatrix,
    BadBundle(crate::timeseries::DataError),
    Io(std::io::Error),
}

impl fmt::Display for ClusterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterError::MissingTiltIrradiance => {
                write!(f, "bundle has no irr_tilt series; run the transposition first")
            }
            ClusterError::BadK { k, n } => {
                write!(f, "cluster count {k} must be within 1..={n} (number of objects)")
            }
            ClusterError::HeuristicNeedsK3 { k } => {
                write!(f, "extreme heuristic forces 2 singleton clusters, so K must be >= 3, got {k}")
            }
            ClusterError::KLimit { k, limit } => {
                write!(f, "cluster count {k} exceeds the configured limit {limit}")
            }
            ClusterError::EmptyMatrix => write!(f, "no objects to cluster"),
            ClusterError::BadBundle(e) => write!(f, "invalid bundle: {e}"),
            ClusterError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for ClusterError {}

impl From<std::io::Error> for ClusterError {
    fn from(e: std::io::Error) -> Self {
        ClusterError::Io(e)
    }
}

/// Series names in the canonical clustering order for a bundle.
pub fn series_names(bundle: &TimeSeriesBundle) -> Vec<String> {
    let mut names = Vec::with_capacity(3 * bundle.buildings.len() + 4);
    for b in &bundle.buildings {
        names.push(format!("el_{}", b.id));
        names.push(format!("dhw_{}", b.id));
        names.push(format!("sh_{}", b.id));
    }
    names.push("temperature".to_string());
    names.push("irr_tilt".to_string());
    names.push("spot_price".to_string());
    names.push("co2_el".to_string());
    names
}

fn series_values<'a>(bundle: &'a TimeSeriesBundle, name: &str) -> &'a [f64] {
    for b in &bundle.buildings {
        if name == format!("el_{}", b.id) {
            return &b.el;
        }
        if name == format!("dhw_{}", b.id) {
            return &b.dhw;
        }
        if name == format!("sh_{}", b.id) {
            return &b.sh;
        }
    }
    match name {
        "temperature" => &bundle.temperature,
        "irr_tilt" => bundle.irr_tilt.as_ref().expect("irr_tilt checked by assemble"),
        "spot_price" => &bundle.spot_price,
        "co2_el" => &bundle.co2_el,
        other => panic!("unknown series '{other}'"),
    }
}

/// Builds the unnormalized objects-by-features matrix.
///
/// Day granularity: one row per day, 24 columns per series. Hour: one row
/// per hour, one column per series. Requires `irr_tilt` to be present.
pub fn assemble(
    bundle: &TimeSeriesBundle,
    granularity: Granularity,
) -> Result<FeatureMatrix, ClusterError> {
    bundle.validate().map_err(ClusterError::BadBundle)?;
    if bundle.irr_tilt.is_none() {
        return Err(ClusterError::MissingTiltIrradiance);
    }
    let names = series_names(bundle);
    let block = granularity.block();
    let n_rows = match granularity {
        Granularity::Day => bundle.n_days(),
        Granularity::Hour => bundle.horizon_hours,
    };
    let n_cols = names.len() * block;
    let mut data = vec![0.0; n_rows * n_cols];
    for (s, name) in names.iter().enumerate() {
        let vals = series_values(bundle, name);
        for r in 0..n_rows {
            for h in 0..block {
                data[r * n_cols + s * block + h] = vals[r * block + h];
            }
        }
    }
    Ok(FeatureMatrix {
        granularity,
        series: names,
        n_rows,
        n_cols,
        data,
        object_index: (0..n_rows).collect(),
    })
}

/// Scales each series block; returns the scaled matrix and one record per
/// series sufficient to invert the map exactly.
pub fn normalize(
    x: &FeatureMatrix,
    method: Normalization,
) -> (FeatureMatrix, Vec<NormRecord>) {
    let block = x.block();
    let mut out = x.clone();
    let mut records = Vec::with_capacity(x.series.len());
    for (s, name) in x.series.iter().enumerate() {
        let cols = s * block..(s + 1) * block;
        let mut values = Vec::with_capacity(x.n_rows * block);
        for r in 0..x.n_rows {
            for c in cols.clone() {
                values.push(x.data[r * x.n_cols + c]);
            }
        }
        let (offset, scale, passthrough) = match method {
            Normalization::Range => {
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max > min {
                    (min, max - min, false)
                } else {
                    (0.0, 1.0, true)
                }
            }
            Normalization::Std => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                if std > 0.0 {
                    (0.0, std, false)
                } else {
                    (0.0, 1.0, true)
                }
            }
        };
        if !passthrough {
            for r in 0..x.n_rows {
                for c in cols.clone() {
                    let v = &mut out.data[r * x.n_cols + c];
                    *v = (*v - offset) / scale;
                }
            }
        }
        records.push(NormRecord {
            series: name.clone(),
            method,
            offset,
            scale,
            passthrough,
        });
    }
    (out, records)
}

/// Inverts [`normalize`] using its records.
pub fn denormalize(x: &FeatureMatrix, records: &[NormRecord]) -> FeatureMatrix {
    assert_eq!(records.len(), x.series.len(), "one record per series");
    let block = x.block();
    let mut out = x.clone();
    for (s, rec) in records.iter().enumerate() {
        if rec.passthrough {
            continue;
        }
        for r in 0..x.n_rows {
            for c in s * block..(s + 1) * block {
                let v = &mut out.data[r * x.n_cols + c];
                *v = *v * rec.scale + rec.offset;
            }
        }
    }
    out
}

/// Indices of the extreme objects forced into singleton clusters: the
/// object with the highest total load (el+dhw+sh over all buildings) and
/// the one with the least tilted irradiance. Ties resolve to the lowest
/// index; the two can coincide, leaving one forced object.
pub fn select_extremes(
    bundle: &TimeSeriesBundle,
    granularity: Granularity,
) -> Result<Vec<usize>, ClusterError> {
    let irr = bundle
        .irr_tilt
        .as_ref()
        .ok_or(ClusterError::MissingTiltIrradiance)?;
    let block = granularity.block();
    let n = match granularity {
        Granularity::Day => bundle.n_days(),
        Granularity::Hour => bundle.horizon_hours,
    };
    if n == 0 {
        return Err(ClusterError::EmptyMatrix);
    }
    let mut peak_idx = 0;
    let mut peak_val = f64::NEG_INFINITY;
    let mut dark_idx = 0;
    let mut dark_val = f64::INFINITY;
    for o in 0..n {
        let mut load = 0.0;
        let mut sun = 0.0;
        for h in 0..block {
            let t = o * block + h;
            load += bundle.total_load(t);
            sun += irr[t];
        }
        if load > peak_val {
            peak_val = load;
            peak_idx = o;
        }
        if sun < dark_val {
            dark_val = sun;
            dark_idx = o;
        }
    }
    let mut out = vec![peak_idx];
    if dark_idx != peak_idx {
        out.push(dark_idx);
    }
    out.sort_unstable();
    Ok(out)
}

/// Writes one row per cluster: id, weight, then every feature column
/// (`<series>_h00..` for days, plain series names for hours).
pub fn write_representatives(model: &ClusterModel, path: &Path) -> Result<(), ClusterError> {
    let mut w = BufWriter::new(File::create(path)?);
    let block = model.granularity.block();
    let mut header = vec!["cluster".to_string(), "sigma".to_string()];
    for s in &model.series {
        if block == 1 {
            header.push(s.clone());
        } else {
            for h in 0..block {
                header.push(format!("{s}_h{h:02}"));
            }
        }
    }
    writeln!(w, "{}", header.join(","))?;
    let n_cols = model.series.len() * block;
    for c in 0..model.k {
        let mut row = vec![c.to_string(), model.sigma[c].to_string()];
        for v in &model.representatives[c * n_cols..(c + 1) * n_cols] {
            row.push(v.to_string());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per original object: index, assigned cluster, forced flag.
pub fn write_assignment(model: &ClusterModel, path: &Path) -> Result<(), ClusterError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "object,cluster,forced")?;
    for (o, &c) in model.xi.iter().enumerate() {
        let forced = model.forced.contains(&o);
        writeln!(w, "{o},{c},{}", if forced { 1 } else { 0 })?;
    }
    w.flush()?;
    Ok(())
}
