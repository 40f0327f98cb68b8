//! Reference-versus-grid deviation protocol.
//!
//! One experiment run reduces a dataset with every requested
//! (variant, granularity, algorithm, normalization, K) combination, solves
//! the resulting investment model per cell, and reports each cell's
//! objective as a signed percent deviation from an unreduced reference of
//! the same variant. References are always the simplified model: M0 is
//! measured against the model built on one cluster per calendar day
//! (reduction error zero, per-day storage cycling kept), M1 against the
//! model built on the unreduced chronological horizon. Complete-model runs
//! skip references entirely and report objectives and runtimes only.
//!
//! Grid cells run as independent parallel tasks; every output row is
//! sorted by configuration key, so reruns with the same config produce
//! byte-identical files except for `runtime.csv`, whose values are
//! wall-clock observations.

use crate::cluster::{fit, Algorithm, ClusterError, ClusterModel, FitConfig, Granularity, Normalization};
use crate::milp::{build, load_catalog, MilpError, ModelSource, TechCatalog, Variant, BUILTIN_CATALOG};
use crate::solve::{solve_model, SolveReport, SolverOptions, Status};
use crate::timeseries::{load_bundle, synth_bundle, CsvSchema, DataError, TimeSeriesBundle};
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    /// Hourly dataset CSV (see the timeseries column conventions).
    Csv(PathBuf),
    /// Deterministic synthetic dataset.
    Synth { seed: u64, hours: usize, buildings: usize },
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Csv(p) => write!(f, "csv {}", p.display()),
            DataSource::Synth { seed, hours, buildings } => {
                write!(f, "synth seed={seed} hours={hours} buildings={buildings}")
            }
        }
    }
}

/// Full description of one experiment run. [`ExperimentConfig::protocol`]
/// gives the shipped default grid; [`load_config`] reads the TOML form.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Technology catalog TOML; `None` uses the built-in catalog.
    pub catalog: Option<PathBuf>,
    pub granularities: Vec<Granularity>,
    pub algorithms: Vec<Algorithm>,
    pub normalizations: Vec<Normalization>,
    /// Pin the peak-load and darkest objects as singleton clusters.
    pub heuristic: bool,
    /// Clustering restarts per cell; the best fit is kept.
    pub restarts: usize,
    /// Cluster counts for day cells, sorted and deduplicated on load.
    pub k_days: Vec<usize>,
    /// Cluster counts for hour cells, sorted and deduplicated on load.
    pub k_hours: Vec<usize>,
    /// Model variants run on day clusters.
    pub variants_days: Vec<Variant>,
    /// Model variants run on hour clusters (M0 is incompatible: its
    /// per-cluster storage cycle is meaningless one hour at a time).
    pub variants_hours: Vec<Variant>,
    /// Build the binary-free simplified model (references require this).
    pub simplified: bool,
    /// Clustering seed, shared by every cell and recorded per row.
    pub seed: u64,
    pub gap_tol: f64,
    /// Per-solve wall-clock cap.
    pub time_limit: Option<Duration>,
    /// Panel orientation for the irradiance transposition, used when a CSV
    /// dataset lacks the irr_tilt column.
    pub tilt_deg: f64,
    pub azimuth_deg: f64,
    pub albedo: f64,
    /// Output directory suggested by the config file; callers may override.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The default grid: day clusters K ∈ {4,5,6,24,30,36} under M0, hour
    /// clusters K ∈ {96,120,144} under M1, both algorithms, both
    /// normalizations, extremes pinned, simplified models.
    pub fn protocol(data: DataSource) -> Self {
        ExperimentConfig {
            data,
            catalog: None,
            granularities: vec![Granularity::Day, Granularity::Hour],
            algorithms: vec![Algorithm::KMeans, Algorithm::KMedoids],
            normalizations: vec![Normalization::Range, Normalization::Std],
            heuristic: true,
            restarts: 1,
            k_days: vec![4, 5, 6, 24, 30, 36],
            k_hours: vec![96, 120, 144],
            variants_days: vec![Variant::M0],
            variants_hours: vec![Variant::M1],
            simplified: true,
            seed: 11,
            gap_tol: 1e-4,
            time_limit: None,
            tilt_deg: 30.0,
            azimuth_deg: 180.0,
            albedo: 0.2,
            out_dir: None,
        }
    }

    fn k_list(&self, granularity: Granularity) -> &[usize] {
        match granularity {
            Granularity::Day => &self.k_days,
            Granularity::Hour => &self.k_hours,
        }
    }

    fn variant_list(&self, granularity: Granularity) -> &[Variant] {
        match granularity {
            Granularity::Day => &self.variants_days,
            Granularity::Hour => &self.variants_hours,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let cfg = |msg: String| Err(ExperimentError::Config(msg));
        if self.granularities.is_empty() {
            return cfg("granularity list is empty".into());
        }
        if has_duplicates(&self.granularities) {
            return cfg("granularity list contains duplicates".into());
        }
        if self.algorithms.is_empty() {
            return cfg("algorithm list is empty".into());
        }
        if has_duplicates(&self.algorithms) {
            return cfg("algorithm list contains duplicates".into());
        }
        if self.normalizations.is_empty() {
            return cfg("normalization list is empty".into());
        }
        if has_duplicates(&self.normalizations) {
            return cfg("normalization list contains duplicates".into());
        }
        if self.restarts == 0 {
            return cfg("restarts must be at least 1".into());
        }
        if !(self.gap_tol.is_finite() && self.gap_tol > 0.0) {
            return cfg(format!("gap_tol must be a positive number, got {}", self.gap_tol));
        }
        for &g in &self.granularities {
            let ks = self.k_list(g);
            if ks.is_empty() {
                return cfg(format!("granularity {g} is selected but its K list is empty"));
            }
            if ks.contains(&0) {
                return cfg(format!("K list for {g} contains 0"));
            }
            if self.heuristic {
                if let Some(&k) = ks.iter().find(|&&k| k < 3) {
                    return cfg(format!(
                        "K = {k} for {g} needs the extreme heuristic off (it pins two singleton clusters)"
                    ));
                }
            }
            let vs = self.variant_list(g);
            if vs.is_empty() {
                return cfg(format!("granularity {g} is selected but its variant list is empty"));
            }
            if has_duplicates(vs) {
                return cfg(format!("variant list for {g} contains duplicates"));
            }
            for &v in vs {
                if v == Variant::Full {
                    return cfg(
                        "the full variant is the reference horizon, not a grid variant; use M0 or M1"
                            .into(),
                    );
                }
                if v == Variant::M0 && g == Granularity::Hour {
                    return cfg(
                        "variant M0 cannot run on hour clusters: per-cluster storage cycling is meaningless at 1 h resolution"
                            .into(),
                    );
                }
            }
        }
        Ok(())
    }

    /// Canonical text form: one `key = value` line per field that affects
    /// results, including content hashes of the dataset and catalog.
    fn echo(&self, data_sha: Option<&str>, catalog_sha: &str) -> String {
        let mut s = String::new();
        s.push_str(&format!("data = {}\n", self.data));
        if let Some(h) = data_sha {
            s.push_str(&format!("data_sha256 = {h}\n"));
        }
        match &self.catalog {
            Some(p) => s.push_str(&format!("catalog = {}\n", p.display())),
            None => s.push_str("catalog = builtin\n"),
        }
        s.push_str(&format!("catalog_sha256 = {catalog_sha}\n"));
        s.push_str(&format!("granularities = {}\n", join(&self.granularities)));
        s.push_str(&format!("algorithms = {}\n", join(&self.algorithms)));
        s.push_str(&format!("normalizations = {}\n", join(&self.normalizations)));
        s.push_str(&format!("heuristic = {}\n", self.heuristic));
        s.push_str(&format!("restarts = {}\n", self.restarts));
        s.push_str(&format!("k_days = {}\n", join(&self.k_days)));
        s.push_str(&format!("k_hours = {}\n", join(&self.k_hours)));
        s.push_str(&format!("variants_days = {}\n", join(&self.variants_days)));
        s.push_str(&format!("variants_hours = {}\n", join(&self.variants_hours)));
        s.push_str(&format!("simplified = {}\n", self.simplified));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("gap_tol = {}\n", self.gap_tol));
        match self.time_limit {
            Some(d) => s.push_str(&format!("time_limit_secs = {}\n", d.as_secs_f64())),
            None => s.push_str("time_limit_secs = none\n"),
        }
        s.push_str(&format!("tilt_deg = {}\n", self.tilt_deg));
        s.push_str(&format!("azimuth_deg = {}\n", self.azimuth_deg));
        s.push_str(&format!("albedo = {}\n", self.albedo));
        s
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items.iter().enumerate().any(|(i, a)| items[..i].contains(a))
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug)]
pub enum ExperimentError {
    Config(String),
    Data(DataError),
    Cluster(ClusterError),
    Milp(MilpError),
    /// A reference solve did not reach an accepted optimum; deviations
    /// would be meaningless.
    Reference { variant: Variant, status: Status },
    Io(std::io::Error),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Config(msg) => write!(f, "invalid experiment config: {msg}"),
            ExperimentError::Data(e) => write!(f, "dataset error: {e}"),
            ExperimentError::Cluster(e) => write!(f, "clustering error: {e}"),
            ExperimentError::Milp(e) => write!(f, "model error: {e}"),
            ExperimentError::Reference { variant, status } => {
                write!(f, "reference solve for variant {variant} ended with status {status}")
            }
            ExperimentError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<DataError> for ExperimentError {
    fn from(e: DataError) -> Self {
        ExperimentError::Data(e)
    }
}

impl From<ClusterError> for ExperimentError {
    fn from(e: ClusterError) -> Self {
        ExperimentError::Cluster(e)
    }
}

impl From<MilpError> for ExperimentError {
    fn from(e: MilpError) -> Self {
        ExperimentError::Milp(e)
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e)
    }
}

/// One grid cell's coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSpec {
    pub variant: Variant,
    pub granularity: Granularity,
    pub algorithm: Algorithm,
    pub normalization: Normalization,
    pub k: usize,
}

impl CellSpec {
    /// Deterministic sort/grouping key; also the row order of every output.
    fn key(&self) -> (u8, u8, u8, u8, usize) {
        (
            match self.variant {
                Variant::M0 => 0,
                Variant::M1 => 1,
                Variant::Full => 2,
            },
            match self.granularity {
                Granularity::Day => 0,
                Granularity::Hour => 1,
            },
            match self.algorithm {
                Algorithm::KMeans => 0,
                Algorithm::KMedoids => 1,
            },
            match self.normalization {
                Normalization::Range => 0,
                Normalization::Std => 1,
            },
            self.k,
        )
    }

    fn row_key(&self) -> (u8, u8, u8, u8) {
        let (v, g, a, n, _) = self.key();
        (v, g, a, n)
    }
}

#[derive(Debug, Clone)]
pub enum CellOutcome {
    /// The cell's model was built and handed to the solver (any status).
    Solved {
        status: Status,
        /// NaN when no feasible assignment was found.
        objective: f64,
        /// Signed percent deviation from the variant's reference; None
        /// without a reference or without a finite objective.
        deviation_pct: Option<f64>,
        gap: f64,
        nodes: usize,
        solve_seconds: f64,
    },
    /// Clustering or model construction failed; the grid continues.
    Failed { error: String },
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub spec: CellSpec,
    pub seed: u64,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone)]
pub struct ReferenceResult {
    pub variant: Variant,
    /// Which unreduced horizon the reference was built on.
    pub label: &'static str,
    /// Representative-object count of that horizon.
    pub k: usize,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Sorted union of every K requested on any granularity; the pivot
    /// columns of deviation.csv and runtime.csv.
    pub k_columns: Vec<usize>,
    /// One reference per variant present in the grid (simplified runs only).
    pub references: Vec<ReferenceResult>,
    /// Every grid cell, sorted by configuration key.
    pub cells: Vec<CellResult>,
    /// Canonical config text, hashes of data and catalog included.
    pub config_echo: String,
    /// SHA-256 of `config_echo`.
    pub config_hash: String,
    pub simplified: bool,
}

impl ExperimentResult {
    pub fn reference(&self, variant: Variant) -> Option<&ReferenceResult> {
        self.references.iter().find(|r| r.variant == variant)
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_data(config: &ExperimentConfig) -> Result<(TimeSeriesBundle, Option<String>), ExperimentError> {
    match &config.data {
        DataSource::Csv(path) => {
            let bytes = fs::read(path)?;
            let mut bundle = load_bundle(path, &CsvSchema::default())?;
            if bundle.irr_tilt.is_none() {
                bundle.apply_transposition(config.tilt_deg, config.azimuth_deg, config.albedo)?;
            }
            Ok((bundle, Some(sha_hex(&bytes))))
        }
        DataSource::Synth { seed, hours, buildings } => {
            Ok((synth_bundle(*seed, *hours, *buildings)?, None))
        }
    }
}

fn cell_specs(config: &ExperimentConfig) -> Vec<CellSpec> {
    let mut specs = Vec::new();
    for &granularity in &config.granularities {
        let mut ks = config.k_list(granularity).to_vec();
        ks.sort_unstable();
        ks.dedup();
        for &variant in config.variant_list(granularity) {
            for &algorithm in &config.algorithms {
                for &normalization in &config.normalizations {
                    for &k in &ks {
                        specs.push(CellSpec { variant, granularity, algorithm, normalization, k });
                    }
                }
            }
        }
    }
    specs.sort_by_key(|s| s.key());
    specs
}

fn solve_reference(
    variant: Variant,
    bundle: &TimeSeriesBundle,
    catalog: &TechCatalog,
    options: &SolverOptions,
) -> Result<ReferenceResult, ExperimentError> {
    let (label, k, model) = match variant {
        Variant::M0 => {
            // One cluster per calendar day: zero reduction error while the
            // per-day storage cycle of M0 cells is preserved, so a K = N
            // day cell deviates by exactly the solver noise.
            let identity = ClusterModel::identity(bundle, Granularity::Day)?;
            let model = build(ModelSource::Cluster(&identity), catalog, Variant::M0, true)?;
            ("identity-days", identity.k, model)
        }
        Variant::M1 | Variant::Full => {
            let model = build(ModelSource::Bundle(bundle), catalog, variant, true)?;
            ("full-horizon", 1, model)
        }
    };
    let report = solve_model(&model, options);
    match report.status {
        Status::Optimal | Status::GapLimit => {
            Ok(ReferenceResult { variant, label, k, report })
        }
        status => Err(ExperimentError::Reference { variant, status }),
    }
}

fn run_cell(
    spec: CellSpec,
    bundle: &TimeSeriesBundle,
    catalog: &TechCatalog,
    config: &ExperimentConfig,
    reference_obj: Option<f64>,
    options: &SolverOptions,
) -> CellResult {
    let failed = |error: String| CellResult {
        spec,
        seed: config.seed,
        outcome: CellOutcome::Failed { error },
    };
    let mut fit_cfg = FitConfig::new(
        spec.granularity,
        spec.algorithm,
        spec.normalization,
        config.heuristic,
        spec.k,
        config.seed,
    );
    fit_cfg.n_restarts = config.restarts;
    let cluster_model = match fit(bundle, &fit_cfg) {
        Ok(m) => m,
        Err(e) => return failed(e.to_string()),
    };
    let model = match build(
        ModelSource::Cluster(&cluster_model),
        catalog,
        spec.variant,
        config.simplified,
    ) {
        Ok(m) => m,
        Err(e) => return failed(e.to_string()),
    };
    let report = solve_model(&model, options);
    let deviation_pct = match reference_obj {
        Some(r) if report.objective.is_finite() => Some(100.0 * (report.objective - r) / r),
        _ => None,
    };
    CellResult {
        spec,
        seed: config.seed,
        outcome: CellOutcome::Solved {
            status: report.status,
            objective: report.objective,
            deviation_pct,
            gap: report.gap,
            nodes: report.nodes,
            solve_seconds: report.runtime,
        },
    }
}

/// Runs the full grid. References (simplified runs only) are solved first,
/// then every cell as an independent parallel task; a failed cell is
/// recorded with its error while the rest of the grid continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    let (bundle, data_sha) = load_data(config)?;
    let (catalog, catalog_sha) = match &config.catalog {
        Some(p) => (load_catalog(p)?, sha_hex(&fs::read(p)?)),
        None => (TechCatalog::builtin(), sha_hex(BUILTIN_CATALOG.as_bytes())),
    };
    let specs = cell_specs(config);

    let options = SolverOptions {
        gap_tol: config.gap_tol,
        time_limit: config.time_limit,
        ..SolverOptions::default()
    };

    let mut references = Vec::new();
    if config.simplified {
        let mut variants: Vec<Variant> = specs.iter().map(|s| s.variant).collect();
        variants.sort_by_key(|v| match v {
            Variant::M0 => 0u8,
            Variant::M1 => 1,
            Variant::Full => 2,
        });
        variants.dedup();
        for variant in variants {
            references.push(solve_reference(variant, &bundle, &catalog, &options)?);
        }
    }
    let ref_obj: BTreeMap<u8, f64> = references
        .iter()
        .map(|r| {
            let rank = match r.variant {
                Variant::M0 => 0u8,
                Variant::M1 => 1,
                Variant::Full => 2,
            };
            (rank, r.report.objective)
        })
        .collect();

    let cells: Vec<CellResult> = specs
        .par_iter()
        .map(|&spec| {
            let r = ref_obj
                .get(&match spec.variant {
                    Variant::M0 => 0u8,
                    Variant::M1 => 1,
                    Variant::Full => 2,
                })
                .copied();
            run_cell(spec, &bundle, &catalog, config, r, &options)
        })
        .collect();

    let mut k_columns: Vec<usize> = specs.iter().map(|s| s.k).collect();
    k_columns.sort_unstable();
    k_columns.dedup();

    let config_echo = config.echo(data_sha.as_deref(), &catalog_sha);
    let config_hash = sha_hex(config_echo.as_bytes());
    Ok(ExperimentResult {
        k_columns,
        references,
        cells,
        config_echo,
        config_hash,
        simplified: config.simplified,
    })
}

/// The pivot rows: unique (variant, granularity, algorithm, normalization)
/// groups in cell order, each with its cells keyed by K.
fn pivot_rows(result: &ExperimentResult) -> Vec<(&CellResult, BTreeMap<usize, &CellResult>)> {
    let mut rows: Vec<(&CellResult, BTreeMap<usize, &CellResult>)> = Vec::new();
    for cell in &result.cells {
        match rows.last_mut() {
            Some((head, by_k)) if head.spec.row_key() == cell.spec.row_key() => {
                by_k.insert(cell.spec.k, cell);
            }
            _ => {
                let mut by_k = BTreeMap::new();
                by_k.insert(cell.spec.k, cell);
                rows.push((cell, by_k));
            }
        }
    }
    rows
}

fn pivot_header(prefix: &[&str], k_columns: &[usize]) -> String {
    let mut cols: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    cols.extend(k_columns.iter().map(|k| format!("k{k}")));
    cols.join(",")
}

fn write_deviation_csv(result: &ExperimentResult, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{}",
        pivot_header(&["variant", "granularity", "algorithm", "normalization"], &result.k_columns)
    )?;
    for (head, by_k) in pivot_rows(result) {
        let s = &head.spec;
        let mut row = vec![
            s.variant.to_string(),
            s.granularity.to_string(),
            s.algorithm.to_string(),
            s.normalization.to_string(),
        ];
        for k in &result.k_columns {
            let text = by_k.get(k).map_or(String::new(), |cell| match &cell.outcome {
                CellOutcome::Solved { deviation_pct: Some(d), .. } => format!("{d:.4}"),
                _ => String::new(),
            });
            row.push(text);
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

fn write_runtime_csv(result: &ExperimentResult, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{}",
        pivot_header(
            &["variant", "granularity", "algorithm", "normalization", "ref_seconds"],
            &result.k_columns
        )
    )?;
    for (head, by_k) in pivot_rows(result) {
        let s = &head.spec;
        let ref_seconds = result
            .reference(s.variant)
            .map_or(String::new(), |r| format!("{:.3}", r.report.runtime));
        let mut row = vec![
            s.variant.to_string(),
            s.granularity.to_string(),
            s.algorithm.to_string(),
            s.normalization.to_string(),
            ref_seconds,
        ];
        for k in &result.k_columns {
            let text = by_k.get(k).map_or(String::new(), |cell| match &cell.outcome {
                CellOutcome::Solved { solve_seconds, .. } => format!("{solve_seconds:.3}"),
                CellOutcome::Failed { .. } => String::new(),
            });
            row.push(text);
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// Long-form record of every cell; all columns are deterministic (timings
/// live in runtime.csv). Error details are CSV-quoted.
fn write_cells_csv(result: &ExperimentResult, path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => ExperimentError::Io(io),
        other => ExperimentError::Config(format!("csv write failed: {other:?}")),
    })?;
    w.write_record([
        "variant",
        "granularity",
        "algorithm",
        "normalization",
        "k",
        "seed",
        "status",
        "objective",
        "deviation_pct",
        "gap",
        "nodes",
        "detail",
    ])
    .map_err(csv_io)?;
    for cell in &result.cells {
        let s = &cell.spec;
        let base = [
            s.variant.to_string(),
            s.granularity.to_string(),
            s.algorithm.to_string(),
            s.normalization.to_string(),
            s.k.to_string(),
            cell.seed.to_string(),
        ];
        let rest = match &cell.outcome {
            CellOutcome::Solved { status, objective, deviation_pct, gap, nodes, .. } => [
                status.to_string(),
                finite_or_empty(*objective),
                deviation_pct.map_or(String::new(), |d| d.to_string()),
                finite_or_empty(*gap),
                nodes.to_string(),
                String::new(),
            ],
            CellOutcome::Failed { error } => [
                "error".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                error.clone(),
            ],
        };
        w.write_record(base.iter().chain(rest.iter())).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> ExperimentError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ExperimentError::Io(io),
        other => ExperimentError::Config(format!("csv write failed: {other:?}")),
    }
}

fn finite_or_empty(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn write_references_csv(result: &ExperimentResult, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "variant,reference,k,status,objective,gap,nodes")?;
    for r in &result.references {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.variant,
            r.label,
            r.k,
            r.report.status,
            finite_or_empty(r.report.objective),
            finite_or_empty(r.report.gap),
            r.report.nodes,
        )?;
    }
    w.flush()
}

/// Writes the run's files into `dir` (created if missing) and returns the
/// paths: config.txt, cells.csv, runtime.csv, and — when references were
/// solved — deviation.csv and references.csv.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let config_path = dir.join("config.txt");
    let mut config_text = result.config_echo.clone();
    config_text.push_str(&format!("config_hash = {}\n", result.config_hash));
    fs::write(&config_path, config_text)?;
    written.push(config_path);

    let cells_path = dir.join("cells.csv");
    write_cells_csv(result, &cells_path)?;
    written.push(cells_path);

    let runtime_path = dir.join("runtime.csv");
    write_runtime_csv(result, &runtime_path)?;
    written.push(runtime_path);

    if !result.references.is_empty() {
        let deviation_path = dir.join("deviation.csv");
        write_deviation_csv(result, &deviation_path)?;
        written.push(deviation_path);

        let references_path = dir.join("references.csv");
        write_references_csv(result, &references_path)?;
        written.push(references_path);
    }
    Ok(written)
}

// ---- TOML config form ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: RawData,
    #[serde(default)]
    catalog: Option<String>,
    #[serde(default)]
    out_dir: Option<String>,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    #[serde(default)]
    csv: Option<String>,
    #[serde(default)]
    synth: Option<RawSynth>,
    #[serde(default)]
    tilt_deg: Option<f64>,
    #[serde(default)]
    azimuth_deg: Option<f64>,
    #[serde(default)]
    albedo: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynth {
    seed: u64,
    hours: usize,
    buildings: usize,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawGrid {
    granularities: Option<Vec<String>>,
    algorithms: Option<Vec<String>>,
    normalizations: Option<Vec<String>>,
    heuristic: Option<bool>,
    restarts: Option<usize>,
    k_days: Option<Vec<usize>>,
    k_hours: Option<Vec<usize>>,
    variants_days: Option<Vec<String>>,
    variants_hours: Option<Vec<String>>,
    simplified: Option<bool>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    gap_tol: Option<f64>,
    time_limit_secs: Option<f64>,
}

fn parse_list<T>(raw: Option<Vec<String>>, fallback: &[T]) -> Result<Vec<T>, ExperimentError>
where
    T: std::str::FromStr<Err = String> + Clone,
{
    match raw {
        None => Ok(fallback.to_vec()),
        Some(items) => items
            .iter()
            .map(|s| s.parse::<T>().map_err(ExperimentError::Config))
            .collect(),
    }
}

/// Parses the TOML form. Absent keys fall back to the protocol defaults;
/// unknown keys are rejected. Exactly one of `data.csv` / `data.synth`
/// must be given.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let data = match (raw.data.csv, raw.data.synth) {
        (Some(path), None) => DataSource::Csv(PathBuf::from(path)),
        (None, Some(s)) => {
            DataSource::Synth { seed: s.seed, hours: s.hours, buildings: s.buildings }
        }
        (Some(_), Some(_)) => {
            return Err(ExperimentError::Config(
                "data.csv and data.synth are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(ExperimentError::Config("data needs either csv or synth".into()))
        }
    };
    let defaults = ExperimentConfig::protocol(data.clone());
    let time_limit = match raw.solver.time_limit_secs {
        None => None,
        Some(s) if s == 0.0 => None,
        Some(s) if s.is_finite() && s > 0.0 => Some(Duration::from_secs_f64(s)),
        Some(s) => {
            return Err(ExperimentError::Config(format!(
                "time_limit_secs must be a positive number of seconds (0 disables), got {s}"
            )))
        }
    };
    let mut k_days = raw.grid.k_days.unwrap_or(defaults.k_days);
    k_days.sort_unstable();
    k_days.dedup();
    let mut k_hours = raw.grid.k_hours.unwrap_or(defaults.k_hours);
    k_hours.sort_unstable();
    k_hours.dedup();
    let config = ExperimentConfig {
        data,
        catalog: raw.catalog.map(PathBuf::from),
        granularities: parse_list(raw.grid.granularities, &defaults.granularities)?,
        algorithms: parse_list(raw.grid.algorithms, &defaults.algorithms)?,
        normalizations: parse_list(raw.grid.normalizations, &defaults.normalizations)?,
        heuristic: raw.grid.heuristic.unwrap_or(defaults.heuristic),
        restarts: raw.grid.restarts.unwrap_or(defaults.restarts),
        k_days,
        k_hours,
        variants_days: parse_list(raw.grid.variants_days, &defaults.variants_days)?,
        variants_hours: parse_list(raw.grid.variants_hours, &defaults.variants_hours)?,
        simplified: raw.grid.simplified.unwrap_or(defaults.simplified),
        seed: raw.grid.seed.unwrap_or(defaults.seed),
        gap_tol: raw.solver.gap_tol.unwrap_or(defaults.gap_tol),
        time_limit,
        tilt_deg: raw.data.tilt_deg.unwrap_or(defaults.tilt_deg),
        azimuth_deg: raw.data.azimuth_deg.unwrap_or(defaults.azimuth_deg),
        albedo: raw.data.albedo.unwrap_or(defaults.albedo),
        out_dir: raw.out_dir.map(PathBuf::from),
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut config =
            ExperimentConfig::protocol(DataSource::Synth { seed: 11, hours: 240, buildings: 1 });
        config.granularities = vec![Granularity::Day];
        config.algorithms = vec![Algorithm::KMeans];
        config.normalizations = vec![Normalization::Range, Normalization::Std];
        config.k_days = vec![4, 10, 12];
        config.k_hours = vec![];
        config
    }

    #[test]
    fn protocol_defaults_match_the_shipped_grid() {
        let c = ExperimentConfig::protocol(DataSource::Synth { seed: 11, hours: 720, buildings: 2 });
        assert_eq!(c.k_days, vec![4, 5, 6, 24, 30, 36]);
        assert_eq!(c.k_hours, vec![96, 120, 144]);
        assert_eq!(c.variants_days, vec![Variant::M0]);
        assert_eq!(c.variants_hours, vec![Variant::M1]);
        assert!(c.simplified);
        assert!(c.heuristic);
        assert_eq!(c.seed, 11);
        c.validate().unwrap();
    }

    #[test]
    fn toml_overrides_defaults_and_rejects_unknown_keys() {
        let text = r#"
            [data.synth]
            seed = 7
            hours = 480
            buildings = 2

            [grid]
            granularities = ["day"]
            algorithms = ["kmedoids"]
            k_days = [6, 4, 6]
            seed = 3

            [solver]
            gap_tol = 1e-3
            time_limit_secs = 30
        "#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.data, DataSource::Synth { seed: 7, hours: 480, buildings: 2 });
        assert_eq!(c.granularities, vec![Granularity::Day]);
        assert_eq!(c.algorithms, vec![Algorithm::KMedoids]);
        assert_eq!(c.k_days, vec![4, 6], "sorted and deduplicated");
        assert_eq!(c.normalizations, vec![Normalization::Range, Normalization::Std]);
        assert_eq!(c.seed, 3);
        assert_eq!(c.gap_tol, 1e-3);
        assert_eq!(c.time_limit, Some(Duration::from_secs(30)));

        let bad = parse_config("[data]\ncsv = \"x.csv\"\n[grid]\nkdays = [4]\n");
        assert!(matches!(bad, Err(ExperimentError::Config(_))));
        let both = parse_config("[data]\ncsv = \"x.csv\"\n[data.synth]\nseed = 1\nhours = 24\nbuildings = 1\n");
        assert!(matches!(both, Err(ExperimentError::Config(_))));
    }

    #[test]
    fn validation_rejects_incompatible_grids() {
        let base = tiny_config();

        let mut m0_hours = base.clone();
        m0_hours.granularities = vec![Granularity::Hour];
        m0_hours.k_hours = vec![96];
        m0_hours.variants_hours = vec![Variant::M0];
        let err = m0_hours.validate().unwrap_err().to_string();
        assert!(err.contains("M0"), "{err}");

        let mut full_grid = base.clone();
        full_grid.variants_days = vec![Variant::Full];
        assert!(full_grid.validate().is_err());

        let mut empty_k = base.clone();
        empty_k.k_days = vec![];
        assert!(empty_k.validate().is_err());

        let mut low_k = base.clone();
        low_k.k_days = vec![2];
        assert!(low_k.validate().is_err(), "heuristic needs K >= 3");
        low_k.heuristic = false;
        low_k.validate().unwrap();

        let mut dup = base;
        dup.normalizations = vec![Normalization::Range, Normalization::Range];
        assert!(dup.validate().is_err());
    }

    #[test]
    fn tiny_day_grid_records_failures_and_zero_deviation_at_k_equal_n() {
        // 10-day bundle: K = 12 cells must fail, K = 10 reproduces the
        // days exactly so its deviation is solver noise only.
        let result = run_experiment(&tiny_config()).unwrap();
        assert_eq!(result.cells.len(), 6);
        assert_eq!(result.references.len(), 1);
        let r = result.reference(Variant::M0).unwrap();
        assert_eq!(r.label, "identity-days");
        assert_eq!(r.k, 10);
        assert_eq!(r.report.status, Status::Optimal);

        for cell in &result.cells {
            match &cell.outcome {
                CellOutcome::Failed { error } => {
                    assert_eq!(cell.spec.k, 12, "only K > N may fail: {error}");
                    assert!(error.contains("12"), "{error}");
                }
                CellOutcome::Solved { status, deviation_pct, .. } => {
                    assert_eq!(*status, Status::Optimal);
                    let d = deviation_pct.expect("simplified run has references");
                    if cell.spec.k == 10 {
                        assert!(d.abs() < 1e-3, "K = N deviation {d}% should be solver noise");
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_granularity_pivot_uses_blank_cells() {
        let mut config =
            ExperimentConfig::protocol(DataSource::Synth { seed: 11, hours: 240, buildings: 1 });
        config.granularities = vec![Granularity::Day, Granularity::Hour];
        config.algorithms = vec![Algorithm::KMeans];
        config.normalizations = vec![Normalization::Range];
        config.k_days = vec![4];
        config.k_hours = vec![6];
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.k_columns, vec![4, 6]);
        assert_eq!(result.references.len(), 2);

        let dir = tempfile::tempdir().unwrap();
        let written = write_outputs(&result, dir.path()).unwrap();
        assert_eq!(written.len(), 5);
        let deviation = fs::read_to_string(dir.path().join("deviation.csv")).unwrap();
        let lines: Vec<&str> = deviation.lines().collect();
        assert_eq!(lines[0], "variant,granularity,algorithm,normalization,k4,k6");
        assert_eq!(lines.len(), 3);
        let day: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(&day[..4], &["M0", "day", "kmeans", "range"]);
        assert!(!day[4].is_empty() && day[5].is_empty(), "day row fills k4 only: {day:?}");
        let hour: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(&hour[..4], &["M1", "hour", "kmeans", "range"]);
        assert!(hour[4].is_empty() && !hour[5].is_empty(), "hour row fills k6 only: {hour:?}");

        let references = fs::read_to_string(dir.path().join("references.csv")).unwrap();
        let ref_lines: Vec<&str> = references.lines().collect();
        assert_eq!(ref_lines.len(), 3);
        assert!(ref_lines[1].starts_with("M0,identity-days,10,optimal,"));
        assert!(ref_lines[2].starts_with("M1,full-horizon,1,optimal,"));
    }

    #[test]
    fn reruns_are_byte_identical_outside_runtime_csv() {
        let mut config = tiny_config();
        config.k_days = vec![4, 10];
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        write_outputs(&run_experiment(&config).unwrap(), &a).unwrap();
        write_outputs(&run_experiment(&config).unwrap(), &b).unwrap();
        for file in ["config.txt", "cells.csv", "deviation.csv", "references.csv"] {
            let left = fs::read(a.join(file)).unwrap();
            let right = fs::read(b.join(file)).unwrap();
            assert_eq!(left, right, "{file} differs between reruns");
        }
        // runtime.csv carries wall-clock values; only its shape is stable
        let shape = |p: &Path| -> Vec<String> {
            fs::read_to_string(p)
                .unwrap()
                .lines()
                .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(","))
                .collect()
        };
        let header = |p: &Path| shape(p).first().cloned().unwrap();
        assert_eq!(header(&a.join("runtime.csv")), header(&b.join("runtime.csv")));
        assert_eq!(shape(&a.join("runtime.csv")).len(), shape(&b.join("runtime.csv")).len());
    }

    #[test]
    fn complete_mode_reports_without_references() {
        let mut config =
            ExperimentConfig::protocol(DataSource::Synth { seed: 11, hours: 96, buildings: 1 });
        config.granularities = vec![Granularity::Day];
        config.algorithms = vec![Algorithm::KMeans];
        config.normalizations = vec![Normalization::Range];
        config.k_days = vec![3];
        config.k_hours = vec![];
        config.simplified = false;
        config.time_limit = Some(Duration::from_secs(10));
        let result = run_experiment(&config).unwrap();
        assert!(result.references.is_empty());
        assert_eq!(result.cells.len(), 1);
        match &result.cells[0].outcome {
            CellOutcome::Solved { status, deviation_pct, objective, .. } => {
                assert!(matches!(
                    status,
                    Status::Optimal | Status::GapLimit | Status::TimeLimit
                ));
                assert!(deviation_pct.is_none(), "no reference, no deviation");
                assert!(objective.is_finite());
            }
            CellOutcome::Failed { error } => panic!("cell failed: {error}"),
        }

        let dir = tempfile::tempdir().unwrap();
        let written = write_outputs(&result, dir.path()).unwrap();
        assert_eq!(written.len(), 3);
        assert!(!dir.path().join("deviation.csv").exists());
        assert!(!dir.path().join("references.csv").exists());
        let runtime = fs::read_to_string(dir.path().join("runtime.csv")).unwrap();
        let row = runtime.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert!(fields[4].is_empty(), "ref_seconds blank without a reference: {row}");
    }

    #[test]
    fn config_hash_tracks_content_changes() {
        let config = tiny_config();
        let a = run_experiment(&config).unwrap();
        let mut changed = config.clone();
        changed.seed = 12;
        let b = run_experiment(&changed).unwrap();
        assert_ne!(a.config_hash, b.config_hash);
        assert_eq!(a.config_hash.len(), 64);
        assert!(a.config_echo.contains("data = synth seed=11 hours=240 buildings=1"));
        assert!(a.config_echo.contains("catalog = builtin"));
    }
}
