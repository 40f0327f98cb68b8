//! Command-line front-end: synthesize or ingest hourly datasets, reduce
//! them to representative days/hours, sweep reduction errors, build and
//! solve the neighborhood investment model, and run the full
//! reference-versus-grid experiment.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Duration;
use zenplan::cluster::{
    fit, write_assignment, write_representatives, Algorithm, FitConfig, Granularity,
    Normalization,
};
use zenplan::experiment::{load_config, run_experiment, write_outputs, CellOutcome};
use zenplan::metrics::{sweep, write_elbow_csv, write_sweep_csv, SweepOptions};
use zenplan::milp::{build, load_catalog, MilpModel, ModelSource, TechCatalog, Variant};
use zenplan::solve::{export_mps, solve_model, LpBackend, SolverOptions};
use zenplan::timeseries::{load_bundle, synth_bundle, write_bundle, CsvSchema, TimeSeriesBundle};

#[derive(Parser)]
#[command(name = "zenplan", version, about = "Zero-emission neighborhood planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic hourly dataset CSV.
    Synth(SynthArgs),
    /// Reduce a dataset to K representative objects.
    Cluster(ClusterArgs),
    /// Reduction-error metrics across a list of cluster counts.
    Sweep(SweepArgs),
    /// Build the investment model and export it as MPS.
    Build(BuildArgs),
    /// Build the investment model and solve it.
    Solve(SolveArgs),
    /// Run the reference-versus-grid deviation protocol from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Horizon length; must be a positive multiple of 24.
    #[arg(long, default_value_t = 720)]
    hours: usize,
    #[arg(long, default_value_t = 2)]
    buildings: usize,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

/// Where the hourly dataset comes from: a CSV file or the deterministic
/// synthesizer. Exactly one must be given.
#[derive(Args)]
struct DataArgs {
    /// Hourly dataset CSV.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Synthesize instead of reading a file.
    #[arg(long, value_name = "SEED:HOURS:BUILDINGS", value_parser = parse_synth_spec)]
    synth: Option<SynthSpec>,
    /// Panel tilt used to derive irr_tilt when the CSV lacks that column.
    #[arg(long, default_value_t = 30.0)]
    tilt_deg: f64,
    /// Panel azimuth (180 = south).
    #[arg(long, default_value_t = 180.0)]
    azimuth_deg: f64,
    /// Ground reflectance for the transposition.
    #[arg(long, default_value_t = 0.2)]
    albedo: f64,
}

#[derive(Clone, Debug)]
struct SynthSpec {
    seed: u64,
    hours: usize,
    buildings: usize,
}

impl DataArgs {
    fn load(&self) -> Result<TimeSeriesBundle> {
        match (&self.data, &self.synth) {
            (Some(path), None) => {
                let mut bundle = load_bundle(path, &CsvSchema::default())
                    .with_context(|| format!("reading {}", path.display()))?;
                if bundle.irr_tilt.is_none() {
                    bundle
                        .apply_transposition(self.tilt_deg, self.azimuth_deg, self.albedo)
                        .context("computing tilted irradiance")?;
                }
                Ok(bundle)
            }
            (None, Some(s)) => {
                synth_bundle(s.seed, s.hours, s.buildings).context("synthesizing dataset")
            }
            (Some(_), Some(_)) => bail!("--data and --synth are mutually exclusive"),
            (None, None) => bail!("one of --data or --synth is required"),
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_parser = parse_granularity, default_value = "day")]
    granularity: Granularity,
    #[arg(long, value_parser = parse_algorithm, default_value = "kmeans")]
    algorithm: Algorithm,
    #[arg(long, value_parser = parse_normalization, default_value = "range")]
    normalization: Normalization,
    /// Pin the peak-load and darkest objects as singleton clusters.
    #[arg(long)]
    heuristic: bool,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Clustering restarts; the best fit is kept.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
}

impl FitArgs {
    fn config(&self, k: usize) -> FitConfig {
        let mut cfg = FitConfig::new(
            self.granularity,
            self.algorithm,
            self.normalization,
            self.heuristic,
            k,
            self.seed,
        );
        cfg.n_restarts = self.restarts;
        cfg
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Number of representative objects.
    #[arg(long)]
    k: usize,
    /// Directory for representatives.csv and assignment.csv.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Cluster counts: comma-separated values and START:END:STEP ranges,
    /// e.g. "4,6,10:30:10".
    #[arg(long, value_parser = parse_k_list)]
    k: KList,
    /// Directory for sweep.csv and plotdata/.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Number of representative objects (required for M0/M1; the full
    /// variant uses the unreduced horizon).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_variant, default_value = "M0")]
    variant: Variant,
    /// Build the binary-free simplified model.
    #[arg(long)]
    simplified: bool,
    /// Technology catalog TOML; defaults to the built-in catalog.
    #[arg(long, value_name = "PATH")]
    catalog: Option<PathBuf>,
}

impl ModelArgs {
    fn catalog(&self) -> Result<TechCatalog> {
        match &self.catalog {
            Some(p) => load_catalog(p).with_context(|| format!("reading {}", p.display())),
            None => Ok(TechCatalog::builtin()),
        }
    }

    fn build_model(&self) -> Result<MilpModel> {
        let bundle = self.data.load()?;
        let catalog = self.catalog()?;
        let model = match self.variant {
            Variant::Full => {
                if self.k.is_some() {
                    bail!("the full variant uses the unreduced horizon; drop --k");
                }
                build(ModelSource::Bundle(&bundle), &catalog, Variant::Full, self.simplified)?
            }
            variant => {
                let k = self.k.context("--k is required for variants M0 and M1")?;
                let cluster_model = fit(&bundle, &self.fit.config(k))?;
                build(ModelSource::Cluster(&cluster_model), &catalog, variant, self.simplified)?
            }
        };
        Ok(model)
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output MPS path.
    #[arg(long, value_name = "PATH", default_value = "model.mps")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Relative optimality gap at which branch-and-bound stops.
    #[arg(long, default_value_t = 1e-4)]
    gap_tol: f64,
    /// Wall-clock cap in seconds.
    #[arg(long, value_name = "SECS")]
    time_limit: Option<f64>,
    /// LP relaxation backend.
    #[arg(long, value_parser = parse_backend, default_value = "auto")]
    backend: LpBackend,
    /// Also export the model as MPS before solving.
    #[arg(long, value_name = "PATH")]
    export: Option<PathBuf>,
    /// Skip the embedded solve (export only).
    #[arg(long)]
    no_embedded: bool,
    /// Write the solution as a name,value CSV.
    #[arg(long, value_name = "PATH")]
    write_solution: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config TOML.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the config's out_dir (default: out).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct KList(Vec<usize>);

fn parse_granularity(s: &str) -> Result<Granularity, String> {
    s.parse()
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_normalization(s: &str) -> Result<Normalization, String> {
    s.parse()
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn parse_backend(s: &str) -> Result<LpBackend, String> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(LpBackend::Auto),
        "embedded" => Ok(LpBackend::Embedded),
        "sparse" => Ok(LpBackend::Sparse),
        other => Err(format!("unknown backend '{other}' (expected auto, embedded or sparse)")),
    }
}

fn parse_synth_spec(s: &str) -> Result<SynthSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("'{s}' must be SEED:HOURS:BUILDINGS"));
    }
    let number = |name: &str, raw: &str| {
        raw.trim().parse::<u64>().map_err(|e| format!("bad {name} '{raw}': {e}"))
    };
    Ok(SynthSpec {
        seed: number("seed", parts[0])?,
        hours: number("hours", parts[1])? as usize,
        buildings: number("buildings", parts[2])? as usize,
    })
}

/// "4,6,10:30:10" → [4, 6, 10, 20, 30]; ranges are inclusive.
fn parse_k_list(s: &str) -> Result<KList, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err("empty entry in K list".to_string());
        }
        if part.contains(':') {
            let fields: Vec<&str> = part.split(':').collect();
            if fields.len() != 3 {
                return Err(format!("range '{part}' must be START:END:STEP"));
            }
            let number = |raw: &str| {
                raw.trim().parse::<usize>().map_err(|e| format!("bad number '{raw}': {e}"))
            };
            let (start, end, step) = (number(fields[0])?, number(fields[1])?, number(fields[2])?);
            if step == 0 {
                return Err(format!("range '{part}' has step 0"));
            }
            if end < start {
                return Err(format!("range '{part}' runs backwards"));
            }
            let mut k = start;
            while k <= end {
                out.push(k);
                k += step;
            }
        } else {
            out.push(part.parse::<usize>().map_err(|e| format!("bad number '{part}': {e}"))?);
        }
    }
    Ok(KList(out))
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Build(args) => cmd_build(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let bundle = synth_bundle(args.seed, args.hours, args.buildings)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_bundle(&bundle, &args.out)?;
    println!(
        "wrote {} ({} hours, {} buildings, seed {})",
        args.out.display(),
        args.hours,
        args.buildings,
        args.seed
    );
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let bundle = args.data.load()?;
    let model = fit(&bundle, &args.fit.config(args.k))?;
    std::fs::create_dir_all(&args.out_dir)?;
    let representatives = args.out_dir.join("representatives.csv");
    let assignment = args.out_dir.join("assignment.csv");
    write_representatives(&model, &representatives)?;
    write_assignment(&model, &assignment)?;
    println!(
        "{} {} clusters over {} {} objects (objective {:.6})",
        model.algorithm, model.k, model.n_objects, model.granularity, model.objective
    );
    println!("wrote {}", representatives.display());
    println!("wrote {}", assignment.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let bundle = args.data.load()?;
    let options = SweepOptions { n_restarts: args.fit.restarts, ..SweepOptions::default() };
    let reports = sweep(
        &bundle,
        args.fit.granularity,
        args.fit.algorithm,
        args.fit.normalization,
        args.fit.heuristic,
        &args.k.0,
        args.fit.seed,
        options,
    )?;
    std::fs::create_dir_all(&args.out_dir)?;
    let sweep_path = args.out_dir.join("sweep.csv");
    write_sweep_csv(&reports, &sweep_path)?;
    let plotdata = args.out_dir.join("plotdata");
    std::fs::create_dir_all(&plotdata)?;
    let elbow_path = plotdata.join(format!(
        "elbow_{}_{}_{}.csv",
        args.fit.granularity, args.fit.algorithm, args.fit.normalization
    ));
    write_elbow_csv(&reports, &elbow_path)?;
    println!("{} cluster counts evaluated", reports.len());
    println!("wrote {}", sweep_path.display());
    println!("wrote {}", elbow_path.display());
    Ok(())
}

fn cmd_build(args: BuildArgs) -> Result<()> {
    let model = args.model.build_model()?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    export_mps(&model, &args.out)?;
    println!(
        "{} model: {} variables ({} binary), {} rows",
        model.variant,
        model.n_vars(),
        model.n_binaries(),
        model.n_rows()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let model = args.model.build_model()?;
    if let Some(path) = &args.export {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        export_mps(&model, path)?;
        println!("wrote {}", path.display());
    }
    if args.no_embedded {
        if args.export.is_none() {
            bail!("--no-embedded without --export does nothing; give --export PATH");
        }
        println!("solve skipped (--no-embedded)");
        return Ok(());
    }
    let options = SolverOptions {
        gap_tol: args.gap_tol,
        time_limit: args.time_limit.map(Duration::from_secs_f64),
        backend: args.backend,
        ..SolverOptions::default()
    };
    let report = solve_model(&model, &options);
    println!("status: {}", report.status);
    if report.objective.is_finite() {
        println!("objective: {}", report.objective);
        println!("gap: {}", report.gap);
    }
    println!("nodes: {}", report.nodes);
    println!("runtime_seconds: {:.3}", report.runtime);
    if let Some(path) = &args.write_solution {
        if report.values.is_empty() {
            bail!("no feasible assignment to write (status {})", report.status);
        }
        write_solution_csv(&model, &report.values, path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn write_solution_csv(model: &MilpModel, values: &[f64], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "variable,value")?;
    for (v, x) in model.variables.iter().zip(values) {
        writeln!(w, "{},{}", v.name, x)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let config = load_config(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let out_dir = args
        .out_dir
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let result = run_experiment(&config)?;

    for r in &result.references {
        println!(
            "reference {} ({}): objective {} [{}]",
            r.variant, r.label, r.report.objective, r.report.status
        );
    }
    let mut solved = 0usize;
    let mut failed = 0usize;
    let mut worst: Option<(f64, String)> = None;
    for cell in &result.cells {
        match &cell.outcome {
            CellOutcome::Solved { deviation_pct, .. } => {
                solved += 1;
                if let Some(d) = deviation_pct {
                    let tag = format!(
                        "{} {} {} {} K={}",
                        cell.spec.variant,
                        cell.spec.granularity,
                        cell.spec.algorithm,
                        cell.spec.normalization,
                        cell.spec.k
                    );
                    if worst.as_ref().map_or(true, |(w, _)| d.abs() > *w) {
                        worst = Some((d.abs(), tag));
                    }
                }
            }
            CellOutcome::Failed { .. } => failed += 1,
        }
    }
    println!("cells: {solved} solved, {failed} failed");
    if let Some((magnitude, tag)) = worst {
        println!("largest |deviation|: {magnitude:.4}% ({tag})");
    }
    println!("config_hash: {}", result.config_hash);
    for path in write_outputs(&result, &out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
