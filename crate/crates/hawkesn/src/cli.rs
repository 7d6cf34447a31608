//! Command-line pipeline: simulate, fit, gof, holdout, predict, convert,
//! size-dist.
//!
//! Every file-producing run writes a `manifest.json` next to its outputs
//! with the subcommand, the full configuration snapshot, the seed and the
//! library version. All numeric CSV output uses 9 significant digits, and
//! every output file can be re-ingested by the subcommand that consumes it.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cascades::{self, format_sig9, Cascade};
use crate::error::{Error, Result};
use crate::fit::{fit_cascade, fit_joint, FitConfig, FitResult};
use crate::gof::{
    compare_models, gof_report, ModelComparison, DEFAULT_KS_GAP, DEFAULT_SIGNIFICANCE,
};
use crate::kernels::{
    KernelFamily, KernelSpec, RecoveryDistribution, SirSpec, DEFAULT_MARK_EXPONENT,
};
use crate::likelihood::{holdout_loglik, HawkesNParams};
use crate::predict::{
    are, combine_predictions, extract_features, train_sigma, CvConfig, TrainingRow,
    DEFAULT_OBSERVATION_WINDOW,
};
use crate::simulate::{simulate_batch, size_distribution, SimConfig, DEFAULT_MAX_EVENTS};

#[derive(Parser, Debug)]
#[command(
    name = "hawkesn",
    version,
    about = "Finite-population self-exciting processes and generalized SIR epidemics"
)]
struct Cli {
    /// Worker threads for batch operations (also HAWKESN_JOBS); defaults to
    /// the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample epidemic realizations and write them as a cascade CSV with a
    /// recovery_time column.
    Simulate(SimulateArgs),
    /// Maximum-likelihood fits of cascades read from CSV.
    Fit(FitArgs),
    /// Time-rescaling goodness-of-fit report for fitted models.
    Gof(GofArgs),
    /// Holdout negative log-likelihood per event.
    Holdout(HoldoutArgs),
    /// Final-size prediction with a cross-validated sigma regressor.
    Predict(PredictArgs),
    /// Convert parameters between kernel and SIR form.
    Convert(ConvertArgs),
    /// Empirical final-size distribution of a specification.
    SizeDist(SizeDistArgs),
}

/// SIR specification from a JSON file and/or flags (flags win).
#[derive(Args, Debug, Clone, Serialize)]
struct SpecArgs {
    /// JSON file with {"beta", "recovery": {"family", "theta", "c"?},
    /// "population", "rho"?}.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    /// Exponential recovery rate; alias of --theta for the exp family.
    #[arg(long, conflicts_with = "theta")]
    gamma: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Power-law recovery offset.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, alias = "N")]
    population: Option<f64>,
    /// Mark warping exponent (used when simulating marked runs).
    #[arg(long)]
    rho: Option<f64>,
}

impl SpecArgs {
    fn build(&self) -> Result<SirSpec> {
        let base: Option<SirSpec> = match &self.spec {
            Some(path) => Some(serde_json::from_reader(std::fs::File::open(path)?)?),
            None => None,
        };
        let family = match (&self.family, &base) {
            (Some(f), _) => f.parse::<KernelFamily>()?,
            (None, Some(spec)) => spec.recovery.family,
            (None, None) => KernelFamily::Exp,
        };
        let theta = self
            .theta
            .or(self.gamma)
            .or(base.map(|s| s.recovery.theta))
            .ok_or_else(|| Error::InvalidParameter("missing --theta (or --gamma)".into()))?;
        let c = self.c.or(base.and_then(|s| s.recovery.c));
        let beta = self
            .beta
            .or(base.map(|s| s.beta))
            .ok_or_else(|| Error::InvalidParameter("missing --beta".into()))?;
        let population = self
            .population
            .or(base.map(|s| s.population))
            .ok_or_else(|| Error::InvalidParameter("missing --population".into()))?;
        let rho = self.rho.or(base.map(|s| s.rho)).unwrap_or(0.0);
        let recovery = RecoveryDistribution::new(family, theta, c)?;
        SirSpec::new(beta, recovery, population)?.with_rho(rho)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop each run at this cascade time.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_EVENTS)]
    max_events: usize,
    /// Sample power-law marks (exponent --alpha); the spec's rho then warps
    /// the intensity.
    #[arg(long)]
    marked: bool,
    #[arg(long, default_value_t = DEFAULT_MARK_EXPONENT)]
    alpha: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FitArgs {
    #[arg(long)]
    cascades: PathBuf,
    #[arg(long, default_value = "exp")]
    family: String,
    /// Fit the mark exponent rho (cascade CSV must carry marks).
    #[arg(long)]
    marked: bool,
    #[arg(long)]
    pin_kappa: Option<f64>,
    #[arg(long)]
    pin_theta: Option<f64>,
    #[arg(long)]
    pin_c: Option<f64>,
    #[arg(long)]
    pin_population: Option<f64>,
    #[arg(long)]
    pin_rho: Option<f64>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One parameter set (with a shared population) over all cascades.
    #[arg(long)]
    joint: bool,
    /// Fit on the first ceil(f*n) events of each cascade.
    #[arg(long)]
    observe_fraction: Option<f64>,
    /// Fit on events within the first S seconds, censoring the likelihood
    /// at S.
    #[arg(long)]
    observe_seconds: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GofArgs {
    #[arg(long)]
    cascades: PathBuf,
    /// Fit summary CSV (repeat for several models).
    #[arg(long = "fits", required = true)]
    fits: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
    level: f64,
    /// KS-distance gap below which two models tie in the comparison table.
    #[arg(long, default_value_t = DEFAULT_KS_GAP)]
    min_gap: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct HoldoutArgs {
    #[arg(long)]
    cascades: PathBuf,
    #[arg(long = "fits", required = true)]
    fits: Vec<PathBuf>,
    /// Train fraction: events after ceil(split*n) are scored.
    #[arg(long, default_value_t = 0.4)]
    split: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct PredictArgs {
    /// Full cascades (ground-truth final sizes).
    #[arg(long)]
    cascades: PathBuf,
    /// Fit summary CSV from fits on the observation window (repeatable).
    #[arg(long = "fits", required = true)]
    fits: Vec<PathBuf>,
    /// Observation window in seconds of cascade time.
    #[arg(long, default_value_t = DEFAULT_OBSERVATION_WINDOW)]
    horizon: f64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 4)]
    train_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the raw feature matrix per model.
    #[arg(long)]
    export_features: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ConvertArgs {
    /// Target form: "sir" or "kernel".
    #[arg(long)]
    to: String,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Exponential recovery rate; alias of --theta when converting to a
    /// kernel.
    #[arg(long)]
    gamma: Option<f64>,
    /// Optional output directory; the JSON goes to stdout otherwise.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SizeDistArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 5000)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Provenance record written next to every output set.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub created_unix_secs: u64,
}

fn write_manifest(
    dir: &Path,
    subcommand: &str,
    config: &impl Serialize,
    seed: Option<u64>,
) -> Result<()> {
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        config: serde_json::to_value(config)?,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix_secs: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let file = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(file, &manifest)?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Run the CLI with explicit arguments; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let jobs = cli.jobs.or_else(|| {
        std::env::var("HAWKESN_JOBS").ok().and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(jobs) = jobs {
        // may already be initialized when called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run the CLI with the process arguments.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => run_simulate(args),
        Command::Fit(args) => run_fit(args),
        Command::Gof(args) => run_gof(args),
        Command::Holdout(args) => run_holdout(args),
        Command::Predict(args) => run_predict(args),
        Command::Convert(args) => run_convert(args),
        Command::SizeDist(args) => run_size_dist(args),
    }
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let spec = args.spec.build()?;
    ensure_dir(&args.out_dir)?;
    let mut cfg = SimConfig::new(spec, args.seed).with_max_events(args.max_events);
    if let Some(h) = args.horizon {
        cfg = cfg.with_horizon(h);
    }
    let alpha = args.marked.then_some(args.alpha);
    let realizations = simulate_batch(&cfg, args.runs, alpha)?;
    let named: Vec<(String, crate::cascades::SirRealization)> = realizations
        .into_iter()
        .enumerate()
        .map(|(i, r)| (format!("run{i}"), r))
        .collect();
    cascades::save_realizations(args.out_dir.join("realizations.csv"), &named)?;
    write_manifest(&args.out_dir, "simulate", &args, Some(args.seed))?;
    Ok(())
}

fn truncate_for_fit(
    cascades: &[Cascade],
    observe_fraction: Option<f64>,
    observe_seconds: Option<f64>,
) -> Result<Vec<Cascade>> {
    let mut out = Vec::with_capacity(cascades.len());
    for c in cascades {
        let truncated = if let Some(f) = observe_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "observe fraction must lie in (0, 1], got {f}"
                )));
            }
            let k = ((f * c.len() as f64).ceil() as usize).clamp(1, c.len());
            c.prefix(k)?
        } else if let Some(s) = observe_seconds {
            match c.observed_until(s) {
                Some(t) => t,
                None => continue,
            }
        } else {
            c.clone()
        };
        out.push(truncated);
    }
    Ok(out)
}

fn summary_row(id: &str, fit: &FitResult) -> Vec<String> {
    let k = &fit.params.kernel;
    let n_star = fit
        .branching_factor(DEFAULT_MARK_EXPONENT)
        .unwrap_or(f64::NAN);
    vec![
        id.to_string(),
        k.family.as_str().to_string(),
        format_sig9(k.kappa),
        format_sig9(k.theta),
        k.c.map(format_sig9).unwrap_or_default(),
        format_sig9(fit.params.population),
        format_sig9(fit.params.rho),
        format_sig9(fit.neg_loglik),
        format_sig9(n_star),
        fit.converged.to_string(),
    ]
}

const SUMMARY_HEADER: [&str; 10] =
    ["cascade_id", "family", "kappa", "theta", "c", "N", "rho", "nll", "n_star", "converged"];

fn run_fit(args: FitArgs) -> Result<()> {
    let family = args.family.parse::<KernelFamily>()?;
    let all = cascades::load_cascades(&args.cascades)?;
    if all.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no cascades found in {}",
            args.cascades.display()
        )));
    }
    let observed = truncate_for_fit(&all, args.observe_fraction, args.observe_seconds)?;
    let usable: Vec<&Cascade> = observed.iter().filter(|c| c.len() >= 3).collect();
    for c in observed.iter().filter(|c| c.len() < 3) {
        eprintln!("warning: skipping cascade {} ({} observed events)", c.id, c.len());
    }
    if usable.is_empty() {
        return Err(Error::InvalidParameter(
            "no cascade has the 3 observed events needed for fitting".into(),
        ));
    }

    let mut cfg = FitConfig::new(family)
        .with_seed(args.seed)
        .with_restarts(args.restarts);
    cfg.marked = args.marked;
    cfg.pinned.kappa = args.pin_kappa;
    cfg.pinned.theta = args.pin_theta;
    cfg.pinned.c = args.pin_c;
    cfg.pinned.population = args.pin_population;
    cfg.pinned.rho = args.pin_rho;
    cfg.tol = args.tol;
    cfg.max_iters = args.max_iters;
    cfg.censor = args.observe_seconds;

    ensure_dir(&args.out_dir)?;
    let mut summary = csv::Writer::from_path(args.out_dir.join("summary.csv"))?;
    summary.write_record(SUMMARY_HEADER)?;

    #[derive(Serialize)]
    struct FitRecord {
        cascade_id: String,
        fit: FitResult,
    }
    let mut records: Vec<FitRecord> = Vec::new();

    if args.joint {
        let group: Vec<Cascade> = usable.iter().map(|c| (*c).clone()).collect();
        let fit = fit_joint(&group, &cfg)?;
        summary.write_record(summary_row("*", &fit))?;
        records.push(FitRecord { cascade_id: "*".to_string(), fit });
    } else {
        let fits: Vec<(String, Result<FitResult>)> = usable
            .par_iter()
            .map(|c| (c.id.clone(), fit_cascade(c, &cfg)))
            .collect();
        for (id, outcome) in fits {
            match outcome {
                Ok(fit) => {
                    summary.write_record(summary_row(&id, &fit))?;
                    records.push(FitRecord { cascade_id: id, fit });
                }
                Err(e) => eprintln!("warning: fit failed for cascade {id}: {e}"),
            }
        }
    }
    summary.flush()?;
    serde_json::to_writer_pretty(
        std::fs::File::create(args.out_dir.join("fits.json"))?,
        &records,
    )?;
    write_manifest(&args.out_dir, "fit", &args, Some(args.seed))?;
    Ok(())
}

/// Fitted parameters loaded back from a summary CSV. The id "*" applies to
/// every cascade (joint fits).
struct FitLookup {
    label: String,
    wildcard: Option<HawkesNParams>,
    by_id: HashMap<String, HawkesNParams>,
}

impl FitLookup {
    fn get(&self, id: &str) -> Option<&HawkesNParams> {
        self.by_id.get(id).or(self.wildcard.as_ref())
    }
}

fn load_fit_lookup(path: &Path) -> Result<FitLookup> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h.eq_ignore_ascii_case(name)).ok_or_else(|| {
            Error::InvalidRow { row: 1, message: format!("missing '{name}' column") }
        })
    };
    let (id_c, fam_c, kappa_c, theta_c, c_c, n_c, rho_c) = (
        col("cascade_id")?,
        col("family")?,
        col("kappa")?,
        col("theta")?,
        col("c")?,
        col("N")?,
        col("rho")?,
    );
    let mut lookup =
        FitLookup { label: String::new(), wildcard: None, by_id: HashMap::new() };
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let field = |idx: usize| record.get(idx).unwrap_or_default().trim();
        let parse = |idx: usize, what: &str| -> Result<f64> {
            field(idx).parse::<f64>().map_err(|_| Error::InvalidRow {
                row,
                message: format!("cannot parse {what} '{}'", field(idx)),
            })
        };
        let family = field(fam_c).parse::<KernelFamily>()?;
        let c = if field(c_c).is_empty() { None } else { Some(parse(c_c, "c")?) };
        let kernel = KernelSpec::with_params(family, parse(kappa_c, "kappa")?, parse(theta_c, "theta")?, c)?;
        let params = HawkesNParams::new(kernel, parse(n_c, "N")?, parse(rho_c, "rho")?)?;
        if lookup.label.is_empty() {
            lookup.label = family.as_str().to_string();
        }
        let id = field(id_c).to_string();
        if id == "*" {
            lookup.wildcard = Some(params);
        } else {
            lookup.by_id.insert(id, params);
        }
    }
    if lookup.label.is_empty() {
        return Err(Error::InvalidParameter(format!("no fits in {}", path.display())));
    }
    Ok(lookup)
}

fn run_gof(args: GofArgs) -> Result<()> {
    let all = cascades::load_cascades(&args.cascades)?;
    let lookups: Vec<FitLookup> =
        args.fits.iter().map(|p| load_fit_lookup(p)).collect::<Result<_>>()?;
    ensure_dir(&args.out_dir)?;

    let mut writer = csv::Writer::from_path(args.out_dir.join("gof.csv"))?;
    writer.write_record([
        "cascade_id",
        "model",
        "n",
        "ks_D",
        "ks_p",
        "ed_p",
        "lb_p",
        "pass_ks",
        "pass_ed",
        "pass_lb",
    ])?;

    // per model, cascade_id -> report (feeds the comparison table)
    let mut reports: Vec<HashMap<String, crate::gof::GofReport>> =
        vec![HashMap::new(); lookups.len()];
    for cascade in &all {
        for (m, lookup) in lookups.iter().enumerate() {
            let Some(params) = lookup.get(&cascade.id) else { continue };
            match gof_report(params, cascade) {
                Ok(report) => {
                    let passes = report.pass_at(args.level);
                    writer.write_record([
                        cascade.id.as_str(),
                        &lookup.label,
                        &cascade.len().to_string(),
                        &format_sig9(report.ks_d),
                        &format_sig9(report.ks_p),
                        &format_sig9(report.ed_p),
                        &format_sig9(report.lb_p),
                        &passes.ks.to_string(),
                        &passes.ed.to_string(),
                        &passes.lb.to_string(),
                    ])?;
                    reports[m].insert(cascade.id.clone(), report);
                }
                Err(e) => eprintln!(
                    "warning: gof skipped for cascade {} under {}: {e}",
                    cascade.id, lookup.label
                ),
            }
        }
    }
    writer.flush()?;

    if lookups.len() == 2 {
        let mut cmp = csv::Writer::from_path(args.out_dir.join("comparisons.csv"))?;
        cmp.write_record(["cascade_id", "model_a", "model_b", "ks_d_a", "ks_d_b", "winner"])?;
        for cascade in &all {
            let (Some(ra), Some(rb)) =
                (reports[0].get(&cascade.id), reports[1].get(&cascade.id))
            else {
                continue;
            };
            let winner = match compare_models(ra, rb, args.min_gap) {
                ModelComparison::FirstBetter => "model_a",
                ModelComparison::SecondBetter => "model_b",
                ModelComparison::Tie => "tie",
            };
            cmp.write_record([
                cascade.id.as_str(),
                &lookups[0].label,
                &lookups[1].label,
                &format_sig9(ra.ks_d),
                &format_sig9(rb.ks_d),
                winner,
            ])?;
        }
        cmp.flush()?;
    }
    write_manifest(&args.out_dir, "gof", &args, None)?;
    Ok(())
}

fn run_holdout(args: HoldoutArgs) -> Result<()> {
    let all = cascades::load_cascades(&args.cascades)?;
    let lookups: Vec<FitLookup> =
        args.fits.iter().map(|p| load_fit_lookup(p)).collect::<Result<_>>()?;
    ensure_dir(&args.out_dir)?;
    let mut writer = csv::Writer::from_path(args.out_dir.join("holdout.csv"))?;
    writer.write_record(["cascade_id", "model", "split", "n_holdout", "neg_loglik_per_event"])?;
    for cascade in &all {
        for lookup in &lookups {
            let Some(params) = lookup.get(&cascade.id) else { continue };
            match holdout_loglik(params, cascade, args.split) {
                Ok(value) => {
                    writer.write_record([
                        cascade.id.as_str(),
                        &lookup.label,
                        &format_sig9(args.split),
                        &value.n_events.to_string(),
                        &format_sig9(-value.per_event()),
                    ])?;
                }
                Err(e) => eprintln!(
                    "warning: holdout skipped for cascade {} under {}: {e}",
                    cascade.id, lookup.label
                ),
            }
        }
    }
    writer.flush()?;
    write_manifest(&args.out_dir, "holdout", &args, None)?;
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let all = cascades::load_cascades(&args.cascades)?;
    let lookups: Vec<FitLookup> =
        args.fits.iter().map(|p| load_fit_lookup(p)).collect::<Result<_>>()?;
    ensure_dir(&args.out_dir)?;

    let cv = CvConfig { folds: args.folds, train_folds: args.train_folds, seed: args.seed };
    let mut writer = csv::Writer::from_path(args.out_dir.join("predictions.csv"))?;
    writer.write_record([
        "cascade_id",
        "model",
        "C_t",
        "N_hat",
        "sigma",
        "C_inf_hat",
        "C_inf_true",
        "are",
    ])?;

    // per model: cascade_id -> predicted final size (for the combined model)
    let mut per_model: Vec<HashMap<String, f64>> = Vec::new();
    let mut true_sizes: HashMap<String, usize> = HashMap::new();
    for lookup in &lookups {
        let mut rows: Vec<TrainingRow> = Vec::new();
        for cascade in &all {
            let Some(params) = lookup.get(&cascade.id) else { continue };
            match extract_features(params, cascade, args.horizon) {
                Ok(features) => {
                    true_sizes.insert(cascade.id.clone(), cascade.len());
                    rows.push(TrainingRow { features, final_size: cascade.len() });
                }
                Err(e) => {
                    eprintln!("warning: dropped cascade {} under {}: {e}", cascade.id, lookup.label)
                }
            }
        }
        if args.export_features && !rows.is_empty() {
            let path = args.out_dir.join(format!("features_{}.csv", lookup.label));
            let mut fw = csv::Writer::from_path(path)?;
            let mut header = vec!["cascade_id".to_string(), "model".to_string()];
            header.extend(rows[0].features.feature_names.iter().map(|s| s.to_string()));
            header.extend(
                ["observed_count", "observed_time", "population", "final_size"]
                    .iter()
                    .map(|s| s.to_string()),
            );
            fw.write_record(&header)?;
            for row in &rows {
                let mut record = vec![row.features.cascade_id.clone(), lookup.label.clone()];
                record.extend(row.features.values.iter().map(|&v| format_sig9(v)));
                record.push(row.features.observed_count.to_string());
                record.push(format_sig9(row.features.observed_time));
                record.push(format_sig9(row.features.population));
                record.push(row.final_size.to_string());
                fw.write_record(&record)?;
            }
            fw.flush()?;
        }
        let training = train_sigma(&rows, &cv)?;
        let mut predicted_map = HashMap::new();
        for p in &training.predictions {
            writer.write_record([
                p.cascade_id.as_str(),
                &lookup.label,
                &p.observed_count.to_string(),
                &format_sig9(p.population),
                &format_sig9(p.sigma_hat),
                &format_sig9(p.predicted),
                &p.true_size.to_string(),
                &format_sig9(p.are),
            ])?;
            predicted_map.insert(p.cascade_id.clone(), p.predicted);
        }
        per_model.push(predicted_map);
    }

    if per_model.len() >= 2 {
        for cascade in &all {
            let preds: Vec<f64> =
                per_model.iter().filter_map(|m| m.get(&cascade.id)).copied().collect();
            if preds.len() >= 2 {
                let combined = combine_predictions(&preds)?;
                let true_size = true_sizes[&cascade.id];
                writer.write_record([
                    cascade.id.as_str(),
                    "combined",
                    "",
                    "",
                    "",
                    &format_sig9(combined),
                    &true_size.to_string(),
                    &format_sig9(are(combined, true_size)),
                ])?;
            }
        }
    }
    writer.flush()?;
    write_manifest(&args.out_dir, "predict", &args, Some(args.seed))?;
    Ok(())
}

fn run_convert(args: ConvertArgs) -> Result<()> {
    let value = match args.to.as_str() {
        "sir" => {
            let family = args
                .family
                .as_deref()
                .unwrap_or("exp")
                .parse::<KernelFamily>()?;
            let kappa = args
                .kappa
                .ok_or_else(|| Error::InvalidParameter("missing --kappa".into()))?;
            let theta = args
                .theta
                .ok_or_else(|| Error::InvalidParameter("missing --theta".into()))?;
            let kernel = KernelSpec::with_params(family, kappa, theta, args.c)?;
            let beta = kernel.rate_at_zero();
            match family {
                KernelFamily::Exp => json!({ "beta": beta, "gamma": theta }),
                f if f.has_offset() => {
                    json!({ "beta": beta, "family": f.as_str(), "theta": theta, "c": args.c })
                }
                f => json!({ "beta": beta, "family": f.as_str(), "theta": theta }),
            }
        }
        "kernel" => {
            let family = args
                .family
                .as_deref()
                .unwrap_or("exp")
                .parse::<KernelFamily>()?;
            let beta =
                args.beta.ok_or_else(|| Error::InvalidParameter("missing --beta".into()))?;
            let theta = args.theta.or(args.gamma).ok_or_else(|| {
                Error::InvalidParameter("missing --theta (or --gamma)".into())
            })?;
            let recovery = RecoveryDistribution::new(family, theta, args.c)?;
            let kernel = SirSpec::new(beta, recovery, 1.0)?.to_kernel()?;
            match kernel.c {
                Some(c) => json!({
                    "family": kernel.family.as_str(),
                    "kappa": kernel.kappa,
                    "theta": kernel.theta,
                    "c": c,
                }),
                None => json!({
                    "family": kernel.family.as_str(),
                    "kappa": kernel.kappa,
                    "theta": kernel.theta,
                }),
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "--to must be 'sir' or 'kernel', got '{other}'"
            )))
        }
    };
    println!("{value}");
    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
        serde_json::to_writer_pretty(
            std::fs::File::create(dir.join("conversion.json"))?,
            &value,
        )?;
        write_manifest(dir, "convert", &args, None)?;
    }
    Ok(())
}

fn run_size_dist(args: SizeDistArgs) -> Result<()> {
    let spec = args.spec.build()?;
    let dist = size_distribution(&spec, args.runs, args.seed)?;
    ensure_dir(&args.out_dir)?;
    let mut writer = csv::Writer::from_path(args.out_dir.join("sizedist.csv"))?;
    writer.write_record(["size", "count", "probability", "cdf"])?;
    for (idx, &count) in dist.counts().iter().enumerate() {
        let size = idx as u64 + 1;
        writer.write_record([
            size.to_string(),
            count.to_string(),
            format_sig9(dist.likelihood(size)),
            format_sig9(dist.cdf(size)),
        ])?;
    }
    writer.flush()?;
    write_manifest(&args.out_dir, "size-dist", &args, Some(args.seed))?;
    Ok(())
}
