//! Subcommand implementations behind the `fishnet` binary.
//!
//! Every subcommand resolves its configuration, writes a `manifest.json`
//! into the output directory first, then writes its data files. Re-running
//! the same command line reproduces every output bit-exactly. All CSV files
//! use `.` decimals, comma separators, and a header row.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::Args;

use crate::ensemble::{self, EnsembleConfig, EnsembleResult};
use crate::mesh::{FishnetTopology, SofteningLaw};
use crate::order_stats::OrderStatBasis;
use crate::polya_aeppli::PolyaAeppli;
use crate::solver::{run_simulation, Simulation, SimulationConfig};
use crate::strength::StrengthDistribution;
use crate::tail::{table1_defaults, GammaScaling, TailModel};

/// Failure classes mapped to process exit codes: usage errors exit 2,
/// numeric/model failures exit 3, campaigns with failed replicas exit 4,
/// I/O problems exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    PartialCampaign { failed: usize, total: usize },
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::PartialCampaign { .. } => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            CliError::PartialCampaign { failed, total } => {
                write!(f, "partial campaign: {failed} of {total} replicas failed")
            }
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn numeric<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numeric(e.to_string())
}

/// Record of one invocation; written as `manifest.json` next to the
/// outputs so every file is traceable to the exact configuration and seed
/// that produced it.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub out_dir: String,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new<C: serde::Serialize>(
        subcommand: &str,
        config: &C,
        master_seed: Option<u64>,
        out_dir: &Path,
    ) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            master_seed,
            out_dir: out_dir.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

fn prepare_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(out.join("manifest.json"), body + "\n")?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: PathBuf, value: &T) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value).map_err(numeric)?;
    fs::write(path, body + "\n")?;
    Ok(())
}

struct CsvWriter {
    inner: std::io::BufWriter<fs::File>,
}

impl CsvWriter {
    fn create(path: PathBuf, header: &str) -> Result<Self, CliError> {
        let file = fs::File::create(path)?;
        let mut inner = std::io::BufWriter::new(file);
        writeln!(inner, "{header}")?;
        Ok(CsvWriter { inner })
    }

    fn row(&mut self, fields: std::fmt::Arguments<'_>) -> Result<(), CliError> {
        writeln!(self.inner, "{fields}")?;
        Ok(())
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Gamma-scaling choice on the command line: `rational`, `rational:C`,
/// `linear:A:B`, or `fitted` (pipeline only; uses the rational fit from the
/// campaign's ratio traces).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum GammaSpec {
    Rational { c: f64 },
    Linear { intercept: f64, slope: f64 },
    Fitted,
}

impl FromStr for GammaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["rational"] => Ok(GammaSpec::Rational { c: 1.0 }),
            ["rational", c] => c
                .parse()
                .map(|c| GammaSpec::Rational { c })
                .map_err(|e| format!("bad rational coefficient: {e}")),
            ["linear", a, b] => {
                let intercept = a.parse().map_err(|e| format!("bad intercept: {e}"))?;
                let slope = b.parse().map_err(|e| format!("bad slope: {e}"))?;
                Ok(GammaSpec::Linear { intercept, slope })
            }
            ["fitted"] => Ok(GammaSpec::Fitted),
            _ => Err(format!(
                "expected rational[:C], linear:A:B or fitted, got '{s}'"
            )),
        }
    }
}

impl GammaSpec {
    fn resolve(self, fitted_c: Option<f64>) -> Result<GammaScaling, CliError> {
        match self {
            GammaSpec::Rational { c } => Ok(GammaScaling::Rational { c }),
            GammaSpec::Linear { intercept, slope } => {
                Ok(GammaScaling::Linear { intercept, slope })
            }
            GammaSpec::Fitted => fitted_c
                .map(|c| GammaScaling::Rational { c })
                .ok_or_else(|| {
                    CliError::Usage("gamma 'fitted' is only available in the pipeline".into())
                }),
        }
    }
}

// ---------------------------------------------------------------------------
// p1-table

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct P1TableArgs {
    /// Lowest stress of the table (MPa).
    #[arg(long, default_value_t = 0.0)]
    pub xmin: f64,
    /// Highest stress of the table (MPa).
    #[arg(long, default_value_t = 16.0)]
    pub xmax: f64,
    /// Stress increment (MPa).
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Output directory.
    #[arg(long, default_value = "fishnet-out")]
    pub out: PathBuf,
}

pub fn cmd_p1_table(args: &P1TableArgs) -> Result<(), CliError> {
    if !(args.step > 0.0) || args.xmax < args.xmin || args.xmin < 0.0 {
        return Err(CliError::Usage(
            "need 0 <= xmin <= xmax and step > 0".into(),
        ));
    }
    prepare_out_dir(&args.out)?;
    write_manifest(&args.out, &RunManifest::new("p1-table", args, None, &args.out))?;
    let dist = StrengthDistribution::default();
    let mut csv = CsvWriter::create(args.out.join("p1_table.csv"), "x,P1(x)")?;
    let steps = ((args.xmax - args.xmin) / args.step).round() as usize;
    for i in 0..=steps {
        let x = args.xmin + i as f64 * args.step;
        let p = dist.cdf(x).map_err(numeric)?;
        csv.row(format_args!("{x},{p}"))?;
    }
    csv.finish()
}

// ---------------------------------------------------------------------------
// order-stats

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct OrderStatsArgs {
    /// Number of i.i.d. strengths.
    #[arg(long = "n-links", default_value_t = 512)]
    pub n_links: usize,
    /// Comma-separated zero-based orders (0 = strict minimum).
    #[arg(long = "k-list", default_value = "0,1,5,20", value_delimiter = ',')]
    pub k_list: Vec<usize>,
    /// Lowest stress of the grid (MPa).
    #[arg(long, default_value_t = 4.0)]
    pub xmin: f64,
    /// Highest stress of the grid (MPa).
    #[arg(long, default_value_t = 14.0)]
    pub xmax: f64,
    /// Grid points.
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    /// Output directory.
    #[arg(long, default_value = "fishnet-out")]
    pub out: PathBuf,
}

pub fn cmd_order_stats(args: &OrderStatsArgs) -> Result<(), CliError> {
    if args.points < 2 || args.xmax <= args.xmin || args.xmin < 0.0 {
        return Err(CliError::Usage(
            "need xmin >= 0, xmax > xmin and at least 2 points".into(),
        ));
    }
    if args.k_list.iter().any(|&k| k >= args.n_links) {
        return Err(CliError::Usage("every order must satisfy k < n-links".into()));
    }
    prepare_out_dir(&args.out)?;
    write_manifest(&args.out, &RunManifest::new("order-stats", args, None, &args.out))?;
    let basis = OrderStatBasis::new(StrengthDistribution::default(), args.n_links);
    let mut csv = CsvWriter::create(
        args.out.join("order_stats.csv"),
        "x,k,Wk,weibull_x,weibull_y",
    )?;
    for i in 0..args.points {
        let x = args.xmin + (args.xmax - args.xmin) * i as f64 / (args.points - 1) as f64;
        for &k in &args.k_list {
            let w = basis.wk(x, k).map_err(numeric)?;
            match OrderStatBasis::weibull_scale(w, x) {
                Ok((wx, wy)) => csv.row(format_args!("{x},{k},{w},{wx},{wy}"))?,
                Err(_) => csv.row(format_args!("{x},{k},{w},,"))?,
            }
        }
    }
    csv.finish()
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct SimulateArgs {
    /// Grid rows.
    #[arg(long, default_value_t = 16)]
    pub rows: usize,
    /// Grid gaps (columns of links).
    #[arg(long, default_value_t = 16)]
    pub gaps: usize,
    /// Softening steepness |Kt/K0|.
    #[arg(long = "kt-ratio", default_value_t = 0.1)]
    pub kt_ratio: f64,
    /// Discrete softening jumps per link.
    #[arg(long, default_value_t = 20)]
    pub jumps: u32,
    /// Replica seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Stop when the nominal stress falls below this fraction of the peak.
    #[arg(long = "termination-fraction", default_value_t = 0.05)]
    pub termination_fraction: f64,
    /// Output directory.
    #[arg(long, default_value = "fishnet-out")]
    pub out: PathBuf,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    prepare_out_dir(&args.out)?;
    write_manifest(
        &args.out,
        &RunManifest::new("simulate", args, Some(args.seed), &args.out),
    )?;
    let topology = FishnetTopology::with_default_constants(args.rows, args.gaps)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let law = SofteningLaw::from_ratio(topology.k0(), args.kt_ratio, args.jumps)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let config = SimulationConfig {
        termination_fraction: args.termination_fraction,
        ..SimulationConfig::default()
    };
    let dist = StrengthDistribution::default();
    let strengths = dist
        .sample_strengths(topology.link_count(), args.seed)
        .map_err(numeric)?;

    // First pass: event history to place the snapshot stages.
    let record = run_simulation(&topology, &strengths, law, config).map_err(numeric)?;
    let last = record.events.len() as u32 - 1;
    let peak = record.peak_event;
    let stages = [
        ("prepeak", peak / 2),
        ("peak", peak),
        ("postpeak", peak + (last - peak) / 2),
        ("final", last),
    ];

    let mut csv = CsvWriter::create(args.out.join("events.csv"), "event,k,sigmaN,link,localized")?;
    for e in &record.events {
        csv.row(format_args!(
            "{},{},{},{},{}",
            e.index, e.distinct_count, e.sigma_n, e.link, e.localized
        ))?;
    }
    csv.finish()?;

    // Deterministic replay, capturing the damage field at the four stages.
    let sim = Simulation::new(&topology, &strengths, law, config).map_err(numeric)?;
    let mut snapshots = Vec::new();
    let replayed = sim
        .run_with_observer(|sim, event| {
            for (stage, index) in stages {
                if event.index == index {
                    snapshots.push(sim.snapshot(stage));
                }
            }
        })
        .map_err(numeric)?;
    debug_assert_eq!(replayed, record);
    for snapshot in &snapshots {
        write_json(
            args.out.join(format!("snapshot_{}.json", snapshot.stage)),
            snapshot,
        )?;
    }
    write_json(args.out.join("record.json"), &record)?;
    eprintln!(
        "simulate: {} events, sigma_max {:.4} MPa, N_c {}",
        record.events.len(),
        record.sigma_max,
        record.n_c
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// campaign

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct CampaignArgs {
    /// Grid rows.
    #[arg(long, default_value_t = 16)]
    pub rows: usize,
    /// Grid gaps (columns of links).
    #[arg(long, default_value_t = 16)]
    pub gaps: usize,
    /// Softening steepness |Kt/K0|.
    #[arg(long = "kt-ratio", default_value_t = 0.1)]
    pub kt_ratio: f64,
    /// Discrete softening jumps per link.
    #[arg(long, default_value_t = 20)]
    pub jumps: u32,
    /// Monte Carlo replicas.
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    /// Master seed; replica i uses stream i.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Stop when the nominal stress falls below this fraction of the peak.
    #[arg(long = "termination-fraction", default_value_t = 0.05)]
    pub termination_fraction: f64,
    /// Replicas whose ratio traces are kept for gamma estimation.
    #[arg(long = "gamma-replicas", default_value_t = 32)]
    pub gamma_replicas: usize,
    /// Write per-replica event logs for the first N replicas.
    #[arg(long = "event-logs", default_value_t = 0)]
    pub event_logs: usize,
    /// Worker threads (default: FISHNET_THREADS or all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "fishnet-out")]
    pub out: PathBuf,
}

impl CampaignArgs {
    pub fn to_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            rows: self.rows,
            gaps: self.gaps,
            kt_ratio: self.kt_ratio,
            jumps: self.jumps,
            replicas: self.replicas,
            master_seed: self.seed,
            termination_fraction: self.termination_fraction,
            gamma_replicas: self.gamma_replicas,
            threads: self.threads,
            ..EnsembleConfig::default()
        }
    }
}

fn write_campaign_outputs(out: &Path, result: &EnsembleResult) -> Result<(), CliError> {
    let mut csv = CsvWriter::create(out.join("sigma_max.csv"), "replica,sigma_max,n_c")?;
    for r in &result.per_replica {
        csv.row(format_args!("{},{},{}", r.replica, r.sigma_max, r.n_c))?;
    }
    csv.finish()?;

    let total: u64 = result.nc_histogram.iter().sum();
    let mut csv = CsvWriter::create(out.join("nc_hist.csv"), "k,count,empirical_p")?;
    for (k, &count) in result.nc_histogram.iter().enumerate() {
        csv.row(format_args!("{k},{count},{}", count as f64 / total as f64))?;
    }
    csv.finish()?;

    let mut csv = CsvWriter::create(out.join("ratio_trace.csv"), "k,mean_ratio,support")?;
    for point in &result.mean_ratio_trace {
        csv.row(format_args!(
            "{},{},{}",
            point.k_damaged, point.mean_ratio, point.support
        ))?;
    }
    csv.finish()?;

    let sigma: Vec<f64> = result.per_replica.iter().map(|r| r.sigma_max).collect();
    let ecdf = ensemble::empirical_cdf(&sigma).map_err(numeric)?;
    let mut csv = CsvWriter::create(out.join("ecdf_weibull.csv"), "x,p,weibull_x,weibull_y")?;
    for point in &ecdf {
        csv.row(format_args!(
            "{},{},{},{}",
            point.x, point.p, point.weibull_x, point.weibull_y
        ))?;
    }
    csv.finish()?;

    if !result.failures.is_empty() {
        let mut csv = CsvWriter::create(out.join("failures.csv"), "replica,message")?;
        for f in &result.failures {
            csv.row(format_args!("{},{}", f.replica, f.message))?;
        }
        csv.finish()?;
    }
    Ok(())
}

fn campaign_exit(result: &EnsembleResult, replicas: usize) -> Result<(), CliError> {
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::PartialCampaign {
            failed: result.failures.len(),
            total: replicas,
        })
    }
}

pub fn cmd_campaign(args: &CampaignArgs) -> Result<(), CliError> {
    prepare_out_dir(&args.out)?;
    write_manifest(
        &args.out,
        &RunManifest::new("campaign", args, Some(args.seed), &args.out),
    )?;
    let config = args.to_config();
    let started = Instant::now();
    let result = ensemble::run_ensemble(&config).map_err(numeric)?;
    let elapsed = started.elapsed().as_secs_f64();
    write_campaign_outputs(&args.out, &result)?;
    // Replica results are pure functions of (seed, index), so the logs can
    // be regenerated serially after the campaign.
    for replica in 0..args.event_logs.min(args.replicas) {
        let record = ensemble::run_replica(&config, replica).map_err(numeric)?;
        let mut csv = CsvWriter::create(
            args.out.join(format!("replica_{replica}_events.csv")),
            "event,k,sigmaN,link,localized",
        )?;
        for e in &record.events {
            csv.row(format_args!(
                "{},{},{},{},{}",
                e.index, e.distinct_count, e.sigma_n, e.link, e.localized
            ))?;
        }
        csv.finish()?;
    }
    eprintln!(
        "campaign: {} replicas, {:.1} events/s, {:.1} solves/s, sigma_max mean {:.4}, N_c mean {:.2}",
        result.per_replica.len(),
        result.events_total as f64 / elapsed,
        result.solves_total as f64 / elapsed,
        result.sigma_mean,
        result.nc_mean
    );
    campaign_exit(&result, args.replicas)
}

// ---------------------------------------------------------------------------
// fit-nc

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct FitNcArgs {
    /// CSV or plain-text file with one damage count per line (a header row
    /// is skipped automatically; the first numeric column is used).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "fishnet-out")]
    pub out: PathBuf,
}

fn read_counts(path: &Path) -> Result<Vec<u64>, CliError> {
    let body = fs::read_to_string(path)?;
    let mut counts = Vec::new();
    for line in body.lines() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.fract() == 0.0 => counts.push(v as u64),
            Ok(v) => {
                return Err(CliError::Usage(format!(
                    "damage counts must be nonnegative integers, got {v}"
                )))
            }
            // Non-numeric first field: header row.
            Err(_) => continue,
        }
    }
    if counts.is_empty() {
        return Err(CliError::Usage("no damage counts found in input".into()));
    }
    Ok(counts)
}

#[derive(Debug, serde::Serialize)]
struct FitReport {
    lambda: f64,
    theta: f64,
    clamped: bool,
    sample_mean: f64,
    sample_variance: f64,
    sample_size: usize,
}

fn fit_counts(counts: &[u64]) -> Result<(crate::polya_aeppli::MomentFit, FitReport), CliError> {
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let variance = if counts.len() < 2 {
        0.0
    } else {
        counts
            .iter()
            .map(|&c| (c as f64 - mean) * (c as f64 - mean))
            .sum::<f64>()
            / (n - 1.0)
    };
    let fit = PolyaAeppli::fit_moments(mean, variance).map_err(numeric)?;
    let report = FitReport {
        lambda: fit.dist.lambda(),
        theta: fit.dist.theta(),
        clamped: fit.clamped,
        sample_mean: mean,
        sample_variance: variance,
        sample_size: counts.len(),
    };
    Ok((fit, report))
}

fn write_pmf_histogram(out: &Path, counts: &[u64], dist: &PolyaAeppli) -> Result<(), CliError> {
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut histogram = vec![0u64; max + 1];
    for &c in counts {
        histogram[c as usize] += 1;
    }
    let pmf = dist.pmf_prefix(max);
    let total = counts.len() as f64;
    let mut csv = CsvWriter::create(out.join("nc_pmf.csv"), "k,count,empirical_p,fitted_p")?;
    for (k, &count) in histogram.iter().enumerate() {
        csv.row(format_args!(
            "{k},{count},{},{}",
            count as f64 / total,
            pmf[k]
        ))?;
    }
    csv.finish()
}

pub fn cmd_fit_nc(args: &FitNcArgs) -> Result<(), CliError> {
    prepare_out_dir(&args.out)?;
    write_manifest(&args.out, &RunManifest::new("fit-nc", args, None, &args.out))?;
    let counts = read_counts(&args.input)?;
    let (fit, report) = fit_counts(&counts)?;
    if fit.clamped {
        eprintln!("fit-nc: under-dispersed sample, theta clamped to 1 (Poisson)");
    }
    write_json(args.out.join("fit.json"), &report)?;
    write_pmf_histogram(&args.out, &counts, &fit.dist)?;
    println!(
        "lambda {} theta {} (mean {}, variance {})",
        report.lambda, report.theta, report.sample_mean, report.sample_variance
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// predict

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct PredictArgs {
    /// Number of links in the modeled net.
    #[arg(long = "n-links", default_value_t = 512)]
    pub n_links: usize,
    /// Cluster-count mean of the damage-count distribution.
    #[arg(long)]
    pub lambda: f64,
    /// Per-trial success probability of the damage-count distribution.
    #[arg(long)]
    pub theta: f64,
    /// Truncation order.
    #[arg(long, default_value_t = 5)]
    pub k0: usize,
    /// Index shift (must not exceed k0).
    #[arg(long, default_value_t = 0)]
    pub dk: usize,
    /// Stress scaling: rational[:C] or linear:A:B.
    #[arg(long, default_value = "rational")]
    pub gamma: GammaSpec,
    /// Lowest stress of the grid (MPa).
    #[arg(long, default_value_t = 3.0)]
    pub xmin: f64,
    /// Highest stress of the grid (MPa).
    #[arg(long, default_value_t = 12.0)]
    pub xmax: f64,
    /// Grid points.
    #[arg(long, default_value_t = 301)]
    pub points: usize,
    /// Output directory.
    #[arg(long, default_value = "fishnet-out")]
    pub out: PathBuf,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    if args.points < 2 || args.xmax <= args.xmin || args.xmin < 0.0 {
        return Err(CliError::Usage(
            "need xmin >= 0, xmax > xmin and at least 2 points".into(),
        ));
    }
    prepare_out_dir(&args.out)?;
    write_manifest(&args.out, &RunManifest::new("predict", args, None, &args.out))?;
    let weights = PolyaAeppli::new(args.lambda, args.theta)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let gamma = args.gamma.resolve(None)?;
    let basis = OrderStatBasis::new(StrengthDistribution::default(), args.n_links);
    let model = TailModel::new(basis, weights, args.k0, args.dk, gamma)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut csv = CsvWriter::create(args.out.join("predict.csv"), "x,Pf,weibull_x,weibull_y")?;
    for i in 0..args.points {
        let x = args.xmin + (args.xmax - args.xmin) * i as f64 / (args.points - 1) as f64;
        let pf = model.failure_probability(x).map_err(numeric)?;
        match OrderStatBasis::weibull_scale(pf, x) {
            Ok((wx, wy)) => csv.row(format_args!("{x},{pf},{wx},{wy}"))?,
            Err(_) => csv.row(format_args!("{x},{pf},,"))?,
        }
    }
    csv.finish()?;
    for p in [1e-6, 1e-3, 0.5] {
        let s = model.strength_at_probability(p).map_err(numeric)?;
        println!("strength at Pf={p}: {s} MPa");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Truncation order; defaults to the reference table for the standard
    /// steepness values.
    #[arg(long)]
    pub k0: Option<usize>,
    /// Index shift; defaults to the reference table.
    #[arg(long)]
    pub dk: Option<usize>,
    /// Stress scaling: rational[:C], linear:A:B, or fitted.
    #[arg(long, default_value = "rational")]
    pub gamma: GammaSpec,
}

#[derive(Debug, serde::Serialize)]
struct PipelineSummary {
    replicas: usize,
    failed_replicas: usize,
    fitted: FitReport,
    k0: usize,
    dk: usize,
    gamma: GammaScaling,
    gamma_fit_rational_c: Option<f64>,
    sigma_max_mean: f64,
    sigma_max_sd: f64,
    nc_mean: f64,
    nc_sd: f64,
    median_strength_empirical: f64,
    median_strength_analytic: f64,
    strength_at_1e6: f64,
    strength_at_1e3: f64,
    max_weibull_gap: f64,
    weibull_gap_range: (f64, f64),
    events_total: u64,
    solves_total: u64,
}

/// Campaign, moment fit, gamma estimate, tail model, and the
/// analytic-vs-empirical comparison, in one run.
pub fn cmd_pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    if args.campaign.replicas < 100 {
        return Err(CliError::Usage(
            "pipeline needs at least 100 replicas for moment fitting".into(),
        ));
    }
    let out = args.campaign.out.clone();
    prepare_out_dir(&out)?;
    write_manifest(
        &out,
        &RunManifest::new("pipeline", args, Some(args.campaign.seed), &out),
    )?;
    let config = args.campaign.to_config();
    let started = Instant::now();
    let result = ensemble::run_ensemble(&config).map_err(numeric)?;
    let elapsed = started.elapsed().as_secs_f64();
    write_campaign_outputs(&out, &result)?;
    eprintln!(
        "pipeline: {} replicas in {:.1}s ({:.0} events/s)",
        result.per_replica.len(),
        elapsed,
        result.events_total as f64 / elapsed
    );

    let report = run_pipeline_analysis(args, &config, &result, &out)?;
    println!(
        "fitted lambda {} theta {}; median strength {} MPa (analytic {}), strength at Pf=1e-6: {} MPa",
        report.fitted.lambda,
        report.fitted.theta,
        report.median_strength_empirical,
        report.median_strength_analytic,
        report.strength_at_1e6
    );
    campaign_exit(&result, args.campaign.replicas)
}

fn run_pipeline_analysis(
    args: &PipelineArgs,
    config: &EnsembleConfig,
    result: &EnsembleResult,
    out: &Path,
) -> Result<PipelineSummary, CliError> {
    let counts: Vec<u64> = result.per_replica.iter().map(|r| r.n_c as u64).collect();
    let (fit, report) = fit_counts(&counts)?;
    if fit.clamped {
        eprintln!("pipeline: under-dispersed N_c sample, theta clamped to 1 (Poisson)");
    }

    let defaults = table1_defaults(config.kt_ratio);
    let (k0, dk) = match (args.k0, args.dk) {
        (Some(k0), Some(dk)) => (k0, dk),
        (k0_flag, dk_flag) => match defaults {
            Some((k0, dk)) => (k0_flag.unwrap_or(k0), dk_flag.unwrap_or(dk)),
            None => {
                return Err(CliError::Usage(format!(
                    "no reference truncation/shift for kt-ratio {}; pass --k0 and --dk",
                    config.kt_ratio
                )))
            }
        },
    };

    let n_links = 2 * config.rows * config.gaps;
    let gamma_fit = ensemble::estimate_gamma(&result.ratio_traces, n_links).ok();
    let fitted_c = gamma_fit.as_ref().map(|g| g.rational_c);
    let gamma = args.gamma.resolve(fitted_c)?;

    let basis = OrderStatBasis::new(config.strength, n_links);
    let model =
        TailModel::new(basis, fit.dist, k0, dk, gamma).map_err(|e| CliError::Usage(e.to_string()))?;

    write_pmf_histogram(out, &counts, &fit.dist)?;

    // Analytic and empirical CDFs on the shared grid of observed strengths.
    let sigma: Vec<f64> = result.per_replica.iter().map(|r| r.sigma_max).collect();
    let ecdf = ensemble::empirical_cdf(&sigma).map_err(numeric)?;
    let mut csv = CsvWriter::create(
        out.join("comparison.csv"),
        "x,empirical_p,weibull_y_empirical,analytic_p,weibull_y_analytic",
    )?;
    let mut max_gap = 0.0f64;
    let gap_range = (
        1e-2_f64.max(1.0 / sigma.len() as f64),
        0.99_f64,
    );
    for point in &ecdf {
        let pf = model.failure_probability(point.x).map_err(numeric)?;
        let analytic_y = OrderStatBasis::weibull_scale(pf, point.x)
            .map(|(_, y)| y)
            .unwrap_or(f64::NAN);
        csv.row(format_args!(
            "{},{},{},{},{}",
            point.x, point.p, point.weibull_y, pf, analytic_y
        ))?;
        if point.p >= gap_range.0 && point.p <= gap_range.1 {
            let gap = (analytic_y - point.weibull_y).abs();
            if gap > max_gap {
                max_gap = gap;
            }
        }
    }
    csv.finish()?;

    let median_strength_empirical = median(&sigma);
    let median_strength_analytic = model.strength_at_probability(0.5).map_err(numeric)?;
    let summary = PipelineSummary {
        replicas: result.per_replica.len(),
        failed_replicas: result.failures.len(),
        fitted: report,
        k0,
        dk,
        gamma,
        gamma_fit_rational_c: fitted_c,
        sigma_max_mean: result.sigma_mean,
        sigma_max_sd: result.sigma_sd,
        nc_mean: result.nc_mean,
        nc_sd: result.nc_sd,
        median_strength_empirical,
        median_strength_analytic,
        strength_at_1e6: model.strength_at_probability(1e-6).map_err(numeric)?,
        strength_at_1e3: model.strength_at_probability(1e-3).map_err(numeric)?,
        max_weibull_gap: max_gap,
        weibull_gap_range: gap_range,
        events_total: result.events_total,
        solves_total: result.solves_total,
    };
    write_json(out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
