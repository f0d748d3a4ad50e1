//! Reproducible, replica-parallel Monte Carlo campaigns.
//!
//! Replica `i` draws its strength field from stream `i` of the master seed,
//! so every replica is a pure function of `(master_seed, i)`: campaigns can
//! be re-run, extended, or distributed over any number of workers without
//! changing a single bit of the aggregate. Aggregation happens on the
//! collected per-replica results in replica order.

use crate::mesh::{FishnetTopology, MeshError, SofteningLaw};
use crate::solver::{run_simulation, SimulationConfig, SimulationRecord, SolverError};
use crate::strength::StrengthDistribution;
use rayon::prelude::*;

/// Errors from campaign setup or post-processing.
#[derive(Debug)]
pub enum EnsembleError {
    /// At least one replica is required.
    NoReplicas,
    /// Gamma estimation needs at least this many replica traces.
    TooFewTraces { got: usize, need: usize },
    /// No prepeak trace data was available.
    NoTraceData,
    /// Empirical CDFs need at least two values.
    TooFewValues { got: usize },
    /// Invalid topology or law.
    Mesh(MeshError),
    /// Threading setup failed.
    ThreadPool(String),
}

impl std::fmt::Display for EnsembleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnsembleError::NoReplicas => write!(f, "campaign needs at least one replica"),
            EnsembleError::TooFewTraces { got, need } => {
                write!(f, "gamma estimation needs >= {need} traces, got {got}")
            }
            EnsembleError::NoTraceData => write!(f, "no prepeak ratio-trace data"),
            EnsembleError::TooFewValues { got } => {
                write!(f, "empirical CDF needs >= 2 values, got {got}")
            }
            EnsembleError::Mesh(e) => write!(f, "{e}"),
            EnsembleError::ThreadPool(e) => write!(f, "thread pool: {e}"),
        }
    }
}

impl std::error::Error for EnsembleError {}

impl From<MeshError> for EnsembleError {
    fn from(e: MeshError) -> Self {
        EnsembleError::Mesh(e)
    }
}

/// Full configuration of a Monte Carlo campaign.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleConfig {
    pub rows: usize,
    pub gaps: usize,
    pub link_length: f64,
    pub link_area: f64,
    pub modulus: f64,
    /// Softening steepness `|Kt / K0|`.
    pub kt_ratio: f64,
    /// Discrete softening jumps per link.
    pub jumps: u32,
    pub replicas: usize,
    pub master_seed: u64,
    pub termination_fraction: f64,
    /// Full refactorization cadence of the solver fast path.
    pub refactor_interval: usize,
    /// Number of leading replicas whose ratio traces are retained for the
    /// stress-scaling estimate.
    pub gamma_replicas: usize,
    /// Worker threads; `None` uses the process default.
    pub threads: Option<usize>,
    /// Strength parent distribution.
    pub strength: StrengthDistribution,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            rows: 16,
            gaps: 16,
            link_length: 0.01,
            link_area: 1.0,
            modulus: 1.0,
            kt_ratio: 0.1,
            jumps: 20,
            replicas: 1000,
            master_seed: 42,
            termination_fraction: 0.05,
            refactor_interval: 64,
            gamma_replicas: 32,
            threads: None,
            strength: StrengthDistribution::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn topology(&self) -> Result<FishnetTopology, MeshError> {
        FishnetTopology::build(
            self.rows,
            self.gaps,
            self.link_length,
            self.link_area,
            self.modulus,
        )
    }

    pub fn law(&self, topology: &FishnetTopology) -> Result<SofteningLaw, MeshError> {
        SofteningLaw::from_ratio(topology.k0(), self.kt_ratio, self.jumps)
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        SimulationConfig {
            termination_fraction: self.termination_fraction,
            refactor_interval: self.refactor_interval,
        }
    }
}

/// A replica that did not terminate normally.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReplicaFailure {
    pub replica: usize,
    pub message: String,
}

/// Peak strength and damage count of one replica.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReplicaSummary {
    pub replica: usize,
    pub sigma_max: f64,
    pub n_c: u32,
}

/// Mean ratio-trace entry at one damage count.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanRatioPoint {
    /// Damage count (number of distinct damaged links, starting at 1).
    pub k_damaged: usize,
    pub mean_ratio: f64,
    /// Replicas contributing at this damage count.
    pub support: usize,
}

/// One point of an empirical CDF with Weibull-scale coordinates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EcdfPoint {
    pub x: f64,
    pub p: f64,
    pub weibull_x: f64,
    pub weibull_y: f64,
}

/// Aggregated campaign output. Bit-identical for identical configs,
/// regardless of worker count.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleResult {
    pub per_replica: Vec<ReplicaSummary>,
    pub failures: Vec<ReplicaFailure>,
    pub sigma_mean: f64,
    pub sigma_sd: f64,
    pub nc_mean: f64,
    pub nc_sd: f64,
    /// Histogram of the damage count at peak; index is the count.
    pub nc_histogram: Vec<u64>,
    /// Ratio traces of the first `gamma_replicas` replicas.
    pub ratio_traces: Vec<Vec<f64>>,
    pub mean_ratio_trace: Vec<MeanRatioPoint>,
    /// Total softening events across replicas.
    pub events_total: u64,
    /// Total linear solves across replicas.
    pub solves_total: u64,
    /// Total full factorizations across replicas.
    pub refactorizations_total: u64,
}

/// Runs replica `index` of a campaign: a pure function of the config and
/// the index, usable to resume or extend campaigns replica by replica.
pub fn run_replica(config: &EnsembleConfig, index: usize) -> Result<SimulationRecord, SolverError> {
    let topology = config.topology()?;
    let law = config.law(&topology)?;
    let strengths = config
        .strength
        .sample_strengths_stream(topology.link_count(), config.master_seed, index as u64)
        .expect("link count >= 1");
    run_simulation(&topology, &strengths, law, config.simulation_config())
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    if n < 1.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Executes the campaign, replicas in parallel, aggregation in replica
/// order.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleResult, EnsembleError> {
    if config.replicas == 0 {
        return Err(EnsembleError::NoReplicas);
    }
    let topology = config.topology()?;
    let law = config.law(&topology)?;
    let sim_config = config.simulation_config();
    let dist = config.strength;
    let seed = config.master_seed;
    let n_links = topology.link_count();

    let worker = |index: usize| -> Result<SimulationRecord, String> {
        let strengths = dist
            .sample_strengths_stream(n_links, seed, index as u64)
            .expect("link count >= 1");
        match run_simulation(&topology, &strengths, law, sim_config) {
            Ok(record) => Ok(record),
            Err(SolverError::BudgetExhausted { record }) => {
                Err(format!("budget exhausted after {} events", record.events.len()))
            }
            Err(e) => Err(e.to_string()),
        }
    };

    let outcomes: Vec<Result<SimulationRecord, String>> = match config.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| EnsembleError::ThreadPool(e.to_string()))?;
            pool.install(|| (0..config.replicas).into_par_iter().map(worker).collect())
        }
        None => (0..config.replicas).into_par_iter().map(worker).collect(),
    };

    let mut per_replica = Vec::with_capacity(config.replicas);
    let mut failures = Vec::new();
    let mut ratio_traces = Vec::new();
    let mut events_total = 0u64;
    let mut solves_total = 0u64;
    let mut refactorizations_total = 0u64;
    for (replica, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(record) => {
                per_replica.push(ReplicaSummary {
                    replica,
                    sigma_max: record.sigma_max,
                    n_c: record.n_c,
                });
                events_total += record.events.len() as u64;
                solves_total += record.solves;
                refactorizations_total += record.refactorizations;
                if ratio_traces.len() < config.gamma_replicas {
                    ratio_traces.push(record.ratio_trace);
                }
            }
            Err(message) => failures.push(ReplicaFailure { replica, message }),
        }
    }

    let (sigma_mean, sigma_sd) = mean_sd(per_replica.iter().map(|r| r.sigma_max));
    let (nc_mean, nc_sd) = mean_sd(per_replica.iter().map(|r| r.n_c as f64));
    let max_nc = per_replica.iter().map(|r| r.n_c).max().unwrap_or(0) as usize;
    let mut nc_histogram = vec![0u64; max_nc + 1];
    for r in &per_replica {
        nc_histogram[r.n_c as usize] += 1;
    }
    let mean_ratio_trace = mean_trace(&ratio_traces);

    Ok(EnsembleResult {
        per_replica,
        failures,
        sigma_mean,
        sigma_sd,
        nc_mean,
        nc_sd,
        nc_histogram,
        ratio_traces,
        mean_ratio_trace,
        events_total,
        solves_total,
        refactorizations_total,
    })
}

fn mean_trace(traces: &[Vec<f64>]) -> Vec<MeanRatioPoint> {
    let longest = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    (0..longest)
        .map(|m| {
            let contributing: Vec<f64> = traces
                .iter()
                .filter_map(|t| t.get(m).copied())
                .collect();
            MeanRatioPoint {
                k_damaged: m + 1,
                mean_ratio: contributing.iter().sum::<f64>() / contributing.len() as f64,
                support: contributing.len(),
            }
        })
        .collect()
}

/// Stress-scaling estimate from replica ratio traces.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GammaEstimate {
    /// Pointwise mean ratio; entry `m` is the zero-based order `m`
    /// (i.e. `m + 1` damaged links).
    pub mean_curve: Vec<f64>,
    /// Replicas contributing at each order.
    pub support: Vec<usize>,
    /// Coefficient of the best rational fit `N / (N - c k)`.
    pub rational_c: f64,
    pub rational_ssr: f64,
    /// Intercept and slope of the least-squares linear fit.
    pub linear: (f64, f64),
    pub linear_ssr: f64,
}

/// Pointwise mean of the per-replica ratio traces plus `N/(N - c k)` and
/// linear least-squares fits.
pub fn estimate_gamma(
    traces: &[Vec<f64>],
    n_links: usize,
) -> Result<GammaEstimate, EnsembleError> {
    if traces.len() < 10 {
        return Err(EnsembleError::TooFewTraces {
            got: traces.len(),
            need: 10,
        });
    }
    let points = mean_trace(traces);
    if points.is_empty() {
        return Err(EnsembleError::NoTraceData);
    }
    let mean_curve: Vec<f64> = points.iter().map(|p| p.mean_ratio).collect();
    let support: Vec<usize> = points.iter().map(|p| p.support).collect();

    // Rational fit, linearized through the origin:
    // 1 - 1/gamma = (c/N) k  =>  c = N * sum(x y) / sum(x^2).
    let n = n_links as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (m, &g) in mean_curve.iter().enumerate() {
        if g <= 0.0 {
            continue;
        }
        let x = m as f64;
        let y = 1.0 - 1.0 / g;
        num += x * y;
        den += x * x;
    }
    let rational_c = if den > 0.0 { n * num / den } else { 0.0 };
    let rational_ssr: f64 = mean_curve
        .iter()
        .enumerate()
        .map(|(m, &g)| {
            let denom = n - rational_c * m as f64;
            if denom <= 0.0 {
                return f64::INFINITY;
            }
            let fit = n / denom;
            (g - fit) * (g - fit)
        })
        .sum();

    // Plain least-squares line gamma ~ a + b k.
    let count = mean_curve.len() as f64;
    let sum_x: f64 = (0..mean_curve.len()).map(|m| m as f64).sum();
    let sum_y: f64 = mean_curve.iter().sum();
    let sum_xx: f64 = (0..mean_curve.len()).map(|m| (m as f64) * (m as f64)).sum();
    let sum_xy: f64 = mean_curve
        .iter()
        .enumerate()
        .map(|(m, &g)| m as f64 * g)
        .sum();
    let denom = count * sum_xx - sum_x * sum_x;
    let (intercept, slope) = if denom.abs() > 0.0 {
        let b = (count * sum_xy - sum_x * sum_y) / denom;
        let a = (sum_y - b * sum_x) / count;
        (a, b)
    } else {
        (sum_y / count, 0.0)
    };
    let linear_ssr: f64 = mean_curve
        .iter()
        .enumerate()
        .map(|(m, &g)| {
            let fit = intercept + slope * m as f64;
            (g - fit) * (g - fit)
        })
        .sum();

    Ok(GammaEstimate {
        mean_curve,
        support,
        rational_c,
        rational_ssr,
        linear: (intercept, slope),
        linear_ssr,
    })
}

/// Empirical CDF with midpoint plotting positions `(i - 0.5) / n` on the
/// sorted values, plus Weibull-scale coordinates.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<EcdfPoint>, EnsembleError> {
    if values.len() < 2 {
        return Err(EnsembleError::TooFewValues { got: values.len() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = (i as f64 + 0.5) / n;
            EcdfPoint {
                x,
                p,
                weibull_x: x.ln(),
                weibull_y: (-(-p).ln_1p()).ln(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> EnsembleConfig {
        EnsembleConfig {
            rows: 4,
            gaps: 4,
            kt_ratio: 0.2,
            jumps: 10,
            replicas: 24,
            master_seed: 7,
            gamma_replicas: 24,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn identical_configs_give_identical_results() {
        let config = small_config();
        let a = run_ensemble(&config).unwrap();
        let b = run_ensemble(&config).unwrap();
        assert_eq!(a, b);
        assert!(a.failures.is_empty());
        assert_eq!(a.per_replica.len(), 24);
    }

    #[test]
    fn replica_results_are_pure_functions_of_index() {
        let config = small_config();
        let ensemble = run_ensemble(&config).unwrap();
        for index in [0usize, 7, 23] {
            let record = run_replica(&config, index).unwrap();
            let summary = ensemble.per_replica[index];
            assert_eq!(summary.sigma_max, record.sigma_max);
            assert_eq!(summary.n_c, record.n_c);
        }
    }

    #[test]
    fn histogram_counts_match_replicas() {
        let result = run_ensemble(&small_config()).unwrap();
        let total: u64 = result.nc_histogram.iter().sum();
        assert_eq!(total, result.per_replica.len() as u64);
    }

    #[test]
    fn gamma_estimate_starts_at_one() {
        let result = run_ensemble(&small_config()).unwrap();
        let estimate = estimate_gamma(&result.ratio_traces, 32).unwrap();
        assert!(
            (estimate.mean_curve[0] - 1.0).abs() < 1e-9,
            "gamma(0) = {}",
            estimate.mean_curve[0]
        );
        assert_eq!(estimate.support[0], 24);
    }

    #[test]
    fn gamma_estimate_fits_and_trend() {
        let config = EnsembleConfig {
            rows: 8,
            gaps: 8,
            kt_ratio: 0.1,
            jumps: 20,
            replicas: 64,
            master_seed: 0xE5,
            gamma_replicas: 64,
            ..EnsembleConfig::default()
        };
        let result = run_ensemble(&config).unwrap();
        let est = estimate_gamma(&result.ratio_traces, 128).unwrap();
        assert!((est.mean_curve[0] - 1.0).abs() < 1e-9);
        // The rational form N/(N - c k) fits with a coefficient of order 1
        // and the linear fit starts at 1 with positive slope.
        assert!(
            est.rational_c > 0.5 && est.rational_c < 1.5,
            "rational c {}",
            est.rational_c
        );
        assert!(est.rational_ssr.is_finite());
        assert!(est.linear.0 > 0.95 && est.linear.0 < 1.05, "intercept {}", est.linear.0);
        assert!(est.linear.1 > 0.0, "slope {}", est.linear.1);
        // Rising trend on the well-supported range, allowing the Monte
        // Carlo wiggle of the pointwise means.
        let supported: Vec<f64> = est
            .mean_curve
            .iter()
            .zip(&est.support)
            .filter(|(_, &s)| s >= 32)
            .map(|(&g, _)| g)
            .collect();
        for pair in supported.windows(2) {
            assert!(pair[1] >= pair[0] - 5e-3, "drop {} -> {}", pair[0], pair[1]);
        }
        assert!(*supported.last().unwrap() > supported[0]);
    }

    #[test]
    fn gamma_estimate_needs_enough_traces() {
        let traces = vec![vec![1.0, 1.01]; 5];
        assert!(matches!(
            estimate_gamma(&traces, 32),
            Err(EnsembleError::TooFewTraces { .. })
        ));
    }

    #[test]
    fn empirical_cdf_plotting_positions() {
        let points = empirical_cdf(&[2.0, 1.0]).unwrap();
        assert_eq!(points[0].x, 1.0);
        assert_eq!(points[0].p, 0.25);
        assert_eq!(points[1].x, 2.0);
        assert_eq!(points[1].p, 0.75);
        for pair in points.windows(2) {
            assert!(pair[1].p > pair[0].p);
            assert!(pair[1].x >= pair[0].x);
        }
        assert!(empirical_cdf(&[1.0]).is_err());
    }

    #[test]
    fn empirical_cdf_recovers_known_distribution() {
        // Uniform[0,1] draws: sup distance to the identity CDF within the
        // KS bound at n = 1e4.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let points = empirical_cdf(&values).unwrap();
        let sup = points
            .iter()
            .map(|p| (p.p - p.x).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1.63 / (10_000.0f64).sqrt() + 0.5 / 10_000.0, "sup {sup}");
    }
}
