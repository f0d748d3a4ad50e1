//! Geometric-Poisson (Pólya-Aeppli) distribution of the damage count at
//! peak load.
//!
//! Damaged links appear in clusters: the number of clusters is Poisson with
//! mean `lambda`, each cluster size is geometric on {1, 2, ...} with success
//! probability `theta`, and the total damage count is their sum. Moment
//! fitting from a small sample is the intended estimation route.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Errors from constructing, fitting, or evaluating the distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolyaAeppliError {
    /// `lambda` must be positive and finite.
    LambdaInvalid { lambda: f64 },
    /// `theta` must lie in (0, 1].
    ThetaInvalid { theta: f64 },
    /// Moment fitting needs a positive sample mean.
    NonPositiveMean { mean: f64 },
    /// Sample count must be at least 1.
    EmptySample,
}

impl std::fmt::Display for PolyaAeppliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolyaAeppliError::LambdaInvalid { lambda } => {
                write!(f, "lambda must be positive and finite, got {lambda}")
            }
            PolyaAeppliError::ThetaInvalid { theta } => {
                write!(f, "theta must lie in (0, 1], got {theta}")
            }
            PolyaAeppliError::NonPositiveMean { mean } => {
                write!(f, "sample mean must be positive, got {mean}")
            }
            PolyaAeppliError::EmptySample => write!(f, "sample count must be at least 1"),
        }
    }
}

impl std::error::Error for PolyaAeppliError {}

/// Pólya-Aeppli (geometric-Poisson) distribution with cluster-count mean
/// `lambda` and per-trial success probability `theta`.
///
/// Mean and variance are `lambda / theta` and `lambda (2 - theta) / theta^2`.
/// `theta = 1` degenerates to a plain Poisson distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolyaAeppli {
    lambda: f64,
    theta: f64,
}

/// Result of a moment fit, retaining the sample moments and whether the
/// under-dispersion clamp fired.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MomentFit {
    pub dist: PolyaAeppli,
    /// True when the sample was under-dispersed (variance < mean) and theta
    /// was clamped to the Poisson boundary.
    pub clamped: bool,
    pub sample_mean: f64,
    pub sample_variance: f64,
}

impl PolyaAeppli {
    pub fn new(lambda: f64, theta: f64) -> Result<Self, PolyaAeppliError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(PolyaAeppliError::LambdaInvalid { lambda });
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(PolyaAeppliError::ThetaInvalid { theta });
        }
        Ok(PolyaAeppli { lambda, theta })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Probability mass at `k`, via the two-term recurrence
    ///
    /// ```text
    /// (k+1) p_{k+1} = (2qk + lambda theta) p_k - q^2 (k-1) p_{k-1},  q = 1 - theta
    /// ```
    ///
    /// anchored at `p_0 = e^{-lambda}`, `p_1 = lambda theta e^{-lambda}`.
    pub fn pmf(&self, k: usize) -> f64 {
        let prefix = self.pmf_prefix(k);
        prefix[k]
    }

    /// All masses `p_0 ..= p_max` in one recurrence sweep.
    pub fn pmf_prefix(&self, max: usize) -> Vec<f64> {
        let q = 1.0 - self.theta;
        let lt = self.lambda * self.theta;
        let mut out = Vec::with_capacity(max + 1);
        out.push((-self.lambda).exp());
        if max >= 1 {
            out.push(lt * (-self.lambda).exp());
        }
        for k in 1..max {
            let kf = k as f64;
            let next = ((2.0 * q * kf + lt) * out[k] - q * q * (kf - 1.0) * out[k - 1])
                / (kf + 1.0);
            out.push(next.max(0.0));
        }
        out
    }

    /// `(mean, variance) = (lambda/theta, lambda(2-theta)/theta^2)`.
    pub fn moments(&self) -> (f64, f64) {
        let mean = self.lambda / self.theta;
        let variance = self.lambda * (2.0 - self.theta) / (self.theta * self.theta);
        (mean, variance)
    }

    /// Inverts the moment identities: `theta = 2 mean / (mean + variance)`,
    /// `lambda = mean * theta`.
    ///
    /// An under-dispersed sample (variance < mean) has no valid parameters;
    /// theta is clamped to 1 (Poisson) and the clamp is flagged.
    pub fn fit_moments(
        sample_mean: f64,
        sample_variance: f64,
    ) -> Result<MomentFit, PolyaAeppliError> {
        if !(sample_mean > 0.0) {
            return Err(PolyaAeppliError::NonPositiveMean { mean: sample_mean });
        }
        let (theta, clamped) = if sample_variance < sample_mean {
            (1.0, true)
        } else {
            (2.0 * sample_mean / (sample_mean + sample_variance), false)
        };
        let dist = PolyaAeppli::new(sample_mean * theta, theta)?;
        Ok(MomentFit {
            dist,
            clamped,
            sample_mean,
            sample_variance,
        })
    }

    /// Draws `n` counts by summing a Poisson(lambda) number of geometric
    /// cluster sizes. Intended as the sampling oracle for `pmf` and
    /// `fit_moments`.
    pub fn sample_nc(&self, n: usize, seed: u64) -> Result<Vec<u64>, PolyaAeppliError> {
        if n == 0 {
            return Err(PolyaAeppliError::EmptySample);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let clusters = poisson_draw(self.lambda, &mut rng);
            let mut total = 0u64;
            for _ in 0..clusters {
                total += geometric_draw(self.theta, &mut rng);
            }
            out.push(total);
        }
        Ok(out)
    }
}

/// Poisson draw by Knuth's product method; valid while `exp(-lambda)` is
/// representable, which covers every fit this crate produces.
fn poisson_draw<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
    let floor = (-lambda).exp();
    let mut product: f64 = rng.gen();
    let mut count = 0u64;
    while product > floor {
        product *= rng.gen::<f64>();
        count += 1;
    }
    count
}

/// Geometric draw on {1, 2, ...} with success probability `theta`.
fn geometric_draw<R: Rng>(theta: f64, rng: &mut R) -> u64 {
    if theta >= 1.0 {
        return 1;
    }
    let u: f64 = rng.gen();
    // ceil(ln(1-u)/ln(1-theta)) >= 1
    let draw = ((-u).ln_1p() / (-theta).ln_1p()).ceil();
    draw.max(1.0) as u64
}
