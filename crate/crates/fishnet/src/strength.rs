//! Parent probability distribution of link strength.
//!
//! Link strengths are i.i.d. draws from a piecewise distribution: a Weibull
//! lower tail grafted onto a Gaussian core at a fixed crossover stress. The
//! two branches do not meet exactly at the crossover (the mismatch is about
//! 4e-4 with the default constants); the distribution is kept piecewise with
//! that tolerated jump rather than smoothed, and the inverse maps any
//! probability inside the gap to the crossover abscissa.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

/// Errors from evaluating or inverting the strength distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrengthError {
    /// Stress argument was negative (strengths live on `[0, inf)`).
    NegativeStress { x: f64 },
    /// Probability argument was outside `[0, 1)`.
    ProbabilityOutOfRange { p: f64 },
    /// Sample count must be at least 1.
    EmptySample,
}

impl std::fmt::Display for StrengthError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrengthError::NegativeStress { x } => {
                write!(f, "stress must be nonnegative, got {x}")
            }
            StrengthError::ProbabilityOutOfRange { p } => {
                write!(f, "probability must lie in [0, 1), got {p}")
            }
            StrengthError::EmptySample => write!(f, "sample count must be at least 1"),
        }
    }
}

impl std::error::Error for StrengthError {}

/// Piecewise parent CDF of link strength: Weibull tail below the crossover
/// stress, Gaussian core (via the error function) above it.
///
/// ```text
/// P1(x) = a_w (1 - exp(-(x/s_w)^m)),          x <= crossover
/// P1(x) = c_0 - c_1 erf(b (x_c - x)),         x >  crossover
/// ```
///
/// All stresses are in MPa. The defaults reproduce a lower tail with Weibull
/// modulus 10 and a core centered near 10 MPa.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StrengthDistribution {
    /// Amplitude `a_w` of the Weibull branch (dimensionless).
    pub weibull_amplitude: f64,
    /// Scale `s_w` of the Weibull branch (MPa).
    pub weibull_scale: f64,
    /// Exponent `m` of the Weibull branch (dimensionless).
    pub weibull_exponent: f64,
    /// Branch crossover stress (MPa).
    pub crossover: f64,
    /// Offset `c_0` of the Gaussian branch (probability).
    pub gauss_offset: f64,
    /// Amplitude `c_1` of the Gaussian branch (probability).
    pub gauss_amplitude: f64,
    /// Slope `b` of the Gaussian branch (1/MPa).
    pub gauss_slope: f64,
    /// Center `x_c` of the Gaussian branch (MPa).
    pub gauss_center: f64,
}

impl Default for StrengthDistribution {
    fn default() -> Self {
        StrengthDistribution {
            weibull_amplitude: 2.55,
            weibull_scale: 12.0,
            weibull_exponent: 10.0,
            crossover: 8.6,
            gauss_offset: 0.526,
            gauss_amplitude: 0.474,
            gauss_slope: 0.884,
            gauss_center: 10.0,
        }
    }
}

/// Upper bisection bracket for the inverse CDF. The Gaussian branch
/// saturates to 1.0 in f64 well below this stress for any sane parameters.
const INVERSE_BRACKET_MAX: f64 = 64.0;

impl StrengthDistribution {
    fn weibull_branch(&self, x: f64) -> f64 {
        self.weibull_amplitude * (-(-(x / self.weibull_scale).powf(self.weibull_exponent)).exp_m1())
    }

    fn gauss_branch(&self, x: f64) -> f64 {
        self.gauss_offset - self.gauss_amplitude * erf(self.gauss_slope * (self.gauss_center - x))
    }

    /// CDF value of the Weibull branch as it approaches the crossover from below.
    pub fn cdf_at_crossover_below(&self) -> f64 {
        self.weibull_branch(self.crossover).clamp(0.0, 1.0)
    }

    /// CDF value of the Gaussian branch as it approaches the crossover from above.
    pub fn cdf_at_crossover_above(&self) -> f64 {
        self.gauss_branch(self.crossover).clamp(0.0, 1.0)
    }

    /// Cumulative probability that a link strength is at most `x` MPa.
    ///
    /// Returns the Weibull-tail branch for `x` up to the crossover and the
    /// Gaussian-core branch above it, clamped to `[0, 1]`.
    pub fn cdf(&self, x: f64) -> Result<f64, StrengthError> {
        if !(x >= 0.0) {
            return Err(StrengthError::NegativeStress { x });
        }
        let p = if x <= self.crossover {
            self.weibull_branch(x)
        } else {
            self.gauss_branch(x)
        };
        Ok(p.clamp(0.0, 1.0))
    }

    /// Inverse CDF by bracketed bisection per branch.
    ///
    /// `p` must lie in `[0, 1)`. Satisfies `|cdf(x) - p| <= 1e-10 * max(1, p)`
    /// except for `p` inside the small branch-mismatch gap at the crossover,
    /// where the crossover abscissa is returned.
    pub fn inverse_cdf(&self, p: f64) -> Result<f64, StrengthError> {
        if !(0.0..1.0).contains(&p) {
            return Err(StrengthError::ProbabilityOutOfRange { p });
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let below = self.cdf_at_crossover_below();
        let above = self.cdf_at_crossover_above();
        let (mut lo, mut hi, lower_branch) = if p <= below {
            (0.0, self.crossover, true)
        } else if p >= above {
            (self.crossover, INVERSE_BRACKET_MAX, false)
        } else {
            // Inside the branch-mismatch gap: no abscissa attains p.
            return Ok(self.crossover);
        };
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            let value = if lower_branch {
                self.weibull_branch(mid)
            } else {
                self.gauss_branch(mid)
            };
            if value < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Draws `n` i.i.d. strengths by inverse-transform sampling.
    ///
    /// Identical `(seed, n)` always yields the identical sequence, independent
    /// of thread count or call site.
    pub fn sample_strengths(&self, n: usize, seed: u64) -> Result<Vec<f64>, StrengthError> {
        self.sample_strengths_stream(n, seed, 0)
    }

    /// Stream-splittable variant of [`sample_strengths`](Self::sample_strengths).
    ///
    /// Each `stream` value selects an independent substream of the generator
    /// seeded by `seed`, so ensembles can assign one stream per replica and
    /// stay reproducible under any parallel schedule.
    pub fn sample_strengths_stream(
        &self,
        n: usize,
        seed: u64,
        stream: u64,
    ) -> Result<Vec<f64>, StrengthError> {
        if n == 0 {
            return Err(StrengthError::EmptySample);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen();
            // u lies in [0, 1), the exact domain of the inverse.
            out.push(self.inverse_cdf(u).expect("uniform draw in [0,1)"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent high-precision exponential: Taylor series with argument
    /// reduction, used only to freeze expected CDF values.
    fn exp_oracle(x: f64) -> f64 {
        let n = (x.abs().ceil() as i32).max(1);
        let y = x / n as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= y / k as f64;
            sum += term;
            if term.abs() < 1e-20 * sum.abs() {
                break;
            }
        }
        sum.powi(n)
    }

    /// Independent erf via its Maclaurin series (adequate for |z| < 3).
    fn erf_oracle(z: f64) -> f64 {
        let mut term = z;
        let mut sum = z;
        for n in 1..200 {
            term *= -z * z / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-20 {
                break;
            }
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    }

    fn dist() -> StrengthDistribution {
        StrengthDistribution::default()
    }

    #[test]
    fn cdf_at_zero_is_zero() {
        assert_eq!(dist().cdf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn cdf_matches_oracle_at_crossover() {
        // 2.55 * (1 - exp(-(8.6/12)^10)) via the series oracle.
        let expected = 2.55 * (1.0 - exp_oracle(-(8.6f64 / 12.0).powi(10)));
        let got = dist().cdf(8.6).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
        assert!((got - 0.0895).abs() < 5e-4);
    }

    #[test]
    fn cdf_matches_oracle_in_gaussian_core() {
        // 0.526 - 0.474 * erf(0.884 * (10 - 12)) via the series oracle.
        let expected = 0.526 - 0.474 * erf_oracle(0.884 * (10.0 - 12.0));
        let got = dist().cdf(12.0).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
        assert!((got - 0.9941).abs() < 5e-4);
    }

    #[test]
    fn cdf_rejects_negative_stress() {
        assert!(matches!(
            dist().cdf(-1.0),
            Err(StrengthError::NegativeStress { .. })
        ));
    }

    #[test]
    fn branch_mismatch_is_small_but_nonzero() {
        let d = dist();
        let below = d.cdf_at_crossover_below();
        let above = d.cdf_at_crossover_above();
        let gap = (below - above).abs();
        assert!(gap <= 1e-3, "gap {gap}");
        assert!(gap > 1e-5, "constants should leave a visible mismatch, gap {gap}");
    }

    #[test]
    fn cdf_is_nondecreasing_on_dense_grid() {
        let d = dist();
        let mut prev = 0.0;
        let mut x = 0.0;
        while x <= 20.0 {
            let p = d.cdf(x).unwrap();
            assert!(p >= prev - 1e-15, "decrease at x={x}: {p} < {prev}");
            assert!((0.0..=1.0).contains(&p));
            prev = p;
            x += 1e-3;
        }
        assert!((d.cdf(40.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_round_trip() {
        let d = dist();
        let below = d.cdf_at_crossover_below();
        let above = d.cdf_at_crossover_above();
        let mut p = 0.0005;
        while p < 0.999 {
            if p <= below || p >= above {
                let x = d.inverse_cdf(p).unwrap();
                let r = d.cdf(x).unwrap();
                assert!(
                    (r - p).abs() <= 1e-9,
                    "round-trip failed at p={p}: cdf({x})={r}"
                );
            }
            p += 0.0005;
        }
    }

    #[test]
    fn inverse_cdf_edge_cases() {
        let d = dist();
        assert_eq!(d.inverse_cdf(0.0).unwrap(), 0.0);
        let x = d.inverse_cdf(0.0895).unwrap();
        assert!((x - 8.6).abs() < 0.05, "x = {x}");
        // Midpoint of the branch gap maps to the crossover.
        let gap_mid = 0.5 * (d.cdf_at_crossover_below() + d.cdf_at_crossover_above());
        assert_eq!(d.inverse_cdf(gap_mid).unwrap(), d.crossover);
        // Median lands on the Gaussian branch.
        let med = d.inverse_cdf(0.5).unwrap();
        assert!(med > d.crossover);
        assert!((d.cdf(med).unwrap() - 0.5).abs() <= 1e-10);
        assert!(matches!(
            d.inverse_cdf(1.0),
            Err(StrengthError::ProbabilityOutOfRange { .. })
        ));
        assert!(matches!(
            d.inverse_cdf(-0.1),
            Err(StrengthError::ProbabilityOutOfRange { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_nonnegative() {
        let d = dist();
        let a = d.sample_strengths(5, 7).unwrap();
        let b = d.sample_strengths(5, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| *s >= 0.0));
        let c = d.sample_strengths_stream(5, 7, 1).unwrap();
        assert_ne!(a, c, "distinct streams must decorrelate");
    }

    #[test]
    fn sampling_matches_cdf_within_ks_bound() {
        let d = dist();
        let n = 100_000;
        let mut draws = d.sample_strengths(n, 0xF15).unwrap();
        draws.sort_by(f64::total_cmp);
        let mut sup = 0.0f64;
        for (i, x) in draws.iter().enumerate() {
            let f = d.cdf(*x).unwrap();
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            sup = sup.max((f - lo).abs()).max((hi - f).abs());
        }
        // KS critical value at alpha ~ 0.01 for n = 1e5 is ~0.00516.
        assert!(sup <= 0.006, "KS sup-distance {sup}");
    }
}
