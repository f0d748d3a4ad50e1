//! Finite-size distributions of the k-th smallest of N i.i.d. link strengths.
//!
//! The CDF of the (k+1)-th smallest value is the binomial upper tail
//!
//! ```text
//! W_k(x) = Pr[at least k+1 of N strengths <= x]
//!        = sum_{s=k+1}^{N} C(N, s) P1(x)^s (1 - P1(x))^{N-s}
//! ```
//!
//! evaluated exactly in log space so both tails stay accurate down to
//! probabilities of 1e-12 and below. As N grows with `N * P1(x)` held
//! moderate this converges to the classical Poisson-exceedance form
//! `1 - e^{-t} sum_{s<=k} t^s / s!` with `t = -N ln(1 - P1(x))`; the exact
//! tail is used so that small populations match the sorting oracle too.
//!
//! Indexing convention, fixed here and used throughout the crate: order `k`
//! refers to the (k+1)-th smallest value, so `k = 0` is the strict minimum.

use crate::strength::StrengthDistribution;
use statrs::function::gamma::ln_gamma;

/// Errors from order-statistic evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderStatError {
    /// Order must satisfy `k < N`.
    OrderOutOfRange { k: usize, n: usize },
    /// Stress argument was negative.
    NegativeStress { x: f64 },
    /// The Weibull-scale transform needs `p` strictly inside (0, 1) and `x > 0`.
    TransformDomain { p: f64, x: f64 },
}

impl std::fmt::Display for OrderStatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrderStatError::OrderOutOfRange { k, n } => {
                write!(f, "order {k} out of range for {n} variables")
            }
            OrderStatError::NegativeStress { x } => {
                write!(f, "stress must be nonnegative, got {x}")
            }
            OrderStatError::TransformDomain { p, x } => {
                write!(f, "Weibull-scale transform undefined at p={p}, x={x}")
            }
        }
    }
}

impl std::error::Error for OrderStatError {}

/// Basis of order-statistic CDFs over `n_links` i.i.d. strengths with a
/// common parent distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrderStatBasis {
    pub parent: StrengthDistribution,
    pub n_links: usize,
}

impl OrderStatBasis {
    pub fn new(parent: StrengthDistribution, n_links: usize) -> Self {
        assert!(n_links >= 1, "need at least one variable");
        OrderStatBasis { parent, n_links }
    }

    fn parent_cdf(&self, x: f64) -> Result<f64, OrderStatError> {
        self.parent
            .cdf(x)
            .map_err(|_| OrderStatError::NegativeStress { x })
    }

    /// CDF of the strict minimum, `W_0(x) = 1 - (1 - P1(x))^N`.
    pub fn w0(&self, x: f64) -> Result<f64, OrderStatError> {
        let p1 = self.parent_cdf(x)?;
        if p1 >= 1.0 {
            return Ok(1.0);
        }
        Ok(-((self.n_links as f64) * (-p1).ln_1p()).exp_m1())
    }

    /// CDF of the (k+1)-th smallest of the N strengths.
    ///
    /// `k = 0` coincides with [`w0`](Self::w0); values are nondecreasing in
    /// `x` and nonincreasing in `k`.
    pub fn wk(&self, x: f64, k: usize) -> Result<f64, OrderStatError> {
        if k >= self.n_links {
            return Err(OrderStatError::OrderOutOfRange {
                k,
                n: self.n_links,
            });
        }
        let p1 = self.parent_cdf(x)?;
        Ok(binomial_upper_tail(k, self.n_links, p1))
    }

    /// Weibull-scale plotting transform `(ln x, ln(-ln(1 - p)))`.
    pub fn weibull_scale(p: f64, x: f64) -> Result<(f64, f64), OrderStatError> {
        if !(p > 0.0 && p < 1.0 && x > 0.0) {
            return Err(OrderStatError::TransformDomain { p, x });
        }
        Ok((x.ln(), (-(-p).ln_1p()).ln()))
    }
}

/// `Pr[Bin(n, p) > k]`, evaluated without cancellation on either tail.
///
/// Whichever binomial tail is the smaller one is summed directly, anchored
/// by one log-space leading term; the other case returns its complement.
fn binomial_upper_tail(k: usize, n: usize, p: f64) -> f64 {
    debug_assert!(k < n);
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let q = 1.0 - p;
    let nf = n as f64;
    let j = (k + 1) as f64;
    let ln_coeff = |s: f64| ln_gamma(nf + 1.0) - ln_gamma(s + 1.0) - ln_gamma(nf - s + 1.0);
    if j >= nf * p {
        // sum_{s=j}^{n}: term ratio (n-s)/(s+1) * p/q decays above the mode.
        let ln_lead = ln_coeff(j) + j * p.ln() + (nf - j) * q.ln();
        let mut sum = 1.0;
        let mut term = 1.0;
        let mut s = j;
        while s < nf {
            term *= (nf - s) / (s + 1.0) * (p / q);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            s += 1.0;
        }
        (ln_lead + sum.ln()).exp()
    } else {
        // 1 - sum_{s=0}^{j-1}, summed backward from s = j-1.
        let m = j - 1.0;
        let ln_lead = ln_coeff(m) + m * p.ln() + (nf - m) * q.ln();
        let mut sum = 1.0;
        let mut term = 1.0;
        let mut s = m;
        while s >= 1.0 {
            term *= s / (nf - s + 1.0) * (q / p);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            s -= 1.0;
        }
        -(ln_lead + sum.ln()).exp_m1()
    }
}
