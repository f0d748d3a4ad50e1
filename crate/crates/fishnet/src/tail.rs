//! Composed analytic failure probability.
//!
//! The failure probability of the net is a mixture of order-statistic CDFs:
//! the weight of damage count `k` comes from the geometric-Poisson
//! distribution, the term itself is the CDF of the `(k - dk)`-th weakest
//! link evaluated at a scaled stress,
//!
//! ```text
//! Pf(x) = sum_{k >= k0}  w_k * W[k - dk - 1](gamma[k - dk - 1] * x)
//! ```
//!
//! with `W[m]` the zero-based order-statistic basis (so the `k = 1, dk = 0`
//! term is the strict minimum's CDF), weights renormalized over `k >= k0`,
//! and `gamma` the mean ratio of the k-th smallest strength to the nominal
//! stress before the peak. Truncation order `k0` and shift `dk` compensate
//! the weight model's bias at small damage counts.

use crate::order_stats::{OrderStatBasis, OrderStatError};
use crate::polya_aeppli::PolyaAeppli;

/// Weight mass beyond which the mixture tail is folded into its last term.
const WEIGHT_CUTOFF: f64 = 1e-10;

/// Errors from model construction or evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailError {
    /// Truncation order must be at least 1.
    TruncationTooSmall { k0: usize },
    /// The shift must not exceed the truncation order.
    ShiftExceedsTruncation { k0: usize, delta_k: usize },
    /// Scaling factor must be >= 1; it was evaluated outside its domain.
    GammaOutOfDomain { k: usize },
    /// Order index outside `0..n`.
    OrderOutOfRange { k: usize, n: usize },
    /// Probability must lie strictly inside (0, 1).
    ProbabilityOutOfRange { p: f64 },
    /// Stress must be nonnegative.
    NegativeStress { x: f64 },
    /// No admissible weight mass above the truncation.
    VanishingWeights,
}

impl std::fmt::Display for TailError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TailError::TruncationTooSmall { k0 } => {
                write!(f, "truncation order must be >= 1, got {k0}")
            }
            TailError::ShiftExceedsTruncation { k0, delta_k } => {
                write!(f, "shift {delta_k} exceeds truncation order {k0}")
            }
            TailError::GammaOutOfDomain { k } => {
                write!(f, "scaling factor undefined at order {k}")
            }
            TailError::OrderOutOfRange { k, n } => {
                write!(f, "order {k} out of range for {n} links")
            }
            TailError::ProbabilityOutOfRange { p } => {
                write!(f, "probability must lie in (0, 1), got {p}")
            }
            TailError::NegativeStress { x } => write!(f, "stress must be nonnegative, got {x}"),
            TailError::VanishingWeights => write!(f, "weight mass above truncation vanished"),
        }
    }
}

impl std::error::Error for TailError {}

impl From<OrderStatError> for TailError {
    fn from(e: OrderStatError) -> Self {
        match e {
            OrderStatError::OrderOutOfRange { k, n } => TailError::OrderOutOfRange { k, n },
            OrderStatError::NegativeStress { x } => TailError::NegativeStress { x },
            OrderStatError::TransformDomain { p, x: _ } => {
                TailError::ProbabilityOutOfRange { p }
            }
        }
    }
}

/// Stress-to-order-statistic scaling factor, injected as a function of the
/// zero-based order.
///
/// Values are clamped from below at 1 (the ratio cannot drop under 1 before
/// the peak).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaScaling {
    /// `gamma(k) = N / (N - c k)`; `c = 1` is the default choice.
    Rational { c: f64 },
    /// `gamma(k) = intercept + slope * k`.
    Linear { intercept: f64, slope: f64 },
}

impl GammaScaling {
    pub fn factor(&self, k: usize, n_links: usize) -> Result<f64, TailError> {
        let raw = match self {
            GammaScaling::Rational { c } => {
                let denom = n_links as f64 - c * k as f64;
                if denom <= 0.0 {
                    return Err(TailError::GammaOutOfDomain { k });
                }
                n_links as f64 / denom
            }
            GammaScaling::Linear { intercept, slope } => intercept + slope * k as f64,
        };
        if !raw.is_finite() {
            return Err(TailError::GammaOutOfDomain { k });
        }
        Ok(raw.max(1.0))
    }
}

/// The default scaling `gamma(k) = N / (N - k)` for `k < N`.
pub fn gamma_default(k: usize, n_links: usize) -> Result<f64, TailError> {
    if k >= n_links {
        return Err(TailError::OrderOutOfRange { k, n: n_links });
    }
    GammaScaling::Rational { c: 1.0 }.factor(k, n_links)
}

/// Reference truncation/shift pairs for the four standard softening-slope
/// magnitudes `|Kt/K0|` in {0.1, 0.2, 0.3, 0.5}. Other ratios have no
/// default and the caller must supply parameters.
pub fn table1_defaults(kt_ratio: f64) -> Option<(usize, usize)> {
    const TOL: f64 = 1e-9;
    let table = [(0.1, (5, 0)), (0.2, (5, 2)), (0.3, (5, 3)), (0.5, (5, 3))];
    table
        .iter()
        .find(|(r, _)| (kt_ratio - r).abs() <= TOL)
        .map(|(_, params)| *params)
}

/// Composed analytic failure-probability model.
#[derive(Debug, Clone)]
pub struct TailModel {
    basis: OrderStatBasis,
    weights: PolyaAeppli,
    k0: usize,
    delta_k: usize,
    gamma: GammaScaling,
    /// Pairs of (zero-based order, renormalized weight); weights sum to 1.
    table: Vec<(usize, f64)>,
}

impl TailModel {
    pub fn new(
        basis: OrderStatBasis,
        weights: PolyaAeppli,
        k0: usize,
        delta_k: usize,
        gamma: GammaScaling,
    ) -> Result<Self, TailError> {
        if k0 < 1 {
            return Err(TailError::TruncationTooSmall { k0 });
        }
        if delta_k > k0 {
            return Err(TailError::ShiftExceedsTruncation { k0, delta_k });
        }
        let table = Self::build_weight_table(&basis, &weights, k0, delta_k)?;
        Ok(TailModel {
            basis,
            weights,
            k0,
            delta_k,
            gamma,
            table,
        })
    }

    pub fn basis(&self) -> &OrderStatBasis {
        &self.basis
    }

    pub fn weights(&self) -> &PolyaAeppli {
        &self.weights
    }

    pub fn truncation(&self) -> (usize, usize) {
        (self.k0, self.delta_k)
    }

    pub fn gamma(&self) -> &GammaScaling {
        &self.gamma
    }

    /// Renormalized mixture table: (zero-based order, weight).
    pub fn weight_table(&self) -> &[(usize, f64)] {
        &self.table
    }

    fn build_weight_table(
        basis: &OrderStatBasis,
        weights: &PolyaAeppli,
        k0: usize,
        delta_k: usize,
    ) -> Result<Vec<(usize, f64)>, TailError> {
        let n = basis.n_links;
        let max_order = n - 1;
        // Generous cap: the Polya-Aeppli tail decays geometrically, so the
        // cutoff mass is reached long before this.
        let (mean, var) = weights.moments();
        let cap = (mean + 40.0 * var.sqrt()).ceil() as usize + k0 + 64;
        let pmf = weights.pmf_prefix(cap + n);
        let head: f64 = pmf.iter().take(k0).sum();
        let tail_mass = 1.0 - head;
        if !(tail_mass > 1e-300) {
            return Err(TailError::VanishingWeights);
        }
        let mut table: Vec<(usize, f64)> = Vec::new();
        let mut cumulative = 0.0;
        for k in k0.. {
            // The weight for damage count k attaches to the CDF of the
            // (k - delta_k)-th weakest link, zero-based order k - dk - 1.
            // The dk = k0 corner would address order -1; it is clamped to
            // the strict minimum.
            let order = (k - delta_k).saturating_sub(1).min(max_order);
            if order == max_order {
                // Largest defined order: fold the entire remaining mass.
                table.push((order, 1.0 - cumulative));
                break;
            }
            let w = pmf.get(k).copied().unwrap_or(0.0) / tail_mass;
            table.push((order, w));
            cumulative += w;
            if 1.0 - cumulative <= WEIGHT_CUTOFF {
                let last = table.last_mut().expect("just pushed");
                last.1 += 1.0 - cumulative;
                break;
            }
        }
        Ok(table)
    }

    /// Mixture CDF of the net strength at nominal stress `x`.
    pub fn failure_probability(&self, x: f64) -> Result<f64, TailError> {
        if !(x >= 0.0) {
            return Err(TailError::NegativeStress { x });
        }
        let n = self.basis.n_links;
        let mut total = 0.0;
        for &(order, weight) in &self.table {
            if weight == 0.0 {
                continue;
            }
            let gamma = self.gamma.factor(order, n)?;
            total += weight * self.basis.wk(gamma * x, order)?;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// Stress at which the failure probability reaches `p`, by bisection to
    /// 1e-6 MPa absolute. For `p` under the numeric floor of the composed
    /// tail this returns the abscissa where evaluation first resolves, i.e.
    /// the floor.
    pub fn strength_at_probability(&self, p: f64) -> Result<f64, TailError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(TailError::ProbabilityOutOfRange { p });
        }
        let mut hi = 1.0;
        while self.failure_probability(hi)? < p {
            hi *= 2.0;
            if hi > 1e9 {
                break;
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if self.failure_probability(mid)? < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
