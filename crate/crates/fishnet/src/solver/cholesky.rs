//! Dense Cholesky factorization with rank-one update and downdate.
//!
//! The event loop changes exactly one link stiffness per event, which
//! perturbs the reduced stiffness matrix by `sigma * v v^T` with `v`
//! supported on at most two entries. Re-using the factor through the
//! hyperbolic-rotation downdate is what makes the simulator fast; a failed
//! downdate (loss of positive definiteness within rounding) is reported so
//! the caller can refactorize from scratch.

/// The matrix (or its rank-one modification) stopped being positive
/// definite at the given pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

impl std::fmt::Display for NotPositiveDefinite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "matrix not positive definite at pivot {}", self.pivot)
    }
}

impl std::error::Error for NotPositiveDefinite {}

/// Lower-triangular Cholesky factor stored dense row-major.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factors a symmetric positive definite matrix given dense row-major.
    /// Only the lower triangle of `matrix` is read.
    pub fn factor(matrix: &[f64], n: usize) -> Result<Self, NotPositiveDefinite> {
        debug_assert_eq!(matrix.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = matrix[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(NotPositiveDefinite { pivot: i });
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(DenseCholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place (`b` becomes `x`).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut sum = b[i];
            let row = &self.l[i * n..i * n + i];
            for (k, lik) in row.iter().enumerate() {
                sum -= lik * b[k];
            }
            b[i] = sum / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in i + 1..n {
                sum -= self.l[k * n + i] * b[k];
            }
            b[i] = sum / self.l[i * n + i];
        }
    }

    /// Applies the rank-one modification `A + sigma * v v^T` (`sigma` is
    /// `+1.0` or `-1.0`) directly to the factor. `v` is destroyed.
    ///
    /// A downdate that would lose positive definiteness returns an error and
    /// leaves the factor in an unspecified state; the caller must
    /// refactorize.
    pub fn rank_one_modify(
        &mut self,
        v: &mut [f64],
        sigma: f64,
    ) -> Result<(), NotPositiveDefinite> {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        debug_assert!(sigma == 1.0 || sigma == -1.0);
        for k in 0..n {
            let vk = v[k];
            if vk == 0.0 {
                continue;
            }
            let lkk = self.l[k * n + k];
            let d = lkk * lkk + sigma * vk * vk;
            if !(d > 0.0) || !d.is_finite() {
                return Err(NotPositiveDefinite { pivot: k });
            }
            let r = d.sqrt();
            let c = r / lkk;
            let s = vk / lkk;
            self.l[k * n + k] = r;
            for i in k + 1..n {
                let lik = (self.l[i * n + k] + sigma * s * v[i]) / c;
                self.l[i * n + k] = lik;
                v[i] = c * v[i] - s * lik;
            }
        }
        Ok(())
    }
}
