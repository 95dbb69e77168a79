use nalgebra::{DMatrix, DVector};

use super::RegressionProblem;
use crate::error::{Error, Result};
use crate::kernels::{Hyperparameters, KernelKind};
use crate::linalg::half_log_det;

/// Marginal-likelihood evaluator with the data compressed once.
///
/// With the thin QR factorization `Φ = Q R` and `Y = Q c + e`, the output
/// covariance `Σ = Φ P Φᵀ + σ² I` is block diagonal in the basis
/// `[Q, Q⊥]`, so
///
/// ```text
/// Yᵀ Σ⁻¹ Y   = cᵀ (σ² I + R P Rᵀ)⁻¹ c + ‖e‖² / σ²
/// log det Σ  = log det (σ² I + R P Rᵀ) + (N − k) log σ²
/// ```
///
/// with `k = min(N, m)`. Each evaluation factorizes a `k × k` matrix
/// instead of the `N × N` covariance.
#[derive(Clone, Debug)]
pub struct Evidence {
    r: DMatrix<f64>,
    c: DVector<f64>,
    resid_sq: f64,
    n: usize,
}

impl Evidence {
    pub fn new(problem: &RegressionProblem) -> Self {
        let qr = problem.phi.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let c = q.tr_mul(&problem.y);
        let resid_sq = (&problem.y - &q * &c).norm_squared();
        Evidence {
            r,
            c,
            resid_sq,
            n: problem.n(),
        }
    }

    /// `Yᵀ Σ⁻¹ Y + log det Σ` for prior covariance `p`.
    pub fn objective(&self, p: &DMatrix<f64>, sigma2: f64) -> Result<f64> {
        let k = self.r.nrows();
        let mut s = &self.r * p * self.r.transpose();
        s = (&s + s.transpose()) * 0.5;
        for i in 0..k {
            s[(i, i)] += sigma2;
        }
        let extra = self.n - k;
        if sigma2 <= 0.0 && extra > 0 {
            return Err(Error::SingularSigma);
        }
        let chol = s.cholesky().ok_or(Error::SingularSigma)?;
        let z = chol
            .l()
            .solve_lower_triangular(&self.c)
            .ok_or(Error::SingularSigma)?;
        let mut value = z.norm_squared() + 2.0 * half_log_det(&chol.l());
        if extra > 0 {
            value += self.resid_sq / sigma2 + extra as f64 * sigma2.ln();
        }
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::SingularSigma)
        }
    }
}

/// `Yᵀ Σ_η⁻¹ Y + log det Σ_η` with `Σ_η = Φ P(η) Φᵀ + σ² I`; smaller is better.
pub fn marginal_likelihood_objective(
    problem: &RegressionProblem,
    kind: KernelKind,
    hyper: &Hyperparameters,
) -> Result<f64> {
    let sigma2 = problem.require_sigma2()?;
    let p = problem.prior_matrix(kind, hyper)?;
    Evidence::new(problem).objective(&p, sigma2)
}
