//! Regularized least squares with stable-kernel priors.
//!
//! The estimate is `ĝ = P Φᵀ (Φ P Φᵀ + σ² I)⁻¹ Y`, the posterior mean of `g`
//! under a zero-mean Gaussian prior with covariance `P(η)`. The
//! hyperparameters `η` are tuned by minimizing the negative log marginal
//! likelihood `Yᵀ Σ⁻¹ Y + log det Σ`.

mod evidence;
mod kernel_form;
mod tuning;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{build_regularization_matrix, Hyperparameters, KernelKind};
use crate::linalg::min_norm_lstsq;

pub use evidence::{marginal_likelihood_objective, Evidence};
pub use kernel_form::{kernel_form_estimate, KernelFormEstimate};
pub use tuning::{lambda_grid, tune_hyperparameters, TuningOutcome, DECAY_GRID};

/// Default FIR order for kernel estimators.
pub const DEFAULT_ORDER: usize = 100;

/// Linear regression `Y = Φ g + E` built from lagged signals.
#[derive(Clone, Debug)]
pub struct RegressionProblem {
    /// `N × (blocks · m)`; block `b`, column `t` holds `signal_b(i − t)`.
    pub phi: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Noise variance; `None` until estimated or supplied.
    pub sigma2: Option<f64>,
    /// Number of stacked impulse responses (1 for SISO FIR).
    pub blocks: usize,
}

impl RegressionProblem {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Total number of unknown coefficients.
    pub fn order(&self) -> usize {
        self.phi.ncols()
    }

    /// Coefficients per block.
    pub fn block_order(&self) -> usize {
        self.phi.ncols() / self.blocks
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = Some(sigma2);
        self
    }

    pub(crate) fn require_sigma2(&self) -> Result<f64> {
        match self.sigma2 {
            Some(s) if s.is_finite() && s >= 0.0 => Ok(s),
            Some(s) => Err(Error::InvalidArgument(format!(
                "noise variance {s} is invalid"
            ))),
            None => Err(Error::InvalidArgument("noise variance not set".into())),
        }
    }

    /// Block-diagonal prior covariance with one `P(η)` per block.
    pub fn prior_matrix(&self, kind: KernelKind, hyper: &Hyperparameters) -> Result<DMatrix<f64>> {
        let m = self.block_order();
        let block = build_regularization_matrix(kind, hyper, m)?.entries;
        if self.blocks == 1 {
            return Ok(block);
        }
        let mut p = DMatrix::zeros(self.order(), self.order());
        for b in 0..self.blocks {
            p.view_mut((b * m, b * m), (m, m)).copy_from(&block);
        }
        Ok(p)
    }
}

/// Lagged-signal regression from rest: column `t` of block `b` at row `i`
/// is `signals[b][i − t]`, with samples before the record taken as zero.
pub fn build_lagged_regression(
    signals: &[&[f64]],
    y: &[f64],
    m: usize,
) -> Result<RegressionProblem> {
    if m == 0 {
        return Err(Error::OrderZero);
    }
    let n = y.len();
    if n == 0 || signals.is_empty() {
        return Err(Error::EmptyData);
    }
    for s in signals {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: s.len(),
            });
        }
    }
    let blocks = signals.len();
    let mut phi = DMatrix::zeros(n, blocks * m);
    for (b, s) in signals.iter().enumerate() {
        for t in 1..=m {
            let col = b * m + t - 1;
            for i in t..n {
                phi[(i, col)] = s[i - t];
            }
        }
    }
    Ok(RegressionProblem {
        phi,
        y: DVector::from_column_slice(y),
        sigma2: None,
        blocks,
    })
}

/// FIR regression `(Φ g)_i = Σ_{t=1}^{m} g_t u(i − t)` with the system at rest.
pub fn build_fir_regression(u: &[f64], y: &[f64], m: usize) -> Result<RegressionProblem> {
    if u.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: u.len(),
        });
    }
    build_lagged_regression(&[u], y, m)
}

/// Noise variance from least-squares residuals, `‖Y − Φ ĝ_LS‖² / (N − r)`.
///
/// When the regression has no residual degrees of freedom (`N ≤ r`) the
/// residuals of a small ridge fit divided by `N` are used instead.
pub fn estimate_noise_variance(problem: &RegressionProblem) -> Result<f64> {
    let n = problem.n();
    if n < 2 {
        return Err(Error::EmptyData);
    }
    let (g, rank) = min_norm_lstsq(&problem.phi, &problem.y);
    if n > rank {
        let resid = &problem.y - &problem.phi * g;
        return Ok(resid.norm_squared() / (n - rank) as f64);
    }
    log::warn!("regression has no residual degrees of freedom (N = {n}, rank = {rank}); using ridge residuals");
    let m = problem.order();
    let gram = problem.phi.tr_mul(&problem.phi);
    let penalty = 1e-6 * gram.trace() / m as f64;
    let mut reg = gram.clone();
    for i in 0..m {
        reg[(i, i)] += penalty;
    }
    let rhs = problem.phi.tr_mul(&problem.y);
    let g = match reg.cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => min_norm_lstsq(&gram, &rhs).0,
    };
    let resid = &problem.y - &problem.phi * g;
    Ok(resid.norm_squared() / n as f64)
}

/// `ĝ = P Φᵀ (Φ P Φᵀ + σ² I)⁻¹ Y`.
///
/// Computed as `P Rᵀ (R P Rᵀ + σ² I)⁻¹ c` from the thin QR factorization
/// `Φ = Q R`, `c = Qᵀ Y`, which factorizes a `min(N, m)` square matrix
/// instead of the `N × N` output covariance.
pub fn rels_estimate(problem: &RegressionProblem, p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let sigma2 = problem.require_sigma2()?;
    if p.nrows() != problem.order() || p.ncols() != problem.order() {
        return Err(Error::LengthMismatch {
            expected: problem.order(),
            found: p.nrows(),
        });
    }
    let qr = problem.phi.clone().qr();
    let r = qr.r();
    let c = qr.q().tr_mul(&problem.y);
    let p_r_t = p * r.transpose();
    let mut s = &r * &p_r_t;
    s = (&s + s.transpose()) * 0.5;
    for i in 0..s.nrows() {
        s[(i, i)] += sigma2;
    }
    let chol = s.cholesky().ok_or(Error::SingularSystem)?;
    Ok(p_r_t * chol.solve(&c))
}

/// Everything a fitted estimator reports.
#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub method: String,
    pub g_hat: Vec<f64>,
    /// Tuned hyperparameters as `(name, value)` pairs.
    pub hyper: Vec<(String, f64)>,
    pub sigma2: f64,
    /// Final value of the tuning objective.
    pub objective: f64,
    pub evaluations: usize,
    pub diagnostics: Vec<(String, String)>,
}

/// Full empirical-Bayes pipeline: noise variance (unless already set),
/// marginal-likelihood tuning, and the regularized estimate.
pub fn fit_kernel(problem: &RegressionProblem, kind: KernelKind) -> Result<EstimateReport> {
    let mut problem = problem.clone();
    if problem.sigma2.is_none() {
        problem.sigma2 = Some(estimate_noise_variance(&problem)?);
    }
    let sigma2 = problem.require_sigma2()?;
    let tuned = tune_hyperparameters(&problem, kind)?;
    let p = problem.prior_matrix(kind, &tuned.hyper)?;
    let g = rels_estimate(&problem, &p)?;
    Ok(EstimateReport {
        method: kind.label().to_string(),
        g_hat: g.iter().cloned().collect(),
        hyper: tuned
            .hyper
            .names()
            .iter()
            .zip(tuned.hyper.to_vec())
            .map(|(n, v)| (n.to_string(), v))
            .collect(),
        sigma2,
        objective: tuned.objective,
        evaluations: tuned.evaluations,
        diagnostics: vec![
            ("blocks".into(), problem.blocks.to_string()),
            (
                "grid_objective".into(),
                format!("{:.16e}", tuned.grid_objective),
            ),
            (
                "simplex_converged".into(),
                tuned.simplex_converged.to_string(),
            ),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn impulse_input_shifts_response() {
        let u = [1.0, 0.0, 0.0];
        let prob = build_fir_regression(&u, &[0.0; 3], 3).unwrap();
        let g = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!((&prob.phi * g).as_slice(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn zero_input_and_boundary() {
        let prob = build_fir_regression(&[0.0; 5], &[1.0; 5], 3).unwrap();
        assert_eq!(prob.phi.amax(), 0.0);
        let prob = build_fir_regression(&[2.0], &[1.0], 1).unwrap();
        assert_eq!(prob.phi[(0, 0)], 0.0);
    }

    #[test]
    fn regression_errors() {
        assert!(matches!(
            build_fir_regression(&[1.0, 2.0], &[1.0], 2),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            build_fir_regression(&[], &[], 2),
            Err(Error::EmptyData)
        ));
        assert!(matches!(
            build_fir_regression(&[1.0], &[1.0], 0),
            Err(Error::OrderZero)
        ));
    }

    #[test]
    fn noise_variance_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // zero residual
        let u = random_vec(&mut rng, 40);
        let g: Vec<f64> = (1..=5).map(|t| 0.8f64.powi(t)).collect();
        let prob = build_fir_regression(&u, &[0.0; 40], 5).unwrap();
        let y = &prob.phi * DVector::from_vec(g);
        let prob = RegressionProblem { y, ..prob };
        assert!(estimate_noise_variance(&prob).unwrap() < 1e-25);
        // Φ = 0: rank 0, denominator N
        let y = random_vec(&mut rng, 10);
        let prob = build_fir_regression(&[0.0; 10], &y, 3).unwrap();
        let expect = y.iter().map(|v| v * v).sum::<f64>() / 10.0;
        assert!((estimate_noise_variance(&prob).unwrap() - expect).abs() < 1e-14 * expect);
    }

    #[test]
    fn noiseless_fir_data_has_negligible_noise_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_vec(&mut rng, 300);
        let g: Vec<f64> = (1..=50)
            .map(|t| 0.9f64.powi(t) * (0.3 * t as f64).cos())
            .collect();
        let prob = build_fir_regression(&u, &[0.0; 300], 50).unwrap();
        let y = &prob.phi * DVector::from_vec(g);
        let scale = y.norm_squared() / 300.0;
        let prob = RegressionProblem { y, ..prob };
        assert!(estimate_noise_variance(&prob).unwrap() < 1e-16 * scale);
    }

    #[test]
    fn short_record_falls_back_to_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_vec(&mut rng, 6);
        let y = random_vec(&mut rng, 6);
        let prob = build_fir_regression(&u, &y, 10).unwrap();
        let v = estimate_noise_variance(&prob).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn scalar_rels_estimate() {
        let prob = RegressionProblem {
            phi: DMatrix::from_element(1, 1, 1.0),
            y: DVector::from_element(1, 2.0),
            sigma2: Some(0.5),
            blocks: 1,
        };
        let g = rels_estimate(&prob, &DMatrix::from_element(1, 1, 3.0)).unwrap();
        assert!((g[0] - 3.0 * 2.0 / 3.5).abs() < 1e-15);
    }

    #[test]
    fn rels_matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.random_range(5..40);
            let m = rng.random_range(1..12);
            let u = random_vec(&mut rng, n);
            let y = random_vec(&mut rng, n);
            let sigma2 = rng.random_range(0.05..2.0);
            let prob = build_fir_regression(&u, &y, m).unwrap().with_sigma2(sigma2);
            let b = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = &b * b.transpose() + DMatrix::identity(m, m) * 0.1;
            let g = rels_estimate(&prob, &p).unwrap();
            // argmin ‖Y − Φg‖² + σ² gᵀ P⁻¹ g  ⇔  (ΦᵀΦ + σ² P⁻¹) g = Φᵀ Y
            let p_inv = p.clone().try_inverse().unwrap();
            let lhs = prob.phi.tr_mul(&prob.phi) + p_inv * sigma2;
            let oracle = lhs.lu().solve(&prob.phi.tr_mul(&prob.y)).unwrap();
            let err = (&g - &oracle).amax();
            assert!(err <= 1e-8 * oracle.amax().max(1e-12), "{err}");
        }
    }

    #[test]
    fn rels_is_linear_in_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_vec(&mut rng, 60);
        let y1 = random_vec(&mut rng, 60);
        let y2 = random_vec(&mut rng, 60);
        let ysum: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
        let p = build_regularization_matrix(KernelKind::Tc, &Hyperparameters::single(1.0, 0.8), 20)
            .unwrap()
            .entries;
        let est = |y: &[f64]| {
            rels_estimate(
                &build_fir_regression(&u, y, 20).unwrap().with_sigma2(0.3),
                &p,
            )
            .unwrap()
        };
        let lhs = est(&ysum);
        let rhs = est(&y1) + est(&y2);
        assert!((&lhs - &rhs).amax() <= 1e-10 * lhs.amax());
    }

    #[test]
    fn large_prior_scale_approaches_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_vec(&mut rng, 80);
        let y = random_vec(&mut rng, 80);
        let prob = build_fir_regression(&u, &y, 6).unwrap().with_sigma2(0.1);
        let p = DMatrix::identity(6, 6) * 1e8;
        let g = rels_estimate(&prob, &p).unwrap();
        let (ls, _) = min_norm_lstsq(&prob.phi, &prob.y);
        assert!((&g - &ls).amax() < 1e-6 * ls.amax());
    }

    #[test]
    fn shrinkage_with_noise_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_vec(&mut rng, 50);
        let y = random_vec(&mut rng, 50);
        let p = build_regularization_matrix(KernelKind::Tc, &Hyperparameters::single(1.0, 0.7), 8)
            .unwrap()
            .entries;
        let p_inv = p.clone().try_inverse().unwrap();
        let mut last = f64::INFINITY;
        for sigma2 in [1e-3, 1e-2, 0.1, 0.5, 1.0, 5.0, 50.0] {
            let prob = build_fir_regression(&u, &y, 8).unwrap().with_sigma2(sigma2);
            let g = rels_estimate(&prob, &p).unwrap();
            let norm = (g.transpose() * &p_inv * &g)[0];
            assert!(norm <= last * (1.0 + 1e-10));
            last = norm;
        }
    }

    #[test]
    fn missing_sigma2_is_rejected() {
        let prob = build_fir_regression(&[1.0, 2.0], &[1.0, 1.0], 1).unwrap();
        assert!(rels_estimate(&prob, &DMatrix::identity(1, 1)).is_err());
    }

    #[test]
    fn block_diagonal_prior() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let prob = build_lagged_regression(&[&a, &a, &a], &a, 2).unwrap();
        let p = prob
            .prior_matrix(KernelKind::Tc, &Hyperparameters::single(1.0, 0.5))
            .unwrap();
        assert_eq!(p.shape(), (6, 6));
        assert_eq!(p[(0, 2)], 0.0);
        assert_eq!(p[(2, 3)], 0.25);
        assert_eq!(p[(5, 5)], 0.25);
    }
}
