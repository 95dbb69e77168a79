use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct KernelFormEstimate {
    /// Estimate at lags `1..=horizon`.
    pub g: Vec<f64>,
    /// Representer coefficients `ĉ = (A + γ I)⁻¹ Y`.
    pub coefficients: Vec<f64>,
    /// Truncation actually used for the kernel sums.
    pub truncation: usize,
}

/// Posterior mean of `g` under the TC prior `E[g_s g_t] = λ α^max(s,t)`
/// computed in representer form, without an FIR regression matrix:
///
/// ```text
/// w_t(i) = Σ_k K(t, k) u(i − k)          (K(·,t) ⊗ u)_i
/// A_ij   = Σ_t u(j − t) w_t(i)
/// ĉ      = (A + γ I)⁻¹ Y,  γ = σ² / λ
/// ĝ_t    = Σ_i ĉ_i w_t(i)
/// ```
///
/// Both kernel sums run over `1..=T`. If `α^T ≥ 1e-12` the truncation is
/// doubled once. Inputs before the record start are zero.
pub fn kernel_form_estimate(
    u: &[f64],
    y: &[f64],
    lambda: f64,
    alpha: f64,
    sigma2: f64,
    horizon: usize,
    truncation: usize,
) -> Result<KernelFormEstimate> {
    let n = y.len();
    if u.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: u.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if horizon == 0 {
        return Err(Error::OrderZero);
    }
    if truncation < horizon {
        return Err(Error::InvalidArgument(format!(
            "truncation {truncation} is shorter than the horizon {horizon}"
        )));
    }
    if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
        return Err(Error::InvalidHyper(format!(
            "alpha = {alpha} must lie in [0, 1)"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) || !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::InvalidHyper(
            "lambda and sigma2 must be finite and >= 0".into(),
        ));
    }
    let mut t_max = truncation;
    if alpha.powi(t_max as i32) >= 1e-12 {
        t_max *= 2;
    }
    if lambda == 0.0 {
        return Ok(KernelFormEstimate {
            g: vec![0.0; horizon],
            coefficients: y.iter().map(|_| 0.0).collect(),
            truncation: t_max,
        });
    }
    let gamma = sigma2 / lambda;
    let input = |idx: isize| -> f64 {
        if idx >= 0 {
            u[idx as usize]
        } else {
            0.0
        }
    };

    // w[(i, t-1)] = Σ_k α^max(t,k) u(i − k); 1-based i and k map to i-1, k-1
    let mut w = DMatrix::zeros(n, t_max);
    for t in 1..=t_max {
        for i in 1..=n {
            let mut acc = 0.0;
            for k in 1..=t_max.min(i - 1) {
                acc += alpha.powi(t.max(k) as i32) * input(i as isize - 1 - k as isize);
            }
            w[(i - 1, t - 1)] = acc;
        }
    }

    let mut a = DMatrix::zeros(n, n);
    for j in 1..=n {
        for i in 1..=n {
            let mut acc = 0.0;
            for t in 1..=t_max.min(j - 1) {
                acc += input(j as isize - 1 - t as isize) * w[(i - 1, t - 1)];
            }
            a[(i - 1, j - 1)] = acc;
        }
    }
    let mut system = (&a + a.transpose()) * 0.5;
    for i in 0..n {
        system[(i, i)] += gamma;
    }
    let yv = DVector::from_column_slice(y);
    let c = match system.clone().cholesky() {
        Some(ch) => ch.solve(&yv),
        None => system.lu().solve(&yv).ok_or(Error::SingularSystem)?,
    };
    let g = (1..=horizon).map(|t| w.column(t - 1).dot(&c)).collect();
    Ok(KernelFormEstimate {
        g,
        coefficients: c.iter().cloned().collect(),
        truncation: t_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_estimator::{build_fir_regression, rels_estimate};
    use crate::kernels::{build_regularization_matrix, Hyperparameters, KernelKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn agrees_with_fir_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let n = rng.random_range(20..80);
            let m_out = rng.random_range(3..20);
            let alpha = rng.random_range(0.2..0.7);
            let lambda = rng.random_range(0.5..3.0);
            let sigma2 = rng.random_range(0.05..1.0);
            let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let kf = kernel_form_estimate(&u, &y, lambda, alpha, sigma2, m_out, 2 * m_out).unwrap();
            let order = kf.truncation;
            let p = build_regularization_matrix(
                KernelKind::Tc,
                &Hyperparameters::single(lambda, alpha),
                order,
            )
            .unwrap();
            let fir = rels_estimate(
                &build_fir_regression(&u, &y, order)
                    .unwrap()
                    .with_sigma2(sigma2),
                &p.entries,
            )
            .unwrap();
            let scale = fir.iter().take(m_out).fold(0.0f64, |a, v| a.max(v.abs()));
            for t in 0..m_out {
                assert!((kf.g[t] - fir[t]).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn zero_input_gives_zero_estimate() {
        let y = [1.0, -2.0, 0.5];
        let kf = kernel_form_estimate(&[0.0; 3], &y, 2.0, 0.5, 0.4, 2, 4).unwrap();
        assert!(kf.g.iter().all(|&v| v == 0.0));
        let gamma = 0.4 / 2.0;
        for (c, yv) in kf.coefficients.iter().zip(y) {
            assert!((c - yv / gamma).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_scale_shrinks_to_zero() {
        let u = [1.0, 0.5, -0.3, 0.8, 0.1];
        let y = [0.2, 1.0, 0.4, -0.2, 0.3];
        let kf = kernel_form_estimate(&u, &y, 1e-12, 0.5, 1.0, 3, 6).unwrap();
        assert!(kf.g.iter().all(|v| v.abs() < 1e-10));
        let zero = kernel_form_estimate(&u, &y, 0.0, 0.5, 1.0, 3, 6).unwrap();
        assert!(zero.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncation_doubles_for_slow_decay() {
        let u = [1.0, 0.0, 0.0, 0.0];
        let kf = kernel_form_estimate(&u, &u, 1.0, 0.9, 0.1, 2, 4).unwrap();
        assert_eq!(kf.truncation, 8);
        assert!(kernel_form_estimate(&u, &u, 1.0, 0.9, 0.1, 5, 4).is_err());
    }
}
