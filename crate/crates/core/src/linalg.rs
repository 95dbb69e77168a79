use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution and numerical rank of `a`.
///
/// Singular values below `max(rows, cols) · ε · σ_max` count as zero.
pub(crate) fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rows.max(cols) as f64 * f64::EPSILON * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank == 0 {
        return (DVector::zeros(cols), 0);
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut x = DVector::zeros(cols);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let coef = u.column(i).dot(b) / s;
            x.axpy(coef, &v_t.row(i).transpose(), 1.0);
        }
    }
    (x, rank)
}

/// `Σ log L_ii` of a Cholesky factor, i.e. half the log-determinant.
pub(crate) fn half_log_det(l: &DMatrix<f64>) -> f64 {
    l.diagonal().iter().map(|d| d.ln()).sum()
}
