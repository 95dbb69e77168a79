//! Stable-kernel regularization matrices and the spectral expansion of the
//! first-order stable spline (TC) kernel.
//!
//! All five kernels are indexed from 1: entry `(k, j)` of an order-`m`
//! matrix corresponds to lags `k, j ∈ {1..m}`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// The five stable kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelKind {
    /// Tuned-correlated / first-order stable spline: `λ α^max(k,j)`.
    Tc,
    /// Second-order stable spline.
    Ss,
    /// TC integrated over a decay-rate interval.
    Itc,
    /// SS integrated over a decay-rate interval.
    Iss,
    /// Sum of iTC and iSS.
    Its,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Its,
        KernelKind::Itc,
        KernelKind::Iss,
        KernelKind::Tc,
        KernelKind::Ss,
    ];

    /// Kernels parametrized by a decay-rate interval `[α_m, α_M]`.
    pub fn is_integral(self) -> bool {
        matches!(self, KernelKind::Itc | KernelKind::Iss | KernelKind::Its)
    }

    pub fn label(self) -> &'static str {
        match self {
            KernelKind::Tc => "TC",
            KernelKind::Ss => "SS",
            KernelKind::Itc => "iTC",
            KernelKind::Iss => "iSS",
            KernelKind::Its => "iTS",
        }
    }

    /// Unscaled (`λ = 1`) entry for lags `k, j ≥ 1`.
    ///
    /// The hyperparameters must already be validated for this kind.
    pub fn entry(self, hyper: &Hyperparameters, k: usize, j: usize) -> f64 {
        let mx = k.max(j);
        match (self, *hyper) {
            (KernelKind::Tc, Hyperparameters::Single { alpha, .. }) => tc_entry(alpha, mx),
            (KernelKind::Ss, Hyperparameters::Single { alpha, .. }) => ss_entry(alpha, k, j),
            (
                KernelKind::Itc,
                Hyperparameters::Interval {
                    alpha_min,
                    alpha_max,
                    ..
                },
            ) => itc_entry(alpha_min, alpha_max, mx),
            (
                KernelKind::Iss,
                Hyperparameters::Interval {
                    alpha_min,
                    alpha_max,
                    ..
                },
            ) => iss_entry(alpha_min, alpha_max, k, j),
            (
                KernelKind::Its,
                Hyperparameters::Interval {
                    alpha_min,
                    alpha_max,
                    ..
                },
            ) => itc_entry(alpha_min, alpha_max, mx) + iss_entry(alpha_min, alpha_max, k, j),
            _ => f64::NAN,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tc" => Ok(KernelKind::Tc),
            "ss" => Ok(KernelKind::Ss),
            "itc" => Ok(KernelKind::Itc),
            "iss" => Ok(KernelKind::Iss),
            "its" => Ok(KernelKind::Its),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel kind `{other}`"
            ))),
        }
    }
}

/// Hyperparameter vector η of a stable kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Hyperparameters {
    /// `η = [λ, α]` for TC and SS.
    Single { lambda: f64, alpha: f64 },
    /// `η = [λ, α_m, α_M]` for iTC, iSS and iTS.
    Interval {
        lambda: f64,
        alpha_min: f64,
        alpha_max: f64,
    },
}

impl Hyperparameters {
    pub fn single(lambda: f64, alpha: f64) -> Self {
        Hyperparameters::Single { lambda, alpha }
    }

    pub fn interval(lambda: f64, alpha_min: f64, alpha_max: f64) -> Self {
        Hyperparameters::Interval {
            lambda,
            alpha_min,
            alpha_max,
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Hyperparameters::Single { lambda, .. } | Hyperparameters::Interval { lambda, .. } => {
                lambda
            }
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        match *self {
            Hyperparameters::Single { alpha, .. } => Hyperparameters::Single { lambda, alpha },
            Hyperparameters::Interval {
                alpha_min,
                alpha_max,
                ..
            } => Hyperparameters::Interval {
                lambda,
                alpha_min,
                alpha_max,
            },
        }
    }

    /// `[λ, α]` or `[λ, α_m, α_M]`.
    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            Hyperparameters::Single { lambda, alpha } => vec![lambda, alpha],
            Hyperparameters::Interval {
                lambda,
                alpha_min,
                alpha_max,
            } => vec![lambda, alpha_min, alpha_max],
        }
    }

    /// Names matching [`Hyperparameters::to_vec`].
    pub fn names(&self) -> &'static [&'static str] {
        match self {
            Hyperparameters::Single { .. } => &["lambda", "alpha"],
            Hyperparameters::Interval { .. } => &["lambda", "alpha_min", "alpha_max"],
        }
    }

    /// Checks the constraint row of `kind`.
    pub fn validate(&self, kind: KernelKind) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidHyper(format!(
                "lambda = {lambda} must be finite and >= 0"
            )));
        }
        let decay_ok = |a: f64| a.is_finite() && (0.0..1.0).contains(&a);
        match (kind.is_integral(), *self) {
            (false, Hyperparameters::Single { alpha, .. }) => {
                if !decay_ok(alpha) {
                    return Err(Error::InvalidHyper(format!(
                        "alpha = {alpha} must lie in [0, 1)"
                    )));
                }
            }
            (
                true,
                Hyperparameters::Interval {
                    alpha_min,
                    alpha_max,
                    ..
                },
            ) => {
                if !decay_ok(alpha_min) || !decay_ok(alpha_max) {
                    return Err(Error::InvalidHyper(format!(
                        "alpha_min = {alpha_min}, alpha_max = {alpha_max} must lie in [0, 1)"
                    )));
                }
                if alpha_min > alpha_max {
                    return Err(Error::InvalidHyper(format!(
                        "alpha_min = {alpha_min} exceeds alpha_max = {alpha_max}"
                    )));
                }
            }
            (false, _) => {
                return Err(Error::InvalidHyper(format!(
                    "{kind} expects [lambda, alpha]"
                )))
            }
            (true, _) => {
                return Err(Error::InvalidHyper(format!(
                    "{kind} expects [lambda, alpha_min, alpha_max]"
                )))
            }
        }
        Ok(())
    }
}

fn tc_entry(alpha: f64, mx: usize) -> f64 {
    alpha.powi(mx as i32)
}

fn ss_entry(alpha: f64, k: usize, j: usize) -> f64 {
    let mx = k.max(j) as i32;
    alpha.powi(k as i32 + j as i32 + mx) / 2.0 - alpha.powi(3 * mx) / 6.0
}

fn itc_entry(alpha_min: f64, alpha_max: f64, mx: usize) -> f64 {
    let e = mx as i32 + 1;
    (alpha_max.powi(e) - alpha_min.powi(e)) / e as f64
}

fn iss_entry(alpha_min: f64, alpha_max: f64, k: usize, j: usize) -> f64 {
    let mx = k.max(j) as i32;
    let e1 = k as i32 + j as i32 + mx + 1;
    let e2 = 3 * mx + 1;
    let d1 = 2.0 * e1 as f64;
    let d2 = 18.0 * mx as f64 + 6.0;
    (alpha_max.powi(e1) - alpha_min.powi(e1)) / d1 - (alpha_max.powi(e2) - alpha_min.powi(e2)) / d2
}

/// An `m × m` regularization matrix `P(η)`.
#[derive(Clone, Debug)]
pub struct RegularizationMatrix {
    pub entries: DMatrix<f64>,
    pub kind: KernelKind,
    pub hyper: Hyperparameters,
    pub order: usize,
}

/// Builds `P(η)` for the given kernel kind and FIR order.
///
/// A degenerate interval `α_m = α_M` yields the zero matrix.
pub fn build_regularization_matrix(
    kind: KernelKind,
    hyper: &Hyperparameters,
    m: usize,
) -> Result<RegularizationMatrix> {
    if m == 0 {
        return Err(Error::OrderZero);
    }
    hyper.validate(kind)?;
    let lambda = hyper.lambda();
    let mut entries = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in j..m {
            let v = lambda * kind.entry(hyper, k + 1, j + 1);
            entries[(k, j)] = v;
            entries[(j, k)] = v;
        }
    }
    Ok(RegularizationMatrix {
        entries,
        kind,
        hyper: *hyper,
        order: m,
    })
}

/// One eigenfunction of the TC kernel expansion, sampled on lags `1..m`.
#[derive(Clone, Debug)]
pub struct SpectralAtom {
    pub index: usize,
    /// `ζ_j = 1 / (jπ − π/2)²`.
    pub weight: f64,
    pub alpha: f64,
    /// `ρ_j(t) = √2 sin(α^t / √ζ_j)` for `t = 1..m`.
    pub samples: Vec<f64>,
}

pub fn spectral_weight(j: usize) -> f64 {
    let w = j as f64 * PI - FRAC_PI_2;
    1.0 / (w * w)
}

pub fn stable_spline_atom(j: usize, alpha: f64, m: usize) -> Result<SpectralAtom> {
    if j == 0 {
        return Err(Error::InvalidArgument("atom index starts at 1".into()));
    }
    if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
        return Err(Error::InvalidHyper(format!(
            "alpha = {alpha} must lie in [0, 1)"
        )));
    }
    let weight = spectral_weight(j);
    let freq = 1.0 / weight.sqrt();
    let samples = (1..=m)
        .map(|t| SQRT_2 * (alpha.powi(t as i32) * freq).sin())
        .collect();
    Ok(SpectralAtom {
        index: j,
        weight,
        alpha,
        samples,
    })
}

/// `Σ_{j=1}^{J} ζ_j ρ_j(s) ρ_j(t)`, which tends to `α^max(s,t)` as `J → ∞`.
pub fn truncated_expansion_kernel(alpha: f64, m: usize, terms: usize) -> Result<DMatrix<f64>> {
    if terms == 0 {
        return Err(Error::InvalidArgument(
            "truncation count must be at least 1".into(),
        ));
    }
    let mut out = DMatrix::zeros(m, m);
    for j in 1..=terms {
        let atom = stable_spline_atom(j, alpha, m)?;
        for c in 0..m {
            let scaled = atom.weight * atom.samples[c];
            for r in 0..m {
                out[(r, c)] += scaled * atom.samples[r];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let n = if panels % 2 == 0 { panels } else { panels + 1 };
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn random_hyper(kind: KernelKind, rng: &mut ChaCha8Rng) -> Hyperparameters {
        let lambda = rng.random_range(0.01..10.0);
        if kind.is_integral() {
            let a: f64 = rng.random_range(0.0..0.999);
            let b: f64 = rng.random_range(0.0..0.999);
            Hyperparameters::interval(lambda, a.min(b), a.max(b))
        } else {
            Hyperparameters::single(lambda, rng.random_range(0.0..0.999))
        }
    }

    #[test]
    fn tc_hand_values() {
        let p = build_regularization_matrix(KernelKind::Tc, &Hyperparameters::single(1.0, 0.5), 3)
            .unwrap();
        assert_eq!(p.entries[(0, 1)], 0.25);
        let zero =
            build_regularization_matrix(KernelKind::Tc, &Hyperparameters::single(0.0, 0.7), 4)
                .unwrap();
        assert!(zero.entries.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn itc_unit_interval_corner() {
        // α_M = 1 is outside the constraint set, so evaluate the closed form directly.
        assert_eq!(itc_entry(0.0, 1.0, 1), 0.5);
    }

    #[test]
    fn its_is_sum_of_itc_and_iss() {
        let h = Hyperparameters::interval(2.5, 0.3, 0.95);
        let its = build_regularization_matrix(KernelKind::Its, &h, 12).unwrap();
        let itc = build_regularization_matrix(KernelKind::Itc, &h, 12).unwrap();
        let iss = build_regularization_matrix(KernelKind::Iss, &h, 12).unwrap();
        let diff = (&its.entries - (&itc.entries + &iss.entries)).amax();
        assert!(diff <= 1e-15);
    }

    #[test]
    fn degenerate_interval_gives_zero_matrix() {
        for kind in [KernelKind::Itc, KernelKind::Iss, KernelKind::Its] {
            let p = build_regularization_matrix(kind, &Hyperparameters::interval(3.0, 0.8, 0.8), 6)
                .unwrap();
            assert_eq!(p.entries.amax(), 0.0, "{kind}");
        }
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let bad = [
            (KernelKind::Tc, Hyperparameters::single(-1.0, 0.5)),
            (KernelKind::Tc, Hyperparameters::single(1.0, 1.0)),
            (KernelKind::Ss, Hyperparameters::single(1.0, -0.1)),
            (KernelKind::Itc, Hyperparameters::interval(1.0, 0.9, 0.5)),
            (KernelKind::Iss, Hyperparameters::interval(1.0, 0.2, 1.0)),
            (KernelKind::Its, Hyperparameters::single(1.0, 0.5)),
            (KernelKind::Tc, Hyperparameters::interval(1.0, 0.2, 0.5)),
        ];
        for (kind, h) in bad {
            assert!(matches!(
                build_regularization_matrix(kind, &h, 3),
                Err(Error::InvalidHyper(_))
            ));
        }
        assert!(matches!(
            build_regularization_matrix(KernelKind::Tc, &Hyperparameters::single(1.0, 0.5), 0),
            Err(Error::OrderZero)
        ));
    }

    #[test]
    fn symmetric_psd_for_random_hyperparameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in KernelKind::ALL {
            for _ in 0..100 {
                let h = random_hyper(kind, &mut rng);
                let p = build_regularization_matrix(kind, &h, 30).unwrap().entries;
                assert_eq!(p, p.transpose());
                let jitter = 1e-12 * p.trace().max(f64::MIN_POSITIVE);
                let shifted = &p + DMatrix::identity(30, 30) * jitter;
                assert!(shifted.cholesky().is_some(), "{kind} {h:?}");
            }
        }
    }

    #[test]
    fn tc_diagonal_strictly_decreasing() {
        let p = build_regularization_matrix(KernelKind::Tc, &Hyperparameters::single(2.0, 0.9), 50)
            .unwrap();
        for k in 1..50 {
            assert!(p.entries[(k, k)] < p.entries[(k - 1, k - 1)]);
        }
    }

    #[test]
    fn integral_kernels_match_simpson_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let k = rng.random_range(1..=25usize);
            let j = rng.random_range(1..=25usize);
            let a: f64 = rng.random_range(0.0..0.999);
            let b: f64 = rng.random_range(0.0..0.999);
            let (lo, hi) = (a.min(b), a.max(b));
            let mx = k.max(j) as i32;
            let itc_quad = simpson(|x| x.powi(mx), lo, hi, 10_000);
            let iss_quad = simpson(
                |x| x.powi(k as i32 + j as i32 + mx) / 2.0 - x.powi(3 * mx) / 6.0,
                lo,
                hi,
                10_000,
            );
            let itc = itc_entry(lo, hi, k.max(j));
            let iss = iss_entry(lo, hi, k, j);
            assert!(
                (itc - itc_quad).abs() <= 1e-9 * itc_quad.abs().max(1e-300),
                "{k} {j}"
            );
            assert!(
                (iss - iss_quad).abs() <= 1e-9 * iss_quad.abs().max(1e-300),
                "{k} {j}"
            );
        }
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in KernelKind::ALL {
            let h = random_hyper(kind, &mut rng);
            let base = build_regularization_matrix(kind, &h, 15).unwrap().entries;
            // powers of two keep the products exact
            let scaled =
                build_regularization_matrix(kind, &h.with_lambda(h.lambda() * 4.0), 15).unwrap();
            assert_eq!(scaled.entries, &base * 4.0);
            let c = 3.7;
            let scaled =
                build_regularization_matrix(kind, &h.with_lambda(h.lambda() * c), 15).unwrap();
            let err = (&scaled.entries - &base * c).amax();
            assert!(err <= 1e-15 * base.amax() * c);
        }
    }

    #[test]
    fn spectral_weights() {
        let a1 = stable_spline_atom(1, 0.5, 4).unwrap();
        assert!((a1.weight - 4.0 / (PI * PI)).abs() < 1e-15);
        assert!((a1.weight - 0.405285).abs() < 1e-6);
        let a2 = stable_spline_atom(2, 0.5, 4).unwrap();
        assert!((a2.weight - 0.045032).abs() < 1e-6);
        let zero = stable_spline_atom(3, 0.0, 5).unwrap();
        assert!(zero.samples.iter().all(|&s| s == 0.0));
        for j in 1..50 {
            assert!(spectral_weight(j + 1) < spectral_weight(j));
            let atom = stable_spline_atom(j, 0.93, 40).unwrap();
            assert!(atom.samples.iter().all(|s| s.abs() <= SQRT_2));
        }
    }

    #[test]
    fn single_term_expansion() {
        let alpha: f64 = 0.7;
        let k = truncated_expansion_kernel(alpha, 3, 1).unwrap();
        let z = spectral_weight(1);
        let expect = 2.0 * z * (alpha.powi(1) / z.sqrt()).sin() * (alpha.powi(3) / z.sqrt()).sin();
        assert!((k[(0, 2)] - expect).abs() < 1e-15);
        assert!(truncated_expansion_kernel(alpha, 3, 0).is_err());
    }

    #[test]
    fn expansion_error_nonincreasing_on_doubling_grid() {
        let alpha = 0.5;
        let m = 20;
        let tc =
            build_regularization_matrix(KernelKind::Tc, &Hyperparameters::single(1.0, alpha), m)
                .unwrap()
                .entries;
        let mut last = f64::INFINITY;
        let mut terms = 1;
        while terms <= 1024 {
            let err = (truncated_expansion_kernel(alpha, m, terms).unwrap() - &tc).amax();
            assert!(err <= last, "J = {terms}: {err} > {last}");
            last = err;
            terms *= 2;
        }
        assert!((truncated_expansion_kernel(alpha, 1, 4096).unwrap()[(0, 0)] - 0.5).abs() < 1e-4);
    }
}
