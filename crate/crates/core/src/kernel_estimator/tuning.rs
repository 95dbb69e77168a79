use rayon::prelude::*;

use super::{Evidence, RegressionProblem};
use crate::error::Result;
use crate::kernels::{Hyperparameters, KernelKind};
use crate::simplex::{minimize, SimplexSettings};

/// Decay rates tried by the grid stage, for `α` and for each of `α_m ≤ α_M`.
pub const DECAY_GRID: [f64; 8] = [0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.99];

const LAMBDA_POINTS: usize = 16;
const LAMBDA_SPAN: (f64, f64) = (1e-4, 1e4);
const DECAY_CEILING: f64 = 0.9999;

#[derive(Clone, Debug)]
pub struct TuningOutcome {
    pub hyper: Hyperparameters,
    pub objective: f64,
    /// Best objective over the grid stage alone.
    pub grid_objective: f64,
    pub evaluations: usize,
    pub simplex_converged: bool,
}

/// 16 log-spaced scale factors spanning `[1e-4, 1e4] · YᵀY/N`.
pub fn lambda_grid(problem: &RegressionProblem) -> Vec<f64> {
    let mut scale = problem.y.norm_squared() / problem.n() as f64;
    if !(scale.is_finite() && scale > 0.0) {
        scale = 1.0;
    }
    let (lo, hi) = (LAMBDA_SPAN.0.log10(), LAMBDA_SPAN.1.log10());
    (0..LAMBDA_POINTS)
        .map(|i| {
            let e = lo + (hi - lo) * i as f64 / (LAMBDA_POINTS - 1) as f64;
            scale * 10f64.powf(e)
        })
        .collect()
}

fn grid(kind: KernelKind, lambdas: &[f64]) -> Vec<Hyperparameters> {
    let mut out = Vec::new();
    for &lambda in lambdas {
        if kind.is_integral() {
            for (i, &lo) in DECAY_GRID.iter().enumerate() {
                for &hi in &DECAY_GRID[i..] {
                    out.push(Hyperparameters::interval(lambda, lo, hi));
                }
            }
        } else {
            for &alpha in &DECAY_GRID {
                out.push(Hyperparameters::single(lambda, alpha));
            }
        }
    }
    out
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Factor by which the refinement may push `λ` above the grid.
const LAMBDA_HEADROOM: f64 = 1e8;

/// Maps between `η` and the unconstrained coordinates of the simplex stage:
/// `(log λ, logit α)` or `(log λ, logit α_m, logit s)` with
/// `α_M = α_m + s (1 − α_m)`.
struct Transform {
    integral: bool,
    lambda_range: (f64, f64),
}

impl Transform {
    fn forward(&self, h: &Hyperparameters) -> Vec<f64> {
        const EDGE: f64 = 1e-6;
        let clamp = |p: f64| p.clamp(EDGE, 1.0 - EDGE);
        match *h {
            Hyperparameters::Single { lambda, alpha } => vec![lambda.ln(), logit(clamp(alpha))],
            Hyperparameters::Interval {
                lambda,
                alpha_min,
                alpha_max,
            } => {
                let s = (alpha_max - alpha_min) / (1.0 - alpha_min);
                vec![lambda.ln(), logit(clamp(alpha_min)), logit(clamp(s))]
            }
        }
    }

    fn inverse(&self, x: &[f64]) -> Hyperparameters {
        let (lo, hi) = self.lambda_range;
        let lambda = if x[0] <= lo.ln() {
            lo
        } else if x[0] >= hi.ln() {
            hi
        } else {
            x[0].exp()
        };
        if self.integral {
            let lo = sigmoid(x[1]).min(DECAY_CEILING);
            let hi = (lo + sigmoid(x[2]) * (1.0 - lo)).clamp(lo, DECAY_CEILING);
            Hyperparameters::interval(lambda, lo, hi)
        } else {
            Hyperparameters::single(lambda, sigmoid(x[1]).min(DECAY_CEILING))
        }
    }
}

/// Empirical-Bayes tuning of `η` for one kernel kind.
///
/// Stage one evaluates the full grid (in parallel) and keeps the best point,
/// ties going to the lexicographically smallest `η`. Stage two polishes the
/// incumbent with Nelder–Mead in transformed coordinates, with `λ` boxed
/// between the smallest grid value and `LAMBDA_HEADROOM` times the largest;
/// its result is kept only if it improves on the grid.
pub fn tune_hyperparameters(
    problem: &RegressionProblem,
    kind: KernelKind,
) -> Result<TuningOutcome> {
    let sigma2 = problem.require_sigma2()?;
    let evidence = Evidence::new(problem);
    let objective = |h: &Hyperparameters| -> f64 {
        problem
            .prior_matrix(kind, h)
            .and_then(|p| evidence.objective(&p, sigma2))
            .unwrap_or(f64::INFINITY)
    };

    let lambdas = lambda_grid(problem);
    let points = grid(kind, &lambdas);
    let values: Vec<f64> = points.par_iter().map(&objective).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    let grid_hyper = points[best];
    let grid_objective = values[best];

    let transform = Transform {
        integral: kind.is_integral(),
        lambda_range: (lambdas[0], lambdas[LAMBDA_POINTS - 1] * LAMBDA_HEADROOM),
    };
    let x0 = transform.forward(&grid_hyper);
    let polished = minimize(
        |x| objective(&transform.inverse(x)),
        &x0,
        None,
        &SimplexSettings::default(),
    );
    let evaluations = points.len() + polished.evaluations;
    let (hyper, value) = if polished.value < grid_objective {
        (transform.inverse(&polished.x), polished.value)
    } else {
        (grid_hyper, grid_objective)
    };
    Ok(TuningOutcome {
        hyper,
        objective: value,
        grid_objective,
        evaluations,
        simplex_converged: polished.converged,
    })
}
