//! Sampling the priors that regularizers induce through
//! `p(g) ∝ exp(−J(g) / 2λ)`.
//!
//! For the Hankel nuclear norm the exact prior is sampled by random-walk
//! Metropolis, with increments drawn from its Gaussian approximation
//! `g_k ~ N(0, λ / min(k, m − k + 1))`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hankel::{nuclear_norm_symmetric, HankelMap};
use crate::kernels::{build_regularization_matrix, Hyperparameters, KernelKind};

/// Fraction of the chain discarded as burn-in.
pub const BURN_IN_FRACTION: f64 = 0.1;
/// Thinning interval of the optional state dump.
pub const DUMP_EVERY: usize = 100;
/// Minimum Metropolis chain length.
pub const MIN_CHAIN: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub enum PriorKind {
    HankelExact,
    HankelApprox,
    Kernel(KernelKind, Hyperparameters),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub m: usize,
    /// Hankel block size, `m = 2p − 1`.
    pub p: usize,
    /// `2λ` in the exponent of the Hankel prior.
    pub two_lambda: f64,
}

impl PriorSpec {
    pub fn hankel(kind: PriorKind, p: usize, two_lambda: f64) -> Self {
        PriorSpec {
            kind,
            m: 2 * p - 1,
            p,
            two_lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::OrderZero);
        }
        match &self.kind {
            PriorKind::HankelExact | PriorKind::HankelApprox => {
                if self.m != 2 * self.p - 1 || self.p == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "Hankel priors need m = 2p − 1, got m = {}, p = {}",
                        self.m, self.p
                    )));
                }
                if !(self.two_lambda.is_finite() && self.two_lambda > 0.0) {
                    return Err(Error::InvalidHyper(format!(
                        "2λ = {} must be positive",
                        self.two_lambda
                    )));
                }
                Ok(())
            }
            PriorKind::Kernel(kind, hyper) => hyper.validate(*kind),
        }
    }
}

/// Variances of the Gaussian approximation: `λ / k` for `k ≤ (m + 1)/2`,
/// `λ / (m − k + 1)` beyond.
pub fn approx_variances(m: usize, lambda: f64) -> Vec<f64> {
    (1..=m)
        .map(|k| {
            let d = if 2 * k <= m + 1 { k } else { m - k + 1 };
            lambda / d as f64
        })
        .collect()
}

/// Streams independent draws from the Gaussian approximation.
pub struct GaussianApproxSampler {
    std: Vec<f64>,
    rng: ChaCha8Rng,
}

impl GaussianApproxSampler {
    pub fn new(m: usize, lambda: f64, seed: u64) -> Self {
        GaussianApproxSampler {
            std: approx_variances(m, lambda)
                .iter()
                .map(|v| v.sqrt())
                .collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn draw(&mut self, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.std) {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *o = s * z;
        }
    }
}

/// `count × m` matrix of i.i.d. draws from the Gaussian approximation.
pub fn sample_gaussian_approx(
    m: usize,
    lambda: f64,
    count: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if m == 0 || m % 2 == 0 {
        return Err(Error::InvalidArgument(format!("m = {m} must be odd")));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    let mut sampler = GaussianApproxSampler::new(m, lambda, seed);
    let mut out = DMatrix::zeros(count, m);
    let mut row = vec![0.0; m];
    for r in 0..count {
        sampler.draw(&mut row);
        for (c, v) in row.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    Ok(out)
}

/// Unnormalized log density `−‖H(g)‖_* / 2λ` of the exact Hankel prior.
pub fn hankel_log_prior(g: &[f64], p: usize, two_lambda: f64) -> Result<f64> {
    let map = HankelMap::with_block(p)?;
    if g.len() != map.m {
        return Err(Error::LengthMismatch {
            expected: map.m,
            found: g.len(),
        });
    }
    Ok(-nuclear_norm_symmetric(&map.forward(g)) / two_lambda)
}

/// Streaming mean, variance and one row of the covariance.
#[derive(Clone, Debug)]
pub struct MomentAccumulator {
    count: usize,
    row: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    co: Vec<f64>,
}

impl MomentAccumulator {
    /// `row` is 0-based.
    pub fn new(dim: usize, row: usize) -> Self {
        MomentAccumulator {
            count: 0,
            row,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            co: vec![0.0; dim],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        let d_row = x[self.row] - self.mean[self.row];
        for k in 0..x.len() {
            let d = x[k] - self.mean[k];
            self.mean[k] += d / n;
            self.m2[k] += d * (x[k] - self.mean[k]);
            // co-moment with the row coordinate uses its pre-update deviation
            self.co[k] += d_row * (x[k] - self.mean[k]);
        }
    }

    pub fn variances(&self) -> Vec<f64> {
        let denom = (self.count.max(2) - 1) as f64;
        self.m2.iter().map(|v| v / denom).collect()
    }

    pub fn summary(
        &self,
        acceptance_rate: f64,
        chain_length: usize,
        burn_in: usize,
    ) -> Result<ChainSummary> {
        if self.count < 2 {
            return Err(Error::InvalidArgument(
                "at least 2 samples are needed".into(),
            ));
        }
        if let Some(k) = self.m2.iter().position(|v| *v <= 0.0) {
            return Err(Error::DegenerateVariance(k + 1));
        }
        let coefficient_std = self.variances().iter().map(|v| v.sqrt()).collect();
        let sr = self.m2[self.row].sqrt();
        let correlation_row = self
            .co
            .iter()
            .zip(&self.m2)
            .enumerate()
            .map(|(k, (c, m2))| {
                if k == self.row {
                    1.0
                } else {
                    (c / (sr * m2.sqrt())).clamp(-1.0, 1.0)
                }
            })
            .collect();
        Ok(ChainSummary {
            coefficient_std,
            correlation_row,
            row: self.row + 1,
            acceptance_rate,
            chain_length,
            burn_in,
            samples: self.count,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainSummary {
    pub coefficient_std: Vec<f64>,
    pub correlation_row: Vec<f64>,
    /// 1-based index of the reported correlation row.
    pub row: usize,
    pub acceptance_rate: f64,
    pub chain_length: usize,
    pub burn_in: usize,
    /// Samples the summary is computed from.
    pub samples: usize,
}

/// Per-coordinate standard deviations and correlation row `row` (1-based)
/// of a `count × m` sample matrix.
pub fn summarize_chain(samples: &DMatrix<f64>, row: usize) -> Result<ChainSummary> {
    if row == 0 || row > samples.ncols() {
        return Err(Error::InvalidArgument(format!(
            "row {row} outside 1..={}",
            samples.ncols()
        )));
    }
    let mut acc = MomentAccumulator::new(samples.ncols(), row - 1);
    let mut buf = vec![0.0; samples.ncols()];
    for r in 0..samples.nrows() {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = samples[(r, c)];
        }
        acc.push(&buf);
    }
    acc.summary(1.0, samples.nrows(), 0)
}

#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub summary: ChainSummary,
    /// Every `DUMP_EVERY`-th post-burn-in state, when requested.
    pub dump: Option<Vec<Vec<f64>>>,
}

/// Random-walk Metropolis from `start` with increments drawn from the
/// Gaussian approximation at `λ = proposal_lambda`.
///
/// `log_target` is an unnormalized log density; acceptance compares log
/// densities. The first `BURN_IN_FRACTION` of the states are discarded and
/// the summary uses every remaining state.
pub fn run_metropolis_with<F>(
    log_target: F,
    start: &[f64],
    proposal_lambda: f64,
    length: usize,
    seed: u64,
    row: usize,
    keep_dump: bool,
) -> Result<ChainOutput>
where
    F: Fn(&[f64]) -> f64,
{
    let m = start.len();
    if length < 2 {
        return Err(Error::InvalidArgument("chain length must be >= 2".into()));
    }
    if row == 0 || row > m {
        return Err(Error::InvalidArgument(format!("row {row} outside 1..={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proposal_rng = ChaCha8Rng::seed_from_u64(seed);
    proposal_rng.set_stream(1);
    let mut steps = GaussianApproxSampler {
        std: approx_variances(m, proposal_lambda)
            .iter()
            .map(|v| v.sqrt())
            .collect(),
        rng: proposal_rng,
    };
    let burn_in = (length as f64 * BURN_IN_FRACTION).floor() as usize;
    let mut acc = MomentAccumulator::new(m, row - 1);
    let mut dump = keep_dump.then(Vec::new);

    let mut state = start.to_vec();
    let mut log_p = log_target(&state);
    let mut candidate = vec![0.0; m];
    let mut step = vec![0.0; m];
    let mut accepted = 0usize;
    for i in 0..length {
        if i > 0 {
            steps.draw(&mut step);
            for ((c, s), d) in candidate.iter_mut().zip(&state).zip(&step) {
                *c = s + d;
            }
            let log_q = log_target(&candidate);
            let u: f64 = rand::Rng::random(&mut rng);
            if log_q - log_p >= 0.0 || u.ln() < log_q - log_p {
                std::mem::swap(&mut state, &mut candidate);
                log_p = log_q;
                accepted += 1;
            }
        }
        if i >= burn_in {
            acc.push(&state);
            if let Some(d) = dump.as_mut() {
                if (i - burn_in) % DUMP_EVERY == 0 {
                    d.push(state.clone());
                }
            }
        }
    }
    let rate = accepted as f64 / (length - 1) as f64;
    if rate < 0.01 {
        log::warn!("Metropolis acceptance rate {rate:.4} is below 1%");
    }
    Ok(ChainOutput {
        summary: acc.summary(rate, length, burn_in)?,
        dump,
    })
}

/// Starting state inside the typical set of the exact Hankel prior.
///
/// The density is homogeneous of degree one, so `‖H(g)‖_* / 2λ ~ Gamma(m, 1)`
/// under the prior. A draw from the Gaussian approximation is rescaled to a
/// nuclear norm drawn from that law. Uses stream 2 of `seed`.
fn typical_start(map: &HankelMap, two_lambda: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let radius: f64 = Gamma::new(map.m as f64, two_lambda)
        .expect("positive shape and scale")
        .sample(&mut rng);
    let mut g = vec![0.0; map.m];
    let mut draws = GaussianApproxSampler {
        std: approx_variances(map.m, two_lambda / 2.0)
            .iter()
            .map(|v| v.sqrt())
            .collect(),
        rng,
    };
    draws.draw(&mut g);
    let norm = nuclear_norm_symmetric(&map.forward(&g));
    if norm > 0.0 {
        g.iter_mut().for_each(|v| *v *= radius / norm);
    }
    g
}

/// Metropolis chain on the exact Hankel prior of `spec`, with proposal
/// increments from the Gaussian approximation at `λ = 2λ / 2`.
pub fn run_metropolis(
    spec: &PriorSpec,
    length: usize,
    seed: u64,
    row: usize,
    keep_dump: bool,
) -> Result<ChainOutput> {
    spec.validate()?;
    if spec.kind != PriorKind::HankelExact {
        return Err(Error::InvalidArgument(
            "Metropolis sampling targets the exact Hankel prior".into(),
        ));
    }
    if length < MIN_CHAIN {
        return Err(Error::InvalidArgument(format!(
            "chain length must be >= {MIN_CHAIN}"
        )));
    }
    let map = HankelMap::with_block(spec.p)?;
    let two_lambda = spec.two_lambda;
    let start = typical_start(&map, two_lambda, seed);
    run_metropolis_with(
        |g| -nuclear_norm_symmetric(&map.forward(g)) / two_lambda,
        &start,
        two_lambda / 2.0,
        length,
        seed,
        row,
        keep_dump,
    )
}

/// Independent chains, one per seed, summarized separately and returned in
/// seed order.
pub fn run_chains(
    spec: &PriorSpec,
    length: usize,
    seeds: &[u64],
    row: usize,
) -> Result<Vec<ChainSummary>> {
    seeds
        .par_iter()
        .map(|&s| run_metropolis(spec, length, s, row, false).map(|c| c.summary))
        .collect()
}

/// Prior statistics for `spec`: exact i.i.d. draws for the Gaussian priors,
/// a Metropolis chain for the exact Hankel prior.
pub fn sample_prior(
    spec: &PriorSpec,
    length: usize,
    seed: u64,
    row: usize,
    keep_dump: bool,
) -> Result<ChainOutput> {
    spec.validate()?;
    if row == 0 || row > spec.m {
        return Err(Error::InvalidArgument(format!(
            "row {row} outside 1..={}",
            spec.m
        )));
    }
    if length < 2 {
        return Err(Error::InvalidArgument("length must be >= 2".into()));
    }
    let factor: Option<DMatrix<f64>> = match &spec.kind {
        PriorKind::HankelExact => return run_metropolis(spec, length, seed, row, keep_dump),
        PriorKind::HankelApprox => None,
        PriorKind::Kernel(kind, hyper) => {
            let p = build_regularization_matrix(*kind, hyper, spec.m)?.entries;
            let jitter = 1e-12 * p.trace().max(f64::MIN_POSITIVE);
            let mut padded = p.clone();
            for i in 0..spec.m {
                padded[(i, i)] += jitter;
            }
            Some(padded.cholesky().ok_or(Error::SingularSystem)?.l())
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let approx_std: Vec<f64> = approx_variances(spec.m, spec.two_lambda / 2.0)
        .iter()
        .map(|v| v.sqrt())
        .collect();
    let mut acc = MomentAccumulator::new(spec.m, row - 1);
    let mut dump = keep_dump.then(Vec::new);
    let mut z = nalgebra::DVector::zeros(spec.m);
    let mut g = vec![0.0; spec.m];
    for i in 0..length {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        match &factor {
            Some(l) => g.copy_from_slice((l * &z).as_slice()),
            None => {
                for ((o, s), zv) in g.iter_mut().zip(&approx_std).zip(z.iter()) {
                    *o = s * zv;
                }
            }
        }
        acc.push(&g);
        if let Some(d) = dump.as_mut() {
            if i % DUMP_EVERY == 0 {
                d.push(g.clone());
            }
        }
    }
    Ok(ChainOutput {
        summary: acc.summary(1.0, length, 0)?,
        dump,
    })
}
