//! Random stable systems, synthetic data, fit metrics and seeded Monte Carlo
//! campaigns comparing the estimators.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::atomic::{self, AtomDictionary};
use crate::error::{Error, Result};
use crate::hankel::{self, AdmmSettings};
use crate::kernel_estimator::{
    build_fir_regression, build_lagged_regression, estimate_noise_variance, fit_kernel,
    RegressionProblem,
};
use crate::kernels::KernelKind;

/// Length of the realized true impulse response and of the scoring window.
pub const TRUTH_LENGTH: usize = 500;

/// Samples at the end of the realized response checked for decay.
const TAIL_WINDOW: usize = 50;
const TAIL_RATIO: f64 = 1e-8;
const POLE_BOUND: f64 = 0.95;
const ZERO_BOUND: f64 = 2.0;

/// A real root or a conjugate pair `r e^{±iφ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Root {
    Real(f64),
    Pair { radius: f64, phase: f64 },
}

impl Root {
    pub fn degree(&self) -> usize {
        match self {
            Root::Real(_) => 1,
            Root::Pair { .. } => 2,
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            Root::Real(r) => r.abs(),
            Root::Pair { radius, .. } => radius,
        }
    }

    /// Factor in powers of `q = z⁻¹`: `1 − r q` or `1 − 2 r cos φ q + r² q²`.
    fn factor(&self) -> Vec<f64> {
        match *self {
            Root::Real(r) => vec![1.0, -r],
            Root::Pair { radius, phase } => vec![1.0, -2.0 * radius * phase.cos(), radius * radius],
        }
    }
}

/// Monic polynomial in `q = z⁻¹` with the given roots (in `z`).
pub fn polynomial_from_roots(roots: &[Root]) -> Vec<f64> {
    let mut poly = vec![1.0];
    for root in roots {
        let f = root.factor();
        let mut next = vec![0.0; poly.len() + f.len() - 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in f.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        poly = next;
    }
    poly
}

/// Leading `len` coefficients of the power series `B(q) / A(q)`, `A[0] = 1`.
pub fn long_division(numerator: &[f64], denominator: &[f64], len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    for k in 0..len {
        let mut acc = numerator.get(k).copied().unwrap_or(0.0);
        for i in 1..denominator.len().min(k + 1) {
            acc -= denominator[i] * h[k - i];
        }
        h[k] = acc / denominator[0];
    }
    h
}

#[derive(Clone, Debug)]
pub struct RationalSystem {
    pub poles: Vec<Root>,
    pub zeros: Vec<Root>,
    pub gain: f64,
    /// `B(q)`, `A(q)` with `G(q) = gain · q B(q) / A(q)`.
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    /// `g_1, …, g_{m_truth}`.
    pub impulse: Vec<f64>,
}

impl RationalSystem {
    pub fn new(poles: Vec<Root>, zeros: Vec<Root>, gain: f64, m_truth: usize) -> Self {
        let numerator: Vec<f64> = polynomial_from_roots(&zeros)
            .iter()
            .map(|c| gain * c)
            .collect();
        let denominator = polynomial_from_roots(&poles);
        // one-step delay: g_t is the coefficient of q^{t−1} in B/A
        let impulse = long_division(&numerator, &denominator, m_truth);
        RationalSystem {
            poles,
            zeros,
            gain,
            numerator,
            denominator,
            impulse,
        }
    }

    pub fn order(&self) -> usize {
        self.poles.iter().map(Root::degree).sum()
    }

    /// Largest `|g_t|` over the last samples relative to the overall peak.
    pub fn tail_ratio(&self) -> f64 {
        let peak = self.impulse.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let start = self.impulse.len().saturating_sub(TAIL_WINDOW);
        let tail = self.impulse[start..]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            tail / peak
        } else {
            0.0
        }
    }

    pub fn tail_ok(&self) -> bool {
        self.tail_ratio() < TAIL_RATIO && self.impulse.iter().all(|v| v.is_finite())
    }
}

/// Coin-flip root generator: each step adds a real root or a conjugate pair
/// with equal probability until `order` is reached; a real root fills a
/// single remaining slot.
pub fn random_roots<R: Rng>(
    order: usize,
    real_bound: f64,
    pair_radius: f64,
    rng: &mut R,
) -> Vec<Root> {
    let mut roots = Vec::new();
    let mut filled = 0;
    while filled < order {
        let pair = order - filled >= 2 && rng.random_bool(0.5);
        if pair {
            let radius = rng.random_range(0.0..=pair_radius);
            let phase = rng.random_range(0.0..=PI);
            roots.push(Root::Pair { radius, phase });
            filled += 2;
        } else {
            roots.push(Root::Real(rng.random_range(-real_bound..=real_bound)));
            filled += 1;
        }
    }
    roots
}

/// Draws a random stable system of the given order whose realized impulse
/// response has decayed below `1e-8` of its peak by `m_truth`. Draws that
/// fail the tail check are discarded.
pub fn generate_system<R: Rng>(
    order: usize,
    m_truth: usize,
    rng: &mut R,
) -> Result<RationalSystem> {
    if order == 0 {
        return Err(Error::OrderZero);
    }
    if m_truth <= TAIL_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "m_truth = {m_truth} must exceed {TAIL_WINDOW}"
        )));
    }
    loop {
        let poles = random_roots(order, POLE_BOUND, POLE_BOUND, rng);
        let zeros = random_roots(order, ZERO_BOUND, ZERO_BOUND, rng);
        let sys = RationalSystem::new(poles, zeros, 1.0, m_truth);
        if sys.tail_ok() {
            return Ok(sys);
        }
        log::debug!("discarding system with tail ratio {:e}", sys.tail_ratio());
    }
}

/// Stationary variance of `x_t = 2 r cos φ x_{t−1} − r² x_{t−2} + e_t` with
/// unit-variance `e`.
pub fn ar2_variance(radius: f64, phase: f64) -> f64 {
    let phi1 = 2.0 * radius * phase.cos();
    let phi2 = -radius * radius;
    (1.0 - phi2) / ((1.0 + phi2) * ((1.0 - phi2).powi(2) - phi1 * phi1))
}

/// Filters `e` through `1 / (1 − 2 r cos φ q + r² q²)` from rest and scales
/// the result to unit stationary variance.
pub fn ar2_filter(e: &[f64], radius: f64, phase: f64) -> Vec<f64> {
    let phi1 = 2.0 * radius * phase.cos();
    let phi2 = -radius * radius;
    let scale = ar2_variance(radius, phase).sqrt();
    let mut out = Vec::with_capacity(e.len());
    let (mut x1, mut x2) = (0.0, 0.0);
    for &et in e {
        let x = phi1 * x1 + phi2 * x2 + et;
        out.push(x);
        x2 = x1;
        x1 = x;
    }
    out.iter().map(|x| x / scale).collect()
}

#[derive(Clone, Debug)]
pub struct InputSignal {
    pub u: Vec<f64>,
    pub radius: f64,
    pub phase: f64,
}

/// White Gaussian noise through a random second-order filter with pole pair
/// magnitude `U[0.5, 0.95]` and phase `U[0, π]`.
pub fn generate_input<R: Rng>(n: usize, rng: &mut R) -> Result<InputSignal> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let radius = rng.random_range(0.5..=0.95);
    let phase = rng.random_range(0.0..=PI);
    let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(InputSignal {
        u: ar2_filter(&e, radius, phase),
        radius,
        phase,
    })
}

/// `y_i = Σ_{t ≥ 1} g_t u_{i−t}` from rest.
pub fn simulate(g: &[f64], u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            let mut acc = 0.0;
            for (t, gt) in g.iter().enumerate().take(i) {
                acc += gt * u[i - 1 - t];
            }
            acc
        })
        .collect()
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub y_clean: Vec<f64>,
    pub noise_variance: f64,
    pub snr: f64,
}

/// Noiseless output of `g` plus white Gaussian noise with variance
/// `var(noiseless output) / snr`. An infinite `snr` adds no noise.
pub fn synthesize_dataset<R: Rng>(g: &[f64], u: &[f64], snr: f64, rng: &mut R) -> Result<Dataset> {
    if !(snr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "snr = {snr} must be positive"
        )));
    }
    if u.is_empty() {
        return Err(Error::EmptyData);
    }
    let y_clean = simulate(g, u);
    let var = variance(&y_clean);
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::ZeroOutputVariance);
    }
    let noise_variance = if snr.is_infinite() { 0.0 } else { var / snr };
    let sd = noise_variance.sqrt();
    let y = y_clean
        .iter()
        .map(|v| {
            let e: f64 = rng.sample(StandardNormal);
            v + sd * e
        })
        .collect();
    Ok(Dataset {
        u: u.to_vec(),
        y,
        y_clean,
        noise_variance,
        snr,
    })
}

/// `100 (1 − ‖g − ĝ‖ / ‖g‖)`, the shorter sequence padded with zeros.
pub fn fit_score(true_g: &[f64], est_g: &[f64]) -> Result<f64> {
    let len = true_g.len().max(est_g.len());
    let at = |s: &[f64], i: usize| s.get(i).copied().unwrap_or(0.0);
    let norm = true_g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let err = (0..len)
        .map(|i| (at(true_g, i) - at(est_g, i)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * (1.0 - err / norm))
}

/// MISO ARX regression: block 1 holds lagged `y`, block `j + 1` lagged `u^j`.
pub fn build_miso_arx(y: &[f64], inputs: &[Vec<f64>], m: usize) -> Result<RegressionProblem> {
    let mut signals: Vec<&[f64]> = vec![y];
    signals.extend(inputs.iter().map(|u| u.as_slice()));
    build_lagged_regression(&signals, y, m)
}

/// One-step-ahead ARX predictor `ŷ_i = (g¹ ⊗ y)_i + Σ_j (g^{j+1} ⊗ u^j)_i`.
#[derive(Clone, Debug)]
pub struct ArxPredictor {
    pub output_response: Vec<f64>,
    pub input_responses: Vec<Vec<f64>>,
}

impl ArxPredictor {
    /// Splits a stacked estimate with `blocks` blocks (first block on `y`).
    pub fn from_stacked(g: &[f64], blocks: usize) -> Result<Self> {
        if blocks == 0 || g.len() % blocks != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients do not split into {blocks} blocks",
                g.len()
            )));
        }
        let m = g.len() / blocks;
        let mut chunks = g.chunks(m).map(|c| c.to_vec());
        let output_response = chunks.next().unwrap_or_default();
        Ok(ArxPredictor {
            output_response,
            input_responses: chunks.collect(),
        })
    }

    /// `k`-step-ahead predictions `ŷ_{i|i−k}` for `i = k..=N` (1-based),
    /// returned at 0-based positions `k−1..N`. Samples before the record
    /// start are zero; outputs after `i − k` are replaced by predictions.
    pub fn predict(&self, y: &[f64], inputs: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
        let n = y.len();
        if inputs.len() != self.input_responses.len() {
            return Err(Error::LengthMismatch {
                expected: self.input_responses.len(),
                found: inputs.len(),
            });
        }
        for u in inputs {
            if u.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: u.len(),
                });
            }
        }
        if k == 0 {
            return Err(Error::InvalidArgument(
                "prediction horizon must be >= 1".into(),
            ));
        }
        // the exogenous part never depends on predicted outputs
        let exo: Vec<f64> = (0..n)
            .map(|i| {
                inputs
                    .iter()
                    .zip(&self.input_responses)
                    .map(|(u, g)| {
                        g.iter()
                            .enumerate()
                            .take(i)
                            .map(|(t, gt)| gt * u[i - 1 - t])
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let g = &self.output_response;
        let mut out = vec![0.0; n];
        let mut buf = vec![0.0; k];
        for i in (k - 1)..n {
            let known = i + 1 - k; // samples 0..known are measured
            for (step, j) in (known..=i).enumerate() {
                let mut acc = exo[j];
                for (t, gt) in g.iter().enumerate().take(j) {
                    let s = j - 1 - t;
                    let ys = if s < known { y[s] } else { buf[s - known] };
                    acc += gt * ys;
                }
                buf[step] = acc;
            }
            out[i] = buf[k - 1];
        }
        Ok(out)
    }
}

/// `100 (1 − sqrt(Σ_{i=k}^{N} (y_i − ŷ_{i|i−k})²) / sqrt(Σ_{i=k}^{N} y_i²))`.
pub fn k_step_fit(
    predictor: &ArxPredictor,
    y: &[f64],
    inputs: &[Vec<f64>],
    k: usize,
) -> Result<f64> {
    if k >= y.len() {
        return Err(Error::HorizonTooLong { k, n: y.len() });
    }
    let pred = predictor.predict(y, inputs, k)?;
    let (mut err, mut energy) = (0.0, 0.0);
    for i in (k - 1)..y.len() {
        err += (y[i] - pred[i]).powi(2);
        energy += y[i] * y[i];
    }
    if energy == 0.0 {
        return Err(Error::ZeroTruth);
    }
    Ok(100.0 * (1.0 - err.sqrt() / energy.sqrt()))
}

/// Estimators compared by [`run_benchmark`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    Kernel(KernelKind),
    HankelCv,
    HankelOracle,
    AtomicCv,
    AtomicOracle,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 9] = [
        EstimatorId::Kernel(KernelKind::Its),
        EstimatorId::Kernel(KernelKind::Itc),
        EstimatorId::Kernel(KernelKind::Iss),
        EstimatorId::Kernel(KernelKind::Tc),
        EstimatorId::Kernel(KernelKind::Ss),
        EstimatorId::HankelCv,
        EstimatorId::HankelOracle,
        EstimatorId::AtomicCv,
        EstimatorId::AtomicOracle,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            EstimatorId::Kernel(k) => k.label(),
            EstimatorId::HankelCv => "hankel-cv",
            EstimatorId::HankelOracle => "hankel-oracle",
            EstimatorId::AtomicCv => "atomic-cv",
            EstimatorId::AtomicOracle => "atomic-oracle",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "hankel-cv" => Ok(EstimatorId::HankelCv),
            "hankel-oracle" => Ok(EstimatorId::HankelOracle),
            "atomic-cv" => Ok(EstimatorId::AtomicCv),
            "atomic-oracle" => Ok(EstimatorId::AtomicOracle),
            other => other
                .parse::<KernelKind>()
                .map(EstimatorId::Kernel)
                .map_err(|_| Error::InvalidArgument(format!("unknown estimator '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub runs: usize,
    pub n: usize,
    pub order: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorId>,
    pub snr_range: (f64, f64),
    pub kernel_order: usize,
    pub hankel_order: usize,
    pub atomic_order: usize,
    pub m_truth: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            runs: 50,
            n: 300,
            order: 30,
            seed: 1,
            estimators: EstimatorId::ALL.to_vec(),
            snr_range: (1.0, 10.0),
            kernel_order: crate::kernel_estimator::DEFAULT_ORDER,
            hankel_order: hankel::DEFAULT_ORDER,
            atomic_order: atomic::DEFAULT_ORDER,
            m_truth: TRUTH_LENGTH,
            jobs: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be >= 1".into()));
        }
        let (lo, hi) = self.snr_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid SNR range [{lo}, {hi}]"
            )));
        }
        if self.order == 0 || self.kernel_order == 0 || self.atomic_order == 0 {
            return Err(Error::OrderZero);
        }
        if self.hankel_order % 2 == 0 {
            return Err(Error::InvalidArgument(
                "Hankel FIR order must be odd".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators selected".into()));
        }
        let longest = self
            .kernel_order
            .max(self.hankel_order)
            .max(self.atomic_order);
        if self.n <= longest {
            return Err(Error::InvalidArgument(format!(
                "N = {} must exceed the largest FIR order {longest}",
                self.n
            )));
        }
        Ok(())
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed ^ run as u64
    }
}

/// Independent random streams of one run.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug)]
pub struct RunData {
    pub system: RationalSystem,
    pub input: InputSignal,
    pub dataset: Dataset,
}

/// System, input and noisy data of one run; depends only on the run seed.
pub fn generate_run_data(config: &BenchmarkConfig, run: usize) -> Result<RunData> {
    let seed = config.run_seed(run);
    let mut sys_rng = stream(seed, 0);
    let mut input_rng = stream(seed, 1);
    let mut noise_rng = stream(seed, 2);
    let system = generate_system(config.order, config.m_truth, &mut sys_rng)?;
    let snr = noise_rng.random_range(config.snr_range.0..=config.snr_range.1);
    loop {
        let input = generate_input(config.n, &mut input_rng)?;
        match synthesize_dataset(&system.impulse, &input.u, snr, &mut noise_rng) {
            Ok(dataset) => {
                return Ok(RunData {
                    system,
                    input,
                    dataset,
                })
            }
            Err(Error::ZeroOutputVariance) => continue,
            Err(e) => return Err(e),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorOutcome {
    pub estimator: EstimatorId,
    pub fit: Option<f64>,
    pub hyper: Vec<(String, f64)>,
    pub failure: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub snr: f64,
    pub tail_ratio: f64,
    pub outcomes: Vec<EstimatorOutcome>,
}

impl RunRecord {
    pub fn fit(&self, id: EstimatorId) -> Option<f64> {
        self.outcomes
            .iter()
            .find(|o| o.estimator == id)
            .and_then(|o| o.fit)
    }
}

struct Estimate {
    g: Vec<f64>,
    hyper: Vec<(String, f64)>,
}

/// Per-run state shared by the estimators.
struct RunContext<'a> {
    config: &'a BenchmarkConfig,
    data: &'a RunData,
    dictionary: &'a AtomDictionary,
    kernel_problem: Option<RegressionProblem>,
}

impl RunContext<'_> {
    fn kernel_problem(&mut self) -> Result<&RegressionProblem> {
        if self.kernel_problem.is_none() {
            let d = &self.data.dataset;
            let mut prob = build_fir_regression(&d.u, &d.y, self.config.kernel_order)?;
            prob.sigma2 = Some(estimate_noise_variance(&prob)?);
            self.kernel_problem = Some(prob);
        }
        Ok(self.kernel_problem.as_ref().expect("just built"))
    }

    fn estimate(&mut self, id: EstimatorId) -> Result<Estimate> {
        let d = &self.data.dataset;
        let truth = &self.data.system.impulse;
        let settings = AdmmSettings::default();
        match id {
            EstimatorId::Kernel(kind) => {
                let report = fit_kernel(self.kernel_problem()?, kind)?;
                Ok(Estimate {
                    g: report.g_hat,
                    hyper: report.hyper,
                })
            }
            EstimatorId::HankelCv => {
                let p = (self.config.hankel_order + 1) / 2;
                let sel = hankel::tune_gamma_cv(&d.u, &d.y, p, &hankel::gamma_grid(), &settings)?;
                Ok(Estimate {
                    g: sel.solution.g,
                    hyper: vec![("gamma".into(), sel.gamma)],
                })
            }
            EstimatorId::HankelOracle => {
                let p = (self.config.hankel_order + 1) / 2;
                let prob = build_fir_regression(&d.u, &d.y, self.config.hankel_order)?;
                let sel =
                    hankel::tune_gamma_oracle(&prob, truth, p, &hankel::gamma_grid(), &settings)?;
                Ok(Estimate {
                    g: sel.solution.g,
                    hyper: vec![("gamma".into(), sel.gamma)],
                })
            }
            EstimatorId::AtomicCv => {
                let prob = build_fir_regression(&d.u, &d.y, self.config.atomic_order)?;
                let sel = atomic::tune_gamma_kfold(
                    &prob.phi,
                    &prob.y,
                    &self.dictionary.matrix(),
                    &self.dictionary.weights(),
                    atomic::DEFAULT_FOLDS,
                    &atomic::gamma_grid(),
                )?;
                Ok(Estimate {
                    g: atomic::assemble_impulse_response(
                        self.dictionary,
                        &sel.solution.coefficients,
                    )?,
                    hyper: vec![("gamma".into(), sel.gamma)],
                })
            }
            EstimatorId::AtomicOracle => {
                let prob = build_fir_regression(&d.u, &d.y, self.config.atomic_order)?;
                let sel = atomic::tune_gamma_oracle(
                    &prob,
                    self.dictionary,
                    truth,
                    &atomic::gamma_grid(),
                )?;
                Ok(Estimate {
                    g: atomic::assemble_impulse_response(
                        self.dictionary,
                        &sel.solution.coefficients,
                    )?,
                    hyper: vec![("gamma".into(), sel.gamma)],
                })
            }
        }
    }
}

/// Runs every configured estimator on one run's data. Estimator failures are
/// recorded in the outcome; only data-generation failures are returned as
/// errors.
pub fn run_single(
    config: &BenchmarkConfig,
    run: usize,
    dictionary: &AtomDictionary,
) -> Result<RunRecord> {
    let data = generate_run_data(config, run)?;
    let mut ctx = RunContext {
        config,
        data: &data,
        dictionary,
        kernel_problem: None,
    };
    let mut outcomes = Vec::with_capacity(config.estimators.len());
    for &id in &config.estimators {
        let start = Instant::now();
        let result = ctx.estimate(id).and_then(|est| {
            let fit = fit_score(&data.system.impulse, &est.g)?;
            if fit.is_finite() {
                Ok((fit, est.hyper))
            } else {
                Err(Error::InvalidArgument("non-finite fit".into()))
            }
        });
        let seconds = start.elapsed().as_secs_f64();
        outcomes.push(match result {
            Ok((fit, hyper)) => EstimatorOutcome {
                estimator: id,
                fit: Some(fit),
                hyper,
                failure: None,
                seconds,
            },
            Err(e) => {
                log::warn!("run {run}: {id} failed: {e}");
                EstimatorOutcome {
                    estimator: id,
                    fit: None,
                    hyper: Vec::new(),
                    failure: Some(e.to_string()),
                    seconds,
                }
            }
        });
    }
    Ok(RunRecord {
        run,
        seed: config.run_seed(run),
        snr: data.dataset.snr,
        tail_ratio: data.system.tail_ratio(),
        outcomes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub estimator: EstimatorId,
    pub count: usize,
    pub failures: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(config: &BenchmarkConfig, records: &[RunRecord]) -> Vec<SummaryRow> {
    config
        .estimators
        .iter()
        .map(|&id| {
            let mut fits: Vec<f64> = records.iter().filter_map(|r| r.fit(id)).collect();
            fits.sort_by(f64::total_cmp);
            let count = fits.len();
            let mean = if count > 0 {
                fits.iter().sum::<f64>() / count as f64
            } else {
                f64::NAN
            };
            SummaryRow {
                estimator: id,
                count,
                failures: records.len() - count,
                mean,
                median: quantile(&fits, 0.5),
                q1: quantile(&fits, 0.25),
                q3: quantile(&fits, 0.75),
                min: fits.first().copied().unwrap_or(f64::NAN),
                max: fits.last().copied().unwrap_or(f64::NAN),
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BenchmarkResult {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Runs the campaign. Runs execute in parallel (bounded by `jobs`) and the
/// records are returned in run order, so the result does not depend on
/// scheduling.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    config.validate()?;
    let dictionary = atomic::build_dictionary(config.atomic_order)?;
    let work = || -> Result<Vec<RunRecord>> {
        (0..config.runs)
            .into_par_iter()
            .map(|run| run_single(config, run, &dictionary))
            .collect()
    };
    let records = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let summary = summarize(config, &records);
    Ok(BenchmarkResult { records, summary })
}
