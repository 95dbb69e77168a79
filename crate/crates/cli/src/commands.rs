use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use regid::atomic::{self, AtomicGamma};
use regid::hankel::{self, GammaChoice};
use regid::io::{self, DataLayout};
use regid::kernel_estimator::{self, build_fir_regression, fit_kernel, EstimateReport};
use regid::prior_lab::{sample_prior as run_prior, PriorKind, PriorSpec};
use regid::simgen::{build_miso_arx, run_benchmark, BenchmarkConfig, EstimatorId};
use regid::{Hyperparameters, KernelKind};
use toml::{Table, Value};

use crate::config::{AtomsFile, BenchFile, FitFile, KernelFile, SamplePriorFile};
use crate::error::CliError;
use crate::manifest::{render_config, Manifest};
use crate::{AtomsArgs, BenchArgs, FitArgs, KernelArgs, SamplePriorArgs};

const BENCH_LENGTHS: [usize; 2] = [300, 1000];

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::Data(format!("stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

fn parse_kind(s: &str) -> Result<KernelKind, CliError> {
    s.parse::<KernelKind>().map_err(|_| {
        usage(format!(
            "unknown kernel '{s}' (expected tc, ss, itc, iss or its)"
        ))
    })
}

fn kernel_hyper(
    kind: KernelKind,
    lambda: f64,
    alpha: f64,
    alpha_min: f64,
    alpha_max: f64,
) -> Hyperparameters {
    if kind.is_integral() {
        Hyperparameters::interval(lambda, alpha_min, alpha_max)
    } else {
        Hyperparameters::single(lambda, alpha)
    }
}

fn hyper_table(table: &mut Table, hyper: &Hyperparameters) {
    for (name, v) in hyper.names().iter().zip(hyper.to_vec()) {
        table.insert((*name).to_string(), Value::Float(v));
    }
}

pub fn bench(args: BenchArgs, file: BenchFile, strict: bool) -> Result<(), CliError> {
    let defaults = BenchmarkConfig::default();
    let n = pick(args.n, file.n, defaults.n);
    let n_free = args.n_free || file.n_free.unwrap_or(false);
    if !n_free && !BENCH_LENGTHS.contains(&n) {
        return Err(usage(format!(
            "--n must be 300 or 1000 (got {n}); pass --n-free to allow other lengths"
        )));
    }
    let estimators = match args.estimators.or(file.estimators) {
        Some(names) => names
            .iter()
            .map(|s| s.parse::<EstimatorId>())
            .collect::<Result<Vec<_>, _>>()?,
        None => defaults.estimators.clone(),
    };
    let jobs = args.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(usage("--jobs must be >= 1"));
    }
    let config = BenchmarkConfig {
        runs: pick(args.runs, file.runs, defaults.runs),
        n,
        order: pick(args.order, file.order, defaults.order),
        seed: pick(args.seed, file.seed, defaults.seed),
        estimators,
        jobs,
        ..defaults
    };
    config.validate()?;
    let out = pick(args.out, file.out, PathBuf::from("bench-out"));
    let timings = args.timings || file.timings.unwrap_or(false);

    let mut table = Table::new();
    table.insert("runs".into(), int(config.runs));
    table.insert("n".into(), int(config.n));
    table.insert("order".into(), int(config.order));
    table.insert("seed".into(), Value::Integer(config.seed as i64));
    table.insert(
        "estimators".into(),
        Value::Array(
            config
                .estimators
                .iter()
                .map(|e| Value::String(e.label().into()))
                .collect(),
        ),
    );
    table.insert("snr_min".into(), Value::Float(config.snr_range.0));
    table.insert("snr_max".into(), Value::Float(config.snr_range.1));
    table.insert("kernel_order".into(), int(config.kernel_order));
    table.insert("hankel_order".into(), int(config.hankel_order));
    table.insert("atomic_order".into(), int(config.atomic_order));
    table.insert("m_truth".into(), int(config.m_truth));

    log::info!("running {} runs at N = {}", config.runs, config.n);
    let result = run_benchmark(&config)?;

    let mut manifest = Manifest::new("bench", Some(config.seed), table.clone());
    let summary = io::render_summary_csv(&result.summary);
    let mut records = vec![
        io::write_file(
            &out,
            "runs.csv",
            &io::render_runs_csv(&config, &result.records),
        )?,
        io::write_file(&out, "summary.csv", &summary)?,
        io::write_file(&out, "config.txt", &render_config(&table))?,
    ];
    if timings {
        records.push(io::write_file(
            &out,
            "timings.csv",
            &io::render_timings_csv(&config, &result.records),
        )?);
    }
    manifest.add(records);
    manifest.write(&out)?;
    emit(&summary)?;

    let failures: Vec<String> = result
        .records
        .iter()
        .flat_map(|r| {
            r.outcomes.iter().filter_map(move |o| {
                o.failure
                    .as_ref()
                    .map(|f| format!("run {} {}: {f}", r.run, o.estimator))
            })
        })
        .collect();
    for f in &failures {
        log::warn!("{f}");
    }
    if strict && !failures.is_empty() {
        return Err(CliError::Numerical(format!(
            "{} estimator failures; first: {}",
            failures.len(),
            failures[0]
        )));
    }
    Ok(())
}

enum Method {
    Kernel(KernelKind),
    Hankel,
    Atomic,
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "hankel" => Ok(Method::Hankel),
        "atomic" => Ok(Method::Atomic),
        other => other
            .parse::<KernelKind>()
            .map(Method::Kernel)
            .map_err(|_| {
                usage(format!(
                    "unknown method '{s}' (expected tc, ss, itc, iss, its, hankel or atomic)"
                ))
            }),
    }
}

fn parse_positive(flag: &str, s: &str) -> Result<f64, CliError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(usage(format!(
            "{flag} expects a non-negative number, got '{s}'"
        ))),
    }
}

fn read_truth(path: Option<&Path>) -> Result<Vec<f64>, CliError> {
    let path = path.ok_or_else(|| usage("--gamma oracle needs --truth <impulse csv>"))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(io::parse_impulse_csv(&text)?)
}

/// `auto`/`cv`, `oracle`, or a fixed value.
enum GammaFlag {
    Tuned,
    Oracle(Vec<f64>),
    Fixed(f64),
}

fn parse_gamma(s: &str, truth: Option<&Path>) -> Result<GammaFlag, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "auto" | "cv" => Ok(GammaFlag::Tuned),
        "oracle" => Ok(GammaFlag::Oracle(read_truth(truth)?)),
        other => parse_positive("--gamma", other).map(GammaFlag::Fixed),
    }
}

pub fn fit(args: FitArgs, file: FitFile, strict: bool) -> Result<(), CliError> {
    let method_name = args
        .method
        .or(args.kernel)
        .or(file.method)
        .unwrap_or_else(|| "its".into())
        .to_ascii_lowercase();
    let method = parse_method(&method_name)?;
    let default_order = match method {
        Method::Kernel(_) => kernel_estimator::DEFAULT_ORDER,
        Method::Hankel => hankel::DEFAULT_ORDER,
        Method::Atomic => atomic::DEFAULT_ORDER,
    };
    let order = pick(args.order, file.order, default_order);
    if order == 0 {
        return Err(usage("--order must be >= 1"));
    }
    let sigma2 = pick(args.sigma2, file.sigma2, "auto".into());
    let gamma = pick(args.gamma, file.gamma, "auto".into());
    let folds = pick(args.folds, file.folds, atomic::DEFAULT_FOLDS);
    let truth = args.truth.or(file.truth);
    let out = pick(args.out, file.out, PathBuf::from("."));
    let stem = pick(args.stem, file.stem, method_name.clone());

    if !args.data.is_file() {
        return Err(CliError::Data(format!(
            "cannot read {}",
            args.data.display()
        )));
    }
    let data = io::read_dataset_csv(&args.data).map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", args.data.display())),
        other => other,
    })?;
    let siso = |name: &str| -> Result<(&[f64], &[f64]), CliError> {
        match data.layout {
            DataLayout::Siso => Ok((&data.inputs[0], &data.y)),
            DataLayout::Miso => Err(usage(format!(
                "{name} supports single-input data only; use a kernel method for multi-input files"
            ))),
        }
    };
    let sigma2_value = match sigma2.trim() {
        "auto" => None,
        s => Some(parse_positive("--sigma2", s)?),
    };
    if sigma2_value.is_some() && !matches!(method, Method::Kernel(_)) {
        return Err(usage("--sigma2 applies to kernel methods only"));
    }

    let report: EstimateReport = match method {
        Method::Kernel(kind) => {
            if gamma.trim() != "auto" {
                return Err(usage("--gamma applies to hankel and atomic only"));
            }
            let mut problem = match data.layout {
                DataLayout::Siso => build_fir_regression(&data.inputs[0], &data.y, order)?,
                DataLayout::Miso => build_miso_arx(&data.y, &data.inputs, order)?,
            };
            if let Some(s) = sigma2_value {
                problem = problem.with_sigma2(s);
            }
            fit_kernel(&problem, kind)?
        }
        Method::Hankel => {
            if order % 2 == 0 {
                return Err(usage(format!("hankel needs an odd --order, got {order}")));
            }
            let (u, y) = siso("hankel")?;
            let choice = match parse_gamma(&gamma, truth.as_deref())? {
                GammaFlag::Tuned => GammaChoice::HoldOut,
                GammaFlag::Oracle(g) => GammaChoice::Oracle(g),
                GammaFlag::Fixed(v) => GammaChoice::Fixed(v),
            };
            hankel::fit_hankel(u, y, (order + 1) / 2, &choice)?
        }
        Method::Atomic => {
            if folds < 2 {
                return Err(usage("--folds must be >= 2"));
            }
            let (u, y) = siso("atomic")?;
            let choice = match parse_gamma(&gamma, truth.as_deref())? {
                GammaFlag::Tuned => AtomicGamma::KFold(folds),
                GammaFlag::Oracle(g) => AtomicGamma::Oracle(g),
                GammaFlag::Fixed(v) => AtomicGamma::Fixed(v),
            };
            atomic::fit_atomic(u, y, order, &choice)?
        }
    };

    let mut table = Table::new();
    table.insert("data".into(), path_value(&args.data));
    table.insert("method".into(), Value::String(method_name));
    table.insert("order".into(), int(order));
    table.insert("sigma2".into(), Value::String(sigma2));
    table.insert("gamma".into(), Value::String(gamma));
    table.insert("folds".into(), int(folds));
    if let Some(t) = &truth {
        table.insert("truth".into(), path_value(t));
    }
    table.insert("out".into(), path_value(&out));
    table.insert("stem".into(), Value::String(stem.clone()));

    let mut manifest = Manifest::new("fit", None, table);
    manifest.add(io::write_report(&report, &out, &stem)?);
    manifest.write(&out)?;
    let mut text = String::new();
    for (k, v) in &report.hyper {
        text.push_str(&format!("{k} = {}\n", io::fmt_f64(*v)));
    }
    text.push_str(&format!(
        "report = {}\n",
        out.join(format!("{stem}_report.txt")).display()
    ));
    emit(&text)?;

    let unconverged = report
        .diagnostics
        .iter()
        .any(|(k, v)| (k == "converged" || k == "simplex_converged") && v == "false");
    if unconverged {
        log::warn!("{} solver stopped before convergence", report.method);
        if strict {
            return Err(CliError::Numerical(format!(
                "{} solver did not converge",
                report.method
            )));
        }
    }
    Ok(())
}

pub fn sample_prior(args: SamplePriorArgs, file: SamplePriorFile) -> Result<(), CliError> {
    let prior = pick(args.prior, file.prior, "hankel".into()).to_ascii_lowercase();
    let length = pick(args.length, file.length, 100_000);
    let seed = pick(args.seed, file.seed, 1);
    let m = pick(args.m, file.m, 99);
    let two_lambda = pick(args.two_lambda, file.two_lambda, 1.0);
    let row = pick(args.row, file.row, 50);
    let lambda = pick(args.lambda, file.lambda, 1.0);
    let alpha = pick(args.alpha, file.alpha, 0.9);
    let alpha_min = pick(args.alpha_min, file.alpha_min, 0.5);
    let alpha_max = pick(args.alpha_max, file.alpha_max, 0.99);
    let dump = args.dump || file.dump.unwrap_or(false);
    let out = pick(args.out, file.out, PathBuf::from("prior-out"));

    let mut table = Table::new();
    table.insert("prior".into(), Value::String(prior.clone()));
    table.insert("length".into(), int(length));
    table.insert("m".into(), int(m));
    table.insert("row".into(), int(row));
    table.insert("dump".into(), Value::Boolean(dump));
    table.insert("out".into(), path_value(&out));

    let hankel_spec = |kind: PriorKind| -> Result<PriorSpec, CliError> {
        if m % 2 == 0 {
            return Err(usage(format!("Hankel priors need an odd --m, got {m}")));
        }
        Ok(PriorSpec::hankel(kind, (m + 1) / 2, two_lambda))
    };
    let spec = match prior.as_str() {
        "hankel" => hankel_spec(PriorKind::HankelExact)?,
        "hankel-approx" => hankel_spec(PriorKind::HankelApprox)?,
        other => {
            let kind = other
                .strip_prefix("kernel:")
                .ok_or_else(|| {
                    usage(format!(
                        "unknown prior '{other}' (expected hankel, hankel-approx or kernel:<kind>)"
                    ))
                })
                .and_then(parse_kind)?;
            let hyper = kernel_hyper(kind, lambda, alpha, alpha_min, alpha_max);
            hyper_table(&mut table, &hyper);
            PriorSpec {
                kind: PriorKind::Kernel(kind, hyper),
                m,
                p: 0,
                two_lambda,
            }
        }
    };
    if matches!(spec.kind, PriorKind::HankelExact | PriorKind::HankelApprox) {
        table.insert("two_lambda".into(), Value::Float(two_lambda));
    }

    let output = run_prior(&spec, length, seed, row, dump)?;
    let s = &output.summary;
    let mut text = String::new();
    text.push_str(&format!("prior = {prior}\n"));
    text.push_str(&format!("chain_length = {}\n", s.chain_length));
    text.push_str(&format!("burn_in = {}\n", s.burn_in));
    text.push_str(&format!("samples = {}\n", s.samples));
    text.push_str(&format!(
        "acceptance_rate = {}\n",
        io::fmt_f64(s.acceptance_rate)
    ));
    text.push_str(&format!("row = {}\n", s.row));

    let mut manifest = Manifest::new("sample-prior", Some(seed), table);
    let mut records = vec![
        io::write_file(&out, "chain.csv", &io::render_chain_csv(s))?,
        io::write_file(&out, "chain_summary.txt", &text)?,
    ];
    if let Some(states) = &output.dump {
        records.push(io::write_file(
            &out,
            "dump.csv",
            &io::render_dump_csv(states),
        )?);
    }
    manifest.add(records);
    manifest.write(&out)?;
    emit(&text)?;
    Ok(())
}

pub fn kernel(args: KernelArgs, file: KernelFile) -> Result<(), CliError> {
    let kind_name = args
        .kind
        .or(file.kind)
        .ok_or_else(|| usage("--kind is required (tc, ss, itc, iss or its)"))?;
    let kind = parse_kind(&kind_name)?;
    let m = pick(args.m, file.m, 100);
    let hyper = kernel_hyper(
        kind,
        pick(args.lambda, file.lambda, 1.0),
        pick(args.alpha, file.alpha, 0.9),
        pick(args.alpha_min, file.alpha_min, 0.5),
        pick(args.alpha_max, file.alpha_max, 0.99),
    );
    let matrix = regid::kernels::build_regularization_matrix(kind, &hyper, m)?;
    let csv = io::render_matrix_csv(&matrix.entries);
    match args.out.or(file.out) {
        None => emit(&csv)?,
        Some(out) => {
            let mut table = Table::new();
            table.insert("kind".into(), Value::String(kind.label().into()));
            table.insert("m".into(), int(m));
            hyper_table(&mut table, &hyper);
            table.insert("out".into(), path_value(&out));
            let mut manifest = Manifest::new("kernel", None, table);
            manifest.add([io::write_file(&out, "kernel.csv", &csv)?]);
            manifest.write(&out)?;
        }
    }
    Ok(())
}

pub fn atoms(args: AtomsArgs, file: AtomsFile) -> Result<(), CliError> {
    let m = pick(args.m, file.m, atomic::DEFAULT_ORDER);
    let samples = pick(args.samples, file.samples, 10);
    let dictionary = atomic::build_dictionary(m)?;
    let csv = io::render_atoms_csv(&dictionary, samples);
    match args.out.or(file.out) {
        None => emit(&csv)?,
        Some(out) => {
            let mut table = Table::new();
            table.insert("m".into(), int(m));
            table.insert("samples".into(), int(samples));
            table.insert("out".into(), path_value(&out));
            let mut manifest = Manifest::new("atoms", None, table);
            manifest.add([io::write_file(&out, "atoms.csv", &csv)?]);
            manifest.write(&out)?;
        }
    }
    Ok(())
}
