//! CSV formats for data, estimates and campaign results.
//!
//! Floating-point values are written with 17 significant digits so that
//! every `f64` survives a write/read round trip unchanged.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::atomic::AtomDictionary;
use crate::error::{Error, Result};
use crate::kernel_estimator::EstimateReport;
use crate::prior_lab::ChainSummary;
use crate::simgen::{BenchmarkConfig, RunRecord, SummaryRow};

/// Inputs of the multi-input layout `t,y,u1,…,u7`.
pub const MISO_INPUTS: usize = 7;

/// Round-trip decimal representation of a double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataLayout {
    /// `t,u,y`
    Siso,
    /// `t,y,u1,…,u7`
    Miso,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataFile {
    pub layout: DataLayout,
    pub y: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
}

impl DataFile {
    pub fn siso(u: Vec<f64>, y: Vec<f64>) -> Self {
        DataFile {
            layout: DataLayout::Siso,
            y,
            inputs: vec![u],
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Column names in file order.
    pub fn header(&self) -> Vec<String> {
        match self.layout {
            DataLayout::Siso => vec!["t".into(), "u".into(), "y".into()],
            DataLayout::Miso => {
                let mut h = vec!["t".to_string(), "y".to_string()];
                h.extend((1..=self.inputs.len()).map(|j| format!("u{j}")));
                h
            }
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Result<DataLayout> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") {
        return Err(parse_err(1, "missing column 't'"));
    }
    if cols.get(1) == Some(&"u") {
        return match cols.get(2) {
            Some(&"y") if cols.len() == 3 => Ok(DataLayout::Siso),
            Some(&"y") => Err(parse_err(1, format!("unexpected column '{}'", cols[3]))),
            _ => Err(parse_err(1, "missing column 'y'")),
        };
    }
    if cols.get(1) != Some(&"y") {
        return Err(parse_err(1, "missing column 'y'"));
    }
    let inputs = &cols[2..];
    if inputs.is_empty() {
        return Err(parse_err(1, "missing column 'u' (or 'u1'..'u7')"));
    }
    for (j, name) in inputs.iter().enumerate() {
        if *name != format!("u{}", j + 1) {
            return Err(parse_err(
                1,
                format!("expected column 'u{}', found '{name}'", j + 1),
            ));
        }
    }
    if inputs.len() != MISO_INPUTS {
        return Err(parse_err(
            1,
            format!(
                "multi-input files need exactly {MISO_INPUTS} inputs u1..u{MISO_INPUTS}, found {}",
                inputs.len()
            ),
        ));
    }
    Ok(DataLayout::Miso)
}

/// Parses a dataset with header `t,u,y` or `t,y,u1,…,u7`; `t` must run
/// `1, 2, 3, …`.
pub fn parse_dataset_csv(text: &str) -> Result<DataFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyData)?;
    let layout = parse_header(header.trim_start_matches('\u{feff}'))?;
    let width = match layout {
        DataLayout::Siso => 3,
        DataLayout::Miso => 2 + MISO_INPUTS,
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut y = Vec::new();
    let mut inputs = vec![Vec::new(); width - 2];
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width {
            return Err(parse_err(
                line_no,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        let expected = y.len() as i64 + 1;
        match fields[0].parse::<i64>() {
            Ok(t) if t == expected => {}
            _ => {
                return Err(Error::NonConsecutiveTime {
                    line: line_no,
                    expected,
                    found: fields[0].to_string(),
                })
            }
        }
        let mut values = Vec::with_capacity(width - 1);
        for (col, field) in fields.iter().enumerate().skip(1) {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(
                    line_no,
                    format!("column '{}': cannot parse '{field}'", names[col]),
                )
            })?;
            values.push(v);
        }
        match layout {
            DataLayout::Siso => {
                inputs[0].push(values[0]);
                y.push(values[1]);
            }
            DataLayout::Miso => {
                y.push(values[0]);
                for (j, v) in values[1..].iter().enumerate() {
                    inputs[j].push(*v);
                }
            }
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(DataFile { layout, y, inputs })
}

pub fn read_dataset_csv(path: &Path) -> Result<DataFile> {
    parse_dataset_csv(&fs::read_to_string(path)?)
}

pub fn render_dataset_csv(data: &DataFile) -> String {
    let mut out = data.header().join(",");
    out.push('\n');
    for i in 0..data.len() {
        let mut row = vec![(i + 1).to_string()];
        match data.layout {
            DataLayout::Siso => {
                row.push(fmt_f64(data.inputs[0][i]));
                row.push(fmt_f64(data.y[i]));
            }
            DataLayout::Miso => {
                row.push(fmt_f64(data.y[i]));
                row.extend(data.inputs.iter().map(|u| fmt_f64(u[i])));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_dataset_csv(path: &Path, data: &DataFile) -> Result<()> {
    Ok(fs::write(path, render_dataset_csv(data))?)
}

/// `t,g` with `t = 1..m`.
pub fn render_impulse_csv(g: &[f64]) -> String {
    let mut out = String::from("t,g\n");
    for (t, v) in g.iter().enumerate() {
        let _ = writeln!(out, "{},{}", t + 1, fmt_f64(*v));
    }
    out
}

pub fn parse_impulse_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "t,g" => {}
        _ => return Err(parse_err(1, "expected header 't,g'")),
    }
    let mut g = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| parse_err(idx + 1, "expected 2 fields"))?;
        if t.trim().parse::<usize>().ok() != Some(g.len() + 1) {
            return Err(Error::NonConsecutiveTime {
                line: idx + 1,
                expected: g.len() as i64 + 1,
                found: t.to_string(),
            });
        }
        g.push(
            v.trim()
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("column 'g': cannot parse '{v}'")))?,
        );
    }
    Ok(g)
}

/// Key/value report; arrays are comma lists.
pub fn render_report(report: &EstimateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method = {}", report.method);
    let _ = writeln!(out, "order = {}", report.g_hat.len());
    for (k, v) in &report.hyper {
        let _ = writeln!(out, "hyper.{k} = {}", fmt_f64(*v));
    }
    let _ = writeln!(out, "sigma2 = {}", fmt_f64(report.sigma2));
    let _ = writeln!(out, "objective = {}", fmt_f64(report.objective));
    let _ = writeln!(out, "evaluations = {}", report.evaluations);
    for (k, v) in &report.diagnostics {
        let _ = writeln!(out, "diagnostics.{k} = {v}");
    }
    let g: Vec<String> = report.g_hat.iter().map(|v| fmt_f64(*v)).collect();
    let _ = writeln!(out, "g_hat = {}", g.join(","));
    out
}

/// Rows of `P` as CSV, no header.
pub fn render_matrix_csv(p: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..p.nrows() {
        let row: Vec<String> = p.row(r).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Poles and the first `samples` coefficients of every atom.
pub fn render_atoms_csv(dictionary: &AtomDictionary, samples: usize) -> String {
    let shown = samples.min(dictionary.m);
    let mut out = String::from("index,radius,phase,pole_re,pole_im,weight");
    for t in 1..=shown {
        let _ = write!(out, ",s{t}");
    }
    out.push('\n');
    for (k, atom) in dictionary.atoms.iter().enumerate() {
        let (re, im) = atom.pole();
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            k + 1,
            fmt_f64(atom.radius),
            fmt_f64(atom.phase),
            fmt_f64(re),
            fmt_f64(if atom.real { 0.0 } else { im }),
            fmt_f64(atom.weight)
        );
        for v in &atom.samples[..shown] {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// `index,std,corr_row`.
pub fn render_chain_csv(summary: &ChainSummary) -> String {
    let mut out = String::from("index,std,corr_row\n");
    for (k, (s, r)) in summary
        .coefficient_std
        .iter()
        .zip(&summary.correlation_row)
        .enumerate()
    {
        let _ = writeln!(out, "{},{},{}", k + 1, fmt_f64(*s), fmt_f64(*r));
    }
    out
}

/// Thinned chain states, one per row.
pub fn render_dump_csv(states: &[Vec<f64>]) -> String {
    let mut out = String::new();
    if let Some(first) = states.first() {
        let header: Vec<String> = (1..=first.len()).map(|k| format!("g{k}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for s in states {
        let row: Vec<String> = s.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn render_hyper(hyper: &[(String, f64)]) -> String {
    hyper
        .iter()
        .map(|(k, v)| format!("{k}={}", fmt_f64(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

/// One row per run: fit, tuned hyperparameters and status per estimator.
pub fn render_runs_csv(config: &BenchmarkConfig, records: &[RunRecord]) -> String {
    let mut out = String::from("run,seed,snr,tail_ratio");
    for id in &config.estimators {
        let _ = write!(out, ",{id}_fit,{id}_hyper,{id}_status");
    }
    out.push('\n');
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{}",
            r.run,
            r.seed,
            fmt_f64(r.snr),
            fmt_f64(r.tail_ratio)
        );
        for id in &config.estimators {
            match r.outcomes.iter().find(|o| o.estimator == *id) {
                Some(o) => {
                    let fit = o.fit.map(fmt_f64).unwrap_or_else(|| "NaN".into());
                    let status = match &o.failure {
                        None => "ok".to_string(),
                        Some(msg) => format!("failed: {}", msg.replace([',', '\n'], " ")),
                    };
                    let _ = write!(out, ",{fit},{},{status}", render_hyper(&o.hyper));
                }
                None => {
                    let _ = write!(out, ",NaN,,missing");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("estimator,count,failures,mean,median,q1,q3,min,max\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.estimator,
            r.count,
            r.failures,
            fmt_f64(r.mean),
            fmt_f64(r.median),
            fmt_f64(r.q1),
            fmt_f64(r.q3),
            fmt_f64(r.min),
            fmt_f64(r.max)
        );
    }
    out
}

/// Wall-clock seconds per run and estimator; kept apart from the
/// deterministic outputs.
pub fn render_timings_csv(config: &BenchmarkConfig, records: &[RunRecord]) -> String {
    let mut out = String::from("run");
    for id in &config.estimators {
        let _ = write!(out, ",{id}_seconds");
    }
    out.push('\n');
    for r in records {
        let _ = write!(out, "{}", r.run);
        for id in &config.estimators {
            let secs = r
                .outcomes
                .iter()
                .find(|o| o.estimator == *id)
                .map(|o| o.seconds)
                .unwrap_or(f64::NAN);
            let _ = write!(out, ",{secs:.6}");
        }
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A written file and its checksum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Writes `contents` to `dir/name` and returns its checksum record.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<FileRecord> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(FileRecord {
        name: name.to_string(),
        sha256: sha256_hex(contents.as_bytes()),
        bytes: contents.len(),
    })
}

/// Persists an estimate as `<stem>_report.txt` and `<stem>_impulse.csv`.
pub fn write_report(report: &EstimateReport, dir: &Path, stem: &str) -> Result<Vec<FileRecord>> {
    Ok(vec![
        write_file(dir, &format!("{stem}_report.txt"), &render_report(report))?,
        write_file(
            dir,
            &format!("{stem}_impulse.csv"),
            &render_impulse_csv(&report.g_hat),
        )?,
    ])
}
