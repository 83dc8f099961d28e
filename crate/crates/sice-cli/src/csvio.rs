//! CSV and JSONL file formats.
//!
//! Matrix CSV: one row per line, comma-separated, C-locale decimal
//! point, scientific notation accepted. An optional leading header line
//! `# rows=<r> cols=<c>` is validated when present; the writer always
//! emits it. Floats are written with Rust's shortest-round-trip
//! formatting, so `write` followed by `read` reproduces every value
//! bitwise.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use sice_core::Mat;

use crate::CliError;

pub fn write_matrix(path: &Path, m: &Mat) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&format!("# rows={} cols={}\n", m.rows(), m.cols()));
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<Mat, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    parse_matrix(&text).map_err(|msg| CliError::input(format!("{}: {msg}", path.display())))
}

fn parse_matrix(text: &str) -> Result<Mat, String> {
    let mut declared: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if declared.is_none() && rows.is_empty() {
                declared = Some(parse_header(rest).map_err(|m| format!("line {}: {m}", lineno + 1))?);
            }
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format!("line {}: bad number {:?}", lineno + 1, field.trim()))?;
            if !v.is_finite() {
                return Err(format!("line {}: non-finite value {v}", lineno + 1));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format!(
                    "line {}: expected {} columns, got {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    let r = rows.len();
    let c = rows[0].len();
    if let Some((dr, dc)) = declared {
        if (dr, dc) != (r, c) {
            return Err(format!(
                "header declares {dr}x{dc} but file contains {r}x{c}"
            ));
        }
    }
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Mat::from_vec(r, c, data).map_err(|e| e.to_string())
}

fn parse_header(rest: &str) -> Result<(usize, usize), String> {
    let mut rows = None;
    let mut cols = None;
    for token in rest.split_whitespace() {
        if let Some(v) = token.strip_prefix("rows=") {
            rows = Some(v.parse::<usize>().map_err(|_| "bad rows= value")?);
        } else if let Some(v) = token.strip_prefix("cols=") {
            cols = Some(v.parse::<usize>().map_err(|_| "bad cols= value")?);
        }
    }
    match (rows, cols) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err("header must declare rows=<r> cols=<c>".into()),
    }
}

/// One experiment trial. Wall time is kept out of the CSV so result
/// files stay byte-identical across reruns; it goes to `timings.jsonl`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub method: String,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub frob_error: f64,
    pub converged: bool,
    pub sparsity_ratio: f64,
    pub wall_ms: f64,
}

pub const RESULTS_HEADER: &str = "method,n,trial,seed,frob_error,converged,sparsity_ratio";

pub fn write_results(path: &Path, rows: &[TrialRow]) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{RESULTS_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.method, r.n, r.trial, r.seed, r.frob_error, r.converged, r.sparsity_ratio
            )?;
        }
        w.flush()
    };
    emit().map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_results(path: &Path) -> Result<Vec<TrialRow>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != RESULTS_HEADER {
                return Err(CliError::input(format!(
                    "{}: unexpected header {line:?}",
                    path.display()
                )));
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(CliError::input(format!(
                "{}: line {}: expected 7 fields",
                path.display(),
                i + 1
            )));
        }
        let bad = |what: &str| {
            CliError::input(format!("{}: line {}: bad {what}", path.display(), i + 1))
        };
        rows.push(TrialRow {
            method: parts[0].to_string(),
            n: parts[1].parse().map_err(|_| bad("n"))?,
            trial: parts[2].parse().map_err(|_| bad("trial"))?,
            seed: parts[3].parse().map_err(|_| bad("seed"))?,
            frob_error: parts[4].parse().map_err(|_| bad("frob_error"))?,
            converged: parts[5].parse().map_err(|_| bad("converged"))?,
            sparsity_ratio: parts[6].parse().map_err(|_| bad("sparsity_ratio"))?,
            wall_ms: 0.0,
        });
    }
    Ok(rows)
}

/// Per-(method, n) aggregate of trial errors.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub n: usize,
    pub trials: usize,
    pub mean_error: f64,
    pub std_error: f64,
}

pub const SUMMARY_HEADER: &str = "method,n,trials,mean_error,std_error";

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method, r.n, r.trials, r.mean_error, r.std_error
        ));
    }
    fs::write(path, out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != SUMMARY_HEADER {
                return Err(CliError::input(format!(
                    "{}: unexpected header {line:?}",
                    path.display()
                )));
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(CliError::input(format!(
                "{}: line {}: expected 5 fields",
                path.display(),
                i + 1
            )));
        }
        let bad = |what: &str| {
            CliError::input(format!("{}: line {}: bad {what}", path.display(), i + 1))
        };
        rows.push(SummaryRow {
            method: parts[0].to_string(),
            n: parts[1].parse().map_err(|_| bad("n"))?,
            trials: parts[2].parse().map_err(|_| bad("trials"))?,
            mean_error: parts[3].parse().map_err(|_| bad("mean_error"))?,
            std_error: parts[4].parse().map_err(|_| bad("std_error"))?,
        });
    }
    Ok(rows)
}

/// Sample mean and sample standard deviation (n - 1 in the denominator;
/// 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Appends wall-time records to a JSONL sidecar (measurement output,
/// exempt from the byte-identity guarantee).
pub fn write_timings(path: &Path, rows: &[TrialRow]) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        for r in rows {
            writeln!(
                w,
                "{{\"method\":\"{}\",\"n\":{},\"trial\":{},\"wall_ms\":{}}}",
                r.method, r.n, r.trial, r.wall_ms
            )?;
        }
        w.flush()
    };
    emit().map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}
