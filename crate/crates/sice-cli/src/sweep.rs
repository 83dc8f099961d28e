//! One-hyperparameter sweep: vary exactly one of lambda / eta /
//! iterations of the iterative solver while the other two stay fixed,
//! and record recovery error per grid point.

use std::path::Path;

use crate::config::FileConfig;
use crate::csvio::mean_std;
use crate::experiment::{run_trials, summarize, ExperimentSpec, Method};
use crate::{CliError, SweepParam};

pub fn cmd_sweep(
    config: Option<&Path>,
    out_dir: &Path,
    seed_override: Option<u64>,
    threads: usize,
    param: SweepParam,
    grid: &[String],
) -> Result<(), CliError> {
    if config.is_none() {
        return Err(CliError::input("sweep requires --config <json>"));
    }
    let cfg = FileConfig::load_or_default(config)?;
    let mut spec = ExperimentSpec::from_config(&cfg, seed_override)?;
    // the sweep studies the iterative solver
    spec.methods = vec![Method::Isice];

    if grid.is_empty() {
        return Err(CliError::input("sweep requires a non-empty --grid"));
    }
    let values = parse_grid(param, grid)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;

    let param_name = match param {
        SweepParam::Lambda => "lambda",
        SweepParam::Eta => "eta",
        SweepParam::Iterations => "iterations",
    };

    let mut summary_lines = vec!["param,value,n,trials,mean_error,std_error".to_string()];
    let mut point_means: Vec<f64> = Vec::new();
    let mut total_failures = 0usize;
    let mut total_rows = 0usize;

    for &v in &values {
        let mut point = spec.clone();
        match param {
            SweepParam::Lambda => point.isice.lambda = v,
            SweepParam::Eta => point.isice.eta = v,
            SweepParam::Iterations => point.isice.iterations = v as usize,
        }
        point
            .isice
            .validate()
            .map_err(|e| CliError::input(format!("grid value {v}: {e}")))?;

        let (rows, failures) = run_trials(&point, threads)?;
        total_failures += failures;
        total_rows += rows.len();
        let mut errs_all = Vec::new();
        for s in summarize(&rows) {
            summary_lines.push(format!(
                "{param_name},{v},{},{},{},{}",
                s.n, s.trials, s.mean_error, s.std_error
            ));
            errs_all.push(s.mean_error);
        }
        let (grid_point_mean, _) = mean_std(&errs_all);
        point_means.push(grid_point_mean);
    }

    let (grid_mean, grid_std) = mean_std(&point_means);
    std::fs::write(
        out_dir.join("summary.csv"),
        summary_lines.join("\n") + "\n",
    )
    .map_err(|e| CliError::input(format!("cannot write summary.csv: {e}")))?;
    std::fs::write(
        out_dir.join("aggregate.csv"),
        format!(
            "param,points,grid_mean,grid_std\n{param_name},{},{grid_mean},{grid_std}\n",
            values.len()
        ),
    )
    .map_err(|e| CliError::input(format!("cannot write aggregate.csv: {e}")))?;

    println!("{param_name} sweep over {values:?}: mean recovery error {grid_mean:.6} +- {grid_std:.6}");

    if total_failures * 10 > total_rows.max(1) {
        return Err(CliError::numerical(format!(
            "{total_failures} of {total_rows} trials failed"
        )));
    }
    Ok(())
}

fn parse_grid(param: SweepParam, grid: &[String]) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::with_capacity(grid.len());
    for g in grid {
        match param {
            SweepParam::Iterations => {
                let v: usize = g
                    .parse()
                    .map_err(|_| CliError::input(format!("bad iterations value {g:?}")))?;
                out.push(v as f64);
            }
            _ => {
                let v: f64 = g
                    .parse()
                    .map_err(|_| CliError::input(format!("bad grid value {g:?}")))?;
                if !v.is_finite() {
                    return Err(CliError::input(format!("non-finite grid value {g:?}")));
                }
                out.push(v);
            }
        }
    }
    Ok(out)
}
