//! Structure-recovery experiment over a grid of sample sizes.
//!
//! One ground-truth precision matrix is generated from the master seed;
//! every (n, trial) cell gets its own derived sampling seed and every
//! configured method estimates from the same sample, so methods are
//! compared on paired data. Trials run on worker threads; rows are
//! sorted by (method, n, trial) before writing, so parallel and serial
//! runs produce identical files.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use sice_core::glasso::{glasso_admm, AdmmConfig};
use sice_core::isice::{isice, IsiceConfig, SPARSITY_TOL};
use sice_core::newton_schulz::precision_omega;
use sice_core::pooling::{covariance, DescriptorSet};
use sice_core::rng::derive_seed;
use sice_core::synth::{
    default_mle_ridge, estimation_error, gen_precision, mle_precision, mvn_sample, GroundTruth,
    Structure,
};
use sice_core::Mat;

use crate::config::FileConfig;
use crate::csvio::{self, SummaryRow, TrialRow};
use crate::CliError;

/// Stream index of the ground-truth generator under the master seed.
const GT_STREAM: u64 = 0xA11CE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Glasso,
    Isice,
    Mle,
    Precision,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Glasso => "glasso",
            Method::Isice => "isice",
            Method::Mle => "mle",
            Method::Precision => "precision",
        }
    }

    pub fn parse(s: &str) -> Result<Method, CliError> {
        match s {
            "glasso" => Ok(Method::Glasso),
            "isice" => Ok(Method::Isice),
            "mle" => Ok(Method::Mle),
            "precision" => Ok(Method::Precision),
            other => Err(CliError::input(format!(
                "unknown method {other:?} (expected mle, glasso, isice, precision)"
            ))),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub structure: Structure,
    pub density: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub isice: IsiceConfig,
    pub admm: AdmmConfig,
    pub mle_ridge: Option<f64>,
}

impl ExperimentSpec {
    pub fn from_config(cfg: &FileConfig, seed_override: Option<u64>) -> Result<Self, CliError> {
        let d = cfg.d.ok_or_else(|| CliError::input("config is missing \"d\""))?;
        let n_grid = cfg
            .n_grid
            .clone()
            .ok_or_else(|| CliError::input("config is missing \"n_grid\""))?;
        let structure = cfg.structure()?;
        let density = cfg.density.unwrap_or(0.0);
        let trials = cfg.trials.unwrap_or(1);
        let master_seed = seed_override
            .or(cfg.master_seed)
            .ok_or_else(|| CliError::input("config is missing \"master_seed\" (or pass --seed)"))?;
        let methods = match &cfg.methods {
            Some(list) => {
                let mut ms = Vec::new();
                for m in list {
                    ms.push(Method::parse(m)?);
                }
                ms
            }
            None => vec![Method::Mle, Method::Glasso],
        };
        let spec = ExperimentSpec {
            d,
            n_grid,
            structure,
            density,
            trials,
            master_seed,
            methods,
            isice: cfg.isice_config(),
            admm: cfg.admm_config(),
            mle_ridge: cfg.mle_ridge,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.d < 2 {
            return Err(CliError::input("d must be at least 2"));
        }
        if self.trials < 1 {
            return Err(CliError::input("trials must be at least 1"));
        }
        if self.n_grid.is_empty() {
            return Err(CliError::input("n_grid must be non-empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::input("n_grid must be strictly ascending"));
        }
        if self.methods.is_empty() {
            return Err(CliError::input("methods must be non-empty"));
        }
        if matches!(self.structure, Structure::Sparse) && !(self.density > 0.0) {
            return Err(CliError::input(
                "sparse structure requires a positive density",
            ));
        }
        self.isice
            .validate()
            .map_err(|e| CliError::input(format!("isice config: {e}")))?;
        self.admm
            .validate()
            .map_err(|e| CliError::input(format!("admm config: {e}")))?;
        if let Some(r) = self.mle_ridge {
            if !(r >= 0.0) {
                return Err(CliError::input("mle_ridge must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Runs one estimator on a sample; returns the estimate and whether the
/// solver converged.
fn estimate_one(
    method: Method,
    x: &DescriptorSet,
    sigma: &Mat,
    spec: &ExperimentSpec,
) -> Result<(Mat, bool), sice_core::Error> {
    match method {
        Method::Mle => {
            let ridge = spec
                .mle_ridge
                .unwrap_or_else(|| default_mle_ridge(x.channels(), x.samples()));
            Ok((mle_precision(x, ridge)?, true))
        }
        Method::Glasso => {
            let out = glasso_admm(sigma, &spec.admm)?;
            Ok((out.s_opt, out.converged))
        }
        Method::Isice => {
            // the iterate approximates the inverse of the trace-normalized
            // covariance; dividing by trace(Sigma) reverses the input
            // normalization and recovers the precision scale
            let out = isice(sigma, &spec.isice)?;
            Ok((out.s_raw.div_scalar(out.sigma_trace), true))
        }
        Method::Precision => Ok((
            precision_omega(x, spec.isice.ns_iterations, spec.isice.alpha)?,
            true,
        )),
    }
}

/// Runs every (method, n, trial) cell and returns rows sorted by
/// (method, n, trial), plus the count of hard per-trial failures.
pub fn run_trials(
    spec: &ExperimentSpec,
    threads: usize,
) -> Result<(Vec<TrialRow>, usize), CliError> {
    let gt = gen_precision(
        spec.d,
        spec.structure,
        spec.density,
        derive_seed(spec.master_seed, GT_STREAM),
    )
    .map_err(|e| CliError::input(format!("ground truth generation: {e}")))?;

    let jobs: Vec<(usize, usize)> = (0..spec.n_grid.len())
        .flat_map(|ni| (0..spec.trials).map(move |t| (ni, t)))
        .collect();

    let next = AtomicUsize::new(0);
    let rows = Mutex::new(Vec::<TrialRow>::new());
    let failures = AtomicUsize::new(0);
    let workers = threads.max(1).min(jobs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= jobs.len() {
                    break;
                }
                let (ni, trial) = jobs[idx];
                let cell = run_cell(spec, &gt, ni, trial, &failures);
                rows.lock().expect("poisoned").extend(cell);
            });
        }
    });

    let mut rows = rows.into_inner().expect("poisoned");
    rows.sort_by(|a, b| {
        (a.method.as_str(), a.n, a.trial).cmp(&(b.method.as_str(), b.n, b.trial))
    });
    Ok((rows, failures.load(Ordering::Relaxed)))
}

fn run_cell(
    spec: &ExperimentSpec,
    gt: &GroundTruth,
    ni: usize,
    trial: usize,
    failures: &AtomicUsize,
) -> Vec<TrialRow> {
    let n = spec.n_grid[ni];
    // per-cell sampling stream: deterministic in (master seed, n index,
    // trial), independent of scheduling
    let stream = 1 + (ni as u64) * 0x1_0000_0000 + trial as u64;
    let seed = derive_seed(spec.master_seed, stream);
    let mut out = Vec::with_capacity(spec.methods.len());

    let x = match mvn_sample(gt, n, seed) {
        Ok(x) => x,
        Err(e) => {
            // sampling failure poisons every method in this cell
            for &m in &spec.methods {
                failures.fetch_add(1, Ordering::Relaxed);
                out.push(failed_row(m, n, trial, seed, &e));
            }
            return out;
        }
    };
    let sigma = covariance(&x);

    for &method in &spec.methods {
        let t0 = Instant::now();
        match estimate_one(method, &x, &sigma, spec) {
            Ok((est, converged)) => {
                let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
                let err = estimation_error(&est, gt).unwrap_or(f64::INFINITY);
                out.push(TrialRow {
                    method: method.name().to_string(),
                    n,
                    trial,
                    seed,
                    frob_error: err,
                    converged,
                    sparsity_ratio: est.off_diag_sparsity(SPARSITY_TOL),
                    wall_ms,
                });
            }
            Err(e) => {
                failures.fetch_add(1, Ordering::Relaxed);
                out.push(failed_row(method, n, trial, seed, &e));
            }
        }
    }
    out
}

fn write_ground_truth(out_dir: &Path, gt: &GroundTruth) -> Result<(), CliError> {
    let sidecar = serde_json::json!({
        "structure": match gt.structure {
            Structure::Dense => "dense",
            Structure::Sparse => "sparse",
        },
        "density": gt.density,
        "seed": gt.seed,
        "d": gt.precision.rows(),
    });
    std::fs::write(
        out_dir.join("ground_truth.json"),
        serde_json::to_string_pretty(&sidecar).expect("valid json") + "\n",
    )
    .map_err(|e| CliError::input(format!("cannot write ground_truth.json: {e}")))?;
    csvio::write_matrix(&out_dir.join("gt_precision.csv"), &gt.precision)?;
    csvio::write_matrix(&out_dir.join("gt_covariance.csv"), &gt.covariance)
}

fn failed_row(method: Method, n: usize, trial: usize, seed: u64, _e: &sice_core::Error) -> TrialRow {
    TrialRow {
        method: method.name().to_string(),
        n,
        trial,
        seed,
        frob_error: f64::INFINITY,
        converged: false,
        sparsity_ratio: 0.0,
        wall_ms: 0.0,
    }
}

/// Aggregates sorted rows into per-(method, n) summaries.
pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let key = (rows[i].method.clone(), rows[i].n);
        let mut errs = Vec::new();
        while i < rows.len() && rows[i].method == key.0 && rows[i].n == key.1 {
            errs.push(rows[i].frob_error);
            i += 1;
        }
        let (mean, std) = csvio::mean_std(&errs);
        out.push(SummaryRow {
            method: key.0,
            n: key.1,
            trials: errs.len(),
            mean_error: mean,
            std_error: std,
        });
    }
    out
}

/// `fig5` command: run the experiment, write `results.csv`,
/// `summary.csv` and the `timings.jsonl` sidecar into the output
/// directory.
pub fn cmd_fig5(
    config: Option<&Path>,
    out_dir: &Path,
    seed_override: Option<u64>,
    threads: usize,
) -> Result<(), CliError> {
    let cfg = FileConfig::load_or_default(config)?;
    if config.is_none() {
        return Err(CliError::input("fig5 requires --config <json>"));
    }
    let spec = ExperimentSpec::from_config(&cfg, seed_override)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;

    // materialize the ground truth next to the results so a run is
    // reproducible and auditable from its output directory alone
    let gt = gen_precision(
        spec.d,
        spec.structure,
        spec.density,
        derive_seed(spec.master_seed, GT_STREAM),
    )
    .map_err(|e| CliError::input(format!("ground truth generation: {e}")))?;
    write_ground_truth(out_dir, &gt)?;

    let (rows, failures) = run_trials(&spec, threads)?;
    csvio::write_results(&out_dir.join("results.csv"), &rows)?;
    let summary = summarize(&rows);
    csvio::write_summary(&out_dir.join("summary.csv"), &summary)?;
    csvio::write_timings(&out_dir.join("timings.jsonl"), &rows)?;

    for s in &summary {
        println!(
            "{:<10} n={:<6} trials={} mean_error={:.6} std={:.6}",
            s.method, s.n, s.trials, s.mean_error, s.std_error
        );
    }

    let total = rows.len();
    if failures * 10 > total {
        return Err(CliError::numerical(format!(
            "{failures} of {total} trials failed"
        )));
    }
    Ok(())
}
