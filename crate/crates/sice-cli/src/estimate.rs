//! File-in, file-out estimation: read a descriptor or covariance CSV,
//! run one estimator, write the estimated matrix plus a JSON sidecar
//! with the method, configuration echo, and diagnostics.

use std::path::Path;

use serde_json::json;

use sice_core::glasso::glasso_admm;
use sice_core::isice::{isice, SPARSITY_TOL};
use sice_core::mat::{check_symmetric, SYM_TOL};
use sice_core::modulator::isice_modulated;
use sice_core::newton_schulz::{ns_inverse, precision_omega};
use sice_core::pooling::DescriptorSet;
use sice_core::synth::default_mle_ridge;
use sice_core::Mat;

use crate::config::FileConfig;
use crate::csvio;
use crate::{CliError, CliResult, InputKind, MethodArg};

pub fn cmd_estimate(
    input: &Path,
    input_kind: InputKind,
    method: MethodArg,
    output: &Path,
    config: Option<&Path>,
) -> CliResult {
    let cfg = FileConfig::load_or_default(config)?;
    let isice_cfg = cfg.isice_config();
    isice_cfg
        .validate()
        .map_err(|e| CliError::input(format!("isice config: {e}")))?;
    let admm_cfg = cfg.admm_config();
    admm_cfg
        .validate()
        .map_err(|e| CliError::input(format!("admm config: {e}")))?;

    let raw = csvio::read_matrix(input)?;
    let (descriptors, sigma) = match input_kind {
        InputKind::Descriptors => {
            let x = DescriptorSet::new(raw)
                .map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
            let sigma = sice_core::pooling::covariance(&x);
            (Some(x), sigma)
        }
        InputKind::Covariance => {
            check_symmetric(&raw, SYM_TOL)
                .map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
            (None, raw)
        }
    };

    let modulators = match (&cfg.modulator_lr, &cfg.modulator_sp) {
        (Some(lr), Some(sp)) => Some((lr.to_params(), sp.to_params())),
        (None, None) => None,
        _ => {
            return Err(CliError::input(
                "modulator_lr and modulator_sp must be configured together",
            ))
        }
    };

    let t0 = std::time::Instant::now();
    let (est, converged, iterations, extra) = match method {
        MethodArg::Mle => {
            let x = descriptors.as_ref().ok_or_else(|| {
                CliError::input("method mle requires --input-kind descriptors")
            })?;
            let ridge = cfg
                .mle_ridge
                .unwrap_or_else(|| default_mle_ridge(x.channels(), x.samples()));
            let est = sice_core::synth::mle_precision(x, ridge)
                .map_err(|e| CliError::numerical(format!("mle: {e}")))?;
            (est, true, 0usize, json!({ "ridge": ridge }))
        }
        MethodArg::Glasso => {
            let out = glasso_admm(&sigma, &admm_cfg)
                .map_err(|e| CliError::numerical(format!("glasso: {e}")))?;
            (
                out.s_opt,
                out.converged,
                out.iterations,
                json!({
                    "primal_residual": out.primal_residual,
                    "dual_residual": out.dual_residual,
                }),
            )
        }
        MethodArg::Isice => {
            if let Some((lr, sp)) = &modulators {
                let x = descriptors.as_ref().ok_or_else(|| {
                    CliError::input(
                        "modulated isice requires --input-kind descriptors (the gate reads the mean descriptor)",
                    )
                })?;
                let out = isice_modulated(&sigma, x, &isice_cfg, lr, sp)
                    .map_err(|e| CliError::numerical(format!("isice: {e}")))?;
                let est = out.s_raw.div_scalar(out.sigma_trace);
                (
                    est,
                    true,
                    isice_cfg.iterations,
                    json!({
                        "modulated": true,
                        "precheck_warnings": out.trace.precheck_warnings,
                        "estimator_scale": "s_raw / trace(sigma)",
                    }),
                )
            } else {
                let out = isice(&sigma, &isice_cfg)
                    .map_err(|e| CliError::numerical(format!("isice: {e}")))?;
                let est = out.s_raw.div_scalar(out.sigma_trace);
                (
                    est,
                    true,
                    isice_cfg.iterations,
                    json!({
                        "modulated": false,
                        "precheck_warnings": out.trace.precheck_warnings,
                        "estimator_scale": "s_raw / trace(sigma)",
                    }),
                )
            }
        }
        MethodArg::Precision => {
            let est = match &descriptors {
                Some(x) => precision_omega(x, isice_cfg.ns_iterations, isice_cfg.alpha)
                    .map_err(|e| CliError::numerical(format!("precision: {e}")))?,
                None => ns_inverse(&sigma, isice_cfg.ns_iterations, isice_cfg.alpha)
                    .map_err(|e| CliError::numerical(format!("precision: {e}")))?
                    .inverse,
            };
            (est, true, isice_cfg.ns_iterations, json!({}))
        }
    };
    let wall_ms = t0.elapsed().as_secs_f64() * 1e3;

    csvio::write_matrix(output, &est)?;
    write_sidecar(
        output, input, input_kind, method, &cfg, &est, converged, iterations, wall_ms, extra,
    )?;

    if !converged {
        return Err(CliError::numerical(
            "solver did not converge (matrix written and flagged in the sidecar)",
        ));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_sidecar(
    output: &Path,
    input: &Path,
    input_kind: InputKind,
    method: MethodArg,
    cfg: &FileConfig,
    est: &Mat,
    converged: bool,
    iterations: usize,
    wall_ms: f64,
    extra: serde_json::Value,
) -> CliResult {
    let method_name = match method {
        MethodArg::Mle => "mle",
        MethodArg::Glasso => "glasso",
        MethodArg::Isice => "isice",
        MethodArg::Precision => "precision",
    };
    let kind_name = match input_kind {
        InputKind::Descriptors => "descriptors",
        InputKind::Covariance => "covariance",
    };
    let sidecar = json!({
        "method": method_name,
        "input": input.display().to_string(),
        "input_kind": kind_name,
        "config": serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
        "diagnostics": {
            "rows": est.rows(),
            "cols": est.cols(),
            "converged": converged,
            "iterations": iterations,
            "sparsity_ratio": est.off_diag_sparsity(SPARSITY_TOL),
            "wall_ms": wall_ms,
            "extra": extra,
        }
    });
    let path = sidecar_path(output);
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar).expect("valid json") + "\n")
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn sidecar_path(output: &Path) -> std::path::PathBuf {
    let mut os = output.as_os_str().to_os_string();
    os.push(".json");
    std::path::PathBuf::from(os)
}
