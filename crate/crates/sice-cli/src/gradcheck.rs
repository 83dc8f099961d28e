//! Finite-difference validation of the tape gradients, as a CLI report.
//!
//! Three threshold tiers: individual primitives and the log-determinant
//! at 1e-6, the Newton-Schulz inverse pipeline at 1e-5, and the full
//! iterative-solver pipeline at 1e-4 (entries whose evaluations cross a
//! ReLU kink are excluded). Exit 0 only when every line passes.

use sice_core::autodiff::{grad_check, NodeId, Tape, GRAD_CHECK_H};
use sice_core::isice::{isice_node, IsiceConfig};
use sice_core::newton_schulz::ns_inverse_node;
use sice_core::rng::SplitMix64;
use sice_core::synth::random_spd;
use sice_core::{Mat, Result as CoreResult};

use crate::{CliError, CliResult};

pub const PRIMITIVE_TOL: f64 = 1e-6;
pub const NS_PIPELINE_TOL: f64 = 1e-5;
pub const ISICE_PIPELINE_TOL: f64 = 1e-4;

pub fn cmd_gradcheck(
    dim: usize,
    iterations: usize,
    ns_iterations: usize,
    seed: u64,
    corrupt_adjoint: bool,
) -> CliResult {
    if dim == 0 || dim > 16 {
        return Err(CliError::input(format!(
            "dim must be in 1..=16 (finite differences cost), got {dim}"
        )));
    }
    println!("gradient check: dim={dim} iterations={iterations} ns_iterations={ns_iterations} seed={seed}");

    let mut all_ok = true;
    let mut report = |name: &str, err: f64, tol: f64| {
        let ok = err < tol;
        all_ok &= ok;
        println!(
            "{name:<24} max_rel_err {err:>12.3e}  (tol {tol:.0e})  {}",
            if ok { "PASS" } else { "FAIL" }
        );
    };

    for (name, x, f) in primitive_cases(dim, seed) {
        let err = grad_check(&f, &x, GRAD_CHECK_H)
            .map_err(|e| CliError::numerical(format!("{name}: {e}")))?;
        report(name, err, PRIMITIVE_TOL);
    }

    // log-determinant on a conditioned SPD input
    let spd = random_spd(dim, 0.4, 2.5, seed.wrapping_add(101));
    let err = grad_check(&|t: &mut Tape, x| t.logdet(x), &spd, GRAD_CHECK_H)
        .map_err(|e| CliError::numerical(format!("logdet: {e}")))?;
    report("logdet", err, PRIMITIVE_TOL);

    // Newton-Schulz inverse pipeline
    let ns_in = random_spd(dim, 0.4, 2.5, seed.wrapping_add(202));
    let ns = ns_iterations;
    let err = grad_check(
        &|t: &mut Tape, x| {
            let inv = ns_inverse_node(t, x, ns)?;
            t.frob_norm_sq(inv)
        },
        &ns_in,
        GRAD_CHECK_H,
    )
    .map_err(|e| CliError::numerical(format!("ns pipeline: {e}")))?;
    report("ns_inverse pipeline", err, NS_PIPELINE_TOL);

    // full solver pipeline (with the corruption hook for the negative
    // control: one analytic adjoint entry is shifted before comparison)
    let cfg = IsiceConfig {
        lambda: 0.01,
        eta: 1.0,
        iterations,
        ns_iterations,
        alpha: 1e-9,
    };
    let sigma = random_spd(dim, 0.4, 2.5, seed.wrapping_add(303));
    let err = isice_pipeline_err(&sigma, &cfg, corrupt_adjoint)
        .map_err(|e| CliError::numerical(format!("solver pipeline: {e}")))?;
    report("isice pipeline", err, ISICE_PIPELINE_TOL);

    if all_ok {
        Ok(())
    } else {
        Err(CliError::numerical("gradient check failed".to_string()))
    }
}

fn eval_loss(sigma: &Mat, cfg: &IsiceConfig) -> CoreResult<(f64, u64)> {
    let mut tape = Tape::new();
    let x = tape.leaf(sigma.clone());
    let nodes = isice_node(&mut tape, x, cfg)?;
    let loss = tape.frob_norm_sq(nodes.s_star)?;
    Ok((tape.scalar_value(loss)?, tape.relu_signature()))
}

/// Central-difference check of the solver-pipeline gradient, with the
/// same kink exclusion as `grad_check`. When `corrupt` is set, entry
/// (0, 0) of the analytic gradient is shifted by 1e-3 so the comparison
/// must fail.
fn isice_pipeline_err(sigma: &Mat, cfg: &IsiceConfig, corrupt: bool) -> CoreResult<f64> {
    let mut tape = Tape::new();
    let x0 = tape.leaf(sigma.clone());
    let nodes = isice_node(&mut tape, x0, cfg)?;
    let loss = tape.frob_norm_sq(nodes.s_star)?;
    let grads = tape.backward(loss)?;
    let mut g = grads
        .get(x0)
        .cloned()
        .unwrap_or_else(|| Mat::zeros(sigma.rows(), sigma.cols()));
    if corrupt {
        g[(0, 0)] += 1e-3;
    }

    let h = GRAD_CHECK_H;
    let mut max_err = 0.0f64;
    for i in 0..sigma.rows() {
        for j in 0..sigma.cols() {
            let mut xp = sigma.clone();
            xp[(i, j)] += h;
            let (jp, sig_p) = eval_loss(&xp, cfg)?;
            let mut xm = sigma.clone();
            xm[(i, j)] -= h;
            let (jm, sig_m) = eval_loss(&xm, cfg)?;
            if sig_p != sig_m {
                continue;
            }
            let fd = (jp - jm) / (2.0 * h);
            let err = (g[(i, j)] - fd).abs() / g[(i, j)].abs().max(1.0);
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}

type Case = (
    &'static str,
    Mat,
    Box<dyn Fn(&mut Tape, NodeId) -> CoreResult<NodeId>>,
);

/// One scalar-valued check per primitive. Matrix-valued ops are
/// scalarized through the fixed linear functional trace(C^T op(X)).
fn primitive_cases(d: usize, seed: u64) -> Vec<Case> {
    let mut rng = SplitMix64::new(seed.wrapping_add(1));
    let mut rand = |r: usize, c: usize| {
        let mut m = Mat::zeros(r, c);
        for v in m.data_mut() {
            *v = rng.next_range(-1.0, 1.0);
        }
        m
    };

    let linear = |tape: &mut Tape, c: Mat, y: NodeId| -> CoreResult<NodeId> {
        let cn = tape.leaf(c);
        let ct = tape.transpose(cn)?;
        let prod = tape.matmul(ct, y)?;
        tape.trace(prod)
    };

    let mut cases: Vec<Case> = Vec::new();
    let c_sq = rand(d, d);

    {
        let b = rand(d, d);
        let c = c_sq.clone();
        cases.push((
            "matmul",
            rand(d, d),
            Box::new(move |t, x| {
                let bn = t.leaf(b.clone());
                let y = t.matmul(x, bn)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let c = rand(d, d);
        cases.push((
            "transpose",
            rand(d, d),
            Box::new(move |t, x| {
                let y = t.transpose(x)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let b = rand(d, d);
        let c = c_sq.clone();
        cases.push((
            "add",
            rand(d, d),
            Box::new(move |t, x| {
                let bn = t.leaf(b.clone());
                let y = t.add(x, bn)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let b = rand(d, d);
        let c = c_sq.clone();
        cases.push((
            "sub",
            rand(d, d),
            Box::new(move |t, x| {
                let bn = t.leaf(b.clone());
                let y = t.sub(bn, x)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let c = c_sq.clone();
        cases.push((
            "scalar_mul",
            rand(d, d),
            Box::new(move |t, x| {
                let s = t.scalar_leaf(1.3);
                let y = t.scalar_mul(x, s)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let a = rand(d, d);
        let c = c_sq.clone();
        cases.push((
            "scalar_div",
            Mat::from_rows(&[&[1.7]]),
            Box::new(move |t, s| {
                let an = t.leaf(a.clone());
                let y = t.scalar_div(an, s)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let c = c_sq.clone();
        cases.push((
            "relu_elem",
            rand(d, d),
            Box::new(move |t, x| {
                let y = t.relu(x)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let c = c_sq.clone();
        cases.push((
            "sigmoid_elem",
            rand(d, d),
            Box::new(move |t, x| {
                let y = t.sigmoid(x)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let c = c_sq.clone();
        cases.push((
            "sym",
            rand(d, d),
            Box::new(move |t, x| {
                let y = t.sym(x)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    cases.push(("trace", rand(d, d), Box::new(|t, x| t.trace(x))));
    cases.push((
        "frob_norm_sq",
        rand(d, d),
        Box::new(|t, x| t.frob_norm_sq(x)),
    ));
    {
        let v = rand(d, 1);
        let c = rand(d, 1);
        cases.push((
            "matvec",
            rand(d, d),
            Box::new(move |t, x| {
                let vn = t.leaf(v.clone());
                let y = t.matvec(x, vn)?;
                linear(t, c.clone(), y)
            }),
        ));
    }
    {
        let b = rand(d, 1);
        cases.push((
            "dot",
            rand(d, 1),
            Box::new(move |t, x| {
                let bn = t.leaf(b.clone());
                t.dot(x, bn)
            }),
        ));
    }
    cases
}
