//! On-the-fly learning-rate and sparsity modulation.
//!
//! A modulator is a single linear map over the mean descriptor followed
//! by a sigmoid gate: `kappa = tau + 2 sigmoid(w^T xbar + b)`, with range
//! `(tau, tau + 2)`. One modulator scales the step size inside the
//! iterative solver, another scales the sparsity constant. The penalty
//! `gamma (kappa - 1)^2` keeps `kappa` near the neutral value 1 when the
//! parameters are trained; training itself is out of scope here, but
//! gradients with respect to the parameters are available by building
//! the gate on a [`Tape`] with [`kappa_node`].

use alloc::vec::Vec;

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::fm;
use crate::isice::{isice_with_kappa, IsiceConfig, IsiceOutcome};
use crate::mat::Mat;
use crate::pooling::DescriptorSet;

/// Parameters of one modulator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulatorParams {
    /// Weights of the d x 1 linear map.
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Offset keeping the gate strictly positive (default 0.01).
    pub tau: f64,
    /// Penalty weight (default 0.0001).
    pub gamma: f64,
}

impl ModulatorParams {
    pub fn new(weights: Vec<f64>, bias: f64) -> ModulatorParams {
        ModulatorParams {
            weights,
            bias,
            tau: 0.01,
            gamma: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::BadParameter {
                name: "tau",
                value: self.tau,
            });
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::BadParameter {
                name: "gamma",
                value: self.gamma,
            });
        }
        if !self.weights.iter().all(|v| v.is_finite()) || !self.bias.is_finite() {
            return Err(Error::NonFinite {
                what: "modulator parameters",
            });
        }
        Ok(())
    }
}

/// Row means of the descriptor matrix (length d).
pub fn mean_descriptor(x: &DescriptorSet) -> Vec<f64> {
    let n = x.samples() as f64;
    (0..x.channels())
        .map(|i| x.mat().row(i).iter().sum::<f64>() / n)
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + fm::exp(-z))
}

/// Gate value `tau + 2 sigmoid(w^T xbar + b)`.
pub fn kappa(xbar: &[f64], p: &ModulatorParams) -> Result<f64> {
    p.validate()?;
    if xbar.len() != p.weights.len() {
        return Err(Error::InvalidLength {
            expected: p.weights.len(),
            got: xbar.len(),
        });
    }
    let mut z = 0.0;
    for (w, x) in p.weights.iter().zip(xbar.iter()) {
        z += w * x;
    }
    let s = sigmoid(z + p.bias);
    Ok(p.tau + s * 2.0)
}

/// Regularization `gamma (kappa - 1)^2`, added to a minimized loss.
pub fn kappa_penalty(kappa: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::BadParameter {
            name: "gamma",
            value: gamma,
        });
    }
    let dev = kappa - 1.0;
    Ok(gamma * dev * dev)
}

/// Runs the iterative solver with both modulators applied: the step
/// scale is multiplied by the learning-rate gate and the sparsity
/// constant by the sparsity gate. With both gates exactly 1 the output
/// is bitwise identical to the unmodulated solver.
pub fn isice_modulated(
    sigma: &Mat,
    x: &DescriptorSet,
    cfg: &IsiceConfig,
    lr_mod: &ModulatorParams,
    sp_mod: &ModulatorParams,
) -> Result<IsiceOutcome> {
    let xbar = mean_descriptor(x);
    let k_lr = kappa(&xbar, lr_mod)?;
    let k_sp = kappa(&xbar, sp_mod)?;
    isice_with_kappa(sigma, cfg, k_lr, k_sp)
}

/// Records the gate on a tape: `kappa = tau + 2 sigmoid(dot(w, xbar) + b)`.
/// `w` and `bias` are typically leaves so that `backward` yields
/// parameter gradients; `xbar` is a d x 1 node.
pub fn kappa_node(
    tape: &mut Tape,
    xbar: NodeId,
    w: NodeId,
    bias: NodeId,
    tau: f64,
) -> Result<NodeId> {
    let z = tape.dot(w, xbar)?;
    let zb = tape.add(z, bias)?;
    let s = tape.sigmoid(zb)?;
    let two = tape.scalar_leaf(2.0);
    let ts = tape.scalar_mul(s, two)?;
    let tau_leaf = tape.scalar_leaf(tau);
    tape.add(tau_leaf, ts)
}
