//! JSON configuration schema.
//!
//! One file can carry method settings (for `estimate`) and experiment
//! settings (for `fig5`/`sweep`); unknown sections are rejected so typos
//! surface as input errors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use sice_core::glasso::AdmmConfig;
use sice_core::isice::IsiceConfig;
use sice_core::modulator::ModulatorParams;
use sice_core::synth::Structure;

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Iterative-solver settings (also supplies ns_iterations/alpha for
    /// the precision baseline).
    pub isice: Option<IsiceConfigFile>,
    /// ADMM reference-solver settings.
    pub admm: Option<AdmmConfigFile>,
    /// Ridge for the unpenalized MLE; null selects the default
    /// (1e-6 when n <= d, 0 otherwise).
    pub mle_ridge: Option<f64>,
    /// Learning-rate modulator (estimate --method isice on descriptor
    /// input only; both modulators must be given together).
    pub modulator_lr: Option<ModulatorParamsFile>,
    /// Sparsity modulator.
    pub modulator_sp: Option<ModulatorParamsFile>,

    // experiment settings (fig5 / sweep)
    pub d: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub structure: Option<String>,
    pub density: Option<f64>,
    pub trials: Option<usize>,
    pub master_seed: Option<u64>,
    pub methods: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IsiceConfigFile {
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub iterations: Option<usize>,
    pub ns_iterations: Option<usize>,
    pub alpha: Option<f64>,
}

impl IsiceConfigFile {
    pub fn to_config(&self) -> IsiceConfig {
        let d = IsiceConfig::default();
        IsiceConfig {
            lambda: self.lambda.unwrap_or(d.lambda),
            eta: self.eta.unwrap_or(d.eta),
            iterations: self.iterations.unwrap_or(d.iterations),
            ns_iterations: self.ns_iterations.unwrap_or(d.ns_iterations),
            alpha: self.alpha.unwrap_or(d.alpha),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmConfigFile {
    pub rho: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub lambda: Option<f64>,
}

impl AdmmConfigFile {
    pub fn to_config(&self) -> AdmmConfig {
        let d = AdmmConfig::default();
        AdmmConfig {
            rho: self.rho.unwrap_or(d.rho),
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            lambda: self.lambda.unwrap_or(d.lambda),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatorParamsFile {
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_tau() -> f64 {
    0.01
}

fn default_gamma() -> f64 {
    1e-4
}

impl ModulatorParamsFile {
    pub fn to_params(&self) -> ModulatorParams {
        ModulatorParams {
            weights: self.weights.clone(),
            bias: self.bias,
            tau: self.tau,
            gamma: self.gamma,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<FileConfig, CliError> {
        match path {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::default()),
        }
    }

    pub fn isice_config(&self) -> IsiceConfig {
        self.isice
            .as_ref()
            .map(|c| c.to_config())
            .unwrap_or_default()
    }

    pub fn admm_config(&self) -> AdmmConfig {
        self.admm
            .as_ref()
            .map(|c| c.to_config())
            .unwrap_or_default()
    }

    pub fn structure(&self) -> Result<Structure, CliError> {
        match self.structure.as_deref() {
            Some("sparse") => Ok(Structure::Sparse),
            Some("dense") => Ok(Structure::Dense),
            Some(other) => Err(CliError::input(format!(
                "structure must be \"dense\" or \"sparse\", got {other:?}"
            ))),
            None => Err(CliError::input("config is missing \"structure\"")),
        }
    }
}
