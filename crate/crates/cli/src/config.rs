//! Flat TOML run configurations. Every key has the published default, so an
//! empty file (or none) reproduces the reference experiments; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use mortcast::enkf::NoiseShape;
use mortcast::overdose::{
    EdgePolicy, FitSettings, InitialProfile, OverdoseNoise, OverdoseParams, PopulationModel,
};
use mortcast::twin::TwinConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub mu: f64,
    pub lambda: f64,
    /// Times of the written age profiles.
    pub times: Vec<f64>,
    pub n_a: usize,
    pub delta_a: f64,
    /// Peak ages are written on `0, peak_step, ..., peak_horizon`.
    pub peak_horizon: f64,
    pub peak_step: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            mu: 0.08,
            lambda: 0.2,
            times: vec![0.1, 2.0, 4.5],
            n_a: 1000,
            delta_a: 0.12,
            peak_horizon: 10.0,
            peak_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinFileConfig {
    pub n_a: usize,
    pub delta_a: f64,
    pub delta_t: f64,
    pub horizon: f64,
    pub update_interval: usize,
    pub ensemble_size: usize,
    pub seed: u64,
    pub truth_mu: f64,
    pub truth_lambda: f64,
    pub process_noise: f64,
    pub process_noise_shape: NoiseShape,
    pub obs_noise: f64,
    pub init_density: f64,
    pub init_param: f64,
    pub init_density_var: f64,
    pub init_param_var: f64,
}

impl Default for TwinFileConfig {
    fn default() -> Self {
        TwinConfig::default().into()
    }
}

impl From<TwinConfig> for TwinFileConfig {
    fn from(c: TwinConfig) -> Self {
        Self {
            n_a: c.n_a,
            delta_a: c.delta_a,
            delta_t: c.delta_t,
            horizon: c.horizon,
            update_interval: c.update_interval,
            ensemble_size: c.ensemble_size,
            seed: c.seed,
            truth_mu: c.truth_mu,
            truth_lambda: c.truth_lambda,
            process_noise: c.process_noise,
            process_noise_shape: c.process_noise_shape,
            obs_noise: c.obs_noise,
            init_density: c.init_density,
            init_param: c.init_param,
            init_density_var: c.init_density_var,
            init_param_var: c.init_param_var,
        }
    }
}

impl TwinFileConfig {
    pub fn to_core(&self) -> TwinConfig {
        TwinConfig {
            n_a: self.n_a,
            delta_a: self.delta_a,
            delta_t: self.delta_t,
            horizon: self.horizon,
            update_interval: self.update_interval,
            ensemble_size: self.ensemble_size,
            seed: self.seed,
            truth_mu: self.truth_mu,
            truth_lambda: self.truth_lambda,
            process_noise: self.process_noise,
            process_noise_shape: self.process_noise_shape,
            obs_noise: self.obs_noise,
            init_density: self.init_density,
            init_param: self.init_param,
            init_density_var: self.init_density_var,
            init_param_var: self.init_param_var,
        }
    }
}

/// Settings shared by `fit` and `forecast`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitFileConfig {
    /// File or directory with WONDER exports (`.txt`) or canonical CSV.
    pub data: Option<PathBuf>,
    pub n_a: usize,
    pub delta_a: f64,
    pub delta_t: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    pub start_year: i32,
    pub mu: f64,
    pub r0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub init_common_var: f64,
    pub init_param_var: f64,
    pub process_noise: f64,
    pub process_noise_shape: NoiseShape,
    pub obs_noise: f64,
    pub n0: f64,
    pub delta_n: f64,
    pub profile_fraction: f64,
    pub profile_alpha: f64,
    pub profile_beta: f64,
    pub edge_policy: EdgePolicy,
    pub forecast_years: usize,
}

impl Default for FitFileConfig {
    fn default() -> Self {
        let s = FitSettings::<f64>::default();
        let p = s.initial_params;
        Self {
            data: None,
            n_a: s.n_a,
            delta_a: s.delta_a,
            delta_t: s.delta_t,
            ensemble_size: s.ensemble_size,
            seed: s.seed,
            start_year: s.start_year,
            mu: p.mu,
            r0: p.r0,
            alpha1: p.alpha1,
            beta1: p.beta1,
            alpha2: p.alpha2,
            beta2: p.beta2,
            init_common_var: s.init_common_var,
            init_param_var: s.init_param_var,
            process_noise: s.noise.process,
            process_noise_shape: s.noise.process_shape,
            obs_noise: s.noise.observation,
            n0: s.population.n0,
            delta_n: s.population.delta_n,
            profile_fraction: s.profile.fraction,
            profile_alpha: s.profile.alpha,
            profile_beta: s.profile.beta,
            edge_policy: s.edge_policy,
            forecast_years: s.forecast_years,
        }
    }
}

impl FitFileConfig {
    pub fn to_settings(&self) -> Result<FitSettings<f64>, CliError> {
        let s = FitSettings {
            n_a: self.n_a,
            delta_a: self.delta_a,
            delta_t: self.delta_t,
            ensemble_size: self.ensemble_size,
            seed: self.seed,
            start_year: self.start_year,
            initial_params: OverdoseParams::new(self.mu, self.r0, self.alpha1, self.beta1, self.alpha2, self.beta2)?,
            init_common_var: self.init_common_var,
            init_param_var: self.init_param_var,
            noise: OverdoseNoise {
                process: self.process_noise,
                process_shape: self.process_noise_shape,
                observation: self.obs_noise,
            },
            population: PopulationModel::new(self.n0, self.delta_n)?,
            profile: InitialProfile {
                fraction: self.profile_fraction,
                alpha: self.profile_alpha,
                beta: self.profile_beta,
            },
            edge_policy: self.edge_policy,
            forecast_years: self.forecast_years,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Reads `path` (or the defaults when absent).
pub fn load<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C, CliError> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// TOML text of the effective configuration and its SHA-256.
pub fn fingerprint<C: Serialize>(config: &C) -> Result<(String, String), CliError> {
    let text = toml::to_string(config).map_err(|e| CliError::Config(e.to_string()))?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    Ok((text, hash))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
