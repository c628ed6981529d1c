//! Declarative model configuration file (TOML) and its bridge to the core
//! model, law and sampling types.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use stutl_core::{InversionConfig, InversionMethod, ModelConfig, NoiseSpec, SamplingGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigFile {
    pub covariates: CovariatesSection,
    pub regression: RegressionSection,
    pub law: LawSection,
    pub sampling: SamplingSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_params: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariatesSection {
    pub states: Vec<String>,
    pub drift: Vec<String>,
    pub diffusion: Vec<String>,
    /// "none", "wiener" or "nig".
    pub noise: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nig: Option<NigSection>,
    pub x_init: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NigSection {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSection {
    pub coeffs: Vec<String>,
    pub scale: String,
    pub df: String,
    pub response: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    /// "LAG", "COS" or "FFT".
    pub method: String,
    pub up: f64,
    pub low: f64,
    pub n: usize,
    pub n_grid: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub initial: f64,
    pub terminal: f64,
    pub n_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    /// Step-1 sub-terminal time (the PT argument).
    pub pt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<BTreeMap<String, f64>>,
    pub lower: BTreeMap<String, f64>,
    pub upper: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct ConfigError {
    pub section: String,
    pub message: String,
}

impl std::error::Error for ConfigError {}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config [{}]: {}", self.section, self.message)
    }
}

fn err(section: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { section: section.into(), message: message.into() }
}

impl ModelConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| err("document", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Core model description (expressions still unparsed).
    pub fn model_config(&self) -> Result<ModelConfig, ConfigError> {
        let noise = match self.covariates.noise.to_ascii_lowercase().as_str() {
            "none" => NoiseSpec::None,
            "wiener" => NoiseSpec::Wiener,
            "nig" => {
                let nig = self.covariates.nig.ok_or_else(|| {
                    err("covariates", "noise = \"nig\" requires a nig = { alpha, beta, delta, mu } table")
                })?;
                NoiseSpec::Nig {
                    alpha: nig.alpha,
                    beta: nig.beta,
                    delta: nig.delta,
                    mu: nig.mu,
                }
            }
            other => {
                return Err(err(
                    "covariates",
                    format!("unknown noise kind {other:?}; use none, wiener or nig"),
                ))
            }
        };
        Ok(ModelConfig {
            state_names: self.covariates.states.clone(),
            drift: self.covariates.drift.clone(),
            diffusion: self.covariates.diffusion.clone(),
            noise,
            x_init: self.covariates.x_init.clone(),
            coeff_names: self.regression.coeffs.clone(),
            scale_name: self.regression.scale.clone(),
            df_name: self.regression.df.clone(),
            response_name: self.regression.response.clone(),
        })
    }

    pub fn inversion_config(&self) -> Result<InversionConfig, ConfigError> {
        let method = InversionMethod::parse(&self.law.method)
            .map_err(|e| err("law", e.to_string()))?;
        InversionConfig::new(method, self.law.up, self.law.low, self.law.n, self.law.n_grid)
            .map_err(|e| err("law", e.to_string()))
    }

    pub fn sampling_grid(&self) -> Result<SamplingGrid, ConfigError> {
        SamplingGrid::new(
            self.sampling.initial,
            self.sampling.terminal,
            self.sampling.n_steps,
        )
        .map_err(|e| err("sampling", e.to_string()))
    }

    /// True parameter values in model order (mu.., sigma, nu); required by
    /// the simulate command.
    pub fn true_params(&self) -> Result<(Vec<f64>, f64, f64), ConfigError> {
        let table = self
            .true_params
            .as_ref()
            .ok_or_else(|| err("true_params", "section is required for simulation"))?;
        let get = |name: &str| {
            table
                .get(name)
                .copied()
                .ok_or_else(|| err("true_params", format!("missing value for {name:?}")))
        };
        let mu = self
            .regression
            .coeffs
            .iter()
            .map(|n| get(n))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok((mu, get(&self.regression.scale)?, get(&self.regression.df)?))
    }
}
