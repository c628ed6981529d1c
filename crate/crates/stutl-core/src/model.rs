//! Declaration of the covariate SDE system and the assembled t-Levy
//! regression model.

use crate::expr::{self, Expr};
use std::collections::BTreeSet;
use std::fmt;

/// Driving noise of the covariate system: none (deterministic ODEs), a
/// standard Wiener process, or a normal inverse Gaussian Levy process.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    None,
    Wiener,
    Nig { alpha: f64, beta: f64, delta: f64, mu: f64 },
}

impl NoiseSpec {
    /// gamma = sqrt(alpha^2 - beta^2) of a NIG spec.
    pub fn nig_gamma(&self) -> Option<f64> {
        match self {
            Self::Nig { alpha, beta, .. } => Some((alpha * alpha - beta * beta).sqrt()),
            _ => None,
        }
    }
}

/// The q-dimensional covariate system dX = drift dt + diffusion dZ with a
/// single shared driving noise.
#[derive(Clone, Debug)]
pub struct CovariateSystem {
    pub state_names: Vec<String>,
    pub drift: Vec<Expr>,
    pub diffusion: Vec<Expr>,
    pub noise: NoiseSpec,
    pub x_init: Vec<f64>,
}

impl CovariateSystem {
    pub fn dim(&self) -> usize {
        self.state_names.len()
    }
}

/// Regression model Y = X . mu + sigma J on top of a covariate system.
#[derive(Clone, Debug)]
pub struct RegressionModel {
    pub covariates: CovariateSystem,
    pub coeff_names: Vec<String>,
    pub scale_name: String,
    pub df_name: String,
    pub response_name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    Dimension { what: String },
    UnknownIdentifier { context: String, name: String },
    InvalidNig { detail: String },
    Parse { context: String, detail: String },
    NameClash { name: String },
}

impl std::error::Error for ModelError {}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dimension { what } => write!(f, "dimension mismatch: {what}"),
            Self::UnknownIdentifier { context, name } => {
                write!(f, "unknown identifier {name:?} in {context}")
            }
            Self::InvalidNig { detail } => write!(f, "invalid NIG parameters: {detail}"),
            Self::Parse { context, detail } => write!(f, "{context}: {detail}"),
            Self::NameClash { name } => {
                write!(f, "name {name:?} is used for more than one role")
            }
        }
    }
}

/// Raw model description before validation; expression coefficients are
/// still strings.
#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub state_names: Vec<String>,
    pub drift: Vec<String>,
    pub diffusion: Vec<String>,
    pub noise: NoiseSpec,
    pub x_init: Vec<f64>,
    pub coeff_names: Vec<String>,
    pub scale_name: String,
    pub df_name: String,
    pub response_name: String,
}

/// Parses and validates a model description into a [`RegressionModel`];
/// every invariant is checked eagerly, no partially constructed model
/// escapes.
pub fn build_model(config: &ModelConfig) -> Result<RegressionModel, ModelError> {
    let q = config.state_names.len();
    if q == 0 {
        return Err(ModelError::Dimension { what: "at least one covariate state is required".into() });
    }
    for (what, len) in [
        ("drift expressions", config.drift.len()),
        ("diffusion expressions", config.diffusion.len()),
        ("initial values", config.x_init.len()),
        ("regression coefficients", config.coeff_names.len()),
    ] {
        if len != q {
            return Err(ModelError::Dimension {
                what: format!("{q} states but {len} {what}"),
            });
        }
    }

    if let NoiseSpec::Nig { alpha, beta, delta, .. } = config.noise {
        if !(alpha * alpha > beta * beta) {
            return Err(ModelError::InvalidNig {
                detail: format!("alpha^2 must exceed beta^2 (alpha={alpha}, beta={beta})"),
            });
        }
        if !(delta > 0.0) {
            return Err(ModelError::InvalidNig { detail: format!("delta must be positive (got {delta})") });
        }
    }

    let mut allowed: BTreeSet<&str> = config.state_names.iter().map(|s| s.as_str()).collect();
    if allowed.len() != q {
        return Err(ModelError::NameClash {
            name: duplicate_name(&config.state_names).unwrap_or_default(),
        });
    }
    allowed.insert("t");

    let parse_all = |kind: &str, sources: &[String]| -> Result<Vec<Expr>, ModelError> {
        sources
            .iter()
            .enumerate()
            .map(|(i, src)| {
                let context = format!("{kind} expression for {}", config.state_names[i]);
                let e = expr::parse(src).map_err(|err| ModelError::Parse {
                    context: context.clone(),
                    detail: err.to_string(),
                })?;
                for v in e.variables() {
                    if !allowed.contains(v.as_str()) {
                        return Err(ModelError::UnknownIdentifier { context, name: v });
                    }
                }
                Ok(e)
            })
            .collect()
    };
    let drift = parse_all("drift", &config.drift)?;
    let diffusion = parse_all("diffusion", &config.diffusion)?;

    // coefficient, scale, df and response names must be pairwise distinct
    let mut roles: Vec<&str> = config.coeff_names.iter().map(|s| s.as_str()).collect();
    roles.push(&config.scale_name);
    roles.push(&config.df_name);
    roles.push(&config.response_name);
    let unique: BTreeSet<&str> = roles.iter().copied().collect();
    if unique.len() != roles.len() {
        let names: Vec<String> = roles.iter().map(|s| s.to_string()).collect();
        return Err(ModelError::NameClash { name: duplicate_name(&names).unwrap_or_default() });
    }

    Ok(RegressionModel {
        covariates: CovariateSystem {
            state_names: config.state_names.clone(),
            drift,
            diffusion,
            noise: config.noise.clone(),
            x_init: config.x_init.clone(),
        },
        coeff_names: config.coeff_names.clone(),
        scale_name: config.scale_name.clone(),
        df_name: config.df_name.clone(),
        response_name: config.response_name.clone(),
    })
}

fn duplicate_name(names: &[String]) -> Option<String> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Some(n.clone());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deterministic_config() -> ModelConfig {
        ModelConfig {
            state_names: vec!["X1".into(), "X2".into()],
            drift: vec!["-5*sin(5*t)".into(), "cos(t)".into()],
            diffusion: vec!["0".into(), "0".into()],
            noise: NoiseSpec::None,
            x_init: vec![1.0, 0.0],
            coeff_names: vec!["mu1".into(), "mu2".into()],
            scale_name: "sigma0".into(),
            df_name: "nu".into(),
            response_name: "Y".into(),
        }
    }

    #[test]
    fn deterministic_system_builds() {
        let m = build_model(&deterministic_config()).unwrap();
        assert_eq!(m.covariates.dim(), 2);
        assert_eq!(m.coeff_names, vec!["mu1", "mu2"]);
    }

    #[test]
    fn nig_ou_system_builds() {
        let mut c = deterministic_config();
        c.drift = vec!["X2".into(), "-X2".into()];
        c.diffusion = vec!["0".into(), "2".into()];
        c.noise = NoiseSpec::Nig { alpha: 1.0, beta: 0.0, delta: 1.0, mu: 0.0 };
        c.x_init = vec![0.0, 0.0];
        let m = build_model(&c).unwrap();
        assert_eq!(m.covariates.noise.nig_gamma(), Some(1.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut c = deterministic_config();
        c.x_init = vec![1.0];
        match build_model(&c) {
            Err(ModelError::Dimension { what }) => assert!(what.contains("initial values")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_is_an_error() {
        let mut c = deterministic_config();
        c.drift[0] = "-5*sin(5*s)".into();
        match build_model(&c) {
            Err(ModelError::UnknownIdentifier { name, .. }) => assert_eq!(name, "s"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_nig_is_an_error() {
        let mut c = deterministic_config();
        c.noise = NoiseSpec::Nig { alpha: 1.0, beta: 2.0, delta: 1.0, mu: 0.0 };
        assert!(matches!(build_model(&c), Err(ModelError::InvalidNig { .. })));
        c.noise = NoiseSpec::Nig { alpha: 1.0, beta: 0.0, delta: 0.0, mu: 0.0 };
        assert!(matches!(build_model(&c), Err(ModelError::InvalidNig { .. })));
    }

    #[test]
    fn role_name_clash_is_an_error() {
        let mut c = deterministic_config();
        c.scale_name = "mu1".into();
        assert!(matches!(build_model(&c), Err(ModelError::NameClash { .. })));
    }
}
