//! Shared fixtures for the criterion benches.

use stutl_core::{build_model, ModelConfig, NoiseSpec, RegressionModel};

pub fn deterministic_model() -> RegressionModel {
    build_model(&ModelConfig {
        state_names: vec!["X1".into(), "X2".into()],
        drift: vec!["-5*sin(5*t)".into(), "cos(t)".into()],
        diffusion: vec!["0".into(), "0".into()],
        noise: NoiseSpec::None,
        x_init: vec![1.0, 0.0],
        coeff_names: vec!["mu1".into(), "mu2".into()],
        scale_name: "sigma0".into(),
        df_name: "nu".into(),
        response_name: "Y".into(),
    })
    .expect("valid model")
}
