//! Linear regression models driven by a Student-t Levy process: increment
//! laws by characteristic-function inversion, covariate SDE simulation,
//! and two-step quasi-maximum-likelihood estimation.

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with
// the out-of-domain sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

mod fft;
mod optim;

pub mod estimate;
pub mod expr;
pub mod model;
pub mod simulate;
pub mod specfun;
pub mod tlaw;

pub use estimate::{confidence_interval, fit, FitBounds, FitError, FitProblem, FitResult, FitWindow};
pub use model::{build_model, CovariateSystem, ModelConfig, ModelError, NoiseSpec, RegressionModel};
pub use simulate::{
    sample_nig_increment, simulate_covariates, simulate_model, simulate_response, stream_seed,
    PathSet, SamplingGrid, SimError,
};
pub use specfun::{gauss_laguerre, QuadratureRule, SpecFunError};
pub use tlaw::{
    build_law, cf_unit, compare_methods, IncrementLaw, InversionConfig, InversionMethod, LawError,
};

// built tables and models are immutable and shareable across threads
const _: () = {
    const fn assert_sync_send<T: Sync + Send>() {}
    assert_sync_send::<IncrementLaw>();
    assert_sync_send::<QuadratureRule>();
    assert_sync_send::<RegressionModel>();
    assert_sync_send::<PathSet>();
    assert_sync_send::<FitResult>();
};
