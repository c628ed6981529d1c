//! Sample-path generation: Euler scheme for the covariate system and
//! inversion-sampled t-Levy increments for the response.

use crate::expr::EvalError;
use crate::model::{NoiseSpec, RegressionModel};
use crate::tlaw::{IncrementLaw, InversionConfig, LawError};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::fmt;

/// Equally spaced time grid t_j = initial + j h, j = 0..=n_steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingGrid {
    pub initial: f64,
    pub terminal: f64,
    pub n_steps: usize,
}

impl SamplingGrid {
    pub fn new(initial: f64, terminal: f64, n_steps: usize) -> Result<Self, SimError> {
        if !(terminal > initial) || n_steps == 0 {
            return Err(SimError::Grid(format!(
                "need terminal > initial and n_steps >= 1 (got initial={initial}, \
                 terminal={terminal}, n_steps={n_steps})"
            )));
        }
        Ok(Self { initial, terminal, n_steps })
    }

    pub fn h(&self) -> f64 {
        (self.terminal - self.initial) / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.n_steps).map(|j| self.initial + j as f64 * h).collect()
    }
}

/// Simulated trajectories: a shared time axis plus named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSet {
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl PathSet {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Grid step, assuming the equally spaced contract holds.
    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// CSV with a leading `time` column, 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for (name, _) in &self.columns {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for j in 0..self.times.len() {
            out.push_str(&format!("{:.16e}", self.times[j]));
            for (_, col) in &self.columns {
                out.push_str(&format!(",{:.16e}", col[j]));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV contract back: first column `time`, strictly
    /// increasing and equally spaced within 1e-9 relative tolerance.
    pub fn from_csv(text: &str) -> Result<Self, SimError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SimError::Csv("empty file".into()))?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names.first().copied() != Some("time") {
            return Err(SimError::Csv(format!(
                "first column must be named \"time\" (found {:?})",
                names.first().copied().unwrap_or("")
            )));
        }
        let ncol = names.len();
        let mut times = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); ncol - 1];
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != ncol {
                return Err(SimError::Csv(format!(
                    "row {} has {} fields, header has {ncol}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let mut parsed = fields.iter().map(|s| {
                let v: f64 = s.parse().map_err(|_| {
                    SimError::Csv(format!("row {}: {s:?} is not a number", lineno + 2))
                })?;
                if !v.is_finite() {
                    return Err(SimError::Csv(format!(
                        "row {}: non-finite value {s:?}",
                        lineno + 2
                    )));
                }
                Ok(v)
            });
            times.push(parsed.next().unwrap()?);
            for col in cols.iter_mut() {
                col.push(parsed.next().unwrap()?);
            }
        }
        if times.len() < 2 {
            return Err(SimError::Csv("need at least two rows".into()));
        }
        let span = times[times.len() - 1] - times[0];
        if !(span > 0.0) {
            return Err(SimError::Csv("time column must be increasing".into()));
        }
        let h = span / (times.len() - 1) as f64;
        for j in 1..times.len() {
            let dt = times[j] - times[j - 1];
            if !(dt > 0.0) || ((dt - h) / h).abs() > 1e-9 {
                return Err(SimError::Csv(format!(
                    "time column is not equally spaced at row {} (step {dt} vs {h}); \
                     resample the data onto an equal grid first",
                    j + 2
                )));
            }
        }
        Ok(PathSet {
            times,
            columns: names[1..]
                .iter()
                .map(|n| n.to_string())
                .zip(cols)
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    Grid(String),
    Csv(String),
    /// Expression evaluation failed at a concrete step and state.
    Eval { step: usize, state: String, source: EvalError },
    Law(LawError),
    Mismatch(String),
}

impl std::error::Error for SimError {}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Grid(msg) | Self::Csv(msg) | Self::Mismatch(msg) => f.write_str(msg),
            Self::Eval { step, state, source } => {
                write!(f, "evaluation failed at step {step}, state {state}: {source}")
            }
            Self::Law(e) => write!(f, "{e}"),
        }
    }
}

impl From<LawError> for SimError {
    fn from(e: LawError) -> Self {
        Self::Law(e)
    }
}

fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in data {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a named substream seed from a master seed; used to keep the
/// covariate-noise and t-Levy streams independent.
pub fn stream_seed(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a64(label.as_bytes()))
}

/// One standard normal draw by the Marsaglia polar method.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let v: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// One inverse Gaussian draw, mean `mu` and shape `lambda`, by the
/// Michael-Schucany-Haas transformation.
fn inverse_gaussian<R: Rng>(rng: &mut R, mu: f64, lambda: f64) -> f64 {
    let y = standard_normal(rng).powi(2);
    let x = mu + mu * mu * y / (2.0 * lambda)
        - mu / (2.0 * lambda) * (4.0 * mu * lambda * y + mu * mu * y * y).sqrt();
    let u: f64 = rng.random();
    if u <= mu / (mu + x) {
        x
    } else {
        mu * mu / x
    }
}

/// One increment Z_{t+dt} - Z_t of the NIG Levy process: a draw of
/// NIG(alpha, beta, delta dt, mu dt) as a normal mean-variance mixture of
/// an inverse Gaussian.
pub fn sample_nig_increment<R: Rng>(spec: &NoiseSpec, dt: f64, rng: &mut R) -> f64 {
    let (beta, delta, mu) = match *spec {
        NoiseSpec::Nig { beta, delta, mu, .. } => (beta, delta, mu),
        _ => panic!("sample_nig_increment requires a NIG noise spec"),
    };
    let gamma = spec.nig_gamma().expect("validated NIG spec");
    let dd = delta * dt;
    let z = inverse_gaussian(rng, dd / gamma, dd * dd);
    mu * dt + beta * z + z.sqrt() * standard_normal(rng)
}

/// Euler scheme for the covariate system on the grid:
/// X_{j+1} = X_j + drift(t_j, X_j) h + diffusion(t_j, X_j) dZ_j.
pub fn simulate_covariates(
    sys: &crate::model::CovariateSystem,
    grid: &SamplingGrid,
    seed: u64,
) -> Result<PathSet, SimError> {
    let q = sys.dim();
    let h = grid.h();
    let times = grid.times();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut columns: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            let mut c = Vec::with_capacity(times.len());
            c.push(sys.x_init[i]);
            c
        })
        .collect();

    let mut state = sys.x_init.clone();
    for j in 0..grid.n_steps {
        let t = times[j];
        let dz = match sys.noise {
            NoiseSpec::None => 0.0,
            NoiseSpec::Wiener => h.sqrt() * standard_normal(&mut rng),
            NoiseSpec::Nig { .. } => sample_nig_increment(&sys.noise, h, &mut rng),
        };
        let mut next = state.clone();
        for i in 0..q {
            let lookup = |name: &str| {
                if name == "t" {
                    Some(t)
                } else {
                    sys.state_names
                        .iter()
                        .position(|n| n == name)
                        .map(|k| state[k])
                }
            };
            let mu_i = sys.drift[i].eval(&lookup).map_err(|source| SimError::Eval {
                step: j,
                state: sys.state_names[i].clone(),
                source,
            })?;
            let sig_i = sys.diffusion[i].eval(&lookup).map_err(|source| SimError::Eval {
                step: j,
                state: sys.state_names[i].clone(),
                source,
            })?;
            next[i] = state[i] + mu_i * h + sig_i * dz;
        }
        state = next;
        for i in 0..q {
            columns[i].push(state[i]);
        }
    }

    Ok(PathSet {
        times,
        columns: sys
            .state_names
            .iter()
            .cloned()
            .zip(columns)
            .collect(),
    })
}

/// Adds the response column: J cumulated from i.i.d. increment-law draws
/// at the grid step, Y_t = mu . X_t + (sigma/sqrt(nu)) J_t. The sqrt(nu)
/// factor converts the law's classical-t marginal to the scaled-t
/// convention the quasi-likelihood estimators target, so that sigma is
/// recovered by estimation.
pub fn simulate_response(
    model: &RegressionModel,
    covariates: &PathSet,
    mu: &[f64],
    sigma: f64,
    law: &IncrementLaw,
    seed: u64,
) -> Result<PathSet, SimError> {
    let q = model.covariates.dim();
    if mu.len() != q {
        return Err(SimError::Mismatch(format!(
            "{q} covariates but {} coefficients",
            mu.len()
        )));
    }
    let n = covariates.len();
    if n < 2 {
        return Err(SimError::Mismatch("covariate paths need at least two rows".into()));
    }
    let h = covariates.step();
    if ((law.h - h) / h).abs() > 1e-9 {
        return Err(SimError::Mismatch(format!(
            "increment law was built at h={} but the grid step is {h}",
            law.h
        )));
    }

    let cols: Vec<&[f64]> = model
        .covariates
        .state_names
        .iter()
        .map(|name| {
            covariates.column(name).ok_or_else(|| {
                SimError::Mismatch(format!("covariate column {name:?} missing from paths"))
            })
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let draws = law.sample_with(n - 1, &mut rng);
    let scale = sigma / law.nu.sqrt();

    let mut y = Vec::with_capacity(n);
    let mut j_level = 0.0;
    for row in 0..n {
        if row > 0 {
            j_level += draws[row - 1];
        }
        let trend: f64 = (0..q).map(|i| mu[i] * cols[i][row]).sum();
        y.push(trend + scale * j_level);
    }

    let mut out = covariates.clone();
    out.columns.push((model.response_name.clone(), y));
    Ok(out)
}

/// Full simulation pipeline: covariates from the "covariate-noise"
/// substream, the response from the "t-levy" substream, both derived
/// from one master seed.
pub fn simulate_model(
    model: &RegressionModel,
    mu: &[f64],
    sigma: f64,
    nu: f64,
    law_config: &InversionConfig,
    grid: &SamplingGrid,
    master_seed: u64,
) -> Result<PathSet, SimError> {
    let law = crate::tlaw::build_law(nu, grid.h(), law_config)?;
    let covariates =
        simulate_covariates(&model.covariates, grid, stream_seed(master_seed, "covariate-noise"))?;
    simulate_response(
        model,
        &covariates,
        mu,
        sigma,
        &law,
        stream_seed(master_seed, "t-levy"),
    )
}
