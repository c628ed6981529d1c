//! Two-step quasi-maximum-likelihood estimation of (mu, sigma, nu): a
//! Cauchy quasi-likelihood over the high-frequency increments on [0, Bn]
//! for the trend and scale, then a Student-t quasi-likelihood over the
//! unit-time residuals on [0, Tn] for the degrees of freedom.

use crate::model::RegressionModel;
use crate::optim::{minimize_box, NmOptions};
use crate::simulate::PathSet;
use crate::specfun::{digamma, log_gamma, norm_quantile, trigamma};
use std::f64::consts::PI;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum FitError {
    Window(String),
    Domain { what: &'static str, value: f64 },
    Columns { expected: Vec<String>, found: Vec<String> },
    Collinear { name: String },
    Data(String),
}

impl std::error::Error for FitError {}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Window(msg) | Self::Data(msg) => f.write_str(msg),
            Self::Domain { what, value } => write!(f, "domain error: {what} (got {value})"),
            Self::Columns { expected, found } => write!(
                f,
                "data columns do not match the model: expected {expected:?}, found {found:?}"
            ),
            Self::Collinear { name } => write!(
                f,
                "covariate increments are collinear (Gram pivot vanished at {name:?})"
            ),
        }
    }
}

/// Observation window of the two-step fit: step h, sub-terminal Bn for
/// step 1 and full terminal Tn, with Nn = floor(Bn/h) increments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitWindow {
    pub h: f64,
    pub bn: f64,
    pub tn: f64,
    pub nn: usize,
}

impl FitWindow {
    pub fn n_per_unit(&self) -> f64 {
        1.0 / self.h
    }

    /// floor(Tn): the number of unit-time residuals.
    pub fn t_hat(&self) -> usize {
        (self.tn + 1e-9).floor() as usize
    }
}

/// Data prepared for estimation: increments over [0, Bn] and the rows
/// nearest the integer times 0..=floor(Tn).
#[derive(Clone, Debug)]
pub struct FitProblem {
    state_names: Vec<String>,
    dy: Vec<f64>,
    dx: Vec<f64>, // nn x q, row major
    y_unit: Vec<f64>,
    x_unit: Vec<f64>, // (t_hat + 1) x q, row major
    pub window: FitWindow,
}

impl FitProblem {
    /// Extracts the fit data from simulated or observed paths. `bn` is
    /// the step-1 sub-terminal (the CLI's PT).
    pub fn new(
        paths: &PathSet,
        covariate_names: &[String],
        response_name: &str,
        bn: f64,
    ) -> Result<Self, FitError> {
        let found: Vec<String> = paths.columns.iter().map(|(n, _)| n.clone()).collect();
        let mut expected: Vec<String> = covariate_names.to_vec();
        expected.push(response_name.to_string());
        let cols: Option<Vec<&[f64]>> = expected
            .iter()
            .map(|n| paths.column(n))
            .collect();
        let Some(cols) = cols else {
            return Err(FitError::Columns { expected, found });
        };
        let (xcols, ycol) = (&cols[..cols.len() - 1], cols[cols.len() - 1]);

        if paths.len() < 2 {
            return Err(FitError::Data("need at least two data rows".into()));
        }
        let h = paths.step();
        let elapsed = paths.times[paths.len() - 1] - paths.times[0];
        if !(bn > 0.0) || bn > elapsed + 1e-9 {
            return Err(FitError::Window(format!(
                "PT/Bn must lie in (0, Tn] (Bn = {bn}, Tn = {elapsed})"
            )));
        }
        let q = xcols.len();
        let nn = (bn / h + 1e-9).floor() as usize;
        if nn + 1 > paths.len() {
            return Err(FitError::Window(format!(
                "window needs {} rows but the data has {}",
                nn + 1,
                paths.len()
            )));
        }
        if nn < q + 2 {
            return Err(FitError::Window(format!(
                "only {nn} increments in [0, Bn]; need at least q + 2 = {}",
                q + 2
            )));
        }

        let mut dy = Vec::with_capacity(nn);
        let mut dx = Vec::with_capacity(nn * q);
        for j in 1..=nn {
            dy.push(ycol[j] - ycol[j - 1]);
            for c in xcols {
                dx.push(c[j] - c[j - 1]);
            }
        }

        let t_hat = (elapsed + 1e-9).floor() as usize;
        let mut y_unit = Vec::with_capacity(t_hat + 1);
        let mut x_unit = Vec::with_capacity((t_hat + 1) * q);
        for i in 0..=t_hat {
            let row = ((i as f64 / h).round() as usize).min(paths.len() - 1);
            y_unit.push(ycol[row]);
            for c in xcols {
                x_unit.push(c[row]);
            }
        }

        Ok(Self {
            state_names: covariate_names.to_vec(),
            dy,
            dx,
            y_unit,
            x_unit,
            window: FitWindow { h, bn, tn: elapsed, nn },
        })
    }

    pub fn dim(&self) -> usize {
        self.state_names.len()
    }

    /// Cauchy quasi-log-likelihood (its a-dependent part):
    /// H1(mu, sigma) = -sum_j [ log sigma + log(1 + eps_j^2) ] with
    /// eps_j = (dY_j - mu . dX_j) / (h sigma).
    pub fn h1(&self, mu: &[f64], sigma: f64) -> Result<f64, FitError> {
        if !(sigma > 0.0) {
            return Err(FitError::Domain { what: "h1 requires sigma > 0", value: sigma });
        }
        let q = self.dim();
        assert_eq!(mu.len(), q, "coefficient count");
        let inv = 1.0 / (self.window.h * sigma);
        let log_sigma = sigma.ln();
        let mut acc = 0.0;
        for j in 0..self.dy.len() {
            let mut resid = self.dy[j];
            for i in 0..q {
                resid -= mu[i] * self.dx[j * q + i];
            }
            let eps = resid * inv;
            acc -= log_sigma + (1.0 + eps * eps).ln();
        }
        Ok(acc)
    }

    /// Maximizes H1 over the box from the given start; the optimum is
    /// polished so that no 1e-6-relative coordinate perturbation improves
    /// it beyond 1e-8.
    pub fn fit_step1(
        &self,
        start: &[f64],
        lower: &[f64],
        upper: &[f64],
    ) -> Result<Step1Fit, FitError> {
        let q = self.dim();
        let n_par = q + 1;
        if start.len() != n_par || lower.len() != n_par || upper.len() != n_par {
            return Err(FitError::Data(format!(
                "start/lower/upper must have length q + 1 = {n_par}"
            )));
        }
        if !(lower[q] > 0.0) {
            return Err(FitError::Domain {
                what: "the sigma lower bound must be positive",
                value: lower[q],
            });
        }
        for i in 0..n_par {
            if !(lower[i] <= start[i] && start[i] <= upper[i]) {
                return Err(FitError::Data(format!(
                    "start value {} at index {i} is outside [{}, {}]",
                    start[i], lower[i], upper[i]
                )));
            }
        }

        let objective = |x: &[f64]| -> f64 {
            let (mu, sigma) = x.split_at(q);
            -self.h1(mu, sigma[0]).unwrap_or(f64::INFINITY)
        };
        let result = minimize_box(objective, start, lower, upper, NmOptions::default());
        let (mu, sigma) = result.x.split_at(q);
        Ok(Step1Fit {
            mu: mu.to_vec(),
            sigma: sigma[0],
            h1: -result.f,
            converged: result.converged,
        })
    }

    /// Unit-time residuals eps_i = (Y_i - Y_{i-1} - mu . (X_i - X_{i-1}))
    /// / sigma at integer times i = 1..=floor(Tn).
    pub fn unit_residuals(&self, mu: &[f64], sigma: f64) -> Result<Vec<f64>, FitError> {
        let q = self.dim();
        if self.y_unit.len() < 2 {
            return Err(FitError::Window(format!(
                "terminal time {} is below 1; no unit-time residuals exist",
                self.window.tn
            )));
        }
        let t_hat = self.y_unit.len() - 1;
        Ok((1..=t_hat)
            .map(|i| {
                let mut r = self.y_unit[i] - self.y_unit[i - 1];
                for k in 0..q {
                    r -= mu[k] * (self.x_unit[i * q + k] - self.x_unit[(i - 1) * q + k]);
                }
                r / sigma
            })
            .collect())
    }

    /// Asymptotic standard errors of (mu, sigma, nu), in that order.
    ///
    /// SE(mu) from the inverse of the Gram matrix
    /// (1/(2 sigma^2 Nn)) sum ((1/h) dX)^{x2}, SE(sigma) = sigma
    /// sqrt(2/Nn), SE(nu) = (T_hat/4 (psi1(nu/2) - psi1((nu+1)/2)))^{-1/2}.
    pub fn std_errors(&self, _mu: &[f64], sigma: f64, nu: f64) -> Result<Vec<f64>, FitError> {
        let q = self.dim();
        let nn = self.window.nn as f64;
        let inv_h = 1.0 / self.window.h;
        let mut gram = vec![vec![0.0_f64; q]; q];
        for j in 0..self.dy.len() {
            for a in 0..q {
                let xa = self.dx[j * q + a] * inv_h;
                for b in a..q {
                    gram[a][b] += xa * self.dx[j * q + b] * inv_h;
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                gram[a][b] = gram[b][a];
            }
        }
        let scale_factor = 1.0 / (2.0 * sigma * sigma * nn);
        for row in gram.iter_mut() {
            for v in row.iter_mut() {
                *v *= scale_factor;
            }
        }
        let inv = invert(gram).map_err(|col| FitError::Collinear {
            name: self.state_names[col].clone(),
        })?;

        let mut se = Vec::with_capacity(q + 2);
        for (i, row) in inv.iter().enumerate() {
            let v = row[i] / nn;
            if !(v > 0.0) {
                return Err(FitError::Collinear { name: self.state_names[i].clone() });
            }
            se.push(v.sqrt());
        }
        se.push(sigma * (2.0 / nn).sqrt());

        let t_hat = self.window.t_hat() as f64;
        let info = 0.25
            * (trigamma(nu / 2.0).map_err(|_| FitError::Domain {
                what: "nu must be positive for SE(nu)",
                value: nu,
            })? - trigamma((nu + 1.0) / 2.0).unwrap());
        if !(info > 0.0) {
            return Err(FitError::Domain { what: "nu information must be positive", value: nu });
        }
        se.push(1.0 / (t_hat * info).sqrt());
        Ok(se)
    }
}

/// Gauss-Jordan inverse with partial pivoting; Err carries the column
/// index whose pivot vanished.
fn invert(mut m: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, usize> {
    let n = m.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[pivot][col].abs() {
                pivot = r;
            }
        }
        if m[pivot][col].abs() <= 1e-12 * scale {
            return Err(col);
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                m[r][j] -= factor * m[col][j];
                inv[r][j] -= factor * inv[col][j];
            }
        }
    }
    Ok(inv)
}

#[derive(Clone, Debug)]
pub struct Step1Fit {
    pub mu: Vec<f64>,
    pub sigma: f64,
    pub h1: f64,
    pub converged: bool,
}

/// Student-t quasi-log-likelihood of the unit-time residuals:
/// H2(nu) = sum_i [ -log(pi)/2 + ln Gamma((nu+1)/2) - ln Gamma(nu/2)
///                  - (nu+1)/2 log(1 + eps_i^2) ].
pub fn h2(residuals: &[f64], nu: f64) -> Result<f64, FitError> {
    if !(nu > 0.0) {
        return Err(FitError::Domain { what: "h2 requires nu > 0", value: nu });
    }
    let constant = -0.5 * PI.ln() + log_gamma((nu + 1.0) / 2.0).unwrap()
        - log_gamma(nu / 2.0).unwrap();
    let mut acc = 0.0;
    for &e in residuals {
        acc += constant - 0.5 * (nu + 1.0) * (1.0 + e * e).ln();
    }
    Ok(acc)
}

/// Analytic score dH2/dnu = sum_i [ psi((nu+1)/2) - psi(nu/2)
/// - log(1 + eps_i^2) ] / 2; strictly decreasing in nu.
pub fn h2_score(residuals: &[f64], nu: f64) -> f64 {
    let d = digamma((nu + 1.0) / 2.0).unwrap() - digamma(nu / 2.0).unwrap();
    residuals
        .iter()
        .map(|&e| 0.5 * (d - (1.0 + e * e).ln()))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Clone, Debug)]
pub struct Step2Fit {
    pub nu: f64,
    pub at_boundary: Option<Boundary>,
}

/// Maximizes H2 over [nu_min, nu_max] by bisecting its monotone score;
/// an optimum pinned at a bound is reported as a boundary warning.
pub fn fit_step2(residuals: &[f64], nu_min: f64, nu_max: f64) -> Result<Step2Fit, FitError> {
    if !(nu_min > 0.0 && nu_min < nu_max) {
        return Err(FitError::Domain {
            what: "fit_step2 requires 0 < nu_min < nu_max",
            value: nu_min,
        });
    }
    if residuals.is_empty() {
        return Err(FitError::Data("no unit-time residuals to fit".into()));
    }
    let (mut lo, mut hi) = (nu_min, nu_max);
    if h2_score(residuals, lo) <= 0.0 {
        return Ok(Step2Fit { nu: nu_min, at_boundary: Some(Boundary::Lower) });
    }
    if h2_score(residuals, hi) >= 0.0 {
        return Ok(Step2Fit { nu: nu_max, at_boundary: Some(Boundary::Upper) });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h2_score(residuals, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + lo) {
            break;
        }
    }
    Ok(Step2Fit { nu: 0.5 * (lo + hi), at_boundary: None })
}

/// Full two-step fit result with asymptotic standard errors.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// Coefficient names followed by the scale and df names.
    pub parameter_names: Vec<String>,
    pub mu_hat: Vec<f64>,
    pub sigma_hat: f64,
    pub nu_hat: f64,
    /// Standard errors of (mu_1..mu_q, sigma, nu).
    pub se: Vec<f64>,
    /// -2 H1 at the step-1 optimum.
    pub minus2_h1: f64,
    /// -2 H2 at the step-2 optimum.
    pub minus2_h2: f64,
    pub window: FitWindow,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn estimates(&self) -> Vec<f64> {
        let mut v = self.mu_hat.clone();
        v.push(self.sigma_hat);
        v.push(self.nu_hat);
        v
    }

    /// Plain-text summary in the two-step quasi-likelihood layout.
    pub fn summary(&self) -> String {
        let mut out = String::from("Quasi-maximum likelihood estimation\n\nCoefficients:\n");
        let width = self
            .parameter_names
            .iter()
            .map(|n| n.len())
            .max()
            .unwrap_or(4)
            .max(4);
        out.push_str(&format!("{:width$} {:>12} {:>12}\n", "", "Estimate", "Std. Error"));
        for ((name, est), se) in self
            .parameter_names
            .iter()
            .zip(self.estimates())
            .zip(&self.se)
        {
            out.push_str(&format!("{name:width$} {est:>12.6} {se:>12.8}\n"));
        }
        out.push_str(&format!("\n-2 log L: {:.4} {:.4}\n", self.minus2_h1, self.minus2_h2));
        for w in &self.warnings {
            out.push_str(&format!("note: {w}\n"));
        }
        out
    }

    /// Machine-readable CSV: parameter,estimate,std_error.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,estimate,std_error\n");
        for ((name, est), se) in self
            .parameter_names
            .iter()
            .zip(self.estimates())
            .zip(&self.se)
        {
            out.push_str(&format!("{name},{est:.16e},{se:.16e}\n"));
        }
        out
    }
}

/// Per-parameter confidence intervals, estimate +- z_{1-alpha/2} SE for a
/// two-sided level alpha.
pub fn confidence_interval(result: &FitResult, alpha: f64) -> Result<Vec<(f64, f64)>, FitError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FitError::Domain { what: "alpha must be in (0, 1)", value: alpha });
    }
    let z = norm_quantile(1.0 - alpha / 2.0).unwrap();
    Ok(result
        .estimates()
        .iter()
        .zip(&result.se)
        .map(|(&est, &se)| (est - z * se, est + z * se))
        .collect())
}

/// Bounds of the step-1 box and the step-2 interval.
#[derive(Clone, Debug)]
pub struct FitBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl FitBounds {
    /// Default box: mu free within +-1e6, sigma in [1e-3, 1e3],
    /// nu in [0.1, 50].
    pub fn default_for(q: usize) -> Self {
        let mut lower = vec![-1e6; q];
        let mut upper = vec![1e6; q];
        lower.push(1e-3);
        upper.push(1e3);
        Self { lower, upper, nu_min: 0.1, nu_max: 50.0 }
    }
}

/// Runs the complete two-step estimation on prepared paths.
pub fn fit(
    paths: &PathSet,
    model: &RegressionModel,
    bn: f64,
    start: &[f64],
    bounds: &FitBounds,
) -> Result<FitResult, FitError> {
    let problem = FitProblem::new(
        paths,
        &model.covariates.state_names,
        &model.response_name,
        bn,
    )?;
    let step1 = problem.fit_step1(start, &bounds.lower, &bounds.upper)?;
    let residuals = problem.unit_residuals(&step1.mu, step1.sigma)?;
    let step2 = fit_step2(&residuals, bounds.nu_min, bounds.nu_max)?;
    let se = problem.std_errors(&step1.mu, step1.sigma, step2.nu)?;
    let minus2_h2 = -2.0 * h2(&residuals, step2.nu)?;

    let mut warnings = Vec::new();
    if !step1.converged {
        warnings.push("step-1 optimizer hit its iteration cap; estimates are best-so-far".into());
    }
    if let Some(b) = step2.at_boundary {
        warnings.push(format!(
            "nu estimate pinned at the {} bound",
            match b {
                Boundary::Lower => "lower",
                Boundary::Upper => "upper",
            }
        ));
    }

    let mut parameter_names = model.coeff_names.clone();
    parameter_names.push(model.scale_name.clone());
    parameter_names.push(model.df_name.clone());

    Ok(FitResult {
        parameter_names,
        mu_hat: step1.mu,
        sigma_hat: step1.sigma,
        nu_hat: step2.nu,
        se,
        minus2_h1: -2.0 * step1.h1,
        minus2_h2,
        window: problem.window,
        warnings,
    })
}
