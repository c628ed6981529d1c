//! Subcommand implementations: law tabulation, engine comparison, path
//! simulation and two-step estimation.

use crate::config::ModelConfigFile;
use clap::Args;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;
use stutl_core::estimate::{fit, FitBounds, FitError};
use stutl_core::simulate::{simulate_model, PathSet, SimError};
use stutl_core::tlaw::{build_law, compare_methods, InversionConfig, InversionMethod, LawError};
use stutl_core::{build_model, confidence_interval};

/// Failure with the process exit code it maps to: 1 for validation
/// problems, 2 for numerical ones.
#[derive(Debug)]
pub struct AppError {
    pub exit_code: i32,
    pub message: String,
}

impl AppError {
    fn validation(message: impl Into<String>) -> Self {
        Self { exit_code: 1, message: message.into() }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self { exit_code: 2, message: message.into() }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn law_error(e: LawError) -> AppError {
    match e {
        LawError::Diverged { .. } | LawError::SpecFun(_) => AppError::numerical(e.to_string()),
        _ => AppError::validation(e.to_string()),
    }
}

fn sim_error(e: SimError) -> AppError {
    match e {
        SimError::Eval { .. } => AppError::numerical(e.to_string()),
        SimError::Law(inner) => law_error(inner),
        _ => AppError::validation(e.to_string()),
    }
}

fn fit_error(e: FitError) -> AppError {
    match e {
        FitError::Collinear { .. } => AppError::numerical(e.to_string()),
        _ => AppError::validation(e.to_string()),
    }
}

/// Resolves a relative output path against STUTL_OUT_DIR when it is set.
fn out_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var("STUTL_OUT_DIR") {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(path);
            }
        }
    }
    path.to_path_buf()
}

fn write_out(path: &Path, contents: &str) -> Result<PathBuf, AppError> {
    let resolved = out_path(path);
    if let Some(parent) = resolved.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| AppError::validation(format!("cannot create {parent:?}: {e}")))?;
        }
    }
    std::fs::write(&resolved, contents)
        .map_err(|e| AppError::validation(format!("cannot write {resolved:?}: {e}")))?;
    Ok(resolved)
}

fn read_config(path: &Path) -> Result<ModelConfigFile, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::validation(format!("cannot read {path:?}: {e}")))?;
    ModelConfigFile::parse(&text).map_err(|e| AppError::validation(e.to_string()))
}

#[derive(Args, Debug)]
pub struct LawArgs {
    /// Degrees of freedom of the unit-time marginal.
    #[arg(long)]
    pub nu: f64,
    /// Increment length.
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Inversion engine: LAG, COS or FFT.
    #[arg(long, default_value = "LAG")]
    pub method: String,
    #[arg(long, default_value_t = 7.0)]
    pub up: f64,
    #[arg(long, default_value_t = -7.0, allow_hyphen_values = true)]
    pub low: f64,
    /// Number of quadrature nodes / series terms / FFT frequencies.
    #[arg(long = "N", default_value_t = 180)]
    pub n: usize,
    /// Number of table grid intervals.
    #[arg(long = "N-grid", default_value_t = 1000)]
    pub n_grid: usize,
    /// Output CSV path (x,density,cdf).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_law(args: &LawArgs) -> Result<(), AppError> {
    let method = InversionMethod::parse(&args.method).map_err(law_error)?;
    let config = InversionConfig::new(method, args.up, args.low, args.n, args.n_grid)
        .map_err(law_error)?;
    let start = Instant::now();
    let law = build_law(args.nu, args.h, &config).map_err(law_error)?;
    let seconds = start.elapsed().as_secs_f64();
    for w in &law.warnings {
        eprintln!("warning: {w}");
    }
    let path = write_out(&args.out, &law.to_csv())?;
    println!(
        "law {method} nu={} h={} on [{}, {}]: {} grid points -> {}",
        args.nu,
        args.h,
        args.low,
        args.up,
        law.x_grid.len(),
        path.display()
    );
    println!("sec. {seconds:.2}");
    Ok(())
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    #[arg(long = "N", default_value_t = 180)]
    pub n: usize,
    #[arg(long, default_value_t = 10.0)]
    pub up: f64,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub low: f64,
    /// Number of table grid intervals shared by the three engines.
    #[arg(long = "N-grid", default_value_t = 1000)]
    pub n_grid: usize,
    /// Number of evaluation points for the comparison columns.
    #[arg(long, default_value_t = 100_001)]
    pub points: usize,
    /// Output CSV path: x,lag,cos,fft and, when a closed form exists,
    /// a reference column.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_compare(args: &CompareArgs) -> Result<(), AppError> {
    if args.points < 2 {
        return Err(AppError::validation("--points must be at least 2"));
    }
    let cmp = compare_methods(
        args.nu, args.h, args.up, args.low, args.n, args.n_grid, args.points,
    )
    .map_err(law_error)?;

    // CSV: x,lag,cos,fft[,reference]
    let mut csv = String::from("x,lag,cos,fft");
    if cmp.reference.is_some() {
        csv.push_str(",reference");
    }
    csv.push('\n');
    let by_method = |m: InversionMethod| {
        cmp.reports
            .iter()
            .find(|r| r.method == m)
            .expect("three reports")
    };
    let (lag, cos, fft) = (
        by_method(InversionMethod::Laguerre),
        by_method(InversionMethod::Cos),
        by_method(InversionMethod::Fft),
    );
    for (j, &x) in cmp.xs.iter().enumerate() {
        let cell = |r: &stutl_core::tlaw::MethodReport| match &r.cdf {
            Some(col) => format!("{:.16e}", col[j]),
            None => "nan".to_string(),
        };
        csv.push_str(&format!("{:.16e},{},{},{}", x, cell(lag), cell(cos), cell(fft)));
        if let Some(ref reference) = cmp.reference {
            csv.push_str(&format!(",{:.16e}", reference[j]));
        }
        csv.push('\n');
    }
    let path = write_out(&args.out, &csv)?;

    // summary table in the COS / FFT / LAG layout
    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:>12.4e}"),
        None => format!("{:>12}", "-"),
    };
    println!("            {:>12} {:>12} {:>12}", "COS", "FFT", "LAG");
    for (label, pick) in [
        ("RMSE", 0usize),
        ("Max", 1),
        ("Min", 2),
        ("neg.frac", 3),
    ] {
        let get = |r: &stutl_core::tlaw::MethodReport| match pick {
            0 => r.rmse,
            1 => r.max_abs,
            2 => r.min_abs,
            _ => r.negative_fraction,
        };
        println!(
            "{label:<11} {} {} {}",
            fmt_opt(get(cos)),
            fmt_opt(get(fft)),
            fmt_opt(get(lag))
        );
    }
    println!(
        "sec.        {:>12.2} {:>12.2} {:>12.2}   (wall time, non-normative)",
        cos.seconds, fft.seconds, lag.seconds
    );
    for r in &cmp.reports {
        if let Some(e) = &r.error {
            println!("note: {} failed: {e}", r.method);
        }
    }
    println!("comparison written to {}", path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Model configuration file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; covariate and t-Levy streams are derived from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV path (time, covariates, response).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(), AppError> {
    let cfg = read_config(&args.config)?;
    let model = build_model(&cfg.model_config().map_err(|e| AppError::validation(e.to_string()))?)
        .map_err(|e| AppError::validation(e.to_string()))?;
    let inversion = cfg
        .inversion_config()
        .map_err(|e| AppError::validation(e.to_string()))?;
    let grid = cfg
        .sampling_grid()
        .map_err(|e| AppError::validation(e.to_string()))?;
    let (mu, sigma, nu) = cfg
        .true_params()
        .map_err(|e| AppError::validation(e.to_string()))?;

    let paths = simulate_model(&model, &mu, sigma, nu, &inversion, &grid, args.seed)
        .map_err(sim_error)?;
    let path = write_out(&args.out, &paths.to_csv())?;
    println!(
        "simulated {} rows (h = {}, T = {}) with columns time,{} -> {}",
        paths.len(),
        grid.h(),
        grid.terminal,
        paths
            .columns
            .iter()
            .map(|(n, _)| n.as_str())
            .collect::<Vec<_>>()
            .join(","),
        path.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Model configuration file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Data CSV: a `time` column plus the model's named columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Draw the optimizer start uniformly within the bounds from this
    /// seed instead of using the config's `estimation.start`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step-1 sub-terminal time; overrides the config's `estimation.pt`.
    #[arg(long)]
    pub pt: Option<f64>,
    /// Output CSV path (parameter,estimate,std_error).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_estimate(args: &EstimateArgs) -> Result<(), AppError> {
    let cfg = read_config(&args.config)?;
    let model = build_model(&cfg.model_config().map_err(|e| AppError::validation(e.to_string()))?)
        .map_err(|e| AppError::validation(e.to_string()))?;

    let text = std::fs::read_to_string(&args.data)
        .map_err(|e| AppError::validation(format!("cannot read {:?}: {e}", args.data)))?;
    let paths = PathSet::from_csv(&text).map_err(sim_error)?;

    let est = cfg.estimation.as_ref();
    let pt = args
        .pt
        .or(est.map(|e| e.pt))
        .ok_or_else(|| AppError::validation("no PT given: pass --pt or set [estimation].pt"))?;

    let q = model.coeff_names.len();
    let mut bounds = FitBounds::default_for(q);
    let mut names: Vec<&str> = model.coeff_names.iter().map(|s| s.as_str()).collect();
    names.push(&model.scale_name);
    if let Some(section) = est {
        for (i, name) in names.iter().enumerate() {
            if let Some(&v) = section.lower.get(*name) {
                bounds.lower[i] = v;
            }
            if let Some(&v) = section.upper.get(*name) {
                bounds.upper[i] = v;
            }
        }
        if let Some(&v) = section.lower.get(model.df_name.as_str()) {
            bounds.nu_min = v;
        }
        if let Some(&v) = section.upper.get(model.df_name.as_str()) {
            bounds.nu_max = v;
        }
    }

    let start: Vec<f64> = if let Some(seed) = args.seed {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..=q)
            .map(|i| {
                let lo = bounds.lower[i].max(-1e3);
                let hi = bounds.upper[i].min(1e3);
                lo + (hi - lo) * rng.random::<f64>()
            })
            .collect()
    } else if let Some(map) = est.and_then(|e| e.start.as_ref()) {
        names
            .iter()
            .map(|name| {
                map.get(*name).copied().ok_or_else(|| {
                    AppError::validation(format!("[estimation].start is missing {name:?}"))
                })
            })
            .collect::<Result<_, _>>()?
    } else {
        return Err(AppError::validation(
            "no start point: set [estimation].start or pass --seed for random starts",
        ));
    };

    let result = fit(&paths, &model, pt, &start, &bounds).map_err(fit_error)?;
    print!("{}", result.summary());
    let ci = confidence_interval(&result, 0.05).map_err(fit_error)?;
    println!("\n95% confidence intervals:");
    for (name, (lo, hi)) in result.parameter_names.iter().zip(&ci) {
        println!("{name:<8} [{lo:.4}, {hi:.4}]");
    }
    if let Some(out) = &args.out {
        let path = write_out(out, &result.to_csv())?;
        println!("estimates written to {}", path.display());
    }
    Ok(())
}
