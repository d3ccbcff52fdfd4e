//! Command-line arguments and their translation into pipeline settings.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sflr::forecasting::Window;
use sflr::model_selection::CvPlan;
use sflr::pipeline::{Choice, FitConfig, Method};
use sflr::simulation::{Process, Scheme, Shape};
use sflr::{FrequencyGrid, SpatialGrid};
use std::fmt;
use std::path::PathBuf;

/// Invalid settings, reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(
    name = "sflr",
    version,
    about = "Lagged regression with sparsely observed functional regressors"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Global {
    /// Output directory
    #[arg(
        long,
        global = true,
        env = "SFLR_OUTPUT_DIR",
        default_value = "sflr-out"
    )]
    pub out: PathBuf,
    /// Worker thread cap
    #[arg(long, global = true, env = "SFLR_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a data set, fit it and score the fit against the truth
    Simulate(SimulateArgs),
    /// Fit spectral structure and filters to a regressor and response
    Estimate(EstimateArgs),
    /// Recompute filters from a manifest and forecast the response
    Forecast(ForecastArgs),
    /// Run the bandwidth and regularization cross-validation only
    Cv(CvArgs),
    /// Monte-Carlo replications over the simulation design
    Reproduce(ReproduceArgs),
}

/// A value given directly or chosen by cross-validation.
pub fn parse_choice(s: &str) -> Result<Choice, String> {
    if s.eq_ignore_ascii_case("cv") {
        return Ok(Choice::Cv);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected a number or `cv`, got `{s}`"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("value must be positive, got {v}"));
    }
    Ok(Choice::Fixed(v))
}

/// Filter lag count, fixed or chosen by the negligibility rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaxLag {
    Auto,
    Lags(usize),
}

impl MaxLag {
    pub fn get(self) -> Option<usize> {
        match self {
            MaxLag::Auto => None,
            MaxLag::Lags(m) => Some(m),
        }
    }
}

pub fn parse_max_lag(s: &str) -> Result<MaxLag, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(MaxLag::Auto);
    }
    let m: usize = s
        .parse()
        .map_err(|_| format!("expected a lag count or `auto`, got `{s}`"))?;
    if m == 0 {
        return Err("max lag must be at least 1".into());
    }
    Ok(MaxLag::Lags(m))
}

/// A conditioning half-width or `full`.
pub fn parse_window(s: &str) -> Result<Window, String> {
    if s.eq_ignore_ascii_case("full") {
        return Ok(Window::Full);
    }
    s.parse()
        .map(Window::Lags)
        .map_err(|_| format!("expected a half-width or `full`, got `{s}`"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Trunc,
    Tikh,
}

impl MethodArg {
    pub fn method(self) -> Method {
        match self {
            MethodArg::Trunc => Method::Truncation,
            MethodArg::Tikh => Method::Tikhonov,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProcessArg {
    Far1,
    Fma4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Reg1,
    Reg2,
    Reg3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SecondKind {
    Dense,
    Sparse,
}

impl ProcessArg {
    pub fn get(self) -> Process {
        match self {
            ProcessArg::Far1 => Process::Far1,
            ProcessArg::Fma4 => Process::Fma4,
        }
    }
}

impl SchemeArg {
    pub fn get(self) -> Scheme {
        match self {
            SchemeArg::Reg1 => Scheme::Reg1,
            SchemeArg::Reg2 => Scheme::Reg2,
            SchemeArg::Reg3 => Scheme::Reg3,
        }
    }
}

impl ShapeArg {
    pub fn get(self) -> Shape {
        match self {
            ShapeArg::A => Shape::A,
            ShapeArg::B => Shape::B,
        }
    }
}

/// Grid, tuning and regularization settings shared by the fitting commands.
#[derive(Args, Clone, Debug)]
pub struct FitArgs {
    /// Spatial grid size
    #[arg(long, default_value_t = 51)]
    pub p: usize,
    /// Frequency grid size
    #[arg(long, default_value_t = 512)]
    pub n_freq: usize,
    /// Bartlett span L (default: floor(2 T^(1/3)))
    #[arg(long)]
    pub span: Option<usize>,
    /// Spectral surface bandwidth, or `cv`
    #[arg(long, default_value = "cv", value_parser = parse_choice)]
    pub b_r: Choice,
    /// Noisy diagonal bandwidth, or `cv`
    #[arg(long, default_value = "cv", value_parser = parse_choice)]
    pub b_v: Choice,
    /// Cross-spectral bandwidth, or `cv`
    #[arg(long, default_value = "cv", value_parser = parse_choice)]
    pub b_c: Choice,
    #[arg(long, value_enum, default_value_t = MethodArg::Tikh)]
    pub method: MethodArg,
    /// Truncation threshold or Tikhonov ridge, or `cv`
    #[arg(long, default_value = "cv", value_parser = parse_choice)]
    pub param: Choice,
    /// Largest filter lag, or `auto`
    #[arg(long, default_value = "auto", value_parser = parse_max_lag)]
    pub max_lag: MaxLag,
    /// Trial filter lags before trimming
    #[arg(long, default_value_t = 25)]
    pub k_max: usize,
    /// BLUP conditioning half-width, or `full` (default: the span)
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl FitArgs {
    pub fn grids(&self) -> anyhow::Result<(SpatialGrid, FrequencyGrid)> {
        let grid = SpatialGrid::new(self.p).map_err(|e| config_err(e.to_string()))?;
        let fgrid = FrequencyGrid::new(self.n_freq).map_err(|e| config_err(e.to_string()))?;
        Ok((grid, fgrid))
    }

    pub fn fit_config(&self) -> anyhow::Result<FitConfig> {
        let plan = CvPlan {
            folds: self.folds,
            ..CvPlan::default()
        };
        let cfg = FitConfig {
            span: self.span,
            b_r: self.b_r,
            b_v: self.b_v,
            b_c: self.b_c,
            param: self.param,
            max_lag: self.max_lag.get(),
            k_max: self.k_max,
            window: self.window,
            plan,
            seed: self.seed,
        };
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        if let Some(l) = self.span {
            if self.n_freq <= 2 * l {
                return Err(config_err(format!(
                    "n_freq {} must exceed twice the span {l}",
                    self.n_freq
                )));
            }
        }
        Ok(cfg)
    }

    /// Settings as given, for the manifest.
    pub fn echo(&self) -> Value {
        json!({
            "p": self.p,
            "n_freq": self.n_freq,
            "span": self.span.map_or(json!("default"), |l| json!(l)),
            "b_r": choice_json(self.b_r),
            "b_v": choice_json(self.b_v),
            "b_c": choice_json(self.b_c),
            "method": self.method.method().name(),
            "param": choice_json(self.param),
            "max_lag": self.max_lag.get().map_or(json!("auto"), |m| json!(m)),
            "k_max": self.k_max,
            "window": self.window.map_or(json!("default"), window_json),
            "folds": self.folds,
            "seed": self.seed,
            "bandwidth_grid": CvPlan::default().bandwidths,
            "holdout_fraction": CvPlan::default().holdout_fraction,
            "regularization_fractions": CvPlan::default().fractions,
        })
    }
}

pub fn choice_json(c: Choice) -> Value {
    match c {
        Choice::Cv => json!("cv"),
        Choice::Fixed(v) => json!(v),
    }
}

pub fn window_json(w: Window) -> Value {
    match w {
        Window::Full => json!("full"),
        Window::Lags(n) => json!(n),
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ProcessArg::Far1)]
    pub process: ProcessArg,
    #[arg(long, value_enum, default_value_t = SchemeArg::Reg1)]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = ShapeArg::B)]
    pub shape: ShapeArg,
    /// Series length
    #[arg(long = "T", default_value_t = 300)]
    pub t_len: usize,
    /// Largest number of observations per curve
    #[arg(long, default_value_t = 40)]
    pub nmax: usize,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Sparse regressor CSV with header `t,x,y`
    #[arg(long)]
    pub regressor: PathBuf,
    /// Response CSV with header `t,z`
    #[arg(long)]
    pub response: PathBuf,
    /// Second regressor CSV (`t,x,y`); activates the joint model
    #[arg(long)]
    pub second: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SecondKind::Dense)]
    pub second_kind: SecondKind,
    /// Regularization parameter of the second regressor, or `cv`
    #[arg(long, default_value = "cv", value_parser = parse_choice)]
    pub param2: Choice,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    /// Manifest written by `estimate` or `simulate`
    #[arg(long)]
    pub manifest: PathBuf,
    /// Regressor record to forecast from (default: the fitted one)
    #[arg(long)]
    pub regressor: Option<PathBuf>,
    /// Second regressor record for the joint model (default: the fitted one)
    #[arg(long)]
    pub second: Option<PathBuf>,
    /// First forecast time, 1-based (default 1)
    #[arg(long)]
    pub from: Option<i64>,
    /// Last forecast time, 1-based (default T)
    #[arg(long)]
    pub to: Option<i64>,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[arg(long)]
    pub regressor: PathBuf,
    #[arg(long)]
    pub response: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// Small desk-scale grid (the default)
    #[arg(long, conflicts_with = "full")]
    pub reduced: bool,
    /// The complete simulation design
    #[arg(long)]
    pub full: bool,
    /// Replications per setting of the complete design
    #[arg(long, default_value_t = 90)]
    pub reps: u64,
    #[command(flatten)]
    pub fit: FitArgs,
}
