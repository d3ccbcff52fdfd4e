//! The four-step estimation and forecasting pipeline.
//!
//! 1. spectral density of the regressor and the noise level,
//! 2. cross-spectral density with the response,
//! 3. regularized transfer and filters,
//! 4. BLUP of the latent curves and filtered forecasts.

use crate::forecasting::{blup_latent, forecast, ForecastResult, LatentCurves, Window};
use crate::grid::{FrequencyGrid, SpatialGrid};
use crate::kernel::bartlett_span_default;
use crate::model_selection::{
    cv_bandwidths, cv_cross_bandwidth, holdout_regularization, regularization_candidates,
    BandwidthSelection, CvPlan, CvTrace, HoldoutSelection,
};
use crate::regression::{
    choose_max_lag, filters_from_transfer, regularized_transfer, FilterSet, Regularization,
};
use crate::smoothing::{estimate_sigma2, smooth_diagonal_perpendicular, smooth_noisy_diagonal};
use crate::spectral::{
    estimate_cross_spectral, estimate_spectral_density, invert_to_autocov, AutocovSequence,
    CrossSpectralEstimate, EigenSystem, SpectralDensityEstimate,
};
use crate::{Error, Result, ScalarTs, SparseFts};

/// A tuning parameter given directly or left to cross-validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Choice {
    Fixed(f64),
    Cv,
}

/// Regularization family; the parameter is chosen separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Truncation,
    Tikhonov,
}

impl Method {
    pub fn name(&self) -> &'static str {
        self.with(1.0).name()
    }

    pub fn with(&self, v: f64) -> Regularization {
        match self {
            Method::Truncation => Regularization::Truncation { threshold: v },
            Method::Tikhonov => Regularization::Tikhonov { rho: v },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    /// Bartlett span; `None` uses the default rule
    pub span: Option<usize>,
    pub b_r: Choice,
    pub b_v: Choice,
    pub b_c: Choice,
    pub param: Choice,
    /// largest filter lag; `None` applies the 1% negligibility rule
    pub max_lag: Option<usize>,
    /// trial lags before the negligibility rule
    pub k_max: usize,
    /// BLUP conditioning window; `None` uses the span
    pub window: Option<Window>,
    pub plan: CvPlan,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            span: None,
            b_r: Choice::Cv,
            b_v: Choice::Cv,
            b_c: Choice::Cv,
            param: Choice::Cv,
            max_lag: None,
            k_max: 25,
            window: None,
            plan: CvPlan::default(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        for c in [self.b_r, self.b_v, self.b_c, self.param] {
            if let Choice::Fixed(v) = c {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "tuning parameters must be positive, got {v}"
                    )));
                }
            }
        }
        if self.span == Some(0) || self.k_max == 0 || self.max_lag == Some(0) {
            return Err(Error::InvalidInput(
                "span and lags must be at least 1".into(),
            ));
        }
        self.plan.validate()
    }

    pub fn span_for(&self, t_len: usize) -> usize {
        self.span.unwrap_or_else(|| bartlett_span_default(t_len))
    }
}

/// Second-order structure of the regressor estimated from its sparse record.
#[derive(Clone, Debug)]
pub struct RegressorFit {
    pub grid: SpatialGrid,
    pub fgrid: FrequencyGrid,
    pub span: usize,
    pub b_r: f64,
    pub b_v: f64,
    pub spectral: SpectralDensityEstimate,
    pub eig: EigenSystem,
    pub sigma2: f64,
    pub autocov: AutocovSequence,
    pub window: Window,
    pub bandwidth_cv: Option<BandwidthSelection>,
}

/// Lags of the inverted autocovariance needed by a conditioning window.
fn autocov_lags(window: Window, fgrid: &FrequencyGrid) -> usize {
    let cap = fgrid.len() / 2 - 1;
    match window {
        Window::Lags(w) => (2 * w).min(cap),
        Window::Full => cap,
    }
}

/// Step 1: spectral density, eigensystem, noise variance and autocovariances.
pub fn fit_regressor(
    x: &SparseFts,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    cfg: &FitConfig,
) -> Result<RegressorFit> {
    cfg.validate()?;
    let span = cfg.span_for(x.len());
    if span > x.len() {
        return Err(Error::InvalidInput(format!(
            "span {span} exceeds series length {}",
            x.len()
        )));
    }
    fgrid.check_span(span)?;
    let bandwidth_cv = if cfg.b_r == Choice::Cv || cfg.b_v == Choice::Cv {
        Some(cv_bandwidths(x, grid, &cfg.plan, cfg.seed)?)
    } else {
        None
    };
    let resolve = |c: Choice, cv: fn(&BandwidthSelection) -> f64| match c {
        Choice::Fixed(v) => v,
        Choice::Cv => cv(bandwidth_cv.as_ref().expect("cv ran")),
    };
    let b_r = resolve(cfg.b_r, |s| s.surface);
    let b_v = resolve(cfg.b_v, |s| s.diagonal);
    let (spectral, eig) = estimate_spectral_density(x, grid, fgrid, span, b_r)?;
    let rbar = smooth_diagonal_perpendicular(x, grid, b_r)?;
    let v = smooth_noisy_diagonal(x, grid, b_v)?;
    let sigma2 = estimate_sigma2(&v, &rbar, grid).sigma2;
    let window = cfg.window.unwrap_or(Window::Lags(span));
    let autocov = invert_to_autocov(&spectral, fgrid, autocov_lags(window, fgrid))?;
    Ok(RegressorFit {
        grid: grid.clone(),
        fgrid: fgrid.clone(),
        span,
        b_r,
        b_v,
        spectral,
        eig,
        sigma2,
        autocov,
        window,
        bandwidth_cv,
    })
}

/// Cross-spectral estimate fitted on the training stretch of the response.
#[derive(Clone, Debug)]
pub struct Holdout {
    pub split: usize,
    pub cross: CrossSpectralEstimate,
}

/// Step 2: cross-spectral density on the full response, plus the training-only
/// estimate used for holdout selection.
#[derive(Clone, Debug)]
pub struct ResponseSetup {
    pub b_c: f64,
    pub cross: CrossSpectralEstimate,
    pub holdout: Option<Holdout>,
    pub cross_cv: Option<CvTrace>,
}

fn check_response(x: &SparseFts, z: &ScalarTs) -> Result<()> {
    if x.len() != z.len() {
        return Err(Error::InvalidInput(format!(
            "response length {} differs from regressor length {}",
            z.len(),
            x.len()
        )));
    }
    Ok(())
}

pub fn prepare_response(
    fit: &RegressorFit,
    x: &SparseFts,
    z: &ScalarTs,
    cfg: &FitConfig,
) -> Result<ResponseSetup> {
    check_response(x, z)?;
    let split = cfg.plan.split(z.len());
    let train = z.truncated(split);
    let (b_c, cross_cv) = match cfg.b_c {
        Choice::Fixed(v) => (v, None),
        Choice::Cv => {
            let (b, trace) =
                cv_cross_bandwidth(x, &train, &fit.grid, fit.span, &cfg.plan, cfg.seed)?;
            (b, Some(trace))
        }
    };
    let cross = estimate_cross_spectral(x, z, &fit.grid, &fit.fgrid, fit.span, b_c)?;
    let holdout = if cfg.param == Choice::Cv {
        let cross = estimate_cross_spectral(x, &train, &fit.grid, &fit.fgrid, fit.span, b_c)?;
        Some(Holdout { split, cross })
    } else {
        None
    };
    Ok(ResponseSetup {
        b_c,
        cross,
        holdout,
        cross_cv,
    })
}

/// Trial lag count usable on the frequency grid.
pub fn trial_lags(cfg: &FitConfig, fgrid: &FrequencyGrid) -> usize {
    cfg.k_max.min(fgrid.len() / 2 - 1)
}

/// Latent curves covering every holdout forecast.
pub fn holdout_curves(fit: &RegressorFit, x: &SparseFts, cfg: &FitConfig) -> Result<LatentCurves> {
    let k = trial_lags(cfg, &fit.fgrid) as i64;
    let split = cfg.plan.split(x.len()) as i64;
    blup_latent(
        x,
        &fit.autocov,
        fit.sigma2,
        &fit.grid,
        split - k..x.len() as i64 + k,
        fit.window,
    )
}

#[derive(Clone, Debug)]
pub struct FilterFit {
    pub regularization: Regularization,
    pub filters: FilterSet,
    pub holdout: Option<HoldoutSelection>,
}

/// Step 3: transfer functional and trimmed filters. `curves` must come from
/// [`holdout_curves`] when the parameter is cross-validated.
pub fn fit_filters(
    fit: &RegressorFit,
    setup: &ResponseSetup,
    curves: Option<&LatentCurves>,
    z: &ScalarTs,
    method: Method,
    cfg: &FitConfig,
) -> Result<FilterFit> {
    let k_max = trial_lags(cfg, &fit.fgrid);
    let (regularization, holdout) = match cfg.param {
        Choice::Fixed(v) => (method.with(v), None),
        Choice::Cv => {
            let ho = setup.holdout.as_ref().ok_or_else(|| {
                Error::InvalidInput("holdout estimate missing for parameter selection".into())
            })?;
            let curves =
                curves.ok_or_else(|| Error::InvalidInput("holdout curves missing".into()))?;
            let cands = regularization_candidates(&cfg.plan, fit);
            let sel = holdout_regularization(
                fit,
                ho,
                curves,
                z,
                method.with(1.0),
                &cands,
                k_max,
                cfg.max_lag,
            )?;
            (sel.regularization, Some(sel))
        }
    };
    let transfer = regularized_transfer(&setup.cross, &fit.eig, &fit.grid, regularization)?;
    let full = filters_from_transfer(&transfer, &fit.fgrid, k_max)?;
    let m = cfg
        .max_lag
        .unwrap_or_else(|| choose_max_lag(&full, &fit.grid))
        .min(k_max);
    Ok(FilterFit {
        regularization,
        filters: full.trimmed(m),
        holdout,
    })
}

/// Step 4: forecasts of the response at `times` from a regressor record.
pub fn forecast_with(
    fit: &RegressorFit,
    filters: &FilterSet,
    x: &SparseFts,
    times: std::ops::Range<i64>,
) -> Result<ForecastResult> {
    forecast(
        x,
        &fit.autocov,
        fit.sigma2,
        filters,
        &fit.grid,
        times,
        fit.window,
    )
}

/// Everything produced by one end-to-end estimation.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub regressor: RegressorFit,
    pub response: ResponseSetup,
    pub filters: FilterFit,
}

/// Steps 1–3 on one data set.
pub fn estimate(
    x: &SparseFts,
    z: &ScalarTs,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    method: Method,
    cfg: &FitConfig,
) -> Result<Estimate> {
    check_response(x, z)?;
    let regressor = fit_regressor(x, grid, fgrid, cfg)?;
    let response = prepare_response(&regressor, x, z, cfg)?;
    let curves = match cfg.param {
        Choice::Cv => Some(holdout_curves(&regressor, x, cfg)?),
        Choice::Fixed(_) => None,
    };
    let filters = fit_filters(&regressor, &response, curves.as_ref(), z, method, cfg)?;
    Ok(Estimate {
        regressor,
        response,
        filters,
    })
}
