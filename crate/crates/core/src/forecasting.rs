//! Best linear unbiased prediction of latent curves and response forecasts.

use crate::grid::SpatialGrid;
use crate::regression::FilterSet;
use crate::spectral::AutocovSequence;
use crate::{Error, Result, SparseFts};
use faer::linalg::solvers::Solve;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::ops::Range;

/// Time points that each prediction conditions on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    /// observations with `|s - t| ≤ half_width`
    Lags(usize),
    /// every observation
    Full,
}

/// Predicted curves on the grid for a contiguous range of (possibly
/// out-of-sample) time indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCurves {
    first: i64,
    curves: Vec<DVector<f64>>,
}

impl LatentCurves {
    pub fn new(first: i64, curves: Vec<DVector<f64>>) -> Self {
        Self { first, curves }
    }

    pub fn range(&self) -> Range<i64> {
        self.first..self.first + self.curves.len() as i64
    }

    pub fn get(&self, t: i64) -> Option<&DVector<f64>> {
        if t < self.first {
            return None;
        }
        self.curves.get((t - self.first) as usize)
    }

    pub fn curves(&self) -> &[DVector<f64>] {
        &self.curves
    }
}

/// Predicted curves together with the response forecasts built from them.
#[derive(Clone, Debug)]
pub struct ForecastResult {
    pub curves: LatentCurves,
    pub times: Vec<i64>,
    pub responses: Vec<f64>,
}

/// Autocovariance lags `-H..=H` with bilinear evaluation off the grid.
struct LagTable {
    max: i64,
    mats: Vec<DMatrix<f64>>,
}

impl LagTable {
    fn new(r: &AutocovSequence) -> Self {
        let max = r.max_lag() as i64;
        let mats = (-max..=max).map(|h| r.get(h)).collect();
        Self { max, mats }
    }

    fn mat(&self, h: i64) -> Option<&DMatrix<f64>> {
        if h.abs() > self.max {
            None
        } else {
            Some(&self.mats[(h + self.max) as usize])
        }
    }

    /// `R_h(u, v)` at cell coordinates of `u` and `v`.
    fn eval(&self, h: i64, u: (usize, f64), v: (usize, f64)) -> f64 {
        let Some(m) = self.mat(h) else { return 0.0 };
        let ((i, a), (j, b)) = (u, v);
        (1.0 - a) * ((1.0 - b) * m[(i, j)] + b * m[(i, j + 1)])
            + a * ((1.0 - b) * m[(i + 1, j)] + b * m[(i + 1, j + 1)])
    }

    /// `R_h(x_i, v)` for every grid point `x_i`.
    fn column(&self, h: i64, v: (usize, f64), out: &mut [f64]) {
        let Some(m) = self.mat(h) else {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        };
        let (j, b) = v;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (1.0 - b) * m[(i, j)] + b * m[(i, j + 1)];
        }
    }
}

struct ObsPoint {
    t: i64,
    loc: (usize, f64),
    y: f64,
}

/// Cholesky solve with jitter escalation from `1e-10` to `1e-6` of the mean diagonal.
pub(crate) fn spd_solve(a: &faer::Mat<f64>, b: &faer::Mat<f64>) -> Result<faer::Mat<f64>> {
    let n = a.nrows();
    if let Ok(llt) = a.llt(faer::Side::Lower) {
        return Ok(llt.solve(b));
    }
    let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n as f64;
    let mut jitter = 1e-10 * mean_diag.abs().max(f64::MIN_POSITIVE);
    for _ in 0..5 {
        let mut aj = a.clone();
        for i in 0..n {
            aj[(i, i)] += jitter;
        }
        if let Ok(llt) = aj.llt(faer::Side::Lower) {
            return Ok(llt.solve(b));
        }
        jitter *= 10.0;
    }
    Err(Error::SolveFailure { size: n })
}

fn gather(data: &SparseFts, grid: &SpatialGrid, times: Range<i64>) -> Vec<ObsPoint> {
    let mut out = Vec::new();
    for s in times {
        for o in data.curve(s as usize) {
            out.push(ObsPoint {
                t: s,
                loc: grid.locate(o.x),
                y: o.y,
            });
        }
    }
    out
}

fn gram(obs: &[ObsPoint], table: &LagTable, sigma2: f64) -> faer::Mat<f64> {
    let n = obs.len();
    let mut g = faer::Mat::<f64>::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let v = table.eval(obs[a].t - obs[b].t, obs[a].loc, obs[b].loc);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
        g[(a, a)] += sigma2;
    }
    g
}

fn predict(
    obs: &[ObsPoint],
    alpha: &faer::Mat<f64>,
    table: &LagTable,
    t: i64,
    p: usize,
) -> DVector<f64> {
    let mut out = DVector::zeros(p);
    let mut col = vec![0.0; p];
    for (k, o) in obs.iter().enumerate() {
        table.column(t - o.t, o.loc, &mut col);
        let a = alpha[(k, 0)];
        for (x, c) in out.iter_mut().zip(&col) {
            *x += a * c;
        }
    }
    out
}

/// BLUP `Π̂(X_t | 𝕐)` of the latent curves for every `t` in `targets`.
pub fn blup_latent(
    data: &SparseFts,
    r: &AutocovSequence,
    sigma2: f64,
    grid: &SpatialGrid,
    targets: Range<i64>,
    window: Window,
) -> Result<LatentCurves> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    if r.grid_len() != grid.len() {
        return Err(Error::InvalidInput(
            "autocovariance grid differs from spatial grid".into(),
        ));
    }
    let p = grid.len();
    let t_len = data.len() as i64;
    let table = LagTable::new(r);
    let first = targets.start;
    let targets: Vec<i64> = targets.collect();
    let curves = match window {
        Window::Full => {
            let obs = gather(data, grid, 0..t_len);
            let y = faer::Mat::from_fn(obs.len(), 1, |i, _| obs[i].y);
            let alpha = spd_solve(&gram(&obs, &table, sigma2), &y)?;
            targets
                .par_iter()
                .map(|&t| predict(&obs, &alpha, &table, t, p))
                .collect()
        }
        Window::Lags(w) => {
            let w = w as i64;
            targets
                .par_iter()
                .map(|&t| {
                    let lo = (t - w).max(0);
                    let hi = (t + w + 1).min(t_len);
                    if lo >= hi {
                        return Ok(DVector::zeros(p));
                    }
                    let obs = gather(data, grid, lo..hi);
                    if obs.is_empty() {
                        return Ok(DVector::zeros(p));
                    }
                    let y = faer::Mat::from_fn(obs.len(), 1, |i, _| obs[i].y);
                    let alpha = spd_solve(&gram(&obs, &table, sigma2), &y)?;
                    Ok(predict(&obs, &alpha, &table, t, p))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(LatentCurves { first, curves })
}

/// `Ẑ_s = Σ_{|k| ≤ M} ⟨b_k, Π̂(X_{s-k} | 𝕐)⟩` for every `s` in `times`.
pub fn forecast_response(
    curves: &LatentCurves,
    filters: &FilterSet,
    grid: &SpatialGrid,
    times: Range<i64>,
) -> Result<Vec<f64>> {
    times
        .map(|s| {
            let mut z = 0.0;
            for (k, b) in filters.iter() {
                let x = curves.get(s - k).ok_or(Error::MissingCurve { t: s - k })?;
                z += grid.inner(b.as_slice(), x.as_slice());
            }
            Ok(z)
        })
        .collect()
}

/// Latent curves needed to forecast `times` with filters of maximal lag `m`.
pub fn required_targets(times: &Range<i64>, m: usize) -> Range<i64> {
    times.start - m as i64..times.end + m as i64
}

/// Full forecasting step: BLUP of the curves needed by the filters, then the
/// filtered response.
pub fn forecast(
    data: &SparseFts,
    r: &AutocovSequence,
    sigma2: f64,
    filters: &FilterSet,
    grid: &SpatialGrid,
    times: Range<i64>,
    window: Window,
) -> Result<ForecastResult> {
    let curves = blup_latent(
        data,
        r,
        sigma2,
        grid,
        required_targets(&times, filters.max_lag()),
        window,
    )?;
    let responses = forecast_response(&curves, filters, grid, times.clone())?;
    Ok(ForecastResult {
        curves,
        times: times.collect(),
        responses,
    })
}

/// Forecasts with the true dynamics, noise level and filters substituted.
pub fn oracle_forecast(
    data: &SparseFts,
    true_autocov: &AutocovSequence,
    true_sigma2: f64,
    true_filters: &FilterSet,
    grid: &SpatialGrid,
    times: Range<i64>,
    window: Window,
) -> Result<ForecastResult> {
    forecast(
        data,
        true_autocov,
        true_sigma2,
        true_filters,
        grid,
        times,
        window,
    )
}
