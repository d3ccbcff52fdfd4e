//! Cross-validated bandwidths and holdout selection of the regularization parameter.

use crate::forecasting::{forecast_response, LatentCurves};
use crate::grid::SpatialGrid;
use crate::kernel::bartlett_weight;
use crate::locpoly::ObsKernel;
use crate::pipeline::{Holdout, RegressorFit};
use crate::regression::{
    choose_max_lag, filters_from_transfer, regularized_transfer, Regularization,
};
use crate::simulation::{rng_for, stream};
use crate::smoothing::{Lag0Moments, LineMoments, TimeMoments};
use crate::spectral::cross_time_moments;
use crate::{Error, Result, ScalarTs, SparseFts};
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;

/// Candidate grids and fold settings.
#[derive(Clone, Debug, PartialEq)]
pub struct CvPlan {
    pub folds: usize,
    pub bandwidths: Vec<f64>,
    pub holdout_fraction: f64,
    /// regularization candidates as fractions of `sup_ω λ̂_1`
    pub fractions: Vec<f64>,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            folds: 5,
            bandwidths: log_spaced(0.05, 0.6, 8),
            holdout_fraction: 0.2,
            fractions: log_spaced(1e-4, 0.5, 12),
        }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|&b| b > 0.0 && b.is_finite());
        if !positive(&self.bandwidths) || !positive(&self.fractions) {
            return Err(Error::InvalidInput(
                "candidate grids must be non-empty and positive".into(),
            ));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "holdout fraction {} outside (0, 1)",
                self.holdout_fraction
            )));
        }
        Ok(())
    }

    /// Length of the training stretch `⌊(1 - fraction) T⌋`.
    pub fn split(&self, t_len: usize) -> usize {
        ((1.0 - self.holdout_fraction) * t_len as f64).floor() as usize
    }
}

/// `n` log-equispaced values from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Scores of every candidate, with per-fold detail.
#[derive(Clone, Debug, PartialEq)]
pub struct CvTrace {
    pub candidates: Vec<f64>,
    /// `fold_scores[c][f]`; NaN marks a degenerate fit
    pub fold_scores: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthSelection {
    pub surface: f64,
    pub diagonal: f64,
    pub surface_trace: CvTrace,
    pub diagonal_trace: CvTrace,
}

/// Random assignment of time points to `k` folds of near-equal size.
pub fn fold_assignment(t_len: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, stream::FOLDS);
    let mut order: Vec<usize> = (0..t_len).collect();
    order.shuffle(&mut rng);
    let mut fold = vec![0; t_len];
    for (pos, &t) in order.iter().enumerate() {
        fold[t] = pos % k;
    }
    fold
}

/// Smallest finite score; ties go to the larger candidate.
pub(crate) fn argmin_prefer_larger(candidates: &[f64], scores: &[f64]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (&c, &s) in candidates.iter().zip(scores) {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            Some((bc, bs)) if s > bs || (s == bs && c < bc) => Some((bc, bs)),
            _ => Some((c, s)),
        };
    }
    best.map(|(c, _)| c)
}

/// Pooled score: total squared error over total count, NaN if any fold failed.
fn pool(folds: &[(f64, usize)]) -> (Vec<f64>, f64) {
    let per: Vec<f64> = folds
        .iter()
        .map(|&(s, n)| if n == 0 { f64::NAN } else { s / n as f64 })
        .collect();
    let n: usize = folds.iter().map(|f| f.1).sum();
    let s: f64 = folds.iter().map(|f| f.0).sum();
    let total = if folds.iter().any(|f| !f.0.is_finite()) || n == 0 {
        f64::NAN
    } else {
        s / n as f64
    };
    (per, total)
}

fn run_trace(candidates: &[f64], score: impl Fn(f64) -> Vec<(f64, usize)> + Sync) -> CvTrace {
    let results: Vec<(Vec<f64>, f64)> = candidates.par_iter().map(|&b| pool(&score(b))).collect();
    let (fold_scores, scores) = results.into_iter().unzip();
    CvTrace {
        candidates: candidates.to_vec(),
        fold_scores,
        scores,
    }
}

fn pick(trace: &CvTrace) -> Result<f64> {
    argmin_prefer_larger(&trace.candidates, &trace.scores).ok_or(Error::AllFoldsDegenerate)
}

/// Held-out squared error of the lag-0 surface smoother at bandwidth `b`, per fold.
pub fn surface_fold_scores(
    data: &SparseFts,
    grid: &SpatialGrid,
    folds: &[usize],
    k: usize,
    b: f64,
) -> Vec<(f64, usize)> {
    let p = grid.len();
    let kern = ObsKernel::new(data, grid, b);
    (0..k)
        .map(|f| {
            let train = |t: usize| folds[t] != f;
            let tm = TimeMoments::new(data, &kern, p, train);
            let mut m = Lag0Moments::products(&tm);
            m.sub_assign(&Lag0Moments::diagonal(
                data,
                &kern,
                p,
                (0..data.len()).filter(|&t| train(t)),
            ));
            let Ok(surface) = m.surface(grid) else {
                return (f64::NAN, 0);
            };
            let mut sse = 0.0;
            let mut n = 0;
            for t in (0..data.len()).filter(|&t| folds[t] == f) {
                let c = data.curve(t);
                for (j, a) in c.iter().enumerate() {
                    for (l, o) in c.iter().enumerate() {
                        if j != l {
                            sse += (a.y * o.y - grid.interpolate2(&surface, a.x, o.x)).powi(2);
                            n += 1;
                        }
                    }
                }
            }
            (sse, n)
        })
        .collect()
}

/// Held-out squared error of the noisy-diagonal line smoother at bandwidth `b`, per fold.
pub fn diagonal_fold_scores(
    data: &SparseFts,
    grid: &SpatialGrid,
    folds: &[usize],
    k: usize,
    b: f64,
) -> Vec<(f64, usize)> {
    let kern = ObsKernel::new(data, grid, b);
    (0..k)
        .map(|f| {
            let mut m = LineMoments::zeros(grid.len());
            m.accumulate(data, &kern, (0..data.len()).filter(|&t| folds[t] != f));
            let Ok(v) = m.fit(grid) else {
                return (f64::NAN, 0);
            };
            let mut sse = 0.0;
            let mut n = 0;
            for t in (0..data.len()).filter(|&t| folds[t] == f) {
                for o in data.curve(t) {
                    sse += (o.y * o.y - grid.interpolate(v.as_slice(), o.x)).powi(2);
                    n += 1;
                }
            }
            (sse, n)
        })
        .collect()
}

/// K-fold selection of the surface bandwidth `B_R` and the diagonal bandwidth `B_V`.
///
/// Folds hold out whole curves, so every raw product of a held-out time point is
/// scored against smoothers fitted without that curve.
pub fn cv_bandwidths(
    data: &SparseFts,
    grid: &SpatialGrid,
    plan: &CvPlan,
    seed: u64,
) -> Result<BandwidthSelection> {
    plan.validate()?;
    if data.len() < plan.folds {
        return Err(Error::InsufficientData(format!(
            "{} time points for {} folds",
            data.len(),
            plan.folds
        )));
    }
    let folds = fold_assignment(data.len(), plan.folds, seed);
    let surface_trace = run_trace(&plan.bandwidths, |b| {
        surface_fold_scores(data, grid, &folds, plan.folds, b)
    });
    let diagonal_trace = run_trace(&plan.bandwidths, |b| {
        diagonal_fold_scores(data, grid, &folds, plan.folds, b)
    });
    Ok(BandwidthSelection {
        surface: pick(&surface_trace)?,
        diagonal: pick(&diagonal_trace)?,
        surface_trace,
        diagonal_trace,
    })
}

/// Held-out squared error of the lag-wise cross-covariance smoother at bandwidth `b`, per fold.
///
/// Each lag `|h| < L` is fitted with the Bartlett-pooled design moments of the
/// cross-spectral estimator; held-out raw products `Z_{t+h} Y_{tj}` are weighted by `W_h`.
pub fn cross_fold_scores(
    x: &SparseFts,
    z: &ScalarTs,
    grid: &SpatialGrid,
    span: usize,
    folds: &[usize],
    k: usize,
    b: f64,
) -> Vec<(f64, usize)> {
    let t_len = x.len() as i64;
    let p = grid.len();
    let m = span as i64 - 1;
    let (u, v) = cross_time_moments(x, grid, b);
    (0..k)
        .map(|f| {
            let mut s: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(p));
            let mut norm = 0.0;
            let mut curves = Vec::with_capacity((2 * m + 1) as usize);
            for h in -m..=m {
                let w = bartlett_weight(span, h);
                let mut q: [DVector<f64>; 2] = std::array::from_fn(|_| DVector::zeros(p));
                let mut n_h = 0usize;
                for t in 0.max(-h)..t_len.min(t_len - h) {
                    let Some(zv) = z.get(t + h) else { continue };
                    let t = t as usize;
                    if folds[t] == f {
                        continue;
                    }
                    n_h += 1;
                    for i in 0..p {
                        for r in 0..3 {
                            s[r][i] += w * u[r][(t, i)];
                        }
                        q[0][i] += zv * v[0][(t, i)];
                        q[1][i] += zv * v[1][(t, i)];
                    }
                }
                norm += w * n_h as f64;
                curves.push((q, n_h));
            }
            if norm == 0.0 {
                return (f64::NAN, 0);
            }
            for r in &mut s {
                *r /= norm;
            }
            let mut fitted = Vec::with_capacity(curves.len());
            for (q, n_h) in curves {
                let mut c = DVector::zeros(p);
                if n_h > 0 {
                    for i in 0..p {
                        let den = s[0][i] * s[2][i] - s[1][i] * s[1][i];
                        if !(den > 1e-12) {
                            return (f64::NAN, 0);
                        }
                        c[i] = (q[0][i] * s[2][i] - q[1][i] * s[1][i]) / (den * n_h as f64);
                    }
                }
                fitted.push(c);
            }
            let mut sse = 0.0;
            let mut n = 0;
            for t in (0..t_len).filter(|&t| folds[t as usize] == f) {
                for h in -m..=m {
                    let Some(zv) = z.get(t + h) else { continue };
                    let w = bartlett_weight(span, h);
                    let c = &fitted[(h + m) as usize];
                    for o in x.curve(t as usize) {
                        sse += w * (zv * o.y - grid.interpolate(c.as_slice(), o.x)).powi(2);
                        n += 1;
                    }
                }
            }
            (sse, n)
        })
        .collect()
}

/// K-fold selection of the cross-spectral bandwidth `B_C`.
pub fn cv_cross_bandwidth(
    x: &SparseFts,
    z: &ScalarTs,
    grid: &SpatialGrid,
    span: usize,
    plan: &CvPlan,
    seed: u64,
) -> Result<(f64, CvTrace)> {
    plan.validate()?;
    if x.len() != z.len() {
        return Err(Error::InvalidInput(
            "response and regressor lengths differ".into(),
        ));
    }
    if x.len() < plan.folds {
        return Err(Error::InsufficientData(format!(
            "{} time points for {} folds",
            x.len(),
            plan.folds
        )));
    }
    let folds = fold_assignment(x.len(), plan.folds, seed);
    let trace = run_trace(&plan.bandwidths, |b| {
        cross_fold_scores(x, z, grid, span, &folds, plan.folds, b)
    });
    Ok((pick(&trace)?, trace))
}

/// Candidate thresholds or ridge parameters scaled by the largest harmonic eigenvalue.
pub fn regularization_candidates(plan: &CvPlan, fit: &RegressorFit) -> Vec<f64> {
    let top = fit.eig.max_eigenvalue();
    plan.fractions.iter().map(|f| f * top).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoldoutSelection {
    pub regularization: Regularization,
    pub trace: CvTrace,
}

/// Holdout mean squared forecast error of one regularization.
pub fn holdout_score(
    fit: &RegressorFit,
    holdout: &Holdout,
    curves: &LatentCurves,
    z: &ScalarTs,
    reg: Regularization,
    k_max: usize,
    max_lag: Option<usize>,
) -> Result<f64> {
    let grid = &fit.grid;
    let transfer = regularized_transfer(&holdout.cross, &fit.eig, grid, reg)?;
    let full = filters_from_transfer(&transfer, &fit.fgrid, k_max)?;
    let m = max_lag
        .unwrap_or_else(|| choose_max_lag(&full, grid))
        .min(k_max);
    let filters = full.trimmed(m);
    let times = holdout.split as i64..z.len() as i64;
    let pred = forecast_response(curves, &filters, grid, times.clone())?;
    let (mut sse, mut n) = (0.0, 0);
    for (s, zh) in times.zip(pred) {
        if let Some(zv) = z.get(s) {
            sse += (zh - zv).powi(2);
            n += 1;
        }
    }
    Ok(if n == 0 { f64::NAN } else { sse / n as f64 })
}

/// Parameter minimizing the holdout forecast error over `candidates`.
///
/// Filters are estimated from the response up to the split only; the latent curves
/// come from the full regressor record. Ties go to the larger parameter.
pub fn holdout_regularization(
    fit: &RegressorFit,
    holdout: &Holdout,
    curves: &LatentCurves,
    z: &ScalarTs,
    kind: Regularization,
    candidates: &[f64],
    k_max: usize,
    max_lag: Option<usize>,
) -> Result<HoldoutSelection> {
    if z.len() < 25 {
        return Err(Error::InsufficientData(format!(
            "holdout needs T ≥ 25, got {}",
            z.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no regularization candidates".into()));
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&c| {
            holdout_score(
                fit,
                holdout,
                curves,
                z,
                kind.with_parameter(c),
                k_max,
                max_lag,
            )
        })
        .collect::<Result<_>>()?;
    let trace = CvTrace {
        candidates: candidates.to_vec(),
        fold_scores: scores.iter().map(|&s| vec![s]).collect(),
        scores,
    };
    let best =
        argmin_prefer_larger(&trace.candidates, &trace.scores).ok_or(Error::NoFiniteScore)?;
    Ok(HoldoutSelection {
        regularization: kind.with_parameter(best),
        trace,
    })
}
