//! Functional responses and a second, fully observed regressor.
//!
//! A functional response turns the transfer functional into an operator
//! `B_ω` on the grid, and the filters into kernels `B_k(z, x)`. The joint
//! model adds a dense (or second sparse) regressor `X²` and solves the block
//! system coupling both spectral density operators through their
//! cross-spectrum `F¹²`.

use crate::forecasting::{blup_latent, required_targets, LatentCurves};
use crate::grid::{FrequencyGrid, SpatialGrid};
use crate::kernel::bartlett_weight;
use crate::model_selection::{argmin_prefer_larger, cv_cross_bandwidth, fold_assignment, CvTrace};
use crate::pipeline::{fit_regressor, trial_lags, Choice, FitConfig, Method, RegressorFit};
use crate::regression::{
    choose_max_lag, filters_from_values, threshold_rank, FilterSet, Regularization,
};
use crate::spectral::{
    cross_time_moments, estimate_cross_spectral, pooled_lag_surfaces, CrossSpectralEstimate,
    EigenSystem, PoolingRule, SpectralDensityEstimate,
};
use crate::{DenseFts, Error, Observation, Result, ScalarTs, SparseFts, C64};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::ops::Range;

/// Fills `ω_k` for `k > n/2` by conjugating the mirrored half.
fn mirror_half<T: Clone>(half: Vec<T>, n: usize, conj: impl Fn(&T) -> T) -> Vec<T> {
    (0..n)
        .map(|k| {
            if k <= n / 2 {
                half[k].clone()
            } else {
                conj(&half[n - k])
            }
        })
        .collect()
}

fn check_bandwidth(b: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {b}"
        )));
    }
    Ok(())
}

fn check_span(span: usize, t_len: usize, fgrid: &FrequencyGrid) -> Result<()> {
    if span == 0 || span > t_len {
        return Err(Error::InvalidInput(format!(
            "span {span} must lie in 1..={t_len}"
        )));
    }
    fgrid.check_span(span)
}

// ---------------------------------------------------------------------------
// functional response

/// Cross-spectral kernel `F^{ZX}_ω(z, x)` between two sparsely observed series,
/// rows indexing the response coordinate.
///
/// Raw products `V_{t+h,j} Y_{tk}` are smoothed by the pooled local-linear
/// surface fit with constant lag weight `1/T`. Same-curve products are kept
/// since the two noise ensembles are independent.
pub fn est_cross_spectral_functional(
    x: &SparseFts,
    z: &SparseFts,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    span: usize,
    bandwidth: f64,
) -> Result<Vec<DMatrix<C64>>> {
    check_bandwidth(bandwidth)?;
    if x.len() != z.len() {
        return Err(Error::InvalidInput(format!(
            "response length {} differs from regressor length {}",
            z.len(),
            x.len()
        )));
    }
    check_span(span, x.len(), fgrid)?;
    let t_len = x.len() as f64;
    let rule = PoolingRule {
        exclude_diagonal: false,
        lag_weight: Box::new(move |_| 1.0 / t_len),
    };
    Ok(pooled_lag_surfaces(z, x, grid, span, bandwidth, &rule)?.to_spectrum(fgrid))
}

/// Operator-valued transfer `B_ω` stored as kernels: `(B_ω g)(z) = ∫ B_ω(z, x) g(x) dx`.
#[derive(Clone, Debug)]
pub struct OperatorTransferEstimate {
    pub values: Vec<DMatrix<C64>>,
    pub method: Regularization,
}

/// `B_ω = Σ_j g(λ_j) (F^{ZX}_ω φ_j) ⊗ φ_j`, the operator analogue of the
/// scalar transfer; each row coincides with the scalar transfer of that
/// response coordinate.
pub fn operator_transfer(
    cross: &[DMatrix<C64>],
    eig: &EigenSystem,
    grid: &SpatialGrid,
    method: Regularization,
) -> Result<OperatorTransferEstimate> {
    let v = method.parameter();
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{} parameter must be positive, got {v}",
            method.name()
        )));
    }
    if cross.len() != eig.len() {
        return Err(Error::InvalidInput(
            "cross-spectral and spectral grids differ".into(),
        ));
    }
    let w = grid.weight();
    let values = cross
        .par_iter()
        .zip(eig.vectors.par_iter().zip(&eig.values))
        .map(|(c, (phi, lam))| {
            let keep: Vec<usize> = (0..lam.len())
                .filter(|&j| method.gain(lam[j]) != 0.0)
                .collect();
            let sel = phi.select_columns(&keep);
            let mut left = c * &sel;
            for (col, &j) in keep.iter().enumerate() {
                left.column_mut(col).scale_mut(w * method.gain(lam[j]));
            }
            left * sel.adjoint()
        })
        .collect();
    Ok(OperatorTransferEstimate { values, method })
}

/// Real filter kernels `B_k` for `|k| ≤ M`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorFilters {
    max_lag: usize,
    lags: Vec<DMatrix<f64>>,
}

impl OperatorFilters {
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn get(&self, k: i64) -> Option<&DMatrix<f64>> {
        if k.unsigned_abs() as usize > self.max_lag {
            return None;
        }
        Some(&self.lags[(k + self.max_lag as i64) as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &DMatrix<f64>)> {
        let m = self.max_lag as i64;
        (-m..=m).zip(self.lags.iter())
    }

    /// Hilbert–Schmidt norms in lag order.
    pub fn norms(&self, grid: &SpatialGrid) -> Vec<f64> {
        self.lags.iter().map(|b| b.norm() * grid.weight()).collect()
    }
}

/// `B_k = (1/n) Σ_ω B_ω e^{ikω}` entrywise, keeping the real part.
pub fn operator_filters(
    b: &OperatorTransferEstimate,
    fgrid: &FrequencyGrid,
    max_lag: usize,
) -> Result<OperatorFilters> {
    fgrid.check_span(max_lag)?;
    if b.values.len() != fgrid.len() {
        return Err(Error::InvalidInput(
            "transfer and frequency grids differ".into(),
        ));
    }
    let n = fgrid.len() as f64;
    let m = max_lag as i64;
    let lags: Vec<(DMatrix<f64>, f64)> = (-m..=m)
        .into_par_iter()
        .map(|k| {
            let (r, c) = b.values[0].shape();
            let mut acc = DMatrix::<C64>::zeros(r, c);
            for (i, bw) in b.values.iter().enumerate() {
                let e = fgrid.phase(k, i);
                acc.zip_apply(bw, |a, z| *a += z * e);
            }
            let residue = acc.iter().fold(0.0f64, |r, z| r.max((z.im / n).abs()));
            (acc.map(|z| z.re / n), residue)
        })
        .collect();
    let residue = lags.iter().map(|l| l.1).fold(0.0, f64::max);
    if residue > 1e-6 {
        return Err(Error::ImagResidue { residue });
    }
    Ok(OperatorFilters {
        max_lag,
        lags: lags.into_iter().map(|l| l.0).collect(),
    })
}

/// Curve forecasts `Ẑ_s = Σ_k ∫ B_k(·, x) X̂_{s-k}(x) dx` on the grid.
pub fn functional_forecast(
    curves: &LatentCurves,
    filters: &OperatorFilters,
    grid: &SpatialGrid,
    times: Range<i64>,
) -> Result<Vec<DVector<f64>>> {
    let w = grid.weight();
    times
        .map(|s| {
            let mut out = DVector::zeros(filters.lags[0].nrows());
            for (k, b) in filters.iter() {
                let x = curves.get(s - k).ok_or(Error::MissingCurve { t: s - k })?;
                out.gemv(w, b, x, 1.0);
            }
            Ok(out)
        })
        .collect()
}

/// Operator transfer and filter kernels for a sparsely observed functional
/// response, with the regressor side taken from `fit`.
pub fn estimate_functional(
    fit: &RegressorFit,
    x: &SparseFts,
    z: &SparseFts,
    bandwidth: f64,
    method: Regularization,
    max_lag: usize,
) -> Result<(OperatorTransferEstimate, OperatorFilters)> {
    let cross = est_cross_spectral_functional(x, z, &fit.grid, &fit.fgrid, fit.span, bandwidth)?;
    let transfer = operator_transfer(&cross, &fit.eig, &fit.grid, method)?;
    let filters = operator_filters(&transfer, &fit.fgrid, max_lag)?;
    Ok((transfer, filters))
}

// ---------------------------------------------------------------------------
// means and dense second-order structure

/// Per-grid-point local-linear line moments `Σ K/B (d/B)^r` and `Σ Y K/B (d/B)^r`.
fn mean_moments(
    x: &SparseFts,
    grid: &SpatialGrid,
    bandwidth: f64,
    keep: impl Fn(usize) -> bool,
) -> ([DVector<f64>; 3], [DVector<f64>; 2]) {
    let p = grid.len();
    let (u, v) = cross_time_moments(x, grid, bandwidth);
    let mut s: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(p));
    let mut q: [DVector<f64>; 2] = std::array::from_fn(|_| DVector::zeros(p));
    for t in (0..x.len()).filter(|&t| keep(t)) {
        for i in 0..p {
            for r in 0..3 {
                s[r][i] += u[r][(t, i)];
            }
            q[0][i] += v[0][(t, i)];
            q[1][i] += v[1][(t, i)];
        }
    }
    (s, q)
}

fn mean_fit(
    s: &[DVector<f64>; 3],
    q: &[DVector<f64>; 2],
    grid: &SpatialGrid,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(grid.len());
    for i in 0..grid.len() {
        let den = s[0][i] * s[2][i] - s[1][i] * s[1][i];
        if !(den > 1e-12) {
            return Err(Error::DegenerateDenominator { x: grid.point(i) });
        }
        out[i] = (q[0][i] * s[2][i] - q[1][i] * s[1][i]) / den;
    }
    Ok(out)
}

/// Local-linear estimate of the mean function of a sparse series.
pub fn sparse_mean(x: &SparseFts, grid: &SpatialGrid, bandwidth: f64) -> Result<DVector<f64>> {
    check_bandwidth(bandwidth)?;
    let (s, q) = mean_moments(x, grid, bandwidth, |_| true);
    mean_fit(&s, &q, grid)
}

/// Bandwidth of the sparse mean smoother by K-fold cross-validation over curves.
pub fn cv_mean_bandwidth(
    x: &SparseFts,
    grid: &SpatialGrid,
    candidates: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(f64, CvTrace)> {
    let fold = fold_assignment(x.len(), folds, seed);
    let fold_scores: Vec<Vec<f64>> = candidates
        .par_iter()
        .map(|&b| {
            (0..folds)
                .map(|k| {
                    let (s, q) = mean_moments(x, grid, b, |t| fold[t] != k);
                    let Ok(mu) = mean_fit(&s, &q, grid) else {
                        return f64::NAN;
                    };
                    let (mut sse, mut n) = (0.0, 0usize);
                    for t in (0..x.len()).filter(|&t| fold[t] == k) {
                        for o in x.curve(t) {
                            sse += (o.y - grid.interpolate(mu.as_slice(), o.x)).powi(2);
                            n += 1;
                        }
                    }
                    if n == 0 {
                        0.0
                    } else {
                        sse
                    }
                })
                .collect()
        })
        .collect();
    let scores: Vec<f64> = fold_scores
        .iter()
        .map(|f| {
            if f.iter().any(|v| v.is_nan()) {
                f64::NAN
            } else {
                f.iter().sum::<f64>() / x.total_count() as f64
            }
        })
        .collect();
    let best = argmin_prefer_larger(candidates, &scores).ok_or(Error::AllFoldsDegenerate)?;
    Ok((
        best,
        CvTrace {
            candidates: candidates.to_vec(),
            fold_scores,
            scores,
        },
    ))
}

/// Subtracts `μ(x)` from every observation.
pub fn center_sparse(x: &SparseFts, mean: &DVector<f64>, grid: &SpatialGrid) -> Result<SparseFts> {
    let curves = x
        .curves()
        .iter()
        .map(|c| {
            c.iter()
                .map(|o| Observation::new(o.x, o.y - grid.interpolate(mean.as_slice(), o.x)))
                .collect()
        })
        .collect();
    SparseFts::new(curves)
}

fn centered_rows(x: &DenseFts, mean: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x.grid_len(), |t, i| x.curve(t)[i] - mean[i])
}

/// Bartlett estimates from a dense series: the spectral density `F²²` (Hermitian
/// and clipped, with its eigensystem) and the cross-spectrum `F^{ZX²}`.
pub fn dense_bartlett(
    x: &DenseFts,
    z: &ScalarTs,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    span: usize,
) -> Result<(SpectralDensityEstimate, EigenSystem, CrossSpectralEstimate)> {
    if x.grid_len() != grid.len() {
        return Err(Error::InvalidInput(
            "dense curves differ from the spatial grid".into(),
        ));
    }
    if z.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "response length {} differs from regressor length {}",
            z.len(),
            x.len()
        )));
    }
    check_span(span, x.len(), fgrid)?;
    let t_len = x.len();
    let p = grid.len();
    let xc = centered_rows(x, &x.mean());
    let zbar = z.mean();
    let m = span as i64 - 1;
    let tf = t_len as f64;
    // R̂_h = (1/T) Σ_t X_{t+h} X_tᵀ for h ≥ 0
    let autocov: Vec<DMatrix<f64>> = (0..=m as usize)
        .map(|h| xc.rows(h, t_len - h).tr_mul(&xc.rows(0, t_len - h)) / tf)
        .collect();
    let crosscov: Vec<DVector<f64>> = (-m..=m)
        .map(|h| {
            let mut r = DVector::zeros(p);
            for t in 0.max(-h)..(t_len as i64).min(t_len as i64 - h) {
                if let Some(zv) = z.get(t + h) {
                    r.axpy(zv - zbar, &xc.row(t as usize).transpose(), 1.0);
                }
            }
            r / tf
        })
        .collect();
    let n = fgrid.len();
    let half: Vec<(DMatrix<C64>, DVector<C64>)> = fgrid
        .half()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let mut f = DMatrix::<C64>::zeros(p, p);
            let mut c = DVector::<C64>::zeros(p);
            for h in -m..=m {
                let e = fgrid.phase(-h, k) * (bartlett_weight(span, h) / (2.0 * PI));
                if h >= 0 {
                    f.zip_apply(&autocov[h as usize], |a, r| *a += e * r);
                } else {
                    f.zip_apply(&autocov[(-h) as usize].transpose(), |a, r| *a += e * r);
                }
                c.zip_apply(&crosscov[(h + m) as usize], |a, r| *a += e * r);
            }
            (f, c)
        })
        .collect();
    let (fh, ch): (Vec<_>, Vec<_>) = half.into_iter().unzip();
    let f = mirror_half(fh, n, |m| m.map(|z| z.conj()));
    let c = mirror_half(ch, n, |v| v.map(|z| z.conj()));
    let (spectral, eig) = SpectralDensityEstimate::from_values(f, span, 0.0)
        .hermitian_projection()
        .clip(grid);
    Ok((
        spectral,
        eig,
        CrossSpectralEstimate::from_values(c, span, 0.0),
    ))
}

/// Per-lag moments of the sparse–dense line smoother at bandwidth `b`.
struct SdMoments {
    s: [DVector<f64>; 3],
    /// index `h + L - 1`; rows sparse coordinate, columns dense coordinate
    q: Vec<[DMatrix<f64>; 2]>,
}

fn sd_moments(
    x1: &SparseFts,
    x2c: &DMatrix<f64>,
    grid: &SpatialGrid,
    span: usize,
    b: f64,
) -> SdMoments {
    let t_len = x1.len();
    let p = grid.len();
    let (u, v) = cross_time_moments(x1, grid, b);
    let m = span as i64 - 1;
    let tf = t_len as f64;
    let mut s: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(p));
    let q = (-m..=m)
        .map(|h| {
            let w = bartlett_weight(span, h);
            let lo = 0.max(-h) as usize;
            let hi = (t_len as i64).min(t_len as i64 - h) as usize;
            let len = hi - lo;
            let first = (lo as i64 + h) as usize;
            for r in 0..3 {
                for i in 0..p {
                    s[r][i] += w * u[r].column(i).rows(first, len).sum();
                }
            }
            let dense = x2c.rows(lo, len);
            [
                v[0].rows(first, len).tr_mul(&dense) * (w / tf),
                v[1].rows(first, len).tr_mul(&dense) * (w / tf),
            ]
        })
        .collect();
    let norm = 1.0 / (span as f64 * tf);
    for r in &mut s {
        *r *= norm;
    }
    SdMoments { s, q }
}

/// Cross-spectral kernel `F¹²_ω(x, y)` between a sparse and a dense series.
///
/// Products `(Y_{t+h,j} - μ¹(x_{t+h,j}))(X²_t(y) - μ²(y))` are smoothed by a
/// local-linear line fit in the sparse coordinate only, pooled over lags
/// with Bartlett weights. Windows without support are widened by 1.5 up to
/// three times.
#[allow(clippy::too_many_arguments)]
pub fn est_cross_sparse_dense(
    x1: &SparseFts,
    mu1: &DVector<f64>,
    x2: &DenseFts,
    mu2: &DVector<f64>,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    span: usize,
    bandwidth: f64,
) -> Result<Vec<DMatrix<C64>>> {
    check_bandwidth(bandwidth)?;
    if x1.len() != x2.len() {
        return Err(Error::InvalidInput(format!(
            "regressor lengths {} and {} differ",
            x1.len(),
            x2.len()
        )));
    }
    if x2.grid_len() != grid.len() || mu1.len() != grid.len() || mu2.len() != grid.len() {
        return Err(Error::InvalidInput(
            "dense curves or means differ from the spatial grid".into(),
        ));
    }
    check_span(span, x1.len(), fgrid)?;
    let p = grid.len();
    let m = span as i64 - 1;
    let x1c = center_sparse(x1, mu1, grid)?;
    let x2c = centered_rows(x2, mu2);
    let mut mom = sd_moments(&x1c, &x2c, grid, span, bandwidth);
    let den = |s: &[DVector<f64>; 3], i: usize| s[0][i] * s[2][i] - s[1][i] * s[1][i];
    let mut b = bandwidth;
    for _ in 0..3 {
        let bad: Vec<usize> = (0..p).filter(|&i| !(den(&mom.s, i) > 1e-12)).collect();
        if bad.is_empty() {
            break;
        }
        b *= 1.5;
        let wide = sd_moments(&x1c, &x2c, grid, span, b);
        for i in bad {
            for r in 0..3 {
                mom.s[r][i] = wide.s[r][i];
            }
            for (qh, wh) in mom.q.iter_mut().zip(&wide.q) {
                qh[0].set_row(i, &wh[0].row(i));
                qh[1].set_row(i, &wh[1].row(i));
            }
        }
    }
    if let Some(i) = (0..p).find(|&i| !(den(&mom.s, i) > 1e-12)) {
        return Err(Error::DegenerateDenominator { x: grid.point(i) });
    }
    let n = fgrid.len();
    let half: Vec<DMatrix<C64>> = fgrid
        .half()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let mut q0 = DMatrix::<C64>::zeros(p, p);
            let mut q1 = DMatrix::<C64>::zeros(p, p);
            for h in -m..=m {
                let e = fgrid.phase(-h, k);
                let qh = &mom.q[(h + m) as usize];
                q0.zip_apply(&qh[0], |a, v| *a += e * v);
                q1.zip_apply(&qh[1], |a, v| *a += e * v);
            }
            DMatrix::from_fn(p, p, |i, j| {
                let s = &mom.s;
                (q0[(i, j)] * s[2][i] - q1[(i, j)] * s[1][i]) / (den(s, i) * 2.0 * PI)
            })
        })
        .collect();
    Ok(mirror_half(half, n, |m| m.map(|z| z.conj())))
}

// ---------------------------------------------------------------------------
// joint model

/// Second-order structure of two regressors and their cross-spectra with the
/// (centered) response.
#[derive(Clone, Debug)]
pub struct JointSpectralEstimate {
    pub f11: SpectralDensityEstimate,
    pub f22: SpectralDensityEstimate,
    /// `F¹²_ω(x, y)`; `F²¹ = (F¹²)^H`
    pub f12: Vec<DMatrix<C64>>,
    pub fz1: CrossSpectralEstimate,
    pub fz2: CrossSpectralEstimate,
    /// `λ_j`, `φ_j` of `F¹¹`
    pub eig1: EigenSystem,
    /// `η_j`, `ψ_j` of `F²²`
    pub eig2: EigenSystem,
}

impl JointSpectralEstimate {
    pub fn len(&self) -> usize {
        self.f12.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f12.is_empty()
    }

    /// `γ_ij = ⟨F¹² ψ_j, φ_i⟩` for `i < k1`, `j < k2` at frequency index `k`.
    pub fn gamma(&self, k: usize, k1: usize, k2: usize, grid: &SpatialGrid) -> DMatrix<C64> {
        let w = grid.weight();
        let phi = self.eig1.vectors[k].columns(0, k1);
        let psi = self.eig2.vectors[k].columns(0, k2);
        (phi.adjoint() * &self.f12[k] * psi) * C64::new(w * w, 0.0)
    }

    fn check(&self, grid: &SpatialGrid) -> Result<()> {
        let n = self.f12.len();
        if [
            self.f11.len(),
            self.f22.len(),
            self.fz1.values().len(),
            self.fz2.values().len(),
            self.eig1.len(),
            self.eig2.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::InvalidInput(
                "joint estimates use different frequency grids".into(),
            ));
        }
        self.fz1.ensure_finite(grid)?;
        self.fz2.ensure_finite(grid)
    }
}

/// Regularization of the joint inverse with one parameter per regressor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JointRegularization {
    Truncation { threshold1: f64, threshold2: f64 },
    Tikhonov { rho1: f64, rho2: f64 },
}

impl JointRegularization {
    pub fn new(method: Method, v1: f64, v2: f64) -> Self {
        match method {
            Method::Truncation => JointRegularization::Truncation {
                threshold1: v1,
                threshold2: v2,
            },
            Method::Tikhonov => JointRegularization::Tikhonov { rho1: v1, rho2: v2 },
        }
    }

    pub fn parameters(&self) -> (f64, f64) {
        match *self {
            JointRegularization::Truncation {
                threshold1,
                threshold2,
            } => (threshold1, threshold2),
            JointRegularization::Tikhonov { rho1, rho2 } => (rho1, rho2),
        }
    }
}

/// Transfer functionals of both regressors at every frequency.
#[derive(Clone, Debug)]
pub struct JointTransfer {
    pub b1: Vec<DVector<C64>>,
    pub b2: Vec<DVector<C64>>,
}

impl JointTransfer {
    pub fn filters(&self, fgrid: &FrequencyGrid, max_lag: usize) -> Result<(FilterSet, FilterSet)> {
        Ok((
            filters_from_values(&self.b1, fgrid, max_lag)?,
            filters_from_values(&self.b2, fgrid, max_lag)?,
        ))
    }
}

/// Inverse of a Hermitian matrix, or `None` when it is numerically singular.
fn hermitian_inverse(g: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    if g.nrows() == 0 {
        return Some(g.clone());
    }
    let e = nalgebra::SymmetricEigen::new(g.clone());
    let top = e.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(top > 0.0) || e.eigenvalues.iter().any(|v| v.abs() <= 1e-12 * top) {
        return None;
    }
    let mut scaled = e.eigenvectors.clone();
    for (j, v) in e.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / v);
    }
    Some(scaled * e.eigenvectors.adjoint())
}

/// Joint truncation transfer at one frequency with ranks `(k1, k2)` already valid.
fn joint_truncation_at(
    j: &JointSpectralEstimate,
    k: usize,
    mut k1: usize,
    mut k2: usize,
    grid: &SpatialGrid,
) -> (DVector<C64>, DVector<C64>) {
    let w = C64::new(grid.weight(), 0.0);
    let p = grid.len();
    let lam = &j.eig1.values[k];
    let eta = &j.eig2.values[k];
    loop {
        if k1 + k2 == 0 {
            return (DVector::zeros(p), DVector::zeros(p));
        }
        let gamma = j.gamma(k, k1, k2, grid);
        let mut g = DMatrix::<C64>::zeros(k1 + k2, k1 + k2);
        for i in 0..k1 {
            g[(i, i)] = C64::new(lam[i], 0.0);
        }
        for i in 0..k2 {
            g[(k1 + i, k1 + i)] = C64::new(eta[i], 0.0);
        }
        g.view_mut((0, k1), (k1, k2)).copy_from(&gamma);
        g.view_mut((k1, 0), (k2, k1)).copy_from(&gamma.adjoint());
        if let Some(m) = hermitian_inverse(&g) {
            let phi = j.eig1.vectors[k].columns(0, k1);
            let psi = j.eig2.vectors[k].columns(0, k2);
            // conj of ⟨f, φ_i⟩-type pairings, stacked
            let mut v = DVector::<C64>::zeros(k1 + k2);
            for i in 0..k1 {
                v[i] = (phi.column(i).transpose() * j.fz1.at(k))[0].conj() * w;
            }
            for i in 0..k2 {
                v[k1 + i] = (psi.column(i).transpose() * j.fz2.at(k))[0].conj() * w;
            }
            let u = m * v;
            let b1 = (phi * u.rows(0, k1)).map(|z| z.conj());
            let b2 = (psi * u.rows(k1, k2)).map(|z| z.conj());
            return (b1, b2);
        }
        // drop the smallest included eigenvalue
        let l1 = if k1 > 0 { lam[k1 - 1] } else { f64::INFINITY };
        let l2 = if k2 > 0 { eta[k2 - 1] } else { f64::INFINITY };
        if l1 <= l2 {
            k1 -= 1;
        } else {
            k2 -= 1;
        }
    }
}

/// Joint truncation with `k1[ω]` and `k2[ω]` harmonic components of each
/// regressor. A singular coupling matrix sheds its smallest included
/// eigenvalue until it inverts.
pub fn joint_truncation_transfer(
    j: &JointSpectralEstimate,
    k1: &[usize],
    k2: &[usize],
    grid: &SpatialGrid,
) -> Result<JointTransfer> {
    j.check(grid)?;
    let n = j.len();
    if k1.len() != n || k2.len() != n {
        return Err(Error::InvalidInput(
            "rank sequences must cover every frequency".into(),
        ));
    }
    let over = |ks: &[usize], e: &EigenSystem| ks.iter().zip(&e.values).any(|(&r, v)| r > v.len());
    if over(k1, &j.eig1) || over(k2, &j.eig2) {
        return Err(Error::InvalidInput(
            "rank exceeds the number of eigenvalues".into(),
        ));
    }
    let half: Vec<(DVector<C64>, DVector<C64>)> = (0..=n / 2)
        .into_par_iter()
        .map(|k| joint_truncation_at(j, k, k1[k], k2[k], grid))
        .collect();
    let (h1, h2): (Vec<_>, Vec<_>) = half.into_iter().unzip();
    let conj = |v: &DVector<C64>| v.map(|z| z.conj());
    Ok(JointTransfer {
        b1: mirror_half(h1, n, conj),
        b2: mirror_half(h2, n, conj),
    })
}

/// Per-frequency ranks of both regressors above their thresholds.
pub fn joint_truncation_ranks(
    j: &JointSpectralEstimate,
    threshold1: f64,
    threshold2: f64,
) -> (Vec<usize>, Vec<usize>) {
    (
        threshold_rank(&j.eig1, threshold1),
        threshold_rank(&j.eig2, threshold2),
    )
}

/// Solves the Hermitian system `a u = rhs`, adding jitter to the diagonal when
/// the Cholesky factorization fails.
fn hermitian_solve(a: &DMatrix<C64>, rhs: &DVector<C64>) -> Result<DVector<C64>> {
    let scale = a.diagonal().iter().map(|z| z.re.abs()).sum::<f64>() / a.nrows().max(1) as f64;
    for jitter in [0.0, 1e-10, 1e-8, 1e-6] {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += C64::new(jitter * scale, 0.0);
        }
        if let Some(c) = m.cholesky() {
            return Ok(c.solve(rhs));
        }
    }
    a.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::SolveFailure { size: a.nrows() })
}

/// Joint Tikhonov transfer: the block operator `[[F¹¹+ρ₁I, F¹²], [F²¹, F²²+ρ₂I]]`
/// inverted against `[F^{ZX¹}, F^{ZX²}]`.
pub fn joint_tikhonov_transfer(
    j: &JointSpectralEstimate,
    rho1: f64,
    rho2: f64,
    grid: &SpatialGrid,
) -> Result<JointTransfer> {
    if !(rho1 > 0.0 && rho2 > 0.0 && rho1.is_finite() && rho2.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Tikhonov parameters must be positive, got ({rho1}, {rho2})"
        )));
    }
    j.check(grid)?;
    let n = j.len();
    let p = grid.len();
    let w = grid.weight();
    let half: Vec<(DVector<C64>, DVector<C64>)> = (0..=n / 2)
        .into_par_iter()
        .map(|k| {
            let mut a = DMatrix::<C64>::zeros(2 * p, 2 * p);
            a.view_mut((0, 0), (p, p))
                .copy_from(&(j.f11.at(k) * C64::new(w, 0.0)));
            a.view_mut((p, p), (p, p))
                .copy_from(&(j.f22.at(k) * C64::new(w, 0.0)));
            let c = &j.f12[k] * C64::new(w, 0.0);
            a.view_mut((0, p), (p, p)).copy_from(&c);
            a.view_mut((p, 0), (p, p)).copy_from(&c.adjoint());
            for i in 0..p {
                a[(i, i)] += C64::new(rho1, 0.0);
                a[(p + i, p + i)] += C64::new(rho2, 0.0);
            }
            let mut rhs = DVector::<C64>::zeros(2 * p);
            rhs.rows_mut(0, p).copy_from(&j.fz1.at(k).map(|z| z.conj()));
            rhs.rows_mut(p, p).copy_from(&j.fz2.at(k).map(|z| z.conj()));
            let u = hermitian_solve(&a, &rhs)?;
            Ok((
                u.rows(0, p).map(|z| z.conj()),
                u.rows(p, p).map(|z| z.conj()),
            ))
        })
        .collect::<Result<_>>()?;
    let (h1, h2): (Vec<_>, Vec<_>) = half.into_iter().unzip();
    let conj = |v: &DVector<C64>| v.map(|z| z.conj());
    Ok(JointTransfer {
        b1: mirror_half(h1, n, conj),
        b2: mirror_half(h2, n, conj),
    })
}

/// Joint transfer under either regularization.
pub fn joint_transfer(
    j: &JointSpectralEstimate,
    reg: JointRegularization,
    grid: &SpatialGrid,
) -> Result<JointTransfer> {
    match reg {
        JointRegularization::Truncation {
            threshold1,
            threshold2,
        } => {
            if !(threshold1 > 0.0 && threshold2 > 0.0) {
                return Err(Error::InvalidInput(
                    "truncation thresholds must be positive".into(),
                ));
            }
            let (k1, k2) = joint_truncation_ranks(j, threshold1, threshold2);
            joint_truncation_transfer(j, &k1, &k2, grid)
        }
        JointRegularization::Tikhonov { rho1, rho2 } => {
            joint_tikhonov_transfer(j, rho1, rho2, grid)
        }
    }
}

/// Centered dense curves on `range`, zero (the mean) outside the record.
pub fn padded_dense_curves(x: &DenseFts, mean: &DVector<f64>, range: Range<i64>) -> LatentCurves {
    let t_len = x.len() as i64;
    let first = range.start;
    let curves = range
        .map(|t| {
            if (0..t_len).contains(&t) {
                x.curve(t as usize) - mean
            } else {
                DVector::zeros(mean.len())
            }
        })
        .collect();
    LatentCurves::new(first, curves)
}

/// `Ẑ_s = Z̄ + Σ_k ⟨b¹_k, X̂¹_{s-k}⟩ + Σ_k ⟨b²_k, X̂²_{s-k}⟩` with both curve
/// sequences already centered.
pub fn joint_forecast(
    curves1: &LatentCurves,
    curves2: &LatentCurves,
    filters1: &FilterSet,
    filters2: &FilterSet,
    zbar: f64,
    grid: &SpatialGrid,
    times: Range<i64>,
) -> Result<Vec<f64>> {
    times
        .map(|s| {
            let mut z = zbar;
            for (curves, filters) in [(curves1, filters1), (curves2, filters2)] {
                for (k, b) in filters.iter() {
                    let x = curves.get(s - k).ok_or(Error::MissingCurve { t: s - k })?;
                    z += grid.inner(b.as_slice(), x.as_slice());
                }
            }
            Ok(z)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// joint pipeline

/// The second regressor, observed densely on the grid or sparsely.
#[derive(Clone, Debug)]
pub enum SecondRegressor {
    Dense(DenseFts),
    Sparse(SparseFts),
}

impl SecondRegressor {
    pub fn len(&self) -> usize {
        match self {
            SecondRegressor::Dense(d) => d.len(),
            SecondRegressor::Sparse(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Second regressor after centering, with what is needed to predict its curves.
#[derive(Clone, Debug)]
pub enum SecondFit {
    Dense {
        mean: DVector<f64>,
        data: DenseFts,
    },
    Sparse {
        mean: DVector<f64>,
        data: SparseFts,
        fit: Box<RegressorFit>,
    },
}

impl SecondFit {
    pub fn mean(&self) -> &DVector<f64> {
        match self {
            SecondFit::Dense { mean, .. } | SecondFit::Sparse { mean, .. } => mean,
        }
    }

    /// Centered curves over `range`.
    pub fn curves(&self, range: Range<i64>) -> Result<LatentCurves> {
        match self {
            SecondFit::Dense { mean, data } => Ok(padded_dense_curves(data, mean, range)),
            SecondFit::Sparse { data, fit, .. } => {
                blup_latent(data, &fit.autocov, fit.sigma2, &fit.grid, range, fit.window)
            }
        }
    }
}

/// Parameters of the joint fit; `param2` pairs with `base.param` and both are
/// either fixed or cross-validated together.
#[derive(Clone, Debug, PartialEq)]
pub struct JointConfig {
    pub base: FitConfig,
    pub param2: Choice,
    /// bandwidth of the sparse mean smoothers, cross-validated over the bandwidth grid by default
    pub mean_bandwidth: Choice,
    /// surface and diagonal bandwidths of a sparse second regressor
    pub b_r2: Choice,
    pub b_v2: Choice,
}

impl JointConfig {
    pub fn new(base: FitConfig, param2: Choice) -> Self {
        Self {
            base,
            param2,
            mean_bandwidth: Choice::Cv,
            b_r2: Choice::Cv,
            b_v2: Choice::Cv,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JointFit {
    pub regressor: RegressorFit,
    /// centered first regressor
    pub centered: SparseFts,
    pub mean1: DVector<f64>,
    pub mean_bandwidth: f64,
    pub second: SecondFit,
    pub zbar: f64,
    pub b_c: f64,
    pub spectra: JointSpectralEstimate,
    pub regularization: JointRegularization,
    pub filters1: FilterSet,
    pub filters2: FilterSet,
    pub holdout: Option<CvTrace>,
}

fn response_cross(
    x1c: &SparseFts,
    second: &SecondFit,
    zc: &ScalarTs,
    fit: &RegressorFit,
    b_c: f64,
) -> Result<(CrossSpectralEstimate, CrossSpectralEstimate)> {
    let fz1 = estimate_cross_spectral(x1c, zc, &fit.grid, &fit.fgrid, fit.span, b_c)?;
    let fz2 = match second {
        SecondFit::Dense { data, .. } => {
            dense_bartlett(data, zc, &fit.grid, &fit.fgrid, fit.span)?.2
        }
        SecondFit::Sparse { data, .. } => {
            estimate_cross_spectral(data, zc, &fit.grid, &fit.fgrid, fit.span, b_c)?
        }
    };
    Ok((fz1, fz2))
}

fn forecast_error(pred: &[f64], z: &ScalarTs, times: Range<i64>) -> f64 {
    let (mut sse, mut n) = (0.0, 0usize);
    for (s, zh) in times.zip(pred) {
        if let Some(zv) = z.get(s) {
            sse += (zh - zv).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sse / n as f64
    }
}

/// Fits the two-regressor model: means, spectral structure of both regressors
/// and their cross-spectrum, response cross-spectra, and the joint filters.
///
/// Cross-validated parameters use a common fraction of each regressor's
/// largest eigenvalue, scored on the last holdout stretch of the response.
pub fn fit_joint(
    x1: &SparseFts,
    x2: &SecondRegressor,
    z: &ScalarTs,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    method: Method,
    cfg: &JointConfig,
) -> Result<JointFit> {
    let base = &cfg.base;
    base.validate()?;
    if x1.len() != z.len() || x2.len() != z.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: regressors {} and {}, response {}",
            x1.len(),
            x2.len(),
            z.len()
        )));
    }
    let cv = match (base.param, cfg.param2) {
        (Choice::Cv, Choice::Cv) => true,
        (Choice::Fixed(_), Choice::Fixed(v)) if v > 0.0 && v.is_finite() => false,
        _ => {
            return Err(Error::InvalidInput(
                "both joint parameters must be fixed and positive, or both cross-validated".into(),
            ))
        }
    };
    let mean_bandwidth = match cfg.mean_bandwidth {
        Choice::Fixed(b) => b,
        Choice::Cv => {
            cv_mean_bandwidth(x1, grid, &base.plan.bandwidths, base.plan.folds, base.seed)?.0
        }
    };
    let mean1 = sparse_mean(x1, grid, mean_bandwidth)?;
    let centered = center_sparse(x1, &mean1, grid)?;
    let regressor = fit_regressor(&centered, grid, fgrid, base)?;
    let span = regressor.span;
    let second = match x2 {
        SecondRegressor::Dense(d) => SecondFit::Dense {
            mean: d.mean(),
            data: d.clone(),
        },
        SecondRegressor::Sparse(s) => {
            let mean = sparse_mean(s, grid, mean_bandwidth)?;
            let data = center_sparse(s, &mean, grid)?;
            let fit = fit_regressor(
                &data,
                grid,
                fgrid,
                &FitConfig {
                    b_r: cfg.b_r2,
                    b_v: cfg.b_v2,
                    ..base.clone()
                },
            )?;
            SecondFit::Sparse {
                mean,
                data,
                fit: Box::new(fit),
            }
        }
    };
    let (f22, eig2, f12) = match &second {
        SecondFit::Dense { mean, data } => {
            let (f22, eig2, _) = dense_bartlett(data, z, grid, fgrid, span)?;
            let f12 =
                est_cross_sparse_dense(x1, &mean1, data, mean, grid, fgrid, span, regressor.b_r)?;
            (f22, eig2, f12)
        }
        SecondFit::Sparse { data, fit, .. } => {
            let f12 =
                est_cross_spectral_functional(data, &centered, grid, fgrid, span, regressor.b_r)?;
            (fit.spectral.clone(), fit.eig.clone(), f12)
        }
    };
    let zbar = z.mean();
    let zc = z.shifted(-zbar);
    let split = base.plan.split(z.len());
    let b_c = match base.b_c {
        Choice::Fixed(v) => v,
        Choice::Cv => {
            cv_cross_bandwidth(
                &centered,
                &zc.truncated(split),
                grid,
                span,
                &base.plan,
                base.seed,
            )?
            .0
        }
    };
    let (fz1, fz2) = response_cross(&centered, &second, &zc, &regressor, b_c)?;
    let spectra = JointSpectralEstimate {
        f11: regressor.spectral.clone(),
        f22,
        f12,
        fz1,
        fz2,
        eig1: regressor.eig.clone(),
        eig2,
    };
    let k_max = trial_lags(base, fgrid);
    let trim = |full: (FilterSet, FilterSet)| {
        let m = base
            .max_lag
            .unwrap_or_else(|| choose_max_lag(&full.0, grid).max(choose_max_lag(&full.1, grid)))
            .min(k_max);
        (full.0.trimmed(m), full.1.trimmed(m))
    };
    let (regularization, holdout) = if cv {
        if z.len() < 25 {
            return Err(Error::InsufficientData(format!(
                "holdout needs T ≥ 25, got {}",
                z.len()
            )));
        }
        let (t1, t2) = (spectra.eig1.max_eigenvalue(), spectra.eig2.max_eigenvalue());
        let (tz1, tz2) = response_cross(&centered, &second, &zc.truncated(split), &regressor, b_c)?;
        let train = JointSpectralEstimate {
            fz1: tz1,
            fz2: tz2,
            ..spectra.clone()
        };
        let times = split as i64..z.len() as i64;
        let range = required_targets(&times, k_max);
        let c1 = blup_latent(
            &centered,
            &regressor.autocov,
            regressor.sigma2,
            grid,
            range.clone(),
            regressor.window,
        )?;
        let c2 = second.curves(range)?;
        let candidates: Vec<f64> = base.plan.fractions.clone();
        let scores: Vec<f64> = candidates
            .iter()
            .map(|&f| {
                let reg = JointRegularization::new(method, f * t1, f * t2);
                let score = joint_transfer(&train, reg, grid)
                    .and_then(|tr| tr.filters(fgrid, k_max))
                    .map(trim)
                    .and_then(|(a, b)| joint_forecast(&c1, &c2, &a, &b, 0.0, grid, times.clone()))
                    .map(|pred| forecast_error(&pred, &zc, times.clone()));
                score.unwrap_or(f64::NAN)
            })
            .collect();
        let best = argmin_prefer_larger(&candidates, &scores).ok_or(Error::NoFiniteScore)?;
        let fold_scores = scores.iter().map(|&s| vec![s]).collect();
        (
            JointRegularization::new(method, best * t1, best * t2),
            Some(CvTrace {
                candidates,
                fold_scores,
                scores,
            }),
        )
    } else {
        let v1 = match base.param {
            Choice::Fixed(v) => v,
            Choice::Cv => unreachable!(),
        };
        let v2 = match cfg.param2 {
            Choice::Fixed(v) => v,
            Choice::Cv => unreachable!(),
        };
        (JointRegularization::new(method, v1, v2), None)
    };
    let (filters1, filters2) =
        trim(joint_transfer(&spectra, regularization, grid)?.filters(fgrid, k_max)?);
    Ok(JointFit {
        regressor,
        centered,
        mean1,
        mean_bandwidth,
        second,
        zbar,
        b_c,
        spectra,
        regularization,
        filters1,
        filters2,
        holdout,
    })
}

impl JointFit {
    /// Forecasts at `times` from the fitted records.
    pub fn forecast(&self, times: Range<i64>) -> Result<Vec<f64>> {
        let m = self.filters1.max_lag().max(self.filters2.max_lag());
        let range = required_targets(&times, m);
        let r = &self.regressor;
        let c1 = blup_latent(
            &self.centered,
            &r.autocov,
            r.sigma2,
            &r.grid,
            range.clone(),
            r.window,
        )?;
        let c2 = self.second.curves(range)?;
        joint_forecast(
            &c1,
            &c2,
            &self.filters1,
            &self.filters2,
            self.zbar,
            &r.grid,
            times,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::regularized_transfer;
    use crate::spectral::{estimate_spectral_density, own_lag_surfaces};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sparse_ar(
        t_len: usize,
        nmax: usize,
        seed: u64,
        shape: impl Fn(f64) -> f64,
    ) -> (SparseFts, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = 0.0;
        let mut scores = Vec::with_capacity(t_len);
        let curves = (0..t_len)
            .map(|_| {
                a = 0.5 * a + rng.random_range(-1.0..1.0);
                scores.push(a);
                let n = rng.random_range(2..=nmax);
                (0..n)
                    .map(|_| {
                        let x: f64 = rng.random();
                        Observation::new(x, a * shape(x) + 0.5 * rng.random_range(-1.0..1.0))
                    })
                    .collect()
            })
            .collect();
        (SparseFts::new(curves).unwrap(), scores)
    }

    fn dense_iid(t_len: usize, grid: &SpatialGrid, seed: u64) -> DenseFts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curves = (0..t_len)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                DVector::from_fn(grid.len(), |i, _| {
                    let x = grid.point(i);
                    a * (2.0 * PI * x).sin() + 0.5 * b * (2.0 * PI * x).cos()
                })
            })
            .collect();
        DenseFts::new(curves).unwrap()
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    #[test]
    fn functional_cross_zero_response() {
        let grid = SpatialGrid::new(11).unwrap();
        let fgrid = FrequencyGrid::new(16).unwrap();
        let (x, _) = sparse_ar(80, 5, 1, |x| x.cos());
        let z = x.scaled(0.0);
        let f = est_cross_spectral_functional(&x, &z, &grid, &fgrid, 4, 0.3).unwrap();
        assert!(f.iter().all(|m| max_abs(m) == 0.0));
        for k in 1..fgrid.len() {
            let d = &f[k] - f[fgrid.mirror(k)].map(|z| z.conj());
            assert!(max_abs(&d) == 0.0);
        }
    }

    #[test]
    fn functional_cross_of_itself_is_close_to_own_estimate() {
        let grid = SpatialGrid::new(15).unwrap();
        let fgrid = FrequencyGrid::new(32).unwrap();
        let (x, _) = sparse_ar(400, 8, 2, |x| (PI * x).sin());
        let span = 6;
        let b = 0.25;
        let cross = est_cross_spectral_functional(&x, &x, &grid, &fgrid, span, b).unwrap();
        let own = own_lag_surfaces(&x, &grid, span, b)
            .unwrap()
            .to_spectrum(&fgrid);
        // same observations in both roles: exact Hermitian symmetry
        for f in &cross {
            assert!(max_abs(&(f - f.adjoint())) < 1e-12);
        }
        // the diagonal products add the noise ridge at lag 0 only; away from
        // the diagonal the two estimates agree up to smoothing noise
        let mut worst: f64 = 0.0;
        for (c, o) in cross.iter().zip(&own) {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..grid.len() {
                for j in 0..grid.len() {
                    if (grid.point(i) - grid.point(j)).abs() > 2.0 * b {
                        num += (c[(i, j)] - o[(i, j)]).norm_sqr();
                        den += o[(i, j)].norm_sqr();
                    }
                }
            }
            worst = worst.max((num / den).sqrt());
        }
        assert!(worst < 0.25, "{worst}");
    }

    fn eigen_of(f: &DMatrix<C64>, grid: &SpatialGrid) -> (Vec<f64>, DMatrix<C64>) {
        crate::spectral::hermitian_eigen_raw(f, grid.weight())
    }

    #[test]
    fn operator_transfer_rank_one_exact() {
        // F = λ φ φ^H, C = a φ^H: B = (a/λ)·φ^H·(w φ^H φ) / ... applied to φ gives a
        let grid = SpatialGrid::new(9).unwrap();
        let w = grid.weight();
        let phi = DVector::<C64>::from_fn(9, |i, _| {
            C64::new(1.0, 0.0) * (2.0f64).sqrt() * (PI * grid.point(i)).sin()
        });
        let norm = (w * phi.norm_squared()).sqrt();
        let phi = phi / C64::new(norm, 0.0);
        let lam = 0.7;
        let f = &phi * phi.adjoint() * C64::new(lam, 0.0);
        let a = DVector::<C64>::from_fn(9, |i, _| C64::new(grid.point(i), 0.3));
        // cross kernel whose operator maps φ to a
        let c = &a * phi.adjoint();
        let (vals, vecs) = eigen_of(&f, &grid);
        let eig = EigenSystem {
            values: vec![vals.iter().map(|v| v.max(0.0)).collect()],
            vectors: vec![vecs],
        };
        let b = operator_transfer(
            &[c],
            &eig,
            &grid,
            Regularization::Truncation { threshold: 0.1 },
        )
        .unwrap();
        // B F φ = λ B φ should reproduce C φ = a
        let bf = &b.values[0] * (&f * &phi * C64::new(w, 0.0)) * C64::new(w, 0.0);
        assert!((bf - &a).norm() < 1e-10);
    }

    #[test]
    fn operator_transfer_rows_match_scalar_transfer_and_shrink() {
        let grid = SpatialGrid::new(11).unwrap();
        let fgrid = FrequencyGrid::new(16).unwrap();
        let (x, _) = sparse_ar(200, 6, 3, |x| x.cos());
        let (z, _) = sparse_ar(200, 6, 4, |x| x.sin());
        let (_, eig) = estimate_spectral_density(&x, &grid, &fgrid, 4, 0.3).unwrap();
        let cross = est_cross_spectral_functional(&x, &z, &grid, &fgrid, 4, 0.3).unwrap();
        let reg = Regularization::Tikhonov { rho: 0.05 };
        let b = operator_transfer(&cross, &eig, &grid, reg).unwrap();
        let row = 3;
        let fz = CrossSpectralEstimate::from_values(
            cross.iter().map(|c| c.row(row).transpose()).collect(),
            4,
            0.3,
        );
        let scalar = regularized_transfer(&fz, &eig, &grid, reg).unwrap();
        for (bo, bs) in b.values.iter().zip(&scalar.values) {
            assert!((bo.row(row).transpose() - bs).norm() < 1e-10);
        }
        let mut last = f64::INFINITY;
        for rho in [0.01, 0.05, 0.2, 1.0] {
            let b =
                operator_transfer(&cross, &eig, &grid, Regularization::Tikhonov { rho }).unwrap();
            let total: f64 = b.values.iter().map(|m| m.norm_squared()).sum();
            assert!(total < last);
            last = total;
        }
    }

    #[test]
    fn operator_filters_match_direct_sum_and_forecast() {
        let grid = SpatialGrid::new(7).unwrap();
        let fgrid = FrequencyGrid::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = fgrid.len();
        let half: Vec<DMatrix<C64>> = (0..=n / 2)
            .map(|k| {
                DMatrix::from_fn(7, 7, |_, _| {
                    let im = if k == 0 || k == n / 2 {
                        0.0
                    } else {
                        rng.random_range(-1.0..1.0)
                    };
                    C64::new(rng.random_range(-1.0..1.0), im)
                })
            })
            .collect();
        let values = mirror_half(half, n, |m| m.map(|z| z.conj()));
        let b = OperatorTransferEstimate {
            values: values.clone(),
            method: Regularization::Tikhonov { rho: 1.0 },
        };
        let filt = operator_filters(&b, &fgrid, 3).unwrap();
        for k in -3i64..=3 {
            for (i, j) in [(0, 0), (2, 5), (6, 1)] {
                let direct: C64 = (0..n)
                    .map(|m| values[m][(i, j)] * C64::from_polar(1.0, k as f64 * fgrid.omega(m)))
                    .sum();
                assert!((filt.get(k).unwrap()[(i, j)] - direct.re / n as f64).abs() < 1e-10);
            }
        }
        let curves = LatentCurves::new(
            -3,
            (0..12)
                .map(|t| DVector::from_element(7, t as f64))
                .collect(),
        );
        let pred = functional_forecast(&curves, &filt, &grid, 0..5).unwrap();
        assert_eq!(pred.len(), 5);
        assert!(matches!(
            functional_forecast(&curves, &filt, &grid, 0..7),
            Err(Error::MissingCurve { .. })
        ));
    }

    #[test]
    fn sparse_mean_recovers_mean_function() {
        let grid = SpatialGrid::new(21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let curves = (0..400)
            .map(|_| {
                (0..5)
                    .map(|_| {
                        let x: f64 = rng.random();
                        Observation::new(x, 1.0 + x * x + 0.3 * rng.random_range(-1.0..1.0))
                    })
                    .collect()
            })
            .collect();
        let x = SparseFts::new(curves).unwrap();
        let mu = sparse_mean(&x, &grid, 0.15).unwrap();
        for i in 0..grid.len() {
            let t = grid.point(i);
            assert!((mu[i] - 1.0 - t * t).abs() < 0.06, "{} {}", t, mu[i]);
        }
        let (b, trace) = cv_mean_bandwidth(&x, &grid, &[0.05, 0.15, 0.6], 5, 1).unwrap();
        assert!(trace.scores.iter().all(|s| s.is_finite()));
        assert!(b < 0.6);
        let c = center_sparse(&x, &mu, &grid).unwrap();
        let m: f64 = c.curves().iter().flatten().map(|o| o.y).sum::<f64>() / c.total_count() as f64;
        assert!(m.abs() < 0.02);
    }

    #[test]
    fn dense_bartlett_flat_for_iid_curves() {
        let grid = SpatialGrid::new(21).unwrap();
        let fgrid = FrequencyGrid::new(32).unwrap();
        let x = dense_iid(600, &grid, 9);
        let z = ScalarTs::from_values(&vec![0.0; 600]).unwrap();
        let (f, _, c) = dense_bartlett(&x, &z, &grid, &fgrid, 8).unwrap();
        let tr: Vec<f64> = f
            .values()
            .iter()
            .map(|m| m.trace().re * grid.weight())
            .collect();
        let mean = tr.iter().sum::<f64>() / tr.len() as f64;
        assert!(tr.iter().all(|t| (t - mean).abs() <= 0.15 * mean), "{tr:?}");
        assert!(c.values().iter().all(|v| v.norm() == 0.0));
        for k in 1..fgrid.len() {
            assert!(max_abs(&(f.at(k) - f.at(fgrid.mirror(k)).map(|z| z.conj()))) < 1e-12);
        }
        // a single lag gives the lag-0 covariance over 2π at every frequency
        let (f1, _, _) = dense_bartlett(&x, &z, &grid, &fgrid, 1).unwrap();
        let xc = centered_rows(&x, &x.mean());
        let r0 = xc.tr_mul(&xc) / 600.0 / (2.0 * PI);
        for m in f1.values() {
            assert!(max_abs(&(m - r0.map(|v| C64::new(v, 0.0)))) < 1e-10);
        }
    }

    #[test]
    fn sparse_dense_cross_vanishes_for_independent_series() {
        let grid = SpatialGrid::new(15).unwrap();
        let fgrid = FrequencyGrid::new(32).unwrap();
        let (x1, _) = sparse_ar(600, 8, 10, |x| (PI * x).sin());
        let x2 = dense_iid(600, &grid, 11);
        let mu1 = sparse_mean(&x1, &grid, 0.2).unwrap();
        let mu2 = x2.mean();
        let f12 = est_cross_sparse_dense(&x1, &mu1, &x2, &mu2, &grid, &fgrid, 8, 0.2).unwrap();
        let (f11, _) = estimate_spectral_density(
            &center_sparse(&x1, &mu1, &grid).unwrap(),
            &grid,
            &fgrid,
            8,
            0.2,
        )
        .unwrap();
        let z = ScalarTs::from_values(&vec![0.0; 600]).unwrap();
        let (f22, _, _) = dense_bartlett(&x2, &z, &grid, &fgrid, 8).unwrap();
        // trace of F¹² relative to the geometric mean of the marginal traces
        let rel: Vec<f64> = (0..fgrid.len())
            .map(|k| f12[k].trace().norm() / (f11.at(k).trace().re * f22.at(k).trace().re).sqrt())
            .collect();
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        assert!(mean < 0.1, "{mean}");
        for k in 1..fgrid.len() {
            assert!(max_abs(&(&f12[k] - f12[fgrid.mirror(k)].map(|z| z.conj()))) < 1e-12);
        }
        let zero = DenseFts::new(vec![DVector::zeros(15); 600]).unwrap();
        let f0 =
            est_cross_sparse_dense(&x1, &mu1, &zero, &DVector::zeros(15), &grid, &fgrid, 8, 0.2)
                .unwrap();
        assert!(f0.iter().all(|m| max_abs(m) == 0.0));
    }

    #[test]
    fn sparse_dense_cross_detects_shared_scores() {
        let grid = SpatialGrid::new(15).unwrap();
        let fgrid = FrequencyGrid::new(32).unwrap();
        let (x1, scores) = sparse_ar(600, 8, 12, |x| (PI * x).sin());
        let x2 = DenseFts::new(
            scores
                .iter()
                .map(|&a| DVector::from_fn(15, |i, _| a * grid.point(i)))
                .collect(),
        )
        .unwrap();
        let mu1 = sparse_mean(&x1, &grid, 0.2).unwrap();
        let f12 =
            est_cross_sparse_dense(&x1, &mu1, &x2, &x2.mean(), &grid, &fgrid, 8, 0.2).unwrap();
        // F¹²(x, y) ∝ sin(πx)·y with the AR(1) spectrum as the common factor
        let k = fgrid.len() / 2;
        let m = &f12[k];
        let (i, j) = (7, 14);
        let ratio = m[(i, j)].re / (m[(3, j)].re);
        let want = (PI * grid.point(i)).sin() / (PI * grid.point(3)).sin();
        assert!((ratio - want).abs() < 0.15 * want, "{ratio} {want}");
    }

    /// Random Hermitian PSD kernel with a few components.
    fn random_psd(p: usize, rank: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        let a = DMatrix::<C64>::from_fn(p, rank, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        &a * a.adjoint()
    }

    /// Synthetic joint estimate on frequencies `0..n` with conjugate mirroring.
    fn synthetic_joint(
        grid: &SpatialGrid,
        n: usize,
        coupling: f64,
        seed: u64,
    ) -> JointSpectralEstimate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = grid.len();
        let real = |m: DMatrix<C64>, k: usize| {
            if k == 0 || k == n / 2 {
                m.map(|z| C64::new(z.re, 0.0))
            } else {
                m
            }
        };
        let mut f11 = Vec::new();
        let mut f22 = Vec::new();
        let mut f12 = Vec::new();
        let mut fz1 = Vec::new();
        let mut fz2 = Vec::new();
        for k in 0..=n / 2 {
            f11.push(real(random_psd(p, 3, &mut rng), k));
            f22.push(real(random_psd(p, 2, &mut rng), k));
            let c = DMatrix::<C64>::from_fn(p, p, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            f12.push(real(c * C64::new(coupling, 0.0), k));
            let v = |rng: &mut ChaCha8Rng| {
                DVector::<C64>::from_fn(p, |_, _| {
                    let im = if k == 0 || k == n / 2 {
                        0.0
                    } else {
                        rng.random_range(-1.0..1.0)
                    };
                    C64::new(rng.random_range(-1.0..1.0), im)
                })
            };
            fz1.push(v(&mut rng));
            fz2.push(v(&mut rng));
        }
        let cm = |m: &DMatrix<C64>| m.map(|z| z.conj());
        let cv = |v: &DVector<C64>| v.map(|z| z.conj());
        let f11 = SpectralDensityEstimate::from_values(mirror_half(f11, n, cm), 2, 0.0)
            .hermitian_projection();
        let f22 = SpectralDensityEstimate::from_values(mirror_half(f22, n, cm), 2, 0.0)
            .hermitian_projection();
        let (f11, eig1) = f11.clip(grid);
        let (f22, eig2) = f22.clip(grid);
        JointSpectralEstimate {
            f11,
            f22,
            f12: mirror_half(f12, n, cm),
            fz1: CrossSpectralEstimate::from_values(mirror_half(fz1, n, cv), 2, 0.0),
            fz2: CrossSpectralEstimate::from_values(mirror_half(fz2, n, cv), 2, 0.0),
            eig1,
            eig2,
        }
    }

    fn close(a: &[DVector<C64>], b: &[DVector<C64>], tol: f64) -> bool {
        a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).norm() <= tol * (1.0 + y.norm()))
    }

    #[test]
    fn gamma_matches_direct_pairing() {
        let grid = SpatialGrid::new(8).unwrap();
        let j = synthetic_joint(&grid, 8, 0.3, 1);
        let w = grid.weight();
        let g = j.gamma(2, 3, 2, &grid);
        for a in 0..3 {
            for b in 0..2 {
                let psi = j.eig2.vectors[2].column(b);
                let phi = j.eig1.vectors[2].column(a);
                let fpsi = &j.f12[2] * psi * C64::new(w, 0.0);
                let inner: C64 = fpsi
                    .iter()
                    .zip(phi.iter())
                    .map(|(u, v)| u * v.conj())
                    .sum::<C64>()
                    * w;
                assert!((g[(a, b)] - inner).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn uncoupled_joint_reduces_to_marginals() {
        let grid = SpatialGrid::new(8).unwrap();
        let j = synthetic_joint(&grid, 8, 0.0, 2);
        let m1 = regularized_transfer(
            &j.fz1,
            &j.eig1,
            &grid,
            Regularization::Truncation { threshold: 0.05 },
        )
        .unwrap();
        let m2 = regularized_transfer(
            &j.fz2,
            &j.eig2,
            &grid,
            Regularization::Truncation { threshold: 0.08 },
        )
        .unwrap();
        let t = joint_transfer(
            &j,
            JointRegularization::Truncation {
                threshold1: 0.05,
                threshold2: 0.08,
            },
            &grid,
        )
        .unwrap();
        assert!(close(&t.b1, &m1.values, 1e-8) && close(&t.b2, &m2.values, 1e-8));
        let m1 = regularized_transfer(
            &j.fz1,
            &j.eig1,
            &grid,
            Regularization::Tikhonov { rho: 0.1 },
        )
        .unwrap();
        let m2 = regularized_transfer(
            &j.fz2,
            &j.eig2,
            &grid,
            Regularization::Tikhonov { rho: 0.3 },
        )
        .unwrap();
        let t = joint_tikhonov_transfer(&j, 0.1, 0.3, &grid).unwrap();
        assert!(close(&t.b1, &m1.values, 1e-8) && close(&t.b2, &m2.values, 1e-8));
    }

    #[test]
    fn one_sided_ranks_reduce_to_single_truncation() {
        let grid = SpatialGrid::new(8).unwrap();
        let j = synthetic_joint(&grid, 8, 0.4, 3);
        let n = j.len();
        let k1 = threshold_rank(&j.eig1, 0.05);
        let single = regularized_transfer(
            &j.fz1,
            &j.eig1,
            &grid,
            Regularization::Truncation { threshold: 0.05 },
        )
        .unwrap();
        let t = joint_truncation_transfer(&j, &k1, &vec![0; n], &grid).unwrap();
        assert!(close(&t.b1, &single.values, 1e-12));
        assert!(t.b2.iter().all(|v| v.norm() == 0.0));
        let k2 = threshold_rank(&j.eig2, 0.05);
        let single = regularized_transfer(
            &j.fz2,
            &j.eig2,
            &grid,
            Regularization::Truncation { threshold: 0.05 },
        )
        .unwrap();
        let t = joint_truncation_transfer(&j, &vec![0; n], &k2, &grid).unwrap();
        assert!(close(&t.b2, &single.values, 1e-12));
        assert!(t.b1.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn scalar_case_closed_form() {
        let grid = SpatialGrid::new(8).unwrap();
        let j = synthetic_joint(&grid, 8, 0.3, 4);
        let n = j.len();
        let t = joint_truncation_transfer(&j, &vec![1; n], &vec![1; n], &grid).unwrap();
        let w = grid.weight();
        for k in [0, 2, 5] {
            let lam = j.eig1.values[k][0];
            let eta = j.eig2.values[k][0];
            let gam = j.gamma(k, 1, 1, &grid)[(0, 0)];
            let det = lam * eta - gam.norm_sqr();
            // M = [[η, -γ], [-γ̄, λ]] / det
            let (m11, m12, m21, m22) = (eta / det, -gam / det, -gam.conj() / det, lam / det);
            let phi = j.eig1.vectors[k].column(0);
            let psi = j.eig2.vectors[k].column(0);
            let c: C64 = j
                .fz1
                .at(k)
                .iter()
                .zip(phi.iter())
                .map(|(a, b)| a * b)
                .sum::<C64>()
                * w;
            let d: C64 = j
                .fz2
                .at(k)
                .iter()
                .zip(psi.iter())
                .map(|(a, b)| a * b)
                .sum::<C64>()
                * w;
            let u1 = C64::new(m11, 0.0) * c.conj() + m12 * d.conj();
            let u2 = m21 * c.conj() + C64::new(m22, 0.0) * d.conj();
            let b1 = phi.map(|z| z.conj()) * u1.conj();
            let b2 = psi.map(|z| z.conj()) * u2.conj();
            assert!((&t.b1[k] - b1).norm() < 1e-8 && (&t.b2[k] - b2).norm() < 1e-8);
        }
    }

    #[test]
    fn singular_coupling_drops_components() {
        let grid = SpatialGrid::new(6).unwrap();
        let mut j = synthetic_joint(&grid, 4, 0.0, 5);
        // X² a copy of X¹: F²² = F¹¹ = F¹², so [[λ, γ], [γ̄, η]] is singular
        j.f22 = j.f11.clone();
        j.eig2 = j.eig1.clone();
        j.f12 = j.f11.values().to_vec();
        let n = j.len();
        let t = joint_truncation_transfer(&j, &vec![1; n], &vec![1; n], &grid).unwrap();
        for k in 0..n {
            let total = t.b1[k].norm() + t.b2[k].norm();
            assert!(total.is_finite());
            // exactly one regressor keeps its component
            assert!(t.b1[k].norm() == 0.0 || t.b2[k].norm() == 0.0);
        }
    }

    #[test]
    fn tikhonov_matches_stacked_eigen_oracle() {
        let grid = SpatialGrid::new(6).unwrap();
        let j = synthetic_joint(&grid, 8, 0.2, 6);
        let rho = 0.15;
        let t = joint_tikhonov_transfer(&j, rho, rho, &grid).unwrap();
        let p = grid.len();
        let w = grid.weight();
        for k in 0..j.len() {
            // stacked regressor on a grid of 2p points with the same weight
            let mut big = DMatrix::<C64>::zeros(2 * p, 2 * p);
            big.view_mut((0, 0), (p, p)).copy_from(j.f11.at(k));
            big.view_mut((p, p), (p, p)).copy_from(j.f22.at(k));
            big.view_mut((0, p), (p, p)).copy_from(&j.f12[k]);
            big.view_mut((p, 0), (p, p)).copy_from(&j.f12[k].adjoint());
            let (vals, vecs) = crate::spectral::hermitian_eigen_raw(&big, w);
            let mut fz = DVector::<C64>::zeros(2 * p);
            fz.rows_mut(0, p).copy_from(j.fz1.at(k));
            fz.rows_mut(p, p).copy_from(j.fz2.at(k));
            let mut b = DVector::<C64>::zeros(2 * p);
            for (m, &l) in vals.iter().enumerate() {
                let col = vecs.column(m);
                let c: C64 = fz.iter().zip(col.iter()).map(|(a, v)| a * v).sum::<C64>() * w;
                b += col.map(|z| z.conj()) * (c / (l + rho));
            }
            assert!((&t.b1[k] - b.rows(0, p)).norm() < 1e-8 * (1.0 + b.norm()));
            assert!((&t.b2[k] - b.rows(p, p)).norm() < 1e-8 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn tikhonov_shrinks_with_each_parameter() {
        let grid = SpatialGrid::new(6).unwrap();
        let j = synthetic_joint(&grid, 8, 0.0, 7);
        let norm = |v: &[DVector<C64>]| v.iter().map(|b| b.norm_squared()).sum::<f64>();
        let mut last = f64::INFINITY;
        for r in [0.01, 0.1, 1.0] {
            let t = joint_tikhonov_transfer(&j, r, 0.1, &grid).unwrap();
            assert!(norm(&t.b1) < last);
            last = norm(&t.b1);
        }
        let j = synthetic_joint(&grid, 8, 0.2, 7);
        let mut last = f64::INFINITY;
        for r in [0.05, 0.2, 1.0] {
            let t = joint_tikhonov_transfer(&j, r, r, &grid).unwrap();
            let total = norm(&t.b1) + norm(&t.b2);
            assert!(total < last);
            last = total;
        }
        assert!(joint_tikhonov_transfer(&j, 0.0, 1.0, &grid).is_err());
    }

    #[test]
    fn joint_transfers_conjugate_across_frequencies() {
        let grid = SpatialGrid::new(6).unwrap();
        let j = synthetic_joint(&grid, 8, 0.3, 8);
        let fgrid = FrequencyGrid::new(8).unwrap();
        for reg in [
            JointRegularization::Truncation {
                threshold1: 0.05,
                threshold2: 0.05,
            },
            JointRegularization::Tikhonov {
                rho1: 0.1,
                rho2: 0.2,
            },
        ] {
            let t = joint_transfer(&j, reg, &grid).unwrap();
            for k in 1..8 {
                let m = fgrid.mirror(k);
                assert!((&t.b1[k] - t.b1[m].map(|z| z.conj())).norm() < 1e-12);
                assert!((&t.b2[k] - t.b2[m].map(|z| z.conj())).norm() < 1e-12);
            }
            assert!(t.filters(&fgrid, 2).is_ok());
        }
    }

    #[test]
    fn zero_filters_forecast_the_mean() {
        let grid = SpatialGrid::new(5).unwrap();
        let c = LatentCurves::new(-2, vec![DVector::from_element(5, 1.0); 10]);
        let f = FilterSet::zeros(5, 2);
        let z = joint_forecast(&c, &c, &f, &f, 3.5, &grid, 0..6).unwrap();
        assert!(z.iter().all(|&v| v == 3.5));
        assert!(joint_forecast(&c, &c, &f, &f, 0.0, &grid, 0..7).is_err());
        let x = DenseFts::new(vec![DVector::from_element(5, 2.0); 3]).unwrap();
        let pad = padded_dense_curves(&x, &DVector::from_element(5, 0.5), -1..4);
        assert_eq!(pad.get(-1).unwrap()[0], 0.0);
        assert_eq!(pad.get(1).unwrap()[0], 1.5);
        assert_eq!(pad.get(3).unwrap()[0], 0.0);
    }

    fn joint_data(t_len: usize, grid: &SpatialGrid, seed: u64) -> (SparseFts, DenseFts, ScalarTs) {
        let (x1, s1) = sparse_ar(t_len, 10, seed, |x| (PI * x).sin() + 1.0);
        let x2 = dense_iid(t_len, grid, seed + 100);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 200);
        let z: Vec<f64> = (0..t_len)
            .map(|t| {
                let prev = if t > 0 { s1[t - 1] } else { 0.0 };
                let a2 = grid.inner(
                    x2.curve(t).as_slice(),
                    &grid
                        .points()
                        .iter()
                        .map(|x| (2.0 * PI * x).sin())
                        .collect::<Vec<_>>(),
                );
                2.0 + 0.5 * s1[t] + 0.3 * prev + a2 + 0.1 * rng.random_range(-1.0..1.0)
            })
            .collect();
        (x1, x2, ScalarTs::from_values(&z).unwrap())
    }

    fn fixed_joint_config() -> JointConfig {
        let base = FitConfig {
            b_r: Choice::Fixed(0.1),
            b_v: Choice::Fixed(0.1),
            b_c: Choice::Fixed(0.2),
            param: Choice::Fixed(0.05),
            max_lag: Some(3),
            ..FitConfig::default()
        };
        JointConfig {
            param2: Choice::Fixed(0.05),
            mean_bandwidth: Choice::Fixed(0.2),
            ..JointConfig::new(base, Choice::Cv)
        }
    }

    #[test]
    fn joint_fit_is_shift_equivariant_in_the_response() {
        let grid = SpatialGrid::new(11).unwrap();
        let fgrid = FrequencyGrid::new(64).unwrap();
        let (x1, x2, z) = joint_data(200, &grid, 21);
        let cfg = fixed_joint_config();
        let second = SecondRegressor::Dense(x2);
        let a = fit_joint(&x1, &second, &z, &grid, &fgrid, Method::Tikhonov, &cfg).unwrap();
        let b = fit_joint(
            &x1,
            &second,
            &z.shifted(5.0),
            &grid,
            &fgrid,
            Method::Tikhonov,
            &cfg,
        )
        .unwrap();
        let fa = a.forecast(0..200).unwrap();
        let fb = b.forecast(0..200).unwrap();
        for (u, v) in fa.iter().zip(&fb) {
            assert!((v - u - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn joint_fit_explains_both_regressors() {
        let grid = SpatialGrid::new(11).unwrap();
        let fgrid = FrequencyGrid::new(64).unwrap();
        let (x1, x2, z) = joint_data(300, &grid, 22);
        let cfg = JointConfig::new(
            FitConfig {
                seed: 3,
                ..FitConfig::default()
            },
            Choice::Cv,
        );
        let fit = fit_joint(
            &x1,
            &SecondRegressor::Dense(x2),
            &z,
            &grid,
            &fgrid,
            Method::Tikhonov,
            &cfg,
        )
        .unwrap();
        let pred = fit.forecast(0..300).unwrap();
        let mse = forecast_error(&pred, &z, 0..300);
        assert!(
            mse < 0.5 * z.sample_variance(),
            "{mse} {}",
            z.sample_variance()
        );
        assert!(fit.holdout.is_some());
    }

    #[test]
    fn dense_only_model_matches_single_series_transfer() {
        let grid = SpatialGrid::new(11).unwrap();
        let fgrid = FrequencyGrid::new(64).unwrap();
        let (x1, x2, z) = joint_data(200, &grid, 23);
        let fit = fit_joint(
            &x1,
            &SecondRegressor::Dense(x2.clone()),
            &z,
            &grid,
            &fgrid,
            Method::Truncation,
            &fixed_joint_config(),
        )
        .unwrap();
        let n = fgrid.len();
        let k2 = threshold_rank(&fit.spectra.eig2, 0.05);
        let t = joint_truncation_transfer(&fit.spectra, &vec![0; n], &k2, &grid).unwrap();
        let (_, eig, fz) = dense_bartlett(
            &x2,
            &z.shifted(-z.mean()),
            &grid,
            &fgrid,
            fit.regressor.span,
        )
        .unwrap();
        let single = regularized_transfer(
            &fz,
            &eig,
            &grid,
            Regularization::Truncation { threshold: 0.05 },
        )
        .unwrap();
        assert!(close(&t.b2, &single.values, 1e-10));
        let (_, f2) = t.filters(&fgrid, 3).unwrap();
        let zero = FilterSet::zeros(11, 3);
        let c1 = LatentCurves::new(-3, vec![DVector::zeros(11); 206]);
        let c2 = padded_dense_curves(&x2, &x2.mean(), -3..203);
        let joint = joint_forecast(&c1, &c2, &zero, &f2, fit.zbar, &grid, 0..200).unwrap();
        let sf = crate::regression::filters_from_transfer(&single, &fgrid, 3).unwrap();
        let direct = crate::forecasting::forecast_response(&c2, &sf, &grid, 0..200).unwrap();
        for (a, b) in joint.iter().zip(&direct) {
            assert!((a - fit.zbar - b).abs() < 1e-10);
        }
    }
}
