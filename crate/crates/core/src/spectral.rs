//! Spectral and cross-spectral density estimation.
//!
//! The spectral density estimator pools raw lagged covariances over the lags
//! `|h| < L` in a single weighted local-linear fit with a complex response. The
//! normal matrix of that fit is real and does not depend on the frequency, so
//! the intercept is a fixed linear functional applied to the per-lag moments.
//! Each lag collapses to one real surface `s_h`, and
//! `f̂_ω = (L/2π) Σ_h s_h e^{-ihω}`.

use crate::grid::{FrequencyGrid, SpatialGrid};
use crate::kernel::bartlett_weight;
use crate::locpoly::{intercept_weights, ObsKernel};
use crate::smoothing::{Lag0Moments, TimeMoments};
use crate::{Error, Result, ScalarTs, SparseFts, C64};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Per-frequency complex kernels of the spectral density on the spatial grid.
#[derive(Clone, Debug)]
pub struct SpectralDensityEstimate {
    span: usize,
    bandwidth: f64,
    values: Vec<DMatrix<C64>>,
}

impl SpectralDensityEstimate {
    pub fn from_values(values: Vec<DMatrix<C64>>, span: usize, bandwidth: f64) -> Self {
        Self {
            span,
            bandwidth,
            values,
        }
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn values(&self) -> &[DMatrix<C64>] {
        &self.values
    }

    pub fn at(&self, k: usize) -> &DMatrix<C64> {
        &self.values[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Projects every frequency onto the Hermitian matrices.
    pub fn hermitian_projection(mut self) -> Self {
        for f in &mut self.values {
            let h = f.adjoint();
            *f = (&*f + h) * C64::new(0.5, 0.0);
        }
        self
    }

    /// Clips negative eigenvalues at zero and returns the clipped estimate with
    /// its eigensystem.
    pub fn clip(&self, grid: &SpatialGrid) -> (Self, EigenSystem) {
        let eig = eigendecompose(self, grid);
        let values = eig
            .vectors
            .iter()
            .zip(&eig.values)
            .map(|(v, lam)| {
                // F = Σ λ φ φ^H with L²-normalized φ
                let mut scaled = v.clone();
                for (j, l) in lam.iter().enumerate() {
                    scaled.column_mut(j).scale_mut(*l);
                }
                &scaled * v.adjoint()
            })
            .collect();
        let clipped = Self {
            span: self.span,
            bandwidth: self.bandwidth,
            values,
        };
        (clipped.hermitian_projection(), eig)
    }
}

/// Harmonic eigenvalues and L²-orthonormal eigenfunctions per frequency.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// descending, clipped at zero
    pub values: Vec<Vec<f64>>,
    /// column `j` holds `φ_j` on the grid
    pub vectors: Vec<DMatrix<C64>>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sup_ω λ̂_1^ω`.
    pub fn max_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.first().copied().unwrap_or(0.0))
            .fold(0.0, f64::max)
    }
}

/// Real autocovariance kernels `R_h` for `h = 0..=max_lag`; `R_{-h} = R_hᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AutocovSequence {
    lags: Vec<DMatrix<f64>>,
}

impl AutocovSequence {
    pub fn new(lags: Vec<DMatrix<f64>>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidInput(
                "autocovariance sequence needs lag 0".into(),
            ));
        }
        Ok(Self { lags })
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    pub fn grid_len(&self) -> usize {
        self.lags[0].nrows()
    }

    /// `R_h` for `h ≥ 0`.
    pub fn lag(&self, h: usize) -> Option<&DMatrix<f64>> {
        self.lags.get(h)
    }

    /// `R_h` for any sign of `h`, zero beyond the stored range.
    pub fn get(&self, h: i64) -> DMatrix<f64> {
        let p = self.grid_len();
        match self.lags.get(h.unsigned_abs() as usize) {
            Some(m) if h >= 0 => m.clone(),
            Some(m) => m.transpose(),
            None => DMatrix::zeros(p, p),
        }
    }

    pub fn lags(&self) -> &[DMatrix<f64>] {
        &self.lags
    }
}

/// Per-lag pooled surfaces `s_h`, `h = -(L-1)..=(L-1)`; `R̂_h = L s_h` before clipping.
pub(crate) struct LagSurfaces {
    pub span: usize,
    pub surfaces: Vec<DMatrix<f64>>,
}

impl LagSurfaces {
    pub fn get(&self, h: i64) -> &DMatrix<f64> {
        &self.surfaces[(h + self.span as i64 - 1) as usize]
    }

    /// `(L/2π) Σ_h s_h e^{-ihω}` at all frequencies, with `F(-ω) = conj F(ω)` exactly.
    pub fn to_spectrum(&self, fgrid: &FrequencyGrid) -> Vec<DMatrix<C64>> {
        let n = fgrid.len();
        let p = self.surfaces[0].nrows();
        let m = self.span as i64 - 1;
        let scale = self.span as f64 / (2.0 * PI);
        let half: Vec<DMatrix<C64>> = fgrid
            .half()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|k| {
                let mut f = DMatrix::<C64>::zeros(p, p);
                for h in -m..=m {
                    let e = fgrid.phase(-h, k) * scale;
                    f.zip_apply(self.get(h), |a, s| *a += e * s);
                }
                f
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            if k <= n / 2 {
                out.push(half[k].clone());
            } else {
                out.push(half[n - k].map(|z| z.conj()));
            }
        }
        out
    }
}

/// Which lag-0 pairs to drop and how to weight each lag in the pooled fit.
pub(crate) struct PoolingRule {
    /// drop same-observation products at lag 0
    pub exclude_diagonal: bool,
    /// multiplies lag `h` in the objective (besides the Bartlett weight)
    pub lag_weight: Box<dyn Fn(i64) -> f64 + Sync>,
}

/// Pooled local-linear fit of lagged products `first_{t+h} · second_t` over
/// `|h| < span`, reduced to per-lag intercept surfaces.
pub(crate) fn pooled_lag_surfaces(
    first: &SparseFts,
    second: &SparseFts,
    grid: &SpatialGrid,
    span: usize,
    bandwidth: f64,
    rule: &PoolingRule,
) -> Result<LagSurfaces> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let t_len = first.len();
    if second.len() != t_len {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    if span == 0 || span > t_len {
        return Err(Error::InvalidInput(format!(
            "span {span} must lie in 1..={t_len}"
        )));
    }
    let p = grid.len();
    let same = std::ptr::eq(first, second);
    let kf = ObsKernel::new(first, grid, bandwidth);
    let tf = TimeMoments::new(first, &kf, p, |_| true);
    let owned;
    let tsec = if same {
        &tf
    } else {
        owned = TimeMoments::new(second, &ObsKernel::new(second, grid, bandwidth), p, |_| {
            true
        });
        &owned
    };

    // per lag: weight products P^{rs} for (r,s) in ORDER and rhs products
    const ORDER: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
    let m = span as i64 - 1;
    let nl = (2 * m + 1) as usize;
    let mut wprod: Vec<Option<[DMatrix<f64>; 6]>> = vec![None; nl];
    let mut rprod: Vec<Option<[DMatrix<f64>; 3]>> = vec![None; nl];
    let lag_products = |h: i64| -> ([DMatrix<f64>; 6], [DMatrix<f64>; 3]) {
        let lo = 0.max(-h) as usize;
        let hi = (t_len as i64).min(t_len as i64 - h) as usize;
        let n = hi - lo;
        let fa = |mat: &DMatrix<f64>| mat.rows((lo as i64 + h) as usize, n).into_owned();
        let sb = |mat: &DMatrix<f64>| mat.rows(lo, n).into_owned();
        let fk: Vec<DMatrix<f64>> = tf.k.iter().map(fa).collect();
        let sk: Vec<DMatrix<f64>> = tsec.k.iter().map(sb).collect();
        let fy: Vec<DMatrix<f64>> = tf.a.iter().map(fa).collect();
        let sy: Vec<DMatrix<f64>> = tsec.a.iter().map(sb).collect();
        let w = ORDER.map(|(r, s)| fk[r].tr_mul(&sk[s]));
        let b = [
            fy[0].tr_mul(&sy[0]),
            fy[1].tr_mul(&sy[0]),
            fy[0].tr_mul(&sy[1]),
        ];
        (w, b)
    };
    for h in -m..=m {
        let idx = (h + m) as usize;
        if same && h < 0 {
            continue;
        }
        let (w, b) = lag_products(h);
        wprod[idx] = Some(w);
        rprod[idx] = Some(b);
    }
    if same {
        for h in 1..=m {
            let (w, b) = (
                wprod[(h + m) as usize].clone().unwrap(),
                rprod[(h + m) as usize].clone().unwrap(),
            );
            // P_{-h}^{rs} = (P_h^{sr})ᵀ
            let wt = [
                w[0].transpose(),
                w[2].transpose(),
                w[1].transpose(),
                w[5].transpose(),
                w[4].transpose(),
                w[3].transpose(),
            ];
            let bt = [b[0].transpose(), b[2].transpose(), b[1].transpose()];
            wprod[(m - h) as usize] = Some(wt);
            rprod[(m - h) as usize] = Some(bt);
        }
    }
    if rule.exclude_diagonal {
        let d = Lag0Moments::diagonal(first, &kf, p, 0..t_len);
        let w = wprod[m as usize].as_mut().unwrap();
        w[0] -= &d.m00;
        w[1] -= &d.m10;
        w[2] -= d.m10.transpose();
        w[3] -= &d.m20;
        w[4] -= &d.m11;
        w[5] -= d.m20.transpose();
        let b = rprod[m as usize].as_mut().unwrap();
        b[0] -= &d.n00;
        b[1] -= &d.n10;
        b[2] -= d.n10.transpose();
    }

    let coef: Vec<f64> = (-m..=m)
        .map(|h| bartlett_weight(span, h) * (rule.lag_weight)(h))
        .collect();
    let mut a: [DMatrix<f64>; 6] = std::array::from_fn(|_| DMatrix::zeros(p, p));
    for (idx, w) in wprod.iter().enumerate() {
        let w = w.as_ref().unwrap();
        for c in 0..6 {
            a[c] += &w[c] * coef[idx];
        }
    }
    let mut g: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(p, p));
    for y in 0..p {
        for x in 0..p {
            let e = |c: usize| a[c][(x, y)];
            let mat = [[e(0), e(1), e(2)], [e(1), e(3), e(4)], [e(2), e(4), e(5)]];
            let gi = intercept_weights(&mat, &[3, 1]).ok_or_else(|| Error::SingularFit {
                location: format!("({}, {})", grid.point(x), grid.point(y)),
            })?;
            for c in 0..3 {
                g[c][(x, y)] = gi[c];
            }
        }
    }
    let surfaces = rprod
        .iter()
        .enumerate()
        .map(|(idx, b)| {
            let b = b.as_ref().unwrap();
            let mut s = g[0].component_mul(&b[0]);
            s += g[1].component_mul(&b[1]);
            s += g[2].component_mul(&b[2]);
            s * coef[idx]
        })
        .collect();
    Ok(LagSurfaces { span, surfaces })
}

fn own_rule(data: &SparseFts) -> Result<PoolingRule> {
    let t_len = data.len() as f64;
    let nbar = data.mean_count();
    let n2bar = data.mean_square_count();
    let n0 = t_len * (n2bar - nbar);
    if !(n0 > 0.0) {
        return Err(Error::InsufficientData(
            "no time point has two observations".into(),
        ));
    }
    let lag_weight = move |h: i64| {
        if h == 0 {
            1.0 / n0
        } else {
            1.0 / ((t_len - h.abs() as f64) * nbar * nbar)
        }
    };
    Ok(PoolingRule {
        exclude_diagonal: true,
        lag_weight: Box::new(lag_weight),
    })
}

pub(crate) fn own_lag_surfaces(
    data: &SparseFts,
    grid: &SpatialGrid,
    span: usize,
    bandwidth: f64,
) -> Result<LagSurfaces> {
    pooled_lag_surfaces(data, data, grid, span, bandwidth, &own_rule(data)?)
}

/// Spectral density estimate after Hermitian projection but before clipping.
pub fn estimate_spectral_density_unclipped(
    data: &SparseFts,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    span: usize,
    bandwidth: f64,
) -> Result<SpectralDensityEstimate> {
    fgrid.check_span(span)?;
    let surfaces = own_lag_surfaces(data, grid, span, bandwidth)?;
    let values = surfaces.to_spectrum(fgrid);
    Ok(SpectralDensityEstimate {
        span,
        bandwidth,
        values,
    }
    .hermitian_projection())
}

/// Bartlett-weighted local-linear spectral density estimate, Hermitian and
/// non-negative at every frequency, together with its eigensystem.
pub fn estimate_spectral_density(
    data: &SparseFts,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    span: usize,
    bandwidth: f64,
) -> Result<(SpectralDensityEstimate, EigenSystem)> {
    Ok(estimate_spectral_density_unclipped(data, grid, fgrid, span, bandwidth)?.clip(grid))
}

/// Hermitian eigendecomposition of every frequency in the quadrature inner
/// product; eigenvalues are clipped at zero and sorted descending.
pub fn eigendecompose(f: &SpectralDensityEstimate, grid: &SpatialGrid) -> EigenSystem {
    let n = f.values.len();
    let w = grid.weight();
    let half: Vec<(Vec<f64>, DMatrix<C64>)> = (0..=n / 2)
        .into_par_iter()
        .map(|k| hermitian_eigen(&f.values[k], w))
        .collect();
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        if k <= n / 2 {
            values.push(half[k].0.clone());
            vectors.push(half[k].1.clone());
        } else {
            values.push(half[n - k].0.clone());
            vectors.push(half[n - k].1.map(|z| z.conj()));
        }
    }
    EigenSystem { values, vectors }
}

/// Eigenpairs of the operator with kernel `f` under weight `w`, unclipped.
pub(crate) fn hermitian_eigen_raw(f: &DMatrix<C64>, w: f64) -> (Vec<f64>, DMatrix<C64>) {
    let m = f * C64::new(w, 0.0);
    let e = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let s = 1.0 / w.sqrt();
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<C64>::zeros(f.nrows(), order.len());
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &(e.eigenvectors.column(i) * C64::new(s, 0.0)));
    }
    (vals, vecs)
}

fn hermitian_eigen(f: &DMatrix<C64>, w: f64) -> (Vec<f64>, DMatrix<C64>) {
    let (mut vals, vecs) = hermitian_eigen_raw(f, w);
    for v in &mut vals {
        *v = v.max(0.0);
    }
    (vals, vecs)
}

/// `R̂_h = Σ_k F̂_{ω_k} e^{ihω_k} 2π/n` for `h = 0..=max_lag`.
pub fn invert_to_autocov(
    f: &SpectralDensityEstimate,
    fgrid: &FrequencyGrid,
    max_lag: usize,
) -> Result<AutocovSequence> {
    fgrid.check_span(max_lag)?;
    let p = f.values[0].nrows();
    let step = fgrid.step();
    let mut lags = Vec::with_capacity(max_lag + 1);
    let mut residue: f64 = 0.0;
    for h in 0..=max_lag as i64 {
        let mut acc = DMatrix::<C64>::zeros(p, p);
        for (k, fk) in f.values.iter().enumerate() {
            let e = fgrid.phase(h, k);
            acc.zip_apply(fk, |a, z| *a += z * e);
        }
        residue = acc.iter().fold(residue, |r, z| r.max((z.im * step).abs()));
        lags.push(acc.map(|z| z.re * step));
    }
    if residue > 1e-6 {
        return Err(Error::ImagResidue { residue });
    }
    AutocovSequence::new(lags)
}

/// Cross-spectral density between the response and the regressor, one complex
/// value per frequency and grid point.
#[derive(Clone, Debug)]
pub struct CrossSpectralEstimate {
    span: usize,
    bandwidth: f64,
    values: Vec<DVector<C64>>,
}

impl CrossSpectralEstimate {
    pub fn from_values(values: Vec<DVector<C64>>, span: usize, bandwidth: f64) -> Self {
        Self {
            span,
            bandwidth,
            values,
        }
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn values(&self) -> &[DVector<C64>] {
        &self.values
    }

    pub fn at(&self, k: usize) -> &DVector<C64> {
        &self.values[k]
    }

    /// Errors at the first grid point left undefined by a degenerate window.
    pub fn ensure_finite(&self, grid: &SpatialGrid) -> Result<()> {
        if let Some(v) = self.values.first() {
            if let Some(i) = v
                .iter()
                .position(|z| !z.re.is_finite() || !z.im.is_finite())
            {
                return Err(Error::DegenerateDenominator { x: grid.point(i) });
            }
        }
        Ok(())
    }
}

/// Frequency-independent pieces of the closed-form cross-spectral smoother at
/// each grid point: `S_r` for `r = 0..3` and per-lag `Q_r^{(h)}` for `r = 0, 1`.
struct CrossMoments {
    s: [DVector<f64>; 3],
    /// index `h + L - 1`
    q: Vec<[DVector<f64>; 2]>,
}

/// Per-time sums of `(d/B)^r K/B` for `r = 0..3` and of `Y (d/B)^r K/B` for `r = 0, 1`, as `T × p` matrices.
pub(crate) fn cross_time_moments(
    x: &SparseFts,
    grid: &SpatialGrid,
    bandwidth: f64,
) -> ([DMatrix<f64>; 3], [DMatrix<f64>; 2]) {
    let t_len = x.len();
    let p = grid.len();
    let kern = ObsKernel::new(x, grid, bandwidth);
    let mut u: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(t_len, p));
    let mut v: [DMatrix<f64>; 2] = std::array::from_fn(|_| DMatrix::zeros(t_len, p));
    for t in 0..t_len {
        for (n, obs) in kern.obs_of(t).enumerate() {
            let y = x.curve(t)[n].y;
            for &(i, k, d) in kern.entries_of(obs) {
                let i = i as usize;
                let kb = k / bandwidth;
                let db = d / bandwidth;
                u[0][(t, i)] += kb;
                u[1][(t, i)] += db * kb;
                u[2][(t, i)] += db * db * kb;
                v[0][(t, i)] += y * kb;
                v[1][(t, i)] += y * db * kb;
            }
        }
    }
    (u, v)
}

fn cross_moments(
    x: &SparseFts,
    z: &ScalarTs,
    grid: &SpatialGrid,
    span: usize,
    bandwidth: f64,
) -> CrossMoments {
    let t_len = x.len();
    let p = grid.len();
    let (u, v) = cross_time_moments(x, grid, bandwidth);
    let m = span as i64 - 1;
    let tf = t_len as f64;
    let mut s: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(p));
    let mut q = Vec::with_capacity((2 * m + 1) as usize);
    for h in -m..=m {
        let w = bartlett_weight(span, h);
        let mut qh: [DVector<f64>; 2] = std::array::from_fn(|_| DVector::zeros(p));
        let lo = 0.max(-h);
        let hi = (t_len as i64).min(t_len as i64 - h);
        for t in lo..hi {
            let Some(zv) = z.get(t + h) else { continue };
            let t = t as usize;
            for i in 0..p {
                for r in 0..3 {
                    s[r][i] += w * u[r][(t, i)];
                }
                qh[0][i] += zv * v[0][(t, i)];
                qh[1][i] += zv * v[1][(t, i)];
            }
        }
        qh[0] *= w / tf;
        qh[1] *= w / tf;
        q.push(qh);
    }
    let norm = 1.0 / (span as f64 * tf);
    for r in &mut s {
        *r *= norm;
    }
    CrossMoments { s, q }
}

/// Closed-form local-linear Bartlett estimate of the cross-spectral density.
pub fn estimate_cross_spectral(
    x: &SparseFts,
    z: &ScalarTs,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    span: usize,
    bandwidth: f64,
) -> Result<CrossSpectralEstimate> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if z.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "response length {} differs from regressor length {}",
            z.len(),
            x.len()
        )));
    }
    if span == 0 || span > x.len() {
        return Err(Error::InvalidInput(format!(
            "span {span} must lie in 1..={}",
            x.len()
        )));
    }
    fgrid.check_span(span)?;
    let p = grid.len();
    let m = span as i64 - 1;
    // (S, Q) per grid point, widening degenerate windows
    let base = cross_moments(x, z, grid, span, bandwidth);
    let mut s: Vec<[f64; 3]> = (0..p)
        .map(|i| [base.s[0][i], base.s[1][i], base.s[2][i]])
        .collect();
    let mut q: Vec<Vec<[f64; 2]>> = (0..p)
        .map(|i| base.q.iter().map(|qh| [qh[0][i], qh[1][i]]).collect())
        .collect();
    let mut valid = vec![true; p];
    let den = |s: &[f64; 3]| s[0] * s[2] - s[1] * s[1];
    let mut b = bandwidth;
    for _ in 0..3 {
        let bad: Vec<usize> = (0..p).filter(|&i| !(den(&s[i]) > 1e-12)).collect();
        if bad.is_empty() {
            break;
        }
        b *= 1.5;
        let wide = cross_moments(x, z, grid, span, b);
        for i in bad {
            s[i] = [wide.s[0][i], wide.s[1][i], wide.s[2][i]];
            q[i] = wide.q.iter().map(|qh| [qh[0][i], qh[1][i]]).collect();
        }
    }
    for i in 0..p {
        if !(den(&s[i]) > 1e-12) {
            valid[i] = false;
        }
    }
    let n = fgrid.len();
    let mut half = Vec::with_capacity(n / 2 + 1);
    for k in fgrid.half() {
        let mut f = DVector::<C64>::zeros(p);
        for i in 0..p {
            if !valid[i] {
                f[i] = C64::new(f64::NAN, f64::NAN);
                continue;
            }
            let (mut q0, mut q1) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for h in -m..=m {
                let e = fgrid.phase(-h, k);
                let qh = q[i][(h + m) as usize];
                q0 += e * qh[0];
                q1 += e * qh[1];
            }
            let si = s[i];
            f[i] = (q0 * si[2] - q1 * si[1]) / (den(&si) * 2.0 * PI);
        }
        half.push(f);
    }
    let values = (0..n)
        .map(|k| {
            if k <= n / 2 {
                half[k].clone()
            } else {
                half[n - k].map(|z| z.conj())
            }
        })
        .collect();
    Ok(CrossSpectralEstimate {
        span,
        bandwidth,
        values,
    })
}
