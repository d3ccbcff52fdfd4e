//! Lag-0 covariance smoothers and the measurement-error variance.
//!
//! The smoothers never materialize the list of raw products. Every normal
//! equation they need is a sum over pairs of observations from the same time
//! point, and with a product kernel those sums factor into per-time kernel
//! moments whose cross products are matrix multiplications.

use crate::grid::SpatialGrid;
use crate::locpoly::{intercept_weights, ObsKernel};
use crate::{Error, NoiseEstimate, Result, SparseFts};
use nalgebra::{DMatrix, DVector};

/// One raw lagged product `Y_{t+h,j} Y_{tk}` located at `(u, v) = (x_{t+h,j}, x_{tk})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawPair {
    pub u: f64,
    pub v: f64,
    pub g: f64,
    pub t: usize,
}

/// Raw lagged products for lags `-L..=L`. Lag 0 omits same-observation products.
#[derive(Clone, Debug)]
pub struct RawCovariances {
    span: usize,
    lags: Vec<Vec<RawPair>>,
}

impl RawCovariances {
    pub fn span(&self) -> usize {
        self.span
    }

    pub fn lag(&self, h: i64) -> &[RawPair] {
        &self.lags[(h + self.span as i64) as usize]
    }

    /// Errors with the first lag that carries no pairs.
    pub fn check_nonempty(&self) -> Result<()> {
        let s = self.span as i64;
        for h in -s..=s {
            if self.lag(h).is_empty() {
                return Err(Error::EmptyLag { lag: h });
            }
        }
        Ok(())
    }
}

/// Collects every raw product for `|h| ≤ span`.
pub fn raw_covariances(data: &SparseFts, span: usize) -> Result<RawCovariances> {
    let t_len = data.len();
    if span >= t_len {
        return Err(Error::InvalidInput(format!(
            "span {span} must be below T = {t_len}"
        )));
    }
    let s = span as i64;
    let mut lags = Vec::with_capacity(2 * span + 1);
    for h in -s..=s {
        let mut pairs = Vec::new();
        let lo = 0.max(-h) as usize;
        let hi = (t_len as i64).min(t_len as i64 - h) as usize;
        for t in lo..hi {
            let a = data.curve((t as i64 + h) as usize);
            let b = data.curve(t);
            for (j, oa) in a.iter().enumerate() {
                for (k, ob) in b.iter().enumerate() {
                    if h == 0 && j == k {
                        continue;
                    }
                    pairs.push(RawPair {
                        u: oa.x,
                        v: ob.x,
                        g: oa.y * ob.y,
                        t,
                    });
                }
            }
        }
        lags.push(pairs);
    }
    Ok(RawCovariances { span, lags })
}

/// Smoothed lag-0 covariance kernel on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CovSurfaceEstimate {
    pub values: DMatrix<f64>,
    pub bandwidth: f64,
}

/// Per-time kernel moments `Σ_j K d^r` and `Σ_j Y_j K d^r` as `T × p` matrices.
pub(crate) struct TimeMoments {
    pub k: [DMatrix<f64>; 3],
    pub a: [DMatrix<f64>; 2],
}

impl TimeMoments {
    /// Moments over the times accepted by `keep`; other rows stay zero.
    pub fn new(data: &SparseFts, kern: &ObsKernel, p: usize, keep: impl Fn(usize) -> bool) -> Self {
        let t_len = data.len();
        let z = || DMatrix::zeros(t_len, p);
        let mut k = [z(), z(), z()];
        let mut a = [z(), z()];
        for t in 0..t_len {
            if !keep(t) {
                continue;
            }
            for (n, obs) in kern.obs_of(t).enumerate() {
                let y = data.curve(t)[n].y;
                for &(i, kv, d) in kern.entries_of(obs) {
                    let i = i as usize;
                    k[0][(t, i)] += kv;
                    k[1][(t, i)] += kv * d;
                    k[2][(t, i)] += kv * d * d;
                    a[0][(t, i)] += y * kv;
                    a[1][(t, i)] += y * kv * d;
                }
            }
        }
        Self { k, a }
    }
}

/// Pair sums entering the lag-0 surface fit, with same-observation terms removed.
///
/// `m_rs(x, y) = Σ_t Σ_{j≠k} K_j(x) K_k(y) d_j(x)^r d_k(y)^s`, and `n_rs` carries the
/// extra factor `Y_j Y_k`.
#[derive(Clone, Debug)]
pub(crate) struct Lag0Moments {
    pub m00: DMatrix<f64>,
    pub m10: DMatrix<f64>,
    pub m20: DMatrix<f64>,
    pub m11: DMatrix<f64>,
    pub n00: DMatrix<f64>,
    pub n10: DMatrix<f64>,
}

impl Lag0Moments {
    pub fn zeros(p: usize) -> Self {
        let z = DMatrix::zeros(p, p);
        Self {
            m00: z.clone(),
            m10: z.clone(),
            m20: z.clone(),
            m11: z.clone(),
            n00: z.clone(),
            n10: z,
        }
    }

    /// Full products `Σ_t k_r(x) k_s(y)` including same-observation terms.
    pub fn products(tm: &TimeMoments) -> Self {
        Self {
            m00: tm.k[0].tr_mul(&tm.k[0]),
            m10: tm.k[1].tr_mul(&tm.k[0]),
            m20: tm.k[2].tr_mul(&tm.k[0]),
            m11: tm.k[1].tr_mul(&tm.k[1]),
            n00: tm.a[0].tr_mul(&tm.a[0]),
            n10: tm.a[1].tr_mul(&tm.a[0]),
        }
    }

    /// Same-observation terms of the given observations.
    pub fn diagonal(
        data: &SparseFts,
        kern: &ObsKernel,
        p: usize,
        times: impl Iterator<Item = usize>,
    ) -> Self {
        let mut out = Self::zeros(p);
        for t in times {
            for (n, obs) in kern.obs_of(t).enumerate() {
                let y2 = data.curve(t)[n].y.powi(2);
                let e = kern.entries_of(obs);
                for &(i, ki, di) in e {
                    for &(j, kj, dj) in e {
                        let (i, j) = (i as usize, j as usize);
                        let w = ki * kj;
                        out.m00[(i, j)] += w;
                        out.m10[(i, j)] += w * di;
                        out.m20[(i, j)] += w * di * di;
                        out.m11[(i, j)] += w * di * dj;
                        out.n00[(i, j)] += w * y2;
                        out.n10[(i, j)] += w * y2 * di;
                    }
                }
            }
        }
        out
    }

    pub fn sub_assign(&mut self, o: &Self) {
        self.m00 -= &o.m00;
        self.m10 -= &o.m10;
        self.m20 -= &o.m20;
        self.m11 -= &o.m11;
        self.n00 -= &o.n00;
        self.n10 -= &o.n10;
    }

    /// Local-linear intercepts on the grid, symmetrized.
    pub fn surface(&self, grid: &SpatialGrid) -> Result<DMatrix<f64>> {
        let p = grid.len();
        let mut out = DMatrix::zeros(p, p);
        for y in 0..p {
            for x in 0..p {
                let a = [
                    [self.m00[(x, y)], self.m10[(x, y)], self.m10[(y, x)]],
                    [self.m10[(x, y)], self.m20[(x, y)], self.m11[(x, y)]],
                    [self.m10[(y, x)], self.m11[(x, y)], self.m20[(y, x)]],
                ];
                let g = intercept_weights(&a, &[3, 1]).ok_or_else(|| Error::SingularFit {
                    location: format!("({}, {})", grid.point(x), grid.point(y)),
                })?;
                out[(x, y)] =
                    g[0] * self.n00[(x, y)] + g[1] * self.n10[(x, y)] + g[2] * self.n10[(y, x)];
            }
        }
        Ok(symmetrize(out))
    }
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn check_bandwidth(b: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {b}"
        )));
    }
    Ok(())
}

/// Local-linear surface smoother of the lag-0 raw covariances.
pub fn smooth_lag0_surface(
    data: &SparseFts,
    grid: &SpatialGrid,
    bandwidth: f64,
) -> Result<CovSurfaceEstimate> {
    check_bandwidth(bandwidth)?;
    if data.curves().iter().all(|c| c.len() < 2) {
        return Err(Error::InsufficientData(
            "no time point has two observations".into(),
        ));
    }
    let p = grid.len();
    let kern = ObsKernel::new(data, grid, bandwidth);
    let tm = TimeMoments::new(data, &kern, p, |_| true);
    let mut m = Lag0Moments::products(&tm);
    m.sub_assign(&Lag0Moments::diagonal(data, &kern, p, 0..data.len()));
    Ok(CovSurfaceEstimate {
        values: m.surface(grid)?,
        bandwidth,
    })
}

/// Signed distance of `(u, v)` from the diagonal, positive above it.
pub fn diagonal_offset(u: f64, v: f64) -> f64 {
    (v - u) / std::f64::consts::SQRT_2
}

/// Local-quadratic smoother across the diagonal: the noise-free diagonal `R̄(x)`.
pub fn smooth_diagonal_perpendicular(
    data: &SparseFts,
    grid: &SpatialGrid,
    bandwidth: f64,
) -> Result<DVector<f64>> {
    check_bandwidth(bandwidth)?;
    let p = grid.len();
    let kern = ObsKernel::new(data, grid, bandwidth);
    // pair moments of Δ^r, r = 0..4, and of Y_j Y_k Δ^r, r = 0..2
    let mut w = vec![[0.0; 5]; p];
    let mut g = vec![[0.0; 3]; p];
    let mut s = vec![[0.0; 5]; p];
    let mut q = vec![[0.0; 3]; p];
    let mut c0 = vec![0.0; p];
    let mut e0 = vec![0.0; p];
    let mut touched = Vec::new();
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    for t in 0..data.len() {
        if data.curve(t).len() < 2 {
            continue;
        }
        touched.clear();
        for (n, obs) in kern.obs_of(t).enumerate() {
            let y = data.curve(t)[n].y;
            for &(i, k, d) in kern.entries_of(obs) {
                let i = i as usize;
                if s[i][0] == 0.0 {
                    touched.push(i);
                }
                let mut dp = 1.0;
                for a in 0..5 {
                    s[i][a] += k * dp;
                    if a < 3 {
                        q[i][a] += y * k * dp;
                    }
                    dp *= d;
                }
                c0[i] += k * k;
                e0[i] += y * y * k * k;
            }
        }
        for &i in &touched {
            // Σ_{j≠k} K_j K_k Δ^r with Δ = (d_k - d_j)/√2
            for r in 0..5 {
                let mut acc = 0.0;
                let mut accy = 0.0;
                for a in 0..=r {
                    let sign = if (r - a) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * BINOM[r][a] * s[i][r - a] * s[i][a];
                    if r < 3 {
                        accy += sign * BINOM[r][a] * q[i][r - a] * q[i][a];
                    }
                }
                let scale = 0.5f64.powf(r as f64 / 2.0);
                w[i][r] += scale * acc - if r == 0 { c0[i] } else { 0.0 };
                if r < 3 {
                    g[i][r] += scale * accy - if r == 0 { e0[i] } else { 0.0 };
                }
            }
            s[i] = [0.0; 5];
            q[i] = [0.0; 3];
            c0[i] = 0.0;
            e0[i] = 0.0;
        }
    }
    let mut out = DVector::zeros(p);
    for i in 0..p {
        let m = &w[i];
        let a = [[m[0], m[1], m[2]], [m[1], m[2], m[3]], [m[2], m[3], m[4]]];
        let c = intercept_weights(&a, &[3, 2, 1]).ok_or_else(|| Error::SingularFit {
            location: format!("diagonal x = {}", grid.point(i)),
        })?;
        out[i] = c[0] * g[i][0] + c[1] * g[i][1] + c[2] * g[i][2];
    }
    Ok(out)
}

/// Moments of the local-linear line smoother of `Y²` against location.
pub(crate) struct LineMoments {
    pub s: [DVector<f64>; 3],
    pub q: [DVector<f64>; 2],
}

impl LineMoments {
    pub fn zeros(p: usize) -> Self {
        let z = DVector::zeros(p);
        Self {
            s: [z.clone(), z.clone(), z.clone()],
            q: [z.clone(), z],
        }
    }

    pub fn accumulate(
        &mut self,
        data: &SparseFts,
        kern: &ObsKernel,
        times: impl Iterator<Item = usize>,
    ) {
        for t in times {
            for (n, obs) in kern.obs_of(t).enumerate() {
                let y2 = data.curve(t)[n].y.powi(2);
                for &(i, k, d) in kern.entries_of(obs) {
                    let i = i as usize;
                    self.s[0][i] += k;
                    self.s[1][i] += k * d;
                    self.s[2][i] += k * d * d;
                    self.q[0][i] += y2 * k;
                    self.q[1][i] += y2 * k * d;
                }
            }
        }
    }

    pub fn fit(&self, grid: &SpatialGrid) -> Result<DVector<f64>> {
        let p = grid.len();
        let mut out = DVector::zeros(p);
        for i in 0..p {
            let a = [
                [self.s[0][i], self.s[1][i], 0.0],
                [self.s[1][i], self.s[2][i], 0.0],
                [0.0; 3],
            ];
            let g = intercept_weights(&a, &[2, 1]).ok_or_else(|| Error::SingularFit {
                location: format!("x = {}", grid.point(i)),
            })?;
            out[i] = g[0] * self.q[0][i] + g[1] * self.q[1][i];
        }
        Ok(out)
    }
}

/// Local-linear smoother of the squared observations: the noisy diagonal `V̂(x)`.
pub fn smooth_noisy_diagonal(
    data: &SparseFts,
    grid: &SpatialGrid,
    bandwidth: f64,
) -> Result<DVector<f64>> {
    check_bandwidth(bandwidth)?;
    let kern = ObsKernel::new(data, grid, bandwidth);
    let mut m = LineMoments::zeros(grid.len());
    m.accumulate(data, &kern, 0..data.len());
    m.fit(grid)
}

/// `∫ (V̂ - R̄)`, floored at `1e-6 · max(1, ∫ V̂)` when not positive.
pub fn estimate_sigma2(v: &DVector<f64>, rbar: &DVector<f64>, grid: &SpatialGrid) -> NoiseEstimate {
    let diff: Vec<f64> = v.iter().zip(rbar.iter()).map(|(a, b)| a - b).collect();
    let s = grid.integrate(&diff);
    let sigma2 = if s > 0.0 {
        s
    } else {
        1e-6 * grid.integrate(v.as_slice()).max(1.0)
    };
    NoiseEstimate { sigma2 }
}
