//! Synthetic functional regressors, responses and error metrics.

use crate::forecasting::LatentCurves;
use crate::grid::SpatialGrid;
use crate::regression::FilterSet;
use crate::spectral::AutocovSequence;
use crate::{Error, Observation, Result, ScalarTs, SparseFts};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Number of stored lags of the true autocovariance.
pub const TRUE_LAGS: usize = 30;
/// Burn-in of the autoregressive recursion.
pub const BURN_IN: usize = 100;
/// Largest filter lag used by any scheme.
const PRESAMPLE: usize = 5;

/// RNG streams derived from one seed.
pub mod stream {
    pub const GENERATOR: u64 = 0;
    pub const COPY: u64 = 1;
    pub const FOLDS: u64 = 2;
}

/// Seeded ChaCha generator on the given stream.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Process {
    Far1,
    Fma4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Reg1,
    Reg2,
    Reg3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    A,
    B,
}

impl Process {
    pub fn name(&self) -> &'static str {
        match self {
            Process::Far1 => "far1",
            Process::Fma4 => "fma4",
        }
    }
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Reg1 => "reg1",
            Scheme::Reg2 => "reg2",
            Scheme::Reg3 => "reg3",
        }
    }

    /// `(lag, weight)` of the non-zero filter coefficients.
    pub fn weights(&self) -> Vec<(i64, f64)> {
        match self {
            Scheme::Reg1 => vec![(0, 1.0), (1, 1.0)],
            Scheme::Reg2 => vec![(0, 1.0), (3, 1.0)],
            Scheme::Reg3 => vec![(0, 1.0), (1, 0.9), (2, 0.7), (3, 0.5), (4, 0.3), (5, 0.1)],
        }
    }
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::A => "a",
            Shape::B => "b",
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Shape::A => (4.0 * PI * x).cos(),
            Shape::B => (2.0 * PI * x).sin(),
        }
    }
}

/// Settings of one simulated data set.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub process: Process,
    pub t_len: usize,
    pub n_max: usize,
    pub scheme: Scheme,
    pub shape: Shape,
    pub snr: f64,
    pub tau2: f64,
    pub seed: u64,
    /// kept for reference; dynamics are simulated directly on the grid
    pub basis_dim: usize,
}

impl SimConfig {
    pub fn new(
        process: Process,
        t_len: usize,
        n_max: usize,
        scheme: Scheme,
        shape: Shape,
        seed: u64,
    ) -> Self {
        Self {
            process,
            t_len,
            n_max,
            scheme,
            shape,
            snr: 20.0,
            tau2: 0.001,
            seed,
            basis_dim: 21,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len < 50 {
            return Err(Error::InvalidInput(format!(
                "simulation needs T ≥ 50, got {}",
                self.t_len
            )));
        }
        if !(self.snr > 0.0) || !(self.tau2 >= 0.0) {
            return Err(Error::InvalidInput(
                "snr must be positive and tau2 non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// True second-order structure, filters and latent curves behind a simulated data set.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub autocov: AutocovSequence,
    pub sigma2: f64,
    pub tau2: f64,
    pub filters: FilterSet,
    /// latent curves for `t = -5..T`
    pub curves: LatentCurves,
    /// `var(Z_0)` under the model
    pub var_z: f64,
}

/// Sparse regressor, response and the truth that generated them.
#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub regressor: SparseFts,
    pub response: ScalarTs,
    pub truth: GroundTruth,
}

/// Ten-term separable innovation covariance evaluated on the grid.
pub fn innovation_kernel(grid: &SpatialGrid) -> DMatrix<f64> {
    const TERMS: [(f64, bool, f64); 10] = [
        (1.0, true, 2.0),
        (0.6, false, 2.0),
        (0.3, true, 4.0),
        (0.1, false, 4.0),
        (0.1, true, 6.0),
        (0.1, false, 6.0),
        (0.05, true, 8.0),
        (0.05, false, 8.0),
        (0.05, true, 10.0),
        (0.05, false, 10.0),
    ];
    let x = grid.points();
    DMatrix::from_fn(grid.len(), grid.len(), |i, j| {
        TERMS
            .iter()
            .map(|&(c, sine, f)| {
                let g = |v: f64| {
                    if sine {
                        (f * PI * v).sin()
                    } else {
                        (f * PI * v).cos()
                    }
                };
                c * (g(x[i]) * g(x[j]))
            })
            .sum()
    })
}

/// Discretized integral operator `w k(x_i, x_j)` scaled to the given spectral norm.
pub fn scaled_operator(
    grid: &SpatialGrid,
    kernel: impl Fn(f64, f64) -> f64,
    norm: f64,
) -> DMatrix<f64> {
    let x = grid.points();
    let m = DMatrix::from_fn(grid.len(), grid.len(), |i, j| {
        grid.weight() * kernel(x[i], x[j])
    });
    let s = m.singular_values().max();
    if s == 0.0 {
        return m;
    }
    m * (norm / s)
}

/// Autoregressive operator with kernel `κ sin(x - y)`, norm 0.7.
pub fn far1_operator(grid: &SpatialGrid) -> DMatrix<f64> {
    scaled_operator(grid, |x, y| (x - y).sin(), 0.7)
}

/// Moving-average operators with norms 0.8, 0.6, 0.4, 0.2.
pub fn fma4_operators(grid: &SpatialGrid) -> Vec<DMatrix<f64>> {
    vec![
        scaled_operator(grid, |x, y| (x + y).sin(), 0.8),
        scaled_operator(grid, |x, y| (1.0 - x + y).sin(), 0.6),
        scaled_operator(grid, |x, y| (1.0 + x - y).sin(), 0.4),
        scaled_operator(grid, |x, y| (2.0 - x - y).sin(), 0.2),
    ]
}

/// Stationary autocovariances of `X_{t+1} = A X_t + E_t`.
pub fn far1_autocov(a: &DMatrix<f64>, k: &DMatrix<f64>, max_lag: usize) -> Result<AutocovSequence> {
    let mut r0 = k.clone();
    let mut converged = false;
    const MAX_ITER: usize = 10_000;
    for _ in 0..MAX_ITER {
        let next = a * &r0 * a.transpose() + k;
        let delta = (&next - &r0).norm();
        r0 = next;
        if delta <= 1e-12 * r0.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: MAX_ITER,
        });
    }
    let r0 = (&r0 + r0.transpose()) * 0.5;
    let mut lags = vec![r0];
    for h in 1..=max_lag {
        let next = a * &lags[h - 1];
        lags.push(next);
    }
    AutocovSequence::new(lags)
}

/// Autocovariances of `X_t = E_t + Σ M_i E_{t-i}`, zero beyond the order.
pub fn fma_autocov(ms: &[DMatrix<f64>], k: &DMatrix<f64>, max_lag: usize) -> AutocovSequence {
    let p = k.nrows();
    let mut ops = vec![DMatrix::identity(p, p)];
    ops.extend(ms.iter().cloned());
    let q = ops.len();
    let lags = (0..=max_lag)
        .map(|h| {
            let mut r = DMatrix::zeros(p, p);
            for i in 0..q.saturating_sub(h) {
                r += &ops[i + h] * k * ops[i].transpose();
            }
            if h == 0 {
                r = (&r + r.transpose()) * 0.5;
            }
            r
        })
        .collect();
    AutocovSequence::new(lags).expect("lag 0 present")
}

/// Draws of `N(0, K)` on the grid.
struct InnovationSampler {
    root: DMatrix<f64>,
}

impl InnovationSampler {
    fn new(k: &DMatrix<f64>) -> Self {
        let e = k.clone().symmetric_eigen();
        let mut root = e.eigenvectors.clone();
        for (j, l) in e.eigenvalues.iter().enumerate() {
            root.column_mut(j).scale_mut(l.max(0.0).sqrt());
        }
        Self { root }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(self.root.ncols(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        &self.root * z
    }
}

/// Latent FAR(1) curves for `t = -presample..T` and their true autocovariances.
pub fn simulate_far1(
    cfg: &SimConfig,
    grid: &SpatialGrid,
    rng: &mut ChaCha8Rng,
) -> Result<(LatentCurves, AutocovSequence)> {
    simulate_far1_with(&far1_operator(grid), cfg, grid, rng)
}

pub(crate) fn simulate_far1_with(
    a: &DMatrix<f64>,
    cfg: &SimConfig,
    grid: &SpatialGrid,
    rng: &mut ChaCha8Rng,
) -> Result<(LatentCurves, AutocovSequence)> {
    let k = innovation_kernel(grid);
    let autocov = far1_autocov(a, &k, TRUE_LAGS)?;
    let sampler = InnovationSampler::new(&k);
    let mut x = DVector::zeros(grid.len());
    for _ in 0..BURN_IN {
        x = a * &x + sampler.draw(rng);
    }
    let mut curves = Vec::with_capacity(cfg.t_len + PRESAMPLE);
    for _ in 0..cfg.t_len + PRESAMPLE {
        x = a * &x + sampler.draw(rng);
        curves.push(x.clone());
    }
    Ok((LatentCurves::new(-(PRESAMPLE as i64), curves), autocov))
}

/// Latent FMA(4) curves for `t = -presample..T` and their true autocovariances.
pub fn simulate_fma4(
    cfg: &SimConfig,
    grid: &SpatialGrid,
    rng: &mut ChaCha8Rng,
) -> (LatentCurves, AutocovSequence) {
    simulate_fma_with(&fma4_operators(grid), cfg, grid, rng)
}

pub(crate) fn simulate_fma_with(
    ms: &[DMatrix<f64>],
    cfg: &SimConfig,
    grid: &SpatialGrid,
    rng: &mut ChaCha8Rng,
) -> (LatentCurves, AutocovSequence) {
    let k = innovation_kernel(grid);
    let autocov = fma_autocov(ms, &k, TRUE_LAGS);
    let sampler = InnovationSampler::new(&k);
    let q = ms.len();
    let n = cfg.t_len + PRESAMPLE;
    let e: Vec<DVector<f64>> = (0..n + q).map(|_| sampler.draw(rng)).collect();
    let curves = (0..n)
        .map(|t| {
            let mut x = e[t + q].clone();
            for (i, m) in ms.iter().enumerate() {
                x += m * &e[t + q - i - 1];
            }
            x
        })
        .collect();
    (LatentCurves::new(-(PRESAMPLE as i64), curves), autocov)
}

/// Noise variance `tr(R_0)/snr` with the quadrature trace.
pub fn noise_variance(autocov: &AutocovSequence, grid: &SpatialGrid, snr: f64) -> f64 {
    grid.weight() * autocov.get(0).trace() / snr
}

/// Noisy measurements at uniform locations, `N_t ~ U{0..N_max}`, for `t = 0..T`.
pub fn sparse_sample(
    curves: &LatentCurves,
    t_len: usize,
    n_max: usize,
    sigma2: f64,
    grid: &SpatialGrid,
    rng: &mut ChaCha8Rng,
) -> Result<SparseFts> {
    let sd = sigma2.sqrt();
    let obs = (0..t_len as i64)
        .map(|t| {
            let x = curves.get(t).expect("latent curve in range");
            let n = rng.random_range(0..=n_max);
            (0..n)
                .map(|_| {
                    let loc: f64 = rng.random();
                    let eps: f64 = rng.sample(StandardNormal);
                    Observation::new(loc, grid.interpolate(x.as_slice(), loc) + sd * eps)
                })
                .collect()
        })
        .collect();
    SparseFts::new(obs)
}

/// Filter coefficients of a scheme and shape.
pub fn true_filters(scheme: Scheme, shape: Shape, grid: &SpatialGrid) -> FilterSet {
    let beta = DVector::from_iterator(grid.len(), grid.points().iter().map(|&x| shape.eval(x)));
    let entries: Vec<(i64, DVector<f64>)> = scheme
        .weights()
        .into_iter()
        .map(|(k, w)| (k, &beta * w))
        .collect();
    FilterSet::from_lags(grid.len(), &entries).expect("consistent grid")
}

/// `Z_t = Σ_k ⟨b_k, X_{t-k}⟩ + e_t` for `t = 0..T`.
pub fn build_response(
    curves: &LatentCurves,
    filters: &FilterSet,
    t_len: usize,
    tau2: f64,
    grid: &SpatialGrid,
    rng: &mut ChaCha8Rng,
) -> Result<ScalarTs> {
    let tau = tau2.sqrt();
    let mut z = Vec::with_capacity(t_len);
    for t in 0..t_len as i64 {
        let mut v = 0.0;
        for (k, b) in filters.iter() {
            if b.iter().all(|&c| c == 0.0) {
                continue;
            }
            let x = curves.get(t - k).ok_or(Error::MissingCurve { t: t - k })?;
            v += grid.inner(b.as_slice(), x.as_slice());
        }
        let e: f64 = rng.sample(StandardNormal);
        z.push(v + tau * e);
    }
    ScalarTs::from_values(&z)
}

/// `var(Z_0) = Σ_{k,l} w² b_kᵀ R_{l-k} b_l + τ²`.
pub fn response_variance(
    filters: &FilterSet,
    autocov: &AutocovSequence,
    grid: &SpatialGrid,
    tau2: f64,
) -> f64 {
    let w = grid.weight();
    let mut v = tau2;
    for (k, bk) in filters.iter() {
        for (l, bl) in filters.iter() {
            v += w * w * (bk.transpose() * autocov.get(l - k) * bl)[0];
        }
    }
    v
}

fn simulate_stream(cfg: &SimConfig, grid: &SpatialGrid, stream_id: u64) -> Result<SimulatedData> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, stream_id);
    let (curves, autocov) = match cfg.process {
        Process::Far1 => simulate_far1(cfg, grid, &mut rng)?,
        Process::Fma4 => simulate_fma4(cfg, grid, &mut rng),
    };
    let sigma2 = noise_variance(&autocov, grid, cfg.snr);
    let regressor = sparse_sample(&curves, cfg.t_len, cfg.n_max, sigma2, grid, &mut rng)?;
    let filters = true_filters(cfg.scheme, cfg.shape, grid);
    let response = build_response(&curves, &filters, cfg.t_len, cfg.tau2, grid, &mut rng)?;
    let var_z = response_variance(&filters, &autocov, grid, cfg.tau2);
    Ok(SimulatedData {
        regressor,
        response,
        truth: GroundTruth {
            autocov,
            sigma2,
            tau2: cfg.tau2,
            filters,
            curves,
            var_z,
        },
    })
}

/// Simulated data set for the configuration's seed.
pub fn simulate(cfg: &SimConfig, grid: &SpatialGrid) -> Result<SimulatedData> {
    simulate_stream(cfg, grid, stream::GENERATOR)
}

/// Independent copy with the same dynamics, drawn from a separate stream.
pub fn simulate_copy(cfg: &SimConfig, grid: &SpatialGrid) -> Result<SimulatedData> {
    simulate_stream(cfg, grid, stream::COPY)
}

/// `Σ_k ‖b̂_k - b_k‖²` over the union of both lag ranges.
pub fn metric_delta_b(est: &FilterSet, truth: &FilterSet, grid: &SpatialGrid) -> f64 {
    let m = est.max_lag().max(truth.max_lag()) as i64;
    let zero = DVector::zeros(grid.len());
    (-m..=m)
        .map(|k| {
            let a = est.get(k).unwrap_or(&zero);
            let b = truth.get(k).unwrap_or(&zero);
            let d = a - b;
            grid.inner(d.as_slice(), d.as_slice())
        })
        .sum()
}

/// Mean of `(Ẑ_t - Z_t)² / var(Z_0)`.
pub fn metric_delta_pred(forecasts: &[f64], truth: &[f64], var_z: f64) -> f64 {
    let n = forecasts.len().min(truth.len());
    forecasts
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / (n as f64 * var_z)
}
