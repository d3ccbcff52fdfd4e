//! Regularized transfer functionals and filter coefficients.

use crate::grid::{FrequencyGrid, SpatialGrid};
use crate::spectral::{CrossSpectralEstimate, EigenSystem};
use crate::{Error, Result, C64};
use nalgebra::DVector;

/// Regularization of the inverse spectral density operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularization {
    /// keep harmonic components with eigenvalue above the threshold
    Truncation { threshold: f64 },
    /// ridge `(F + ρ I)^{-1}`
    Tikhonov { rho: f64 },
}

impl Regularization {
    pub fn name(&self) -> &'static str {
        match self {
            Regularization::Truncation { .. } => "trunc",
            Regularization::Tikhonov { .. } => "tikh",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Regularization::Truncation { threshold } => threshold,
            Regularization::Tikhonov { rho } => rho,
        }
    }

    /// Same kind with another parameter value.
    pub fn with_parameter(&self, v: f64) -> Self {
        match self {
            Regularization::Truncation { .. } => Regularization::Truncation { threshold: v },
            Regularization::Tikhonov { .. } => Regularization::Tikhonov { rho: v },
        }
    }

    /// Spectral gain `g(λ)` applied to the harmonic component with eigenvalue `λ`.
    pub fn gain(&self, lambda: f64) -> f64 {
        match *self {
            Regularization::Truncation { threshold } => {
                if lambda > threshold {
                    1.0 / lambda
                } else {
                    0.0
                }
            }
            Regularization::Tikhonov { rho } => 1.0 / (lambda + rho),
        }
    }

    fn validate(&self) -> Result<()> {
        let v = self.parameter();
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{} parameter must be positive, got {v}",
                self.name()
            )));
        }
        Ok(())
    }
}

/// Riesz representer of the estimated transfer functional at every frequency.
#[derive(Clone, Debug)]
pub struct TransferEstimate {
    pub values: Vec<DVector<C64>>,
    pub method: Regularization,
}

/// Real filter functions `b_k` on the grid for `|k| ≤ M`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSet {
    max_lag: usize,
    lags: Vec<DVector<f64>>,
}

impl FilterSet {
    /// `lags[k + M]` holds `b_k`.
    pub fn new(max_lag: usize, lags: Vec<DVector<f64>>) -> Result<Self> {
        if lags.len() != 2 * max_lag + 1 {
            return Err(Error::InvalidInput(format!(
                "filter set with max lag {max_lag} needs {} functions, got {}",
                2 * max_lag + 1,
                lags.len()
            )));
        }
        let p = lags[0].len();
        if lags.iter().any(|b| b.len() != p) {
            return Err(Error::InvalidInput("filters must share one grid".into()));
        }
        Ok(Self { max_lag, lags })
    }

    pub fn zeros(p: usize, max_lag: usize) -> Self {
        Self {
            max_lag,
            lags: vec![DVector::zeros(p); 2 * max_lag + 1],
        }
    }

    /// Builds a set from `(k, b_k)` pairs; unspecified lags are zero.
    pub fn from_lags(p: usize, entries: &[(i64, DVector<f64>)]) -> Result<Self> {
        let m = entries
            .iter()
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let mut out = Self::zeros(p, m);
        for (k, b) in entries {
            if b.len() != p {
                return Err(Error::InvalidInput(
                    "filter length differs from grid".into(),
                ));
            }
            out.lags[(k + m as i64) as usize] = b.clone();
        }
        Ok(out)
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn grid_len(&self) -> usize {
        self.lags[0].len()
    }

    /// `b_k`, or `None` beyond the stored range.
    pub fn get(&self, k: i64) -> Option<&DVector<f64>> {
        if k.unsigned_abs() as usize > self.max_lag {
            return None;
        }
        Some(&self.lags[(k + self.max_lag as i64) as usize])
    }

    /// Lags `-M..=M` paired with their filters.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &DVector<f64>)> {
        let m = self.max_lag as i64;
        (-m..=m).zip(self.lags.iter())
    }

    /// Copy restricted to `|k| ≤ max_lag`.
    pub fn trimmed(&self, max_lag: usize) -> Self {
        let m = max_lag.min(self.max_lag);
        let off = self.max_lag - m;
        Self {
            max_lag: m,
            lags: self.lags[off..off + 2 * m + 1].to_vec(),
        }
    }

    /// Quadrature norms `‖b_k‖` in lag order.
    pub fn norms(&self, grid: &SpatialGrid) -> Vec<f64> {
        self.lags
            .iter()
            .map(|b| grid.inner(b.as_slice(), b.as_slice()).sqrt())
            .collect()
    }
}

/// Per-frequency number of eigenvalues strictly above `threshold`.
pub fn threshold_rank(eig: &EigenSystem, threshold: f64) -> Vec<usize> {
    eig.values
        .iter()
        .map(|v| v.iter().filter(|&&l| l > threshold).count())
        .collect()
}

/// `Σ_j g(λ_j) ⟨f^{ZX}, φ_j⟩ conj(φ_j)` at every frequency.
pub fn regularized_transfer(
    fzx: &CrossSpectralEstimate,
    eig: &EigenSystem,
    grid: &SpatialGrid,
    method: Regularization,
) -> Result<TransferEstimate> {
    method.validate()?;
    if fzx.values().len() != eig.len() {
        return Err(Error::InvalidInput(
            "cross-spectral and spectral grids differ".into(),
        ));
    }
    fzx.ensure_finite(grid)?;
    let w = C64::new(grid.weight(), 0.0);
    let p = grid.len();
    let values = fzx
        .values()
        .iter()
        .zip(eig.vectors.iter().zip(&eig.values))
        .map(|(f, (phi, lam))| {
            let mut b = DVector::<C64>::zeros(p);
            for (j, &l) in lam.iter().enumerate() {
                let g = method.gain(l);
                if g == 0.0 {
                    continue;
                }
                let col = phi.column(j);
                let c = f.iter().zip(col.iter()).map(|(a, v)| a * v).sum::<C64>() * w;
                let coef = c * g;
                for (bi, v) in b.iter_mut().zip(col.iter()) {
                    *bi += coef * v.conj();
                }
            }
            b
        })
        .collect();
    Ok(TransferEstimate { values, method })
}

/// Spectral-truncation estimate of the transfer functional.
pub fn truncation_transfer(
    fzx: &CrossSpectralEstimate,
    eig: &EigenSystem,
    grid: &SpatialGrid,
    threshold: f64,
) -> Result<TransferEstimate> {
    regularized_transfer(fzx, eig, grid, Regularization::Truncation { threshold })
}

/// Tikhonov estimate of the transfer functional.
pub fn tikhonov_transfer(
    fzx: &CrossSpectralEstimate,
    eig: &EigenSystem,
    grid: &SpatialGrid,
    rho: f64,
) -> Result<TransferEstimate> {
    regularized_transfer(fzx, eig, grid, Regularization::Tikhonov { rho })
}

/// `b_k = (1/n) Σ_ω β_ω e^{ikω}` for `|k| ≤ max_lag`, keeping the real part.
pub fn filters_from_transfer(
    b: &TransferEstimate,
    fgrid: &FrequencyGrid,
    max_lag: usize,
) -> Result<FilterSet> {
    filters_from_values(&b.values, fgrid, max_lag)
}

pub(crate) fn filters_from_values(
    values: &[DVector<C64>],
    fgrid: &FrequencyGrid,
    max_lag: usize,
) -> Result<FilterSet> {
    fgrid.check_span(max_lag)?;
    if values.len() != fgrid.len() {
        return Err(Error::InvalidInput(
            "transfer and frequency grids differ".into(),
        ));
    }
    let p = values[0].len();
    let n = fgrid.len() as f64;
    let m = max_lag as i64;
    let mut lags = Vec::with_capacity(2 * max_lag + 1);
    let mut residue: f64 = 0.0;
    for k in -m..=m {
        let mut acc = DVector::<C64>::zeros(p);
        for (i, beta) in values.iter().enumerate() {
            let e = fgrid.phase(k, i);
            acc.zip_apply(beta, |a, z| *a += z * e);
        }
        residue = acc.iter().fold(residue, |r, z| r.max((z.im / n).abs()));
        lags.push(acc.map(|z| z.re / n));
    }
    if residue > 1e-6 {
        return Err(Error::ImagResidue { residue });
    }
    FilterSet::new(max_lag, lags)
}

/// Smallest `M ≥ 1` beyond which every filter norm is at most 1% of the peak.
pub fn choose_max_lag(filters: &FilterSet, grid: &SpatialGrid) -> usize {
    let norms = filters.norms(grid);
    let m = filters.max_lag();
    let peak = norms.iter().cloned().fold(0.0, f64::max);
    let cut = 0.01 * peak;
    (1..=m.max(1))
        .find(|&cand| {
            filters
                .iter()
                .zip(&norms)
                .filter(|((k, _), _)| k.unsigned_abs() as usize > cand)
                .all(|(_, &nrm)| nrm <= cut)
        })
        .unwrap_or(m.max(1))
}
