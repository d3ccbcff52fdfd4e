//! Observed data containers.

use crate::{Error, Result};
use nalgebra::DVector;

/// One noisy measurement of a latent curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
}

impl Observation {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Sparsely observed functional time series. Time index `t` runs over `0..T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFts {
    curves: Vec<Vec<Observation>>,
}

impl SparseFts {
    pub fn new(curves: Vec<Vec<Observation>>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InvalidInput(
                "sparse series needs at least one time point".into(),
            ));
        }
        for (t, c) in curves.iter().enumerate() {
            for o in c {
                if !(0.0..=1.0).contains(&o.x) {
                    return Err(Error::InvalidInput(format!(
                        "location {} at time {t} outside [0,1]",
                        o.x
                    )));
                }
                if !o.y.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite value at time {t}")));
                }
            }
        }
        if curves.iter().all(|c| c.is_empty()) {
            return Err(Error::EmptyData);
        }
        Ok(Self { curves })
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn curve(&self, t: usize) -> &[Observation] {
        &self.curves[t]
    }

    pub fn curves(&self) -> &[Vec<Observation>] {
        &self.curves
    }

    pub fn counts(&self) -> Vec<usize> {
        self.curves.iter().map(Vec::len).collect()
    }

    pub fn total_count(&self) -> usize {
        self.curves.iter().map(Vec::len).sum()
    }

    /// `N̄ = (1/T) Σ N_t`.
    pub fn mean_count(&self) -> f64 {
        self.total_count() as f64 / self.len() as f64
    }

    /// `(1/T) Σ N_t²`.
    pub fn mean_square_count(&self) -> f64 {
        self.curves
            .iter()
            .map(|c| (c.len() * c.len()) as f64)
            .sum::<f64>()
            / self.len() as f64
    }

    /// Same locations with every value multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        let curves = self
            .curves
            .iter()
            .map(|c| c.iter().map(|o| Observation::new(o.x, a * o.y)).collect())
            .collect();
        Self { curves }
    }
}

/// Scalar response series with optional missing values.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarTs {
    values: Vec<Option<f64>>,
}

impl ScalarTs {
    pub fn new(values: Vec<Option<f64>>) -> Result<Self> {
        let present = values.iter().flatten().count();
        if present < 2 {
            return Err(Error::InsufficientData(format!(
                "scalar series needs at least 2 non-missing values, got {present}"
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite response value".into()));
        }
        Ok(Self { values })
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Some(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `t`, `None` when missing or out of range.
    pub fn get(&self, t: i64) -> Option<f64> {
        if t < 0 {
            return None;
        }
        self.values.get(t as usize).copied().flatten()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        let (s, n) = self
            .values
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        s / n as f64
    }

    pub fn sample_variance(&self) -> f64 {
        let m = self.mean();
        let (s, n) = self
            .values
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, n), v| (s + (v - m) * (v - m), n + 1));
        s / n as f64
    }

    /// Copy with every value at `t >= end` marked missing.
    pub fn truncated(&self, end: usize) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(t, v)| if t < end { *v } else { None })
            .collect();
        Self { values }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v.map(|x| x + c)).collect(),
        }
    }
}

/// Fully observed functional time series on a spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseFts {
    curves: Vec<DVector<f64>>,
}

impl DenseFts {
    pub fn new(curves: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = curves.first() else {
            return Err(Error::EmptyData);
        };
        let p = first.len();
        if curves.iter().any(|c| c.len() != p) {
            return Err(Error::InvalidInput(
                "dense curves must share one grid".into(),
            ));
        }
        if curves.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("non-finite dense curve value".into()));
        }
        Ok(Self { curves })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn grid_len(&self) -> usize {
        self.curves[0].len()
    }

    pub fn curve(&self, t: usize) -> &DVector<f64> {
        &self.curves[t]
    }

    pub fn curves(&self) -> &[DVector<f64>] {
        &self.curves
    }

    /// Pointwise sample mean.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.grid_len());
        for c in &self.curves {
            m += c;
        }
        m / self.len() as f64
    }
}

/// Estimated measurement-error variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseEstimate {
    pub sigma2: f64,
}
