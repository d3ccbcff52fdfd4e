//! Spatial and frequency discretizations.

use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Equispaced grid on `[0, 1]` with Riemann weight `1/p`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    points: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidInput(format!(
                "spatial grid needs at least 2 points, got {p}"
            )));
        }
        let step = 1.0 / (p - 1) as f64;
        let mut points: Vec<f64> = (0..p).map(|i| i as f64 * step).collect();
        points[p - 1] = 1.0;
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Quadrature weight attached to every grid point.
    pub fn weight(&self) -> f64 {
        1.0 / self.points.len() as f64
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.points.len() - 1) as f64
    }

    /// Cell containing `x`: returns `(i, a)` with `x = (1-a) x_i + a x_{i+1}`.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let p = self.points.len();
        let s = x.clamp(0.0, 1.0) * (p - 1) as f64;
        let i = (s.floor() as usize).min(p - 2);
        (i, s - i as f64)
    }

    /// Linear interpolation of grid values at `x`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let (i, a) = self.locate(x);
        (1.0 - a) * values[i] + a * values[i + 1]
    }

    /// Bilinear interpolation of a grid surface at `(u, v)`.
    pub fn interpolate2(&self, m: &DMatrix<f64>, u: f64, v: f64) -> f64 {
        let (i, a) = self.locate(u);
        let (j, b) = self.locate(v);
        (1.0 - a) * ((1.0 - b) * m[(i, j)] + b * m[(i, j + 1)])
            + a * ((1.0 - b) * m[(i + 1, j)] + b * m[(i + 1, j + 1)])
    }

    /// Quadrature inner product `w Σ a_i b_i`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    /// Quadrature integral `w Σ a_i`.
    pub fn integrate(&self, a: &[f64]) -> f64 {
        self.weight() * a.iter().sum::<f64>()
    }

    /// Index range covering every grid point within distance `< radius` of `x`.
    pub fn window(&self, x: f64, radius: f64) -> std::ops::Range<usize> {
        let p = self.points.len();
        let scale = (p - 1) as f64;
        let lo = ((x - radius) * scale).floor().max(0.0) as usize;
        let hi = (((x + radius) * scale).ceil().max(-1.0) as i64 + 1).clamp(0, p as i64) as usize;
        lo.min(p)..hi
    }
}

/// Frequencies `ω_k = -π + 2πk/n` for `k = 0..n`, with `n` even.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    n: usize,
    roots: Vec<C64>,
}

impl FrequencyGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "frequency grid size must be even and at least 4, got {n}"
            )));
        }
        // roots of unity built so that roots[n-m] == conj(roots[m]) bit for bit
        let mut roots = vec![C64::new(0.0, 0.0); n];
        for m in 0..=n / 2 {
            let a = 2.0 * PI * m as f64 / n as f64;
            roots[m] = C64::new(a.cos(), a.sin());
        }
        roots[0] = C64::new(1.0, 0.0);
        roots[n / 2] = C64::new(-1.0, 0.0);
        if n % 4 == 0 {
            roots[n / 4] = C64::new(0.0, 1.0);
        }
        for m in n / 2 + 1..n {
            roots[m] = roots[n - m].conj();
        }
        Ok(Self { n, roots })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn omega(&self, k: usize) -> f64 {
        -PI + 2.0 * PI * k as f64 / self.n as f64
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.omega(k)).collect()
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Index of `-ω_k`.
    pub fn mirror(&self, k: usize) -> usize {
        (self.n - k) % self.n
    }

    /// Indices `0..=n/2`; all others are mirrors of these.
    pub fn half(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.n / 2
    }

    /// `e^{i h ω_k}` from the exact root table.
    pub fn phase(&self, h: i64, k: usize) -> C64 {
        let n = self.n as i64;
        let m = (h * (k as i64 - n / 2)).rem_euclid(n);
        self.roots[m as usize]
    }

    /// Errors unless Riemann sums are exact for trig polynomials of degree `< span`.
    pub fn check_span(&self, span: usize) -> Result<()> {
        if self.n <= 2 * span {
            return Err(Error::InvalidInput(format!(
                "frequency grid of {} points is too coarse for lag {span}",
                self.n
            )));
        }
        Ok(())
    }
}
