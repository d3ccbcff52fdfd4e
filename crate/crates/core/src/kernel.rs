//! Smoothing kernel and Bartlett lag window.

/// Second moment of the Epanechnikov kernel, `∫ v² K(v) dv`.
pub const EPANECHNIKOV_SECOND_MOMENT: f64 = 0.2;

/// Epanechnikov kernel `0.75 (1 - v²)` on `[-1, 1]`.
#[inline]
pub fn epanechnikov(v: f64) -> f64 {
    if v.abs() <= 1.0 {
        0.75 * (1.0 - v * v)
    } else {
        0.0
    }
}

/// Default Bartlett span `⌊2 T^{1/3}⌋`, at least 1.
pub fn bartlett_span_default(t_len: usize) -> usize {
    let t = t_len.max(1) as f64;
    // cbrt of a perfect cube can land a hair below the integer
    let mut span = (2.0 * t.cbrt()).floor() as usize;
    while ((span + 1) as f64 / 2.0).powi(3) <= t {
        span += 1;
    }
    while span > 0 && (span as f64 / 2.0).powi(3) > t {
        span -= 1;
    }
    span.max(1)
}

/// Bartlett weight `1 - |h|/L` for `|h| < L`, zero otherwise.
#[inline]
pub fn bartlett_weight(span: usize, h: i64) -> f64 {
    let a = h.unsigned_abs() as usize;
    if a < span {
        1.0 - a as f64 / span as f64
    } else {
        0.0
    }
}

/// Triangular lag window with span `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BartlettWeights {
    span: usize,
}

impl BartlettWeights {
    pub fn new(span: usize) -> crate::Result<Self> {
        if span == 0 {
            return Err(crate::Error::InvalidInput(
                "Bartlett span must be at least 1".into(),
            ));
        }
        Ok(Self { span })
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn weight(&self, h: i64) -> f64 {
        bartlett_weight(self.span, h)
    }

    /// Lags with non-zero weight, `-(L-1)..=(L-1)`.
    pub fn lags(&self) -> impl Iterator<Item = i64> {
        let m = self.span as i64 - 1;
        -m..=m
    }
}
