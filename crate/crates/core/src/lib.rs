//! Lagged regression of a scalar response on a sparsely observed functional
//! time series.
//!
//! The regressor curves are seen only at a few random locations per time
//! point, with measurement noise. The crate estimates their spectral density
//! operators by local-polynomial smoothing, the cross-spectral density with the
//! response, regularized transfer functionals and filter coefficients, and
//! forecasts the response through best linear unbiased prediction of the
//! latent curves.

mod error;
mod locpoly;

pub mod domain;
pub mod experiment;
pub mod extensions;
pub mod forecasting;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod model_selection;
pub mod pipeline;
pub mod regression;
pub mod simulation;
pub mod smoothing;
pub mod spectral;

pub use domain::{DenseFts, NoiseEstimate, Observation, ScalarTs, SparseFts};
pub use error::{Error, Result};
pub use grid::{FrequencyGrid, SpatialGrid};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
