//! Monte-Carlo replications of the simulation study.
//!
//! One replication fixes a process, series length, sampling intensity and
//! seed. The regressor record is shared by every scheme and shape, so its
//! spectral fit, the holdout curves and the curve predictions on the
//! independent copy are computed once and reused.

use crate::forecasting::{blup_latent, forecast_response};
use crate::grid::{FrequencyGrid, SpatialGrid};
use crate::pipeline::{
    fit_filters, fit_regressor, holdout_curves, prepare_response, trial_lags, Choice, FitConfig,
    Method,
};
use crate::simulation::{
    metric_delta_b, metric_delta_pred, simulate, simulate_copy, Process, Scheme, Shape, SimConfig,
};
use crate::Result;
use rayon::prelude::*;
use std::io::Write;

/// One row of the replication table.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub process: Process,
    pub scheme: Scheme,
    pub shape: Shape,
    pub t_len: usize,
    pub n_max: usize,
    pub method: Method,
    pub delta_b: f64,
    pub delta_pred: f64,
    pub delta_pred_oracle: f64,
    pub seed: u64,
}

/// Settings crossed by an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub processes: Vec<Process>,
    pub schemes: Vec<Scheme>,
    pub shapes: Vec<Shape>,
    pub t_lens: Vec<usize>,
    pub n_maxs: Vec<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
}

impl ExperimentGrid {
    /// Small grid that runs in minutes: both processes, `reg1`, both shapes,
    /// `T = 300`, `N_max = 20`, two seeds from `base_seed`.
    pub fn reduced(base_seed: u64) -> Self {
        Self {
            processes: vec![Process::Far1, Process::Fma4],
            schemes: vec![Scheme::Reg1],
            shapes: vec![Shape::A, Shape::B],
            t_lens: vec![300],
            n_maxs: vec![20],
            methods: vec![Method::Truncation, Method::Tikhonov],
            seeds: (0..2).map(|i| base_seed + i).collect(),
        }
    }

    /// The full study design with `reps` replications per setting.
    pub fn full(base_seed: u64, reps: u64) -> Self {
        Self {
            processes: vec![Process::Far1, Process::Fma4],
            schemes: vec![Scheme::Reg1, Scheme::Reg2, Scheme::Reg3],
            shapes: vec![Shape::A, Shape::B],
            t_lens: vec![300, 600, 900, 1200],
            n_maxs: vec![10, 20, 40, 60],
            methods: vec![Method::Truncation, Method::Tikhonov],
            seeds: (0..reps).map(|i| base_seed + i).collect(),
        }
    }

    /// Number of output rows.
    pub fn len(&self) -> usize {
        [
            self.processes.len(),
            self.schemes.len(),
            self.shapes.len(),
            self.t_lens.len(),
            self.n_maxs.len(),
            self.methods.len(),
            self.seeds.len(),
        ]
        .iter()
        .product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All rows of one `(process, T, N_max, seed)` replication, ordered by
/// scheme, shape and method as listed in `grid`.
#[allow(clippy::too_many_arguments)]
pub fn run_replication(
    process: Process,
    t_len: usize,
    n_max: usize,
    seed: u64,
    grid: &ExperimentGrid,
    space: &SpatialGrid,
    fgrid: &FrequencyGrid,
    base: &FitConfig,
) -> Result<Vec<ExperimentRow>> {
    let cfg = FitConfig {
        seed,
        ..base.clone()
    };
    let sim_cfg = |scheme, shape| SimConfig::new(process, t_len, n_max, scheme, shape, seed);
    let (Some(&scheme0), Some(&shape0)) = (grid.schemes.first(), grid.shapes.first()) else {
        return Ok(Vec::new());
    };
    // the regressor and its copy do not depend on scheme or shape
    let first = simulate(&sim_cfg(scheme0, shape0), space)?;
    let copy = simulate_copy(&sim_cfg(scheme0, shape0), space)?;
    let x = &first.regressor;
    let fit = fit_regressor(x, space, fgrid, &cfg)?;
    let ho = match cfg.param {
        Choice::Cv => Some(holdout_curves(&fit, x, &cfg)?),
        Choice::Fixed(_) => None,
    };
    // covers both the trial filters and the true filters (lags up to 5)
    let k = trial_lags(&cfg, fgrid).max(5) as i64;
    let range = -k..t_len as i64 + k;
    let copy_curves = blup_latent(
        &copy.regressor,
        &fit.autocov,
        fit.sigma2,
        space,
        range.clone(),
        fit.window,
    )?;
    let oracle_curves = blup_latent(
        &copy.regressor,
        &copy.truth.autocov,
        copy.truth.sigma2,
        space,
        range,
        fit.window,
    )?;
    let times = 0..t_len as i64;

    let mut rows = Vec::new();
    for &scheme in &grid.schemes {
        for &shape in &grid.shapes {
            let sim = simulate(&sim_cfg(scheme, shape), space)?;
            let copy = simulate_copy(&sim_cfg(scheme, shape), space)?;
            let truth_z: Vec<f64> = copy
                .response
                .values()
                .iter()
                .map(|v| v.unwrap_or(f64::NAN))
                .collect();
            let var_z = sim.truth.var_z;
            let oracle =
                forecast_response(&oracle_curves, &sim.truth.filters, space, times.clone())?;
            let delta_pred_oracle = metric_delta_pred(&oracle, &truth_z, var_z);
            let setup = prepare_response(&fit, x, &sim.response, &cfg)?;
            for &method in &grid.methods {
                let ff = fit_filters(&fit, &setup, ho.as_ref(), &sim.response, method, &cfg)?;
                let pred = forecast_response(&copy_curves, &ff.filters, space, times.clone())?;
                rows.push(ExperimentRow {
                    process,
                    scheme,
                    shape,
                    t_len,
                    n_max,
                    method,
                    delta_b: metric_delta_b(&ff.filters, &sim.truth.filters, space),
                    delta_pred: metric_delta_pred(&pred, &truth_z, var_z),
                    delta_pred_oracle,
                    seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Every replication of `grid`, in parallel, in a fixed row order
/// (process, T, N_max, seed, scheme, shape, method).
pub fn run_experiment(
    grid: &ExperimentGrid,
    space: &SpatialGrid,
    fgrid: &FrequencyGrid,
    base: &FitConfig,
) -> Result<Vec<ExperimentRow>> {
    let mut jobs = Vec::new();
    for &process in &grid.processes {
        for &t_len in &grid.t_lens {
            for &n_max in &grid.n_maxs {
                for &seed in &grid.seeds {
                    jobs.push((process, t_len, n_max, seed));
                }
            }
        }
    }
    let parts = jobs
        .par_iter()
        .map(|&(process, t_len, n_max, seed)| {
            run_replication(process, t_len, n_max, seed, grid, space, fgrid, base)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

pub const CSV_HEADER: &str =
    "process,scheme,shape,T,N_max,method,delta_B,delta_pred,delta_pred_oracle,seed";

/// Writes the rows as CSV with shortest round-trip float formatting.
pub fn write_rows<W: Write>(rows: &[ExperimentRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.process.name(),
            r.scheme.name(),
            r.shape.name(),
            r.t_len,
            r.n_max,
            r.method.name(),
            r.delta_b,
            r.delta_pred,
            r.delta_pred_oracle,
            r.seed
        )?;
    }
    Ok(())
}
