//! Subcommand drivers. Each run writes a `manifest.json` from which the
//! fitted filters can be recomputed exactly.

use crate::config::{
    choice_json, config_err, window_json, Cli, Command, CvArgs, EstimateArgs, FitArgs,
    ForecastArgs, MaxLag, MethodArg, ReproduceArgs, SecondKind, SimulateArgs,
};
use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use sflr::experiment::{run_experiment, write_rows, ExperimentGrid, ExperimentRow};
use sflr::extensions::{fit_joint, JointConfig, JointFit, SecondFit, SecondRegressor};
use sflr::forecasting::{blup_latent, forecast_response, Window};
use sflr::io;
use sflr::model_selection::CvTrace;
use sflr::pipeline::{estimate, forecast_with, Choice, Estimate, FitConfig};
use sflr::simulation::{metric_delta_b, metric_delta_pred, simulate, simulate_copy, SimConfig};
use sflr::{Observation, ScalarTs, SparseFts};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn run(cli: &Cli) -> Result<()> {
    let out = &cli.global.out;
    match &cli.command {
        Command::Simulate(a) => simulate_cmd(a, out),
        Command::Estimate(a) => estimate_cmd(a, out),
        Command::Forecast(a) => forecast_cmd(a, out),
        Command::Cv(a) => cv_cmd(a, out),
        Command::Reproduce(a) => reproduce_cmd(a, out),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_with(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(dir, name)?;
    f(&mut w).with_context(|| format!("cannot write {name}"))?;
    w.flush()?;
    Ok(())
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("cannot resolve {}", p.display()))
}

fn read_sparse(p: &Path) -> Result<SparseFts> {
    io::ingest_sparse_csv(p).with_context(|| format!("reading {}", p.display()))
}

fn read_scalar(p: &Path) -> Result<ScalarTs> {
    io::ingest_scalar_csv(p).with_context(|| format!("reading {}", p.display()))
}

fn read_second(p: &Path, kind: SecondKind, grid_len: usize) -> Result<SecondRegressor> {
    Ok(match kind {
        SecondKind::Sparse => SecondRegressor::Sparse(read_sparse(p)?),
        SecondKind::Dense => {
            let d = io::ingest_dense_csv(p).with_context(|| format!("reading {}", p.display()))?;
            if d.grid_len() != grid_len {
                let msg = format!(
                    "dense regressor has {} grid points but --p is {grid_len}",
                    d.grid_len()
                );
                return Err(sflr::Error::Domain {
                    line: 0,
                    message: msg,
                })
                .with_context(|| format!("reading {}", p.display()));
            }
            SecondRegressor::Dense(d)
        }
    })
}

/// Trailing times without observations are absent from a sparse file, so the
/// record is padded to the response length.
fn pad_sparse(x: SparseFts, t_len: usize) -> Result<SparseFts> {
    if x.len() >= t_len {
        return Ok(x);
    }
    let mut curves: Vec<Vec<Observation>> = x.curves().to_vec();
    curves.resize(t_len, Vec::new());
    Ok(SparseFts::new(curves)?)
}

fn pad_scalar(z: ScalarTs, t_len: usize) -> Result<ScalarTs> {
    if z.len() >= t_len {
        return Ok(z);
    }
    let mut v = z.values().to_vec();
    v.resize(t_len, None);
    Ok(ScalarTs::new(v)?)
}

fn trace_json(t: &CvTrace, selected: f64) -> Value {
    json!({
        "candidates": t.candidates,
        "scores": t.scores,
        "fold_scores": t.fold_scores,
        "selected": selected,
    })
}

/// Mean squared in-sample forecast error over observed responses, relative
/// to the sample variance.
fn relative_mse(pred: &[f64], z: &ScalarTs) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for (t, p) in pred.iter().enumerate() {
        if let Some(v) = z.get(t as i64) {
            s += (p - v).powi(2);
            n += 1;
        }
    }
    s / n as f64 / z.sample_variance()
}

fn data_json(x: &SparseFts) -> Value {
    json!({ "T": x.len(), "observations": x.total_count(), "mean_count": x.mean_count() })
}

/// Fit outputs shared by `estimate` and `simulate`.
struct SingleRun {
    est: Estimate,
    forecasts: Vec<f64>,
}

fn fit_single(x: &SparseFts, z: &ScalarTs, a: &FitArgs) -> Result<SingleRun> {
    let (grid, fgrid) = a.grids()?;
    let cfg = a.fit_config()?;
    let est = estimate(x, z, &grid, &fgrid, a.method.method(), &cfg)?;
    let forecasts =
        forecast_with(&est.regressor, &est.filters.filters, x, 0..x.len() as i64)?.responses;
    Ok(SingleRun { est, forecasts })
}

fn resolved_single(e: &Estimate) -> Value {
    json!({
        "span": e.regressor.span,
        "b_r": e.regressor.b_r,
        "b_v": e.regressor.b_v,
        "b_c": e.response.b_c,
        "param": e.filters.regularization.parameter(),
        "max_lag": e.filters.filters.max_lag(),
        "window": window_json(e.regressor.window),
    })
}

fn write_single(dir: &Path, run: &SingleRun) -> Result<()> {
    let e = &run.est;
    let r = &e.regressor;
    write_with(dir, "spectral.csv", |w| {
        io::write_spectral(&r.spectral, &r.grid, &r.fgrid, w)
    })?;
    write_with(dir, "cross_spectral.csv", |w| {
        io::write_cross(&e.response.cross, &r.grid, &r.fgrid, w)
    })?;
    write_with(dir, "filters.csv", |w| {
        io::write_filters(&e.filters.filters, &r.grid, w)
    })?;
    let times: Vec<i64> = (0..run.forecasts.len() as i64).collect();
    write_with(dir, "forecasts.csv", |w| {
        io::write_forecasts(&times, &run.forecasts, w)
    })
}

fn single_metrics(run: &SingleRun, x: &SparseFts, z: &ScalarTs) -> Map<String, Value> {
    let e = &run.est;
    let mut m = Map::new();
    m.insert("data".into(), data_json(x));
    m.insert("sigma2".into(), json!(e.regressor.sigma2));
    m.insert("method".into(), json!(e.filters.regularization.name()));
    m.insert("resolved".into(), resolved_single(e));
    m.insert(
        "in_sample_relative_mse".into(),
        json!(relative_mse(&run.forecasts, z)),
    );
    m
}

fn simulate_cmd(a: &SimulateArgs, out: &Path) -> Result<()> {
    let (grid, _) = a.fit.grids()?;
    a.fit.fit_config()?;
    let sim_cfg = SimConfig::new(
        a.process.get(),
        a.t_len,
        a.nmax,
        a.scheme.get(),
        a.shape.get(),
        a.fit.seed,
    );
    sim_cfg.validate().map_err(|e| config_err(e.to_string()))?;
    prepare_out(out)?;
    let sim = simulate(&sim_cfg, &grid)?;
    let copy = simulate_copy(&sim_cfg, &grid)?;
    write_with(out, "regressor.csv", |w| {
        io::write_sparse(&sim.regressor, w)
    })?;
    write_with(out, "response.csv", |w| io::write_scalar(&sim.response, w))?;

    let run = fit_single(&sim.regressor, &sim.response, &a.fit)?;
    write_single(out, &run)?;

    let r = &run.est.regressor;
    let times = 0..a.t_len as i64;
    let k = run
        .est
        .filters
        .filters
        .max_lag()
        .max(sim.truth.filters.max_lag()) as i64;
    let range = -k..a.t_len as i64 + k;
    let truth_z: Vec<f64> = copy
        .response
        .values()
        .iter()
        .map(|v| v.unwrap_or(f64::NAN))
        .collect();
    let est_curves = blup_latent(
        &copy.regressor,
        &r.autocov,
        r.sigma2,
        &grid,
        range.clone(),
        r.window,
    )?;
    let oracle_curves = blup_latent(
        &copy.regressor,
        &copy.truth.autocov,
        copy.truth.sigma2,
        &grid,
        range,
        r.window,
    )?;
    let pred = forecast_response(&est_curves, &run.est.filters.filters, &grid, times.clone())?;
    let oracle = forecast_response(&oracle_curves, &sim.truth.filters, &grid, times)?;
    let var_z = sim.truth.var_z;

    let mut metrics = single_metrics(&run, &sim.regressor, &sim.response);
    metrics.insert(
        "delta_B".into(),
        json!(metric_delta_b(
            &run.est.filters.filters,
            &sim.truth.filters,
            &grid
        )),
    );
    metrics.insert(
        "delta_pred".into(),
        json!(metric_delta_pred(&pred, &truth_z, var_z)),
    );
    metrics.insert(
        "delta_pred_oracle".into(),
        json!(metric_delta_pred(&oracle, &truth_z, var_z)),
    );
    metrics.insert("sigma2_true".into(), json!(sim.truth.sigma2));
    metrics.insert("var_z".into(), json!(var_z));
    write_json(out, "metrics.json", &Value::Object(metrics))?;

    let manifest = json!({
        "command": "simulate",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": a.fit.seed,
        "simulation": {
            "process": sim_cfg.process.name(),
            "scheme": sim_cfg.scheme.name(),
            "shape": sim_cfg.shape.name(),
            "T": sim_cfg.t_len,
            "n_max": sim_cfg.n_max,
            "snr": sim_cfg.snr,
            "tau2": sim_cfg.tau2,
        },
        "inputs": {
            "regressor": absolute(&out.join("regressor.csv"))?,
            "response": absolute(&out.join("response.csv"))?,
        },
        "config": a.fit.echo(),
        "resolved": resolved_single(&run.est),
    });
    write_json(out, "manifest.json", &manifest)
}

fn joint_config(a: &FitArgs, param2: Choice, extra: &JointExtra) -> Result<JointConfig> {
    let base = a.fit_config()?;
    let cfg = JointConfig {
        mean_bandwidth: extra.mean_bandwidth,
        b_r2: extra.b_r2,
        b_v2: extra.b_v2,
        ..JointConfig::new(base, param2)
    };
    if matches!(cfg.base.param, Choice::Cv) != matches!(param2, Choice::Cv) {
        return Err(config_err(
            "--param and --param2 must both be fixed or both be `cv`",
        ));
    }
    Ok(cfg)
}

/// Joint-model settings that have no command-line flag and are only fixed
/// when replaying a manifest.
struct JointExtra {
    mean_bandwidth: Choice,
    b_r2: Choice,
    b_v2: Choice,
}

impl Default for JointExtra {
    fn default() -> Self {
        Self {
            mean_bandwidth: Choice::Cv,
            b_r2: Choice::Cv,
            b_v2: Choice::Cv,
        }
    }
}

fn resolved_joint(j: &JointFit) -> Value {
    let (v1, v2) = j.regularization.parameters();
    let mut v = json!({
        "span": j.regressor.span,
        "b_r": j.regressor.b_r,
        "b_v": j.regressor.b_v,
        "b_c": j.b_c,
        "param": v1,
        "param2": v2,
        "max_lag": j.filters1.max_lag(),
        "window": window_json(j.regressor.window),
        "mean_bandwidth": j.mean_bandwidth,
    });
    if let SecondFit::Sparse { fit, .. } = &j.second {
        v["b_r2"] = json!(fit.b_r);
        v["b_v2"] = json!(fit.b_v);
    }
    v
}

fn write_joint(dir: &Path, j: &JointFit, forecasts: &[f64]) -> Result<()> {
    let r = &j.regressor;
    let s = &j.spectra;
    write_with(dir, "spectral.csv", |w| {
        io::write_spectral(&s.f11, &r.grid, &r.fgrid, w)
    })?;
    write_with(dir, "spectral2.csv", |w| {
        io::write_spectral(&s.f22, &r.grid, &r.fgrid, w)
    })?;
    write_with(dir, "cross_spectral.csv", |w| {
        io::write_cross(&s.fz1, &r.grid, &r.fgrid, w)
    })?;
    write_with(dir, "cross_spectral2.csv", |w| {
        io::write_cross(&s.fz2, &r.grid, &r.fgrid, w)
    })?;
    write_with(dir, "filters.csv", |w| {
        io::write_filters(&j.filters1, &r.grid, w)
    })?;
    write_with(dir, "filters2.csv", |w| {
        io::write_filters(&j.filters2, &r.grid, w)
    })?;
    let times: Vec<i64> = (0..forecasts.len() as i64).collect();
    write_with(dir, "forecasts.csv", |w| {
        io::write_forecasts(&times, forecasts, w)
    })
}

fn second_kind_name(k: SecondKind) -> &'static str {
    match k {
        SecondKind::Dense => "dense",
        SecondKind::Sparse => "sparse",
    }
}

fn estimate_cmd(a: &EstimateArgs, out: &Path) -> Result<()> {
    let (grid, fgrid) = a.fit.grids()?;
    a.fit.fit_config()?;
    let z = read_scalar(&a.response)?;
    let x = read_sparse(&a.regressor)?;
    let t_len = z.len().max(x.len());
    let (x, z) = (pad_sparse(x, t_len)?, pad_scalar(z, t_len)?);
    let mut inputs =
        json!({ "regressor": absolute(&a.regressor)?, "response": absolute(&a.response)? });

    let (metrics, resolved) = match &a.second {
        None => {
            prepare_out(out)?;
            let run = fit_single(&x, &z, &a.fit)?;
            write_single(out, &run)?;
            let resolved = resolved_single(&run.est);
            (single_metrics(&run, &x, &z), resolved)
        }
        Some(path) => {
            let cfg = joint_config(&a.fit, a.param2, &JointExtra::default())?;
            let x2 = read_second(path, a.second_kind, grid.len())?;
            let x2 = match x2 {
                SecondRegressor::Sparse(s) => SecondRegressor::Sparse(pad_sparse(s, t_len)?),
                d => d,
            };
            inputs["second"] = json!(absolute(path)?);
            inputs["second_kind"] = json!(second_kind_name(a.second_kind));
            prepare_out(out)?;
            let j = fit_joint(&x, &x2, &z, &grid, &fgrid, a.fit.method.method(), &cfg)?;
            let forecasts = j.forecast(0..t_len as i64)?;
            write_joint(out, &j, &forecasts)?;
            let resolved = resolved_joint(&j);
            let mut m = Map::new();
            m.insert("data".into(), data_json(&x));
            m.insert("sigma2".into(), json!(j.regressor.sigma2));
            if let SecondFit::Sparse { fit, .. } = &j.second {
                m.insert("sigma2_second".into(), json!(fit.sigma2));
            }
            m.insert("method".into(), json!(a.fit.method.method().name()));
            m.insert("zbar".into(), json!(j.zbar));
            m.insert("resolved".into(), resolved.clone());
            m.insert(
                "in_sample_relative_mse".into(),
                json!(relative_mse(&forecasts, &z)),
            );
            if let Some(t) = &j.holdout {
                let (v1, _) = j.regularization.parameters();
                m.insert(
                    "holdout".into(),
                    trace_json(t, v1 / j.spectra.eig1.max_eigenvalue()),
                );
            }
            (m, resolved)
        }
    };
    write_json(out, "metrics.json", &Value::Object(metrics))?;
    let mut config = a.fit.echo();
    config["param2"] = choice_json(a.param2);
    let manifest = json!({
        "command": "estimate",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": a.fit.seed,
        "inputs": inputs,
        "config": config,
        "resolved": resolved,
    });
    write_json(out, "manifest.json", &manifest)
}

fn field<'a>(v: &'a Value, path: &[&str]) -> Result<&'a Value> {
    let mut cur = v;
    for key in path {
        cur = cur
            .get(key)
            .ok_or_else(|| config_err(format!("manifest lacks `{}`", path.join("."))))?;
    }
    Ok(cur)
}

fn num(v: &Value, path: &[&str]) -> Result<f64> {
    field(v, path)?.as_f64().ok_or_else(|| {
        config_err(format!(
            "manifest field `{}` is not a number",
            path.join(".")
        ))
    })
}

fn count(v: &Value, path: &[&str]) -> Result<usize> {
    field(v, path)?.as_u64().map(|n| n as usize).ok_or_else(|| {
        config_err(format!(
            "manifest field `{}` is not a count",
            path.join(".")
        ))
    })
}

fn fixed(v: &Value, path: &[&str]) -> Result<Choice> {
    Ok(Choice::Fixed(num(v, path)?))
}

/// Settings of a manifest with every cross-validated quantity fixed at its
/// selected value.
fn replay_args(m: &Value) -> Result<FitArgs> {
    let c = field(m, &["config"])?;
    let method = match field(c, &["method"])?.as_str() {
        Some("trunc") => MethodArg::Trunc,
        Some("tikh") => MethodArg::Tikh,
        _ => return Err(config_err("manifest method must be `trunc` or `tikh`")),
    };
    let window = match field(m, &["resolved", "window"])? {
        Value::String(s) if s == "full" => Window::Full,
        v => Window::Lags(
            v.as_u64()
                .ok_or_else(|| config_err("manifest window is invalid"))? as usize,
        ),
    };
    Ok(FitArgs {
        p: count(c, &["p"])?,
        n_freq: count(c, &["n_freq"])?,
        span: Some(count(m, &["resolved", "span"])?),
        b_r: fixed(m, &["resolved", "b_r"])?,
        b_v: fixed(m, &["resolved", "b_v"])?,
        b_c: fixed(m, &["resolved", "b_c"])?,
        method,
        param: fixed(m, &["resolved", "param"])?,
        max_lag: MaxLag::Lags(count(m, &["resolved", "max_lag"])?),
        k_max: count(c, &["k_max"])?,
        window: Some(window),
        folds: count(c, &["folds"])?,
        seed: field(m, &["seed"])?
            .as_u64()
            .ok_or_else(|| config_err("manifest seed is invalid"))?,
    })
}

fn path_field(m: &Value, key: &str) -> Result<PathBuf> {
    field(m, &["inputs", key])?
        .as_str()
        .map(PathBuf::from)
        .ok_or_else(|| config_err(format!("manifest input `{key}` is not a path")))
}

fn forecast_times(a: &ForecastArgs, t_len: usize) -> Result<std::ops::Range<i64>> {
    let from = a.from.unwrap_or(1);
    let to = a.to.unwrap_or(t_len as i64);
    if from > to {
        return Err(config_err(format!("--from {from} exceeds --to {to}")));
    }
    Ok(from - 1..to)
}

fn forecast_cmd(a: &ForecastArgs, out: &Path) -> Result<()> {
    let text = fs::read_to_string(&a.manifest)
        .with_context(|| format!("reading {}", a.manifest.display()))?;
    let m: Value = serde_json::from_str(&text)
        .map_err(|e| config_err(format!("manifest is not valid JSON: {e}")))?;
    let args = replay_args(&m)?;
    let (grid, fgrid) = args.grids()?;
    let z = read_scalar(&path_field(&m, "response")?)?;
    let x = read_sparse(&path_field(&m, "regressor")?)?;
    let t_len = z.len().max(x.len());
    let (x, z) = (pad_sparse(x, t_len)?, pad_scalar(z, t_len)?);
    let source = match &a.regressor {
        Some(p) => read_sparse(p)?,
        None => x.clone(),
    };
    let times = forecast_times(a, source.len())?;
    let joint = m.get("inputs").and_then(|i| i.get("second")).is_some();
    prepare_out(out)?;

    let (pred, filters_max) = if joint {
        let kind = match field(&m, &["inputs", "second_kind"])?.as_str() {
            Some("sparse") => SecondKind::Sparse,
            Some("dense") => SecondKind::Dense,
            _ => {
                return Err(config_err(
                    "manifest second_kind must be `dense` or `sparse`",
                ))
            }
        };
        let opt = |key: &str| -> Result<Choice> {
            match m["resolved"].get(key) {
                Some(_) => fixed(&m, &["resolved", key]),
                None => Ok(Choice::Cv),
            }
        };
        let extra = JointExtra {
            mean_bandwidth: fixed(&m, &["resolved", "mean_bandwidth"])?,
            b_r2: opt("b_r2")?,
            b_v2: opt("b_v2")?,
        };
        let cfg = joint_config(&args, fixed(&m, &["resolved", "param2"])?, &extra)?;
        let pad = |s: SecondRegressor, n: usize| -> Result<SecondRegressor> {
            Ok(match s {
                SecondRegressor::Sparse(s) => SecondRegressor::Sparse(pad_sparse(s, n)?),
                d => d,
            })
        };
        let x2 = pad(
            read_second(&path_field(&m, "second")?, kind, grid.len())?,
            t_len,
        )?;
        let j = fit_joint(&x, &x2, &z, &grid, &fgrid, args.method.method(), &cfg)?;
        write_with(out, "filters.csv", |w| {
            io::write_filters(&j.filters1, &grid, w)
        })?;
        write_with(out, "filters2.csv", |w| {
            io::write_filters(&j.filters2, &grid, w)
        })?;
        let pred = match (&a.regressor, &a.second) {
            (None, None) => j.forecast(times.clone())?,
            _ => {
                let x2_new = match &a.second {
                    Some(p) => pad(read_second(p, kind, grid.len())?, source.len())?,
                    None => x2,
                };
                let mut replay = j;
                let src = pad_sparse(source, t_len)?;
                replay.centered = sflr::extensions::center_sparse(&src, &replay.mean1, &grid)?;
                replay.second = match (x2_new, &replay.second) {
                    (SecondRegressor::Dense(d), SecondFit::Dense { mean, .. }) => {
                        SecondFit::Dense {
                            mean: mean.clone(),
                            data: d,
                        }
                    }
                    (SecondRegressor::Sparse(s), SecondFit::Sparse { mean, fit, .. }) => {
                        SecondFit::Sparse {
                            mean: mean.clone(),
                            data: sflr::extensions::center_sparse(&s, mean, &grid)?,
                            fit: fit.clone(),
                        }
                    }
                    _ => {
                        return Err(config_err(
                            "second regressor kind differs from the manifest",
                        ))
                    }
                };
                replay.forecast(times.clone())?
            }
        };
        let m1 = replay_max(&m)?;
        (pred, m1)
    } else {
        let run = estimate(
            &x,
            &z,
            &grid,
            &fgrid,
            args.method.method(),
            &args.fit_config()?,
        )?;
        write_with(out, "filters.csv", |w| {
            io::write_filters(&run.filters.filters, &grid, w)
        })?;
        let pred =
            forecast_with(&run.regressor, &run.filters.filters, &source, times.clone())?.responses;
        (pred, run.filters.filters.max_lag())
    };
    let t: Vec<i64> = times.collect();
    write_with(out, "forecasts.csv", |w| io::write_forecasts(&t, &pred, w))?;
    let metrics = json!({
        "manifest": absolute(&a.manifest)?,
        "forecasts": t.len(),
        "max_lag": filters_max,
    });
    write_json(out, "metrics.json", &metrics)
}

fn replay_max(m: &Value) -> Result<usize> {
    count(m, &["resolved", "max_lag"])
}

fn cv_cmd(a: &CvArgs, out: &Path) -> Result<()> {
    let (grid, fgrid) = a.fit.grids()?;
    let cfg = a.fit.fit_config()?;
    let z = read_scalar(&a.response)?;
    let x = read_sparse(&a.regressor)?;
    let t_len = z.len().max(x.len());
    let (x, z) = (pad_sparse(x, t_len)?, pad_scalar(z, t_len)?);
    // every tuning choice is cross-validated here
    let cfg = FitConfig {
        b_r: Choice::Cv,
        b_v: Choice::Cv,
        b_c: Choice::Cv,
        param: Choice::Cv,
        ..cfg
    };
    prepare_out(out)?;
    let est = estimate(&x, &z, &grid, &fgrid, a.fit.method.method(), &cfg)?;
    let r = &est.regressor;
    let bw = r
        .bandwidth_cv
        .as_ref()
        .context("bandwidth selection missing")?;
    let mut cv = json!({
        "surface_bandwidth": trace_json(&bw.surface_trace, bw.surface),
        "diagonal_bandwidth": trace_json(&bw.diagonal_trace, bw.diagonal),
    });
    if let Some(t) = &est.response.cross_cv {
        cv["cross_bandwidth"] = trace_json(t, est.response.b_c);
    }
    if let Some(h) = &est.filters.holdout {
        cv["regularization"] = trace_json(&h.trace, h.regularization.parameter());
        cv["regularization"]["method"] = json!(h.regularization.name());
    }
    write_json(out, "cv.json", &cv)?;
    let manifest = json!({
        "command": "cv",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": a.fit.seed,
        "inputs": { "regressor": absolute(&a.regressor)?, "response": absolute(&a.response)? },
        "config": a.fit.echo(),
        "resolved": resolved_single(&est),
    });
    write_json(out, "manifest.json", &manifest)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Medians per setting, in row order of first appearance.
fn summarize(rows: &[ExperimentRow]) -> Vec<Value> {
    let mut groups: BTreeMap<usize, (String, Vec<&ExperimentRow>)> = BTreeMap::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for r in rows {
        let key = format!(
            "{},{},{},{},{},{}",
            r.process.name(),
            r.scheme.name(),
            r.shape.name(),
            r.t_len,
            r.n_max,
            r.method.name()
        );
        let next = index.len();
        let i = *index.entry(key.clone()).or_insert(next);
        groups
            .entry(i)
            .or_insert_with(|| (key, Vec::new()))
            .1
            .push(r);
    }
    groups
        .into_values()
        .map(|(_, g)| {
            let r0 = g[0];
            let mut db: Vec<f64> = g.iter().map(|r| r.delta_b).collect();
            let mut dp: Vec<f64> = g.iter().map(|r| r.delta_pred).collect();
            let mut dpo: Vec<f64> = g.iter().map(|r| r.delta_pred_oracle).collect();
            json!({
                "process": r0.process.name(),
                "scheme": r0.scheme.name(),
                "shape": r0.shape.name(),
                "T": r0.t_len,
                "N_max": r0.n_max,
                "method": r0.method.name(),
                "replications": g.len(),
                "median_delta_B": median(&mut db),
                "median_delta_pred": median(&mut dp),
                "median_delta_pred_oracle": median(&mut dpo),
            })
        })
        .collect()
}

fn reproduce_cmd(a: &ReproduceArgs, out: &Path) -> Result<()> {
    let (grid, fgrid) = a.fit.grids()?;
    let cfg = a.fit.fit_config()?;
    if a.full && a.reps == 0 {
        return Err(config_err("--reps must be positive"));
    }
    let design = if a.full {
        ExperimentGrid::full(a.fit.seed, a.reps)
    } else {
        ExperimentGrid::reduced(a.fit.seed)
    };
    prepare_out(out)?;
    let rows = run_experiment(&design, &grid, &fgrid, &cfg)?;
    write_with(out, "replications.csv", |w| write_rows(&rows, w))?;
    write_json(
        out,
        "metrics.json",
        &json!({ "settings": summarize(&rows) }),
    )?;
    let manifest = json!({
        "command": "reproduce",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": a.fit.seed,
        "design": {
            "grid": if a.full { "full" } else { "reduced" },
            "processes": design.processes.iter().map(|p| p.name()).collect::<Vec<_>>(),
            "schemes": design.schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
            "shapes": design.shapes.iter().map(|s| s.name()).collect::<Vec<_>>(),
            "T": design.t_lens,
            "N_max": design.n_maxs,
            "methods": design.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "seeds": design.seeds,
            "rows": rows.len(),
        },
        "config": a.fit.echo(),
    });
    write_json(out, "manifest.json", &manifest)
}
