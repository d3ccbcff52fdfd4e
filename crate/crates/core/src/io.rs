//! CSV ingestion of sparse, dense and scalar series, and CSV output of
//! estimates.
//!
//! Input time indices are 1-based; `t = 1` is stored at index 0.

use crate::grid::{FrequencyGrid, SpatialGrid};
use crate::regression::FilterSet;
use crate::spectral::{CrossSpectralEstimate, SpectralDensityEstimate};
use crate::{DenseFts, Error, Observation, Result, ScalarTs, SparseFts};
use nalgebra::DVector;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

fn reader<R: Read>(src: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(src);
    let got = rdr.headers().map_err(|e| parse_err(1, e))?;
    let names: Vec<&str> = got.iter().collect();
    if names != header {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                names.join(",")
            ),
        });
    }
    Ok(rdr)
}

fn parse_err(line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse {
        line: line_of(rec),
        message: format!("invalid {name} `{raw}`"),
    })
}

fn time_index(rec: &csv::StringRecord) -> Result<usize> {
    let t: i64 = field(rec, 0, "t")?;
    if t < 1 {
        return Err(Error::Domain {
            line: line_of(rec),
            message: format!("t must be a positive integer, got {t}"),
        });
    }
    Ok(t as usize - 1)
}

fn finite(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64> {
    let v: f64 = field(rec, i, name)?;
    if !v.is_finite() {
        return Err(Error::Domain {
            line: line_of(rec),
            message: format!("{name} must be finite"),
        });
    }
    Ok(v)
}

fn location(rec: &csv::StringRecord) -> Result<f64> {
    let x = finite(rec, 1, "x")?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            line: line_of(rec),
            message: format!("x = {x} lies outside [0, 1]"),
        });
    }
    Ok(x)
}

fn records<R: Read>(
    rdr: &mut csv::Reader<R>,
) -> impl Iterator<Item = Result<csv::StringRecord>> + '_ {
    rdr.records().map(|r| {
        r.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e)
        })
    })
}

/// Sparse series from `t,x,y` rows; `T` is the largest `t` and absent times
/// have no observations.
pub fn read_sparse<R: Read>(src: R) -> Result<SparseFts> {
    let mut rdr = reader(src, &["t", "x", "y"])?;
    let mut curves: Vec<Vec<Observation>> = Vec::new();
    for rec in records(&mut rdr) {
        let rec = rec?;
        let t = time_index(&rec)?;
        let x = location(&rec)?;
        let y = finite(&rec, 2, "y")?;
        if curves.len() <= t {
            curves.resize(t + 1, Vec::new());
        }
        curves[t].push(Observation::new(x, y));
    }
    if curves.is_empty() {
        return Err(Error::EmptyData);
    }
    SparseFts::new(curves)
}

/// Scalar series from `t,z` rows; a blank `z` or an absent `t` is missing.
pub fn read_scalar<R: Read>(src: R) -> Result<ScalarTs> {
    let mut rdr = reader(src, &["t", "z"])?;
    let mut values: Vec<Option<f64>> = Vec::new();
    for rec in records(&mut rdr) {
        let rec = rec?;
        let t = time_index(&rec)?;
        let z = if rec.get(1).unwrap_or("").is_empty() {
            None
        } else {
            Some(finite(&rec, 1, "z")?)
        };
        if values.len() <= t {
            values.resize(t + 1, None);
        }
        values[t] = z;
    }
    if values.is_empty() {
        return Err(Error::EmptyData);
    }
    ScalarTs::new(values)
}

/// Dense series from `t,x,y` rows listing every point of an equispaced grid
/// for every `t = 1..T`.
pub fn read_dense<R: Read>(src: R) -> Result<DenseFts> {
    let mut rdr = reader(src, &["t", "x", "y"])?;
    let mut rows: Vec<Vec<(f64, f64, usize)>> = Vec::new();
    for rec in records(&mut rdr) {
        let rec = rec?;
        let t = time_index(&rec)?;
        let x = location(&rec)?;
        let y = finite(&rec, 2, "y")?;
        if rows.len() <= t {
            rows.resize(t + 1, Vec::new());
        }
        rows[t].push((x, y, line_of(&rec)));
    }
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let p = rows[0].len();
    let mut curves = Vec::with_capacity(rows.len());
    for (t, mut row) in rows.into_iter().enumerate() {
        if row.len() != p || p < 2 {
            return Err(Error::Domain {
                line: 0,
                message: format!(
                    "time {} has {} points, expected {p} (at least 2)",
                    t + 1,
                    row.len()
                ),
            });
        }
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, &(x, _, line)) in row.iter().enumerate() {
            let want = i as f64 / (p - 1) as f64;
            if (x - want).abs() > 1e-9 {
                return Err(Error::Domain {
                    line,
                    message: format!("x = {x} is not the grid point {want}"),
                });
            }
        }
        curves.push(DVector::from_iterator(p, row.iter().map(|r| r.1)));
    }
    DenseFts::new(curves)
}

pub fn ingest_sparse_csv(path: impl AsRef<Path>) -> Result<SparseFts> {
    read_sparse(File::open(path)?)
}

pub fn ingest_scalar_csv(path: impl AsRef<Path>) -> Result<ScalarTs> {
    read_scalar(File::open(path)?)
}

pub fn ingest_dense_csv(path: impl AsRef<Path>) -> Result<DenseFts> {
    read_dense(File::open(path)?)
}

/// `omega,x,y,re,im` for every frequency and pair of grid points.
pub fn write_spectral<W: Write>(
    f: &SpectralDensityEstimate,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    out: W,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "omega,x,y,re,im")?;
    for (k, m) in f.values().iter().enumerate() {
        let w = fgrid.omega(k);
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let z = m[(i, j)];
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    w,
                    grid.point(i),
                    grid.point(j),
                    z.re,
                    z.im
                )?;
            }
        }
    }
    out.flush()
}

/// `omega,x,re,im` for every frequency and grid point.
pub fn write_cross<W: Write>(
    f: &CrossSpectralEstimate,
    grid: &SpatialGrid,
    fgrid: &FrequencyGrid,
    out: W,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "omega,x,re,im")?;
    for (k, v) in f.values().iter().enumerate() {
        let w = fgrid.omega(k);
        for (i, z) in v.iter().enumerate() {
            writeln!(out, "{},{},{},{}", w, grid.point(i), z.re, z.im)?;
        }
    }
    out.flush()
}

/// `k,x,b` rows; floats use the shortest representation that reads back exactly.
pub fn write_filters<W: Write>(
    filters: &FilterSet,
    grid: &SpatialGrid,
    out: W,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "k,x,b")?;
    for (k, b) in filters.iter() {
        for (i, v) in b.iter().enumerate() {
            writeln!(out, "{},{},{}", k, grid.point(i), v)?;
        }
    }
    out.flush()
}

/// Reads what [`write_filters`] wrote.
pub fn read_filters<R: Read>(src: R) -> Result<FilterSet> {
    let mut rdr = reader(src, &["k", "x", "b"])?;
    let mut entries: Vec<(i64, Vec<f64>)> = Vec::new();
    for rec in records(&mut rdr) {
        let rec = rec?;
        let k: i64 = field(&rec, 0, "k")?;
        let _ = location(&rec)?;
        let b = finite(&rec, 2, "b")?;
        match entries.last_mut() {
            Some((last, v)) if *last == k => v.push(b),
            _ => entries.push((k, vec![b])),
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyData);
    }
    let p = entries[0].1.len();
    let m = entries.len() / 2;
    let ordered = entries
        .iter()
        .enumerate()
        .all(|(i, (k, v))| *k == i as i64 - m as i64 && v.len() == p);
    if entries.len() % 2 == 0 || !ordered {
        return Err(Error::Domain {
            line: 0,
            message: "filters must list lags -M..=M on one grid".into(),
        });
    }
    FilterSet::new(
        m,
        entries
            .into_iter()
            .map(|(_, v)| DVector::from_vec(v))
            .collect(),
    )
}

pub fn read_filters_csv(path: impl AsRef<Path>) -> Result<FilterSet> {
    read_filters(File::open(path)?)
}

/// `t,z_hat` rows with 1-based `t`.
pub fn write_forecasts<W: Write>(times: &[i64], values: &[f64], out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "t,z_hat")?;
    for (t, z) in times.iter().zip(values) {
        writeln!(out, "{},{}", t + 1, z)?;
    }
    out.flush()
}

/// Sparse series as `t,x,y` rows.
pub fn write_sparse<W: Write>(data: &SparseFts, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "t,x,y")?;
    for (t, c) in data.curves().iter().enumerate() {
        for o in c {
            writeln!(out, "{},{},{}", t + 1, o.x, o.y)?;
        }
    }
    out.flush()
}

/// Scalar series as `t,z` rows, blank when missing.
pub fn write_scalar<W: Write>(z: &ScalarTs, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "t,z")?;
    for (t, v) in z.values().iter().enumerate() {
        match v {
            Some(v) => writeln!(out, "{},{}", t + 1, v)?,
            None => writeln!(out, "{},", t + 1)?,
        }
    }
    out.flush()
}

/// Dense series as `t,x,y` rows on the grid.
pub fn write_dense<W: Write>(data: &DenseFts, grid: &SpatialGrid, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "t,x,y")?;
    for (t, c) in data.curves().iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            writeln!(out, "{},{},{}", t + 1, grid.point(i), v)?;
        }
    }
    out.flush()
}
