//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sflr::experiment::{run_experiment, ExperimentGrid, ExperimentRow};
use sflr::extensions::{
    fit_joint, joint_transfer, JointConfig, JointRegularization, SecondRegressor,
};
use sflr::forecasting::{forecast, Window};
use sflr::kernel::{bartlett_weight, epanechnikov};
use sflr::pipeline::{estimate, fit_regressor, Choice, FitConfig, Method};
use sflr::regression::{regularized_transfer, FilterSet, Regularization};
use sflr::simulation::{metric_delta_b, simulate, Process, Scheme, Shape, SimConfig};
use sflr::smoothing::{smooth_diagonal_perpendicular, smooth_lag0_surface, smooth_noisy_diagonal};
use sflr::spectral::{
    eigendecompose, estimate_cross_spectral, estimate_spectral_density,
    estimate_spectral_density_unclipped, invert_to_autocov, AutocovSequence, CrossSpectralEstimate,
    SpectralDensityEstimate,
};
use sflr::{DenseFts, FrequencyGrid, Observation, ScalarTs, SparseFts, SpatialGrid, C64};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (usize, &'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "smoother oracle equivalence", 60, smoother_oracles),
        (2, "spectral invariants", 60, spectral_invariants),
        (
            3,
            "latent BLUP equals direct response BLUP",
            120,
            blup_equivalence,
        ),
        (4, "Tikhonov consistency", 60, tikhonov_consistency),
        (5, "noise variance recovery", 600, sigma2_recovery),
        (6, "simulation trends", 3600, simulation_trends),
        (7, "oracle prediction gap", 900, oracle_gap),
        (8, "joint model degeneration", 600, joint_degeneration),
        (9, "end-to-end determinism", 600, determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < budget as f64;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} [{name}]: {} ({}; {secs:.1}s of {budget}s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- data

/// Sparse AR(1)-driven curves with noise, `T` curves of `0..=nmax` points.
fn toy(t_len: usize, nmax: usize, seed: u64) -> (SparseFts, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut c) = (0.0, 0.0);
    let mut amps = Vec::new();
    let curves = (0..t_len)
        .map(|_| {
            a = 0.6 * a + rng.random_range(-1.0..1.0);
            c = -0.3 * c + rng.random_range(-1.0..1.0);
            amps.push(a);
            let n = rng.random_range(0..=nmax);
            (0..n)
                .map(|_| {
                    let x: f64 = rng.random();
                    let y = a * (2.0 * x).cos()
                        + c * (3.0 * x).sin()
                        + 0.3 * rng.random_range(-1.0..1.0);
                    Observation::new(x, y)
                })
                .collect()
        })
        .collect();
    (SparseFts::new(curves).unwrap(), amps)
}

/// Products `Y_{t+h,j} Y_{t,k}` as `(x_{t+h,j}, x_{t,k}, product)`, never
/// pairing an observation with itself.
fn lag_pairs(d: &SparseFts, h: i64) -> Vec<(f64, f64, f64)> {
    let t_len = d.len() as i64;
    let mut out = Vec::new();
    for t in 0..t_len {
        let s = t + h;
        if s < 0 || s >= t_len {
            continue;
        }
        for (j, a) in d.curve(s as usize).iter().enumerate() {
            for (k, b) in d.curve(t as usize).iter().enumerate() {
                if h == 0 && j == k {
                    continue;
                }
                out.push((a.x, b.x, a.y * b.y));
            }
        }
    }
    out
}

fn rel_err(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-3 * scale)
}

fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0f64, |m, v| m.max(v.abs()))
}

// ---------------------------------------------------------------- 1

fn smoother_oracles() -> Outcome {
    let (d, amps) = toy(60, 6, 101);
    let grid = SpatialGrid::new(21).unwrap();
    let fgrid = FrequencyGrid::new(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pick = || rng.random_range(0..grid.len());
    let (b, span) = (0.3, 4usize);
    let k = |v: f64| epanechnikov(v);
    let mut worst = [0.0f64; 5];

    let lag0 = lag_pairs(&d, 0);
    let s = smooth_lag0_surface(&d, &grid, b).unwrap();
    let scale = max_abs(s.values.iter());
    for _ in 0..20 {
        let (xi, yi) = (pick(), pick());
        let (x, y) = (grid.point(xi), grid.point(yi));
        let (mut a, mut r) = (Matrix3::zeros(), Vector3::zeros());
        for &(u, v, g) in &lag0 {
            let w = k((u - x) / b) * k((v - y) / b);
            let z = Vector3::new(1.0, u - x, v - y);
            a += w * z * z.transpose();
            r += w * g * z;
        }
        let want = a.lu().solve(&r).unwrap()[0];
        worst[0] = worst[0].max(rel_err(s.values[(xi, yi)], want, scale));
    }

    let rbar = smooth_diagonal_perpendicular(&d, &grid, b).unwrap();
    let scale = max_abs(rbar.iter());
    for _ in 0..20 {
        let xi = pick();
        let x = grid.point(xi);
        let (mut a, mut r) = (Matrix3::zeros(), Vector3::zeros());
        for &(u, v, g) in &lag0 {
            let w = k((u - x) / b) * k((v - x) / b);
            let off = (v - u) / 2f64.sqrt();
            let z = Vector3::new(1.0, off, off * off);
            a += w * z * z.transpose();
            r += w * g * z;
        }
        let want = a.lu().solve(&r).unwrap()[0];
        worst[1] = worst[1].max(rel_err(rbar[xi], want, scale));
    }

    let vhat = smooth_noisy_diagonal(&d, &grid, b).unwrap();
    let scale = max_abs(vhat.iter());
    for _ in 0..20 {
        let xi = pick();
        let x = grid.point(xi);
        let (mut a, mut r) = (Matrix2::zeros(), Vector2::zeros());
        for c in d.curves() {
            for o in c {
                let w = k((o.x - x) / b);
                let z = Vector2::new(1.0, o.x - x);
                a += w * z * z.transpose();
                r += w * o.y * o.y * z;
            }
        }
        let want = a.lu().solve(&r).unwrap()[0];
        worst[2] = worst[2].max(rel_err(vhat[xi], want, scale));
    }

    let f = estimate_spectral_density_unclipped(&d, &grid, &fgrid, span, b).unwrap();
    let scale = f
        .values()
        .iter()
        .flat_map(|m| m.iter())
        .fold(0.0f64, |m, z| m.max(z.norm()));
    let t_len = d.len() as f64;
    let nbar = d.mean_count();
    let n0 = t_len * (d.mean_square_count() - nbar);
    let m = span as i64 - 1;
    let lags: Vec<(i64, Vec<(f64, f64, f64)>)> = (-m..=m).map(|h| (h, lag_pairs(&d, h))).collect();
    for _ in 0..20 {
        let (kk, xi, yi) = (
            rng.random_range(0..fgrid.len()),
            rng.random_range(0..grid.len()),
            rng.random_range(0..grid.len()),
        );
        let (x, y, omega) = (grid.point(xi), grid.point(yi), fgrid.omega(kk));
        let (mut a, mut re, mut im) = (Matrix3::zeros(), Vector3::zeros(), Vector3::zeros());
        for (h, pairs) in &lags {
            let nh = if *h == 0 {
                n0
            } else {
                (t_len - h.abs() as f64) * nbar * nbar
            };
            let wh = bartlett_weight(span, *h) / nh;
            let (c, s) = ((*h as f64 * omega).cos(), -(*h as f64 * omega).sin());
            for &(u, v, g) in pairs {
                let w = wh * k((u - x) / b) * k((v - y) / b);
                let z = Vector3::new(1.0, u - x, v - y);
                a += w * z * z.transpose();
                re += w * g * c * z;
                im += w * g * s * z;
            }
        }
        let lu = a.lu();
        let norm = span as f64 / (2.0 * std::f64::consts::PI);
        let want = C64::new(lu.solve(&re).unwrap()[0], lu.solve(&im).unwrap()[0]) * norm;
        let got = f.at(kk)[(xi, yi)];
        worst[3] = worst[3].max((got - want).norm() / want.norm().max(1e-3 * scale));
    }

    let mut zr = ChaCha8Rng::seed_from_u64(8);
    let zv: Vec<Option<f64>> = (0..60)
        .map(|t| {
            if t % 9 == 4 {
                None
            } else {
                Some(0.8 * amps[(t as usize).saturating_sub(1)] + 0.2 * zr.random_range(-1.0..1.0))
            }
        })
        .collect();
    let z = ScalarTs::new(zv).unwrap();
    let cross = estimate_cross_spectral(&d, &z, &grid, &fgrid, span, b).unwrap();
    let scale = cross
        .values()
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |m, z| m.max(z.norm()));
    for _ in 0..20 {
        let (kk, xi) = (
            rng.random_range(0..fgrid.len()),
            rng.random_range(0..grid.len()),
        );
        let (x, omega) = (grid.point(xi), fgrid.omega(kk));
        let (mut a, mut re, mut im) = (Matrix2::zeros(), Vector2::zeros(), Vector2::zeros());
        for h in -m..=m {
            let (c, s) = ((h as f64 * omega).cos(), -(h as f64 * omega).sin());
            for t in 0..60i64 {
                let Some(zh) = z.get(t + h) else { continue };
                for o in d.curve(t as usize) {
                    let w = bartlett_weight(span, h) * k((o.x - x) / b);
                    let zz = Vector2::new(1.0, o.x - x);
                    a += w * zz * zz.transpose();
                    re += w * zh * o.y * c * zz;
                    im += w * zh * o.y * s * zz;
                }
            }
        }
        let lu = a.lu();
        let norm = span as f64 / (2.0 * std::f64::consts::PI);
        let want = C64::new(lu.solve(&re).unwrap()[0], lu.solve(&im).unwrap()[0]) * norm;
        worst[4] = worst[4].max((cross.at(kk)[xi] - want).norm() / want.norm().max(1e-3 * scale));
    }

    let pass = worst.iter().all(|&e| e <= 1e-8);
    Outcome {
        pass,
        detail: format!(
            "max rel err surface {:.1e}, perpendicular {:.1e}, noisy diagonal {:.1e}, spectral {:.1e}, cross {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    }
}

// ---------------------------------------------------------------- 2

fn spectral_invariants() -> Outcome {
    let (d, _) = toy(60, 6, 202);
    let grid = SpatialGrid::new(15).unwrap();
    let fgrid = FrequencyGrid::new(32).unwrap();
    let (span, b) = (5usize, 0.3);
    let (f, eig) = estimate_spectral_density(&d, &grid, &fgrid, span, b).unwrap();
    let mut herm = 0.0f64;
    let mut conj = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for k in 0..fgrid.len() {
        herm = herm.max(
            (f.at(k) - f.at(k).adjoint())
                .iter()
                .fold(0.0, |m, z| m.max(z.norm())),
        );
        conj = conj.max(
            (f.at(fgrid.mirror(k)) - f.at(k).map(|z| z.conj()))
                .iter()
                .fold(0.0, |m, z| m.max(z.norm())),
        );
        min_eig = min_eig.min(eig.values[k].iter().cloned().fold(f64::INFINITY, f64::min));
    }

    // frequency-integrated lag 0 against the pooled fit with only lag-0 responses
    let unclipped = estimate_spectral_density_unclipped(&d, &grid, &fgrid, span, b).unwrap();
    let r0 = invert_to_autocov(&unclipped, &fgrid, span - 1)
        .unwrap()
        .lag(0)
        .unwrap()
        .clone();
    let t_len = d.len() as f64;
    let nbar = d.mean_count();
    let n0 = t_len * (d.mean_square_count() - nbar);
    let m = span as i64 - 1;
    let lags: Vec<(i64, Vec<(f64, f64, f64)>)> = (-m..=m).map(|h| (h, lag_pairs(&d, h))).collect();
    let p = grid.len();
    let mut direct = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let (x, y) = (grid.point(i), grid.point(j));
            let (mut a, mut r) = (Matrix3::zeros(), Vector3::zeros());
            for (h, pairs) in &lags {
                let nh = if *h == 0 {
                    n0
                } else {
                    (t_len - h.abs() as f64) * nbar * nbar
                };
                let wh = bartlett_weight(span, *h) / nh;
                for &(u, v, g) in pairs {
                    let w = wh * epanechnikov((u - x) / b) * epanechnikov((v - y) / b);
                    let z = Vector3::new(1.0, u - x, v - y);
                    a += w * z * z.transpose();
                    if *h == 0 {
                        r += w * g * z;
                    }
                }
            }
            direct[(i, j)] = span as f64 * a.lu().solve(&r).unwrap()[0];
        }
    }
    let direct = (&direct + direct.transpose()) * 0.5;
    let roundtrip = (&r0 - &direct).abs().max() / direct.abs().max();
    let pass = herm == 0.0 && conj == 0.0 && min_eig >= 0.0 && roundtrip <= 1e-8;
    Outcome {
        pass,
        detail: format!("hermitian residue {herm:e}, conjugacy residue {conj:e}, min eigenvalue {min_eig:.2e}, lag-0 roundtrip rel err {roundtrip:.1e}"),
    }
}

// ---------------------------------------------------------------- 3

fn blup_equivalence() -> Outcome {
    let grid = SpatialGrid::new(15).unwrap();
    let p = grid.len();
    let t_len = 30usize;
    let base = DMatrix::from_fn(p, p, |i, j| {
        (-3.0 * (grid.point(i) - grid.point(j)).abs()).exp()
    });
    // triangular lag weights keep the block-Toeplitz covariance non-negative
    let lags: Vec<DMatrix<f64>> = (0..4).map(|h| &base * (1.0 - h as f64 / 4.0)).collect();
    let r = AutocovSequence::new(lags).unwrap();
    let sigma2 = 0.05;
    let filters = FilterSet::from_lags(
        p,
        &[
            (-2, DVector::from_fn(p, |i, _| 0.3 * grid.point(i))),
            (
                -1,
                DVector::from_fn(p, |i, _| (std::f64::consts::PI * grid.point(i)).sin()),
            ),
            (0, DVector::from_fn(p, |i, _| 1.0 - grid.point(i))),
            (1, DVector::from_fn(p, |i, _| (2.0 * grid.point(i)).cos())),
            (2, DVector::from_element(p, -0.4)),
        ],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let curves = (0..t_len)
        .map(|_| {
            (0..rng.random_range(0..5))
                .map(|_| Observation::new(rng.random(), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let d = SparseFts::new(curves).unwrap();
    let times = 10..20i64;
    let got = forecast(&d, &r, sigma2, &filters, &grid, times.clone(), Window::Full)
        .unwrap()
        .responses;

    // R_h(u, v) by tensor-product hat functions
    let hat = |x: f64, i: usize| (1.0 - (x - grid.point(i)).abs() / grid.spacing()).max(0.0);
    let cov = |h: i64, u: f64, v: f64| -> f64 {
        if h.unsigned_abs() as usize > r.max_lag() {
            return 0.0;
        }
        let m = r.get(h);
        let mut s = 0.0;
        for i in 0..p {
            for j in 0..p {
                s += hat(u, i) * hat(v, j) * m[(i, j)];
            }
        }
        s
    };
    let obs: Vec<(i64, f64, f64)> = (0..t_len)
        .flat_map(|t| d.curve(t).iter().map(move |o| (t as i64, o.x, o.y)))
        .collect();
    let n = obs.len();
    let mut g = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            g[(a, b)] = cov(obs[a].0 - obs[b].0, obs[a].1, obs[b].1);
        }
        g[(a, a)] += sigma2;
    }
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.2));
    let alpha = g.lu().solve(&y).unwrap();
    let w = grid.weight();
    let mut worst = 0.0f64;
    for (s, got) in times.zip(&got) {
        // cov(Z_s, Y_{t,j}) = Σ_k ⟨b_k, R_{s-k-t}(·, x_{tj})⟩
        let czy = DVector::from_iterator(
            n,
            obs.iter().map(|&(t, x, _)| {
                filters
                    .iter()
                    .map(|(k, b)| {
                        (0..p)
                            .map(|i| w * b[i] * cov(s - k - t, grid.point(i), x))
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            }),
        );
        let want = czy.dot(&alpha);
        worst = worst.max((got - want).abs() / want.abs().max(1e-6));
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("max rel err {worst:.1e} over 10 forecasts, {n} observations"),
    }
}

// ---------------------------------------------------------------- 4

fn tikhonov_consistency() -> Outcome {
    let grid = SpatialGrid::new(31).unwrap();
    let fgrid = FrequencyGrid::new(16).unwrap();
    let p = grid.len();
    let w = grid.weight();
    // orthonormal φ_1..φ_3 in the quadrature inner product
    let mut phis: Vec<DVector<f64>> = Vec::new();
    for j in 1..=3 {
        let mut v = DVector::from_fn(p, |i, _| {
            (j as f64 * std::f64::consts::PI * grid.point(i)).sin() + 0.1 * j as f64
        });
        for q in &phis {
            let c = w * v.dot(q);
            v -= q * c;
        }
        let nrm = (w * v.dot(&v)).sqrt();
        phis.push(v / nrm);
    }
    let coef = [1.0, -0.5, 0.25];
    let mut fs = Vec::new();
    let mut cross = Vec::new();
    let mut truth = Vec::new();
    for k in 0..fgrid.len() {
        let om = fgrid.omega(k);
        let mut f = DMatrix::zeros(p, p);
        let mut beta = DVector::zeros(p);
        for (j, phi) in phis.iter().enumerate() {
            let lam = (3 - j) as f64 * (1.5 + 0.5 * om.cos());
            f += phi * phi.transpose() * lam;
            beta += phi * (coef[j] * (1.0 + 0.3 * om.cos()));
        }
        let fzx = &f * &beta * w;
        fs.push(f.map(|v| C64::new(v, 0.0)));
        cross.push(fzx.map(|v| C64::new(v, 0.0)));
        truth.push(beta);
    }
    let eig = eigendecompose(&SpectralDensityEstimate::from_values(fs, 1, 0.1), &grid);
    let cross = CrossSpectralEstimate::from_values(cross, 1, 0.1);
    let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&rho| {
            let tr = regularized_transfer(&cross, &eig, &grid, Regularization::Tikhonov { rho })
                .unwrap();
            tr.values
                .iter()
                .zip(&truth)
                .map(|(b, beta)| {
                    let d: f64 = b
                        .iter()
                        .zip(beta.iter())
                        .map(|(z, t)| (z - C64::new(*t, 0.0)).norm_sqr())
                        .sum();
                    (d / beta.dot(beta)).sqrt()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let pass = errs.windows(2).all(|e| e[1] < e[0]) && errs[2] <= 1e-3;
    Outcome {
        pass,
        detail: format!(
            "sup relative transfer error {:.2e}, {:.2e}, {:.2e}",
            errs[0], errs[1], errs[2]
        ),
    }
}

// ---------------------------------------------------------------- 5

fn sigma2_recovery() -> Outcome {
    let grid = SpatialGrid::new(51).unwrap();
    let fgrid = FrequencyGrid::new(512).unwrap();
    let ratios: Vec<f64> = (0..10u64)
        .map(|seed| {
            let sim = simulate(
                &SimConfig::new(Process::Far1, 600, 40, Scheme::Reg1, Shape::B, seed),
                &grid,
            )
            .unwrap();
            let cfg = FitConfig {
                seed,
                ..FitConfig::default()
            };
            let fit = fit_regressor(&sim.regressor, &grid, &fgrid, &cfg).unwrap();
            fit.sigma2 / sim.truth.sigma2
        })
        .collect();
    let hits = ratios.iter().filter(|r| (*r - 1.0).abs() <= 0.3).count();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    Outcome {
        pass: hits >= 8,
        detail: format!(
            "{hits}/10 within 30%, estimate/truth ratios [{}]",
            shown.join(", ")
        ),
    }
}

// ---------------------------------------------------------------- 6, 7

fn experiment(t_lens: Vec<usize>, shapes: Vec<Shape>) -> Vec<ExperimentRow> {
    let grid = SpatialGrid::new(51).unwrap();
    let fgrid = FrequencyGrid::new(512).unwrap();
    let design = ExperimentGrid {
        processes: vec![Process::Far1],
        schemes: vec![Scheme::Reg1],
        shapes,
        t_lens,
        n_maxs: vec![40],
        methods: vec![Method::Truncation, Method::Tikhonov],
        seeds: (0..10).collect(),
    };
    run_experiment(&design, &grid, &fgrid, &FitConfig::default()).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn select<'a>(
    rows: &'a [ExperimentRow],
    t: usize,
    shape: Shape,
    method: Method,
) -> impl Iterator<Item = &'a ExperimentRow> {
    rows.iter()
        .filter(move |r| r.t_len == t && r.shape == shape && r.method == method)
}

fn simulation_trends() -> Outcome {
    let rows = experiment(vec![300, 1200], vec![Shape::A, Shape::B]);
    let mut notes = Vec::new();
    let mut pass = true;
    for shape in [Shape::A, Shape::B] {
        for method in [Method::Truncation, Method::Tikhonov] {
            let m300 = median(
                select(&rows, 300, shape, method)
                    .map(|r| r.delta_b)
                    .collect(),
            );
            let m1200 = median(
                select(&rows, 1200, shape, method)
                    .map(|r| r.delta_b)
                    .collect(),
            );
            pass &= m1200 < m300;
            notes.push(format!(
                "{}/{} median dB {m300:.3} -> {m1200:.3}",
                shape.name(),
                method.name()
            ));
        }
    }
    // shape B favours truncation, shape A favours Tikhonov
    for (shape, better, worse) in [
        (Shape::B, Method::Truncation, Method::Tikhonov),
        (Shape::A, Method::Tikhonov, Method::Truncation),
    ] {
        for t in [300, 1200] {
            let wins = select(&rows, t, shape, better)
                .zip(select(&rows, t, shape, worse))
                .filter(|(a, b)| {
                    assert_eq!(a.seed, b.seed);
                    a.delta_b <= b.delta_b
                })
                .count();
            pass &= wins >= 7;
            notes.push(format!(
                "shape {} T={t}: {} <= {} in {wins}/10",
                shape.name(),
                better.name(),
                worse.name()
            ));
        }
    }
    Outcome {
        pass,
        detail: notes.join("; "),
    }
}

fn oracle_gap() -> Outcome {
    let rows = experiment(vec![300], vec![Shape::B]);
    let oracle = median(
        select(&rows, 300, Shape::B, Method::Truncation)
            .map(|r| r.delta_pred_oracle)
            .collect(),
    );
    let mut pass = true;
    let mut notes = vec![format!("oracle median dpred {oracle:.4}")];
    for method in [Method::Truncation, Method::Tikhonov] {
        let est = median(
            select(&rows, 300, Shape::B, method)
                .map(|r| r.delta_pred)
                .collect(),
        );
        let ratio = est / oracle;
        pass &= (1.0..=6.0).contains(&ratio);
        notes.push(format!(
            "{} median dpred {est:.4}, ratio {ratio:.2}",
            method.name()
        ));
    }
    Outcome {
        pass,
        detail: notes.join("; "),
    }
}

// ---------------------------------------------------------------- 8

fn joint_degeneration() -> Outcome {
    let grid = SpatialGrid::new(51).unwrap();
    let fgrid = FrequencyGrid::new(512).unwrap();
    let sim = simulate(
        &SimConfig::new(Process::Far1, 600, 40, Scheme::Reg1, Shape::B, 1),
        &grid,
    )
    .unwrap();
    let other = simulate(
        &SimConfig::new(Process::Far1, 600, 40, Scheme::Reg1, Shape::B, 2),
        &grid,
    )
    .unwrap();
    let cfg = FitConfig {
        seed: 1,
        ..FitConfig::default()
    };
    let single = estimate(
        &sim.regressor,
        &sim.response,
        &grid,
        &fgrid,
        Method::Tikhonov,
        &cfg,
    )
    .unwrap();
    let rho = single.filters.regularization.parameter();
    let fixed = FitConfig {
        b_r: Choice::Fixed(single.regressor.b_r),
        b_v: Choice::Fixed(single.regressor.b_v),
        b_c: Choice::Fixed(single.response.b_c),
        param: Choice::Fixed(rho),
        max_lag: Some(single.filters.filters.max_lag()),
        ..cfg
    };
    // the second regressor is fully observed, as in the mixed sparse and dense model
    let curves: Vec<_> = (0..600)
        .map(|t| other.truth.curves.get(t).unwrap().clone())
        .collect();
    let dense = SecondRegressor::Dense(DenseFts::new(curves).unwrap());
    let sparse = SecondRegressor::Sparse(other.regressor.clone());
    let zero = FilterSet::zeros(grid.len(), 0);
    let scale = metric_delta_b(&single.filters.filters, &zero, &grid);
    let rel = |x2: &SecondRegressor| {
        // the second ridge sits at the same fraction of its own leading eigenvalue
        let probe = fit_joint(
            &sim.regressor,
            x2,
            &sim.response,
            &grid,
            &fgrid,
            Method::Tikhonov,
            &JointConfig::new(fixed.clone(), Choice::Fixed(rho)),
        )
        .unwrap();
        let rho2 =
            rho / single.regressor.eig.max_eigenvalue() * probe.spectra.eig2.max_eigenvalue();
        let joint = fit_joint(
            &sim.regressor,
            x2,
            &sim.response,
            &grid,
            &fgrid,
            Method::Tikhonov,
            &JointConfig::new(fixed.clone(), Choice::Fixed(rho2)),
        )
        .unwrap();
        (
            metric_delta_b(&joint.filters1, &single.filters.filters, &grid) / scale,
            joint,
        )
    };
    let (dist, joint) = rel(&dense);
    let (dist_sparse, _) = rel(&sparse);

    // with the coupling removed the joint transfers are the marginal ones
    let mut spectra = joint.spectra.clone();
    for m in spectra.f12.iter_mut() {
        m.fill(C64::new(0.0, 0.0));
    }
    let (r1, r2) = (
        spectra.eig1.max_eigenvalue() * 1e-2,
        spectra.eig2.max_eigenvalue() * 1e-2,
    );
    let mut block = 0.0f64;
    for (reg, m1, m2) in [
        (
            JointRegularization::Tikhonov { rho1: r1, rho2: r2 },
            Regularization::Tikhonov { rho: r1 },
            Regularization::Tikhonov { rho: r2 },
        ),
        (
            JointRegularization::Truncation {
                threshold1: r1,
                threshold2: r2,
            },
            Regularization::Truncation { threshold: r1 },
            Regularization::Truncation { threshold: r2 },
        ),
    ] {
        let jt = joint_transfer(&spectra, reg, &grid).unwrap();
        let t1 = regularized_transfer(&spectra.fz1, &spectra.eig1, &grid, m1).unwrap();
        let t2 = regularized_transfer(&spectra.fz2, &spectra.eig2, &grid, m2).unwrap();
        for (a, b) in jt
            .b1
            .iter()
            .zip(&t1.values)
            .chain(jt.b2.iter().zip(&t2.values))
        {
            let scale = b.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-12);
            block = block.max((a - b).iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale);
        }
    }
    let pass = dist <= 0.15 && block <= 1e-8;
    Outcome {
        pass,
        detail: format!(
            "relative filter distance {dist:.4} (root {:.4}; sparse second regressor {dist_sparse:.4}), uncoupled transfer max rel err {block:.1e}",
            dist.sqrt()
        ),
    }
}

// ---------------------------------------------------------------- 9

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sflr-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn determinism() -> Outcome {
    let dirs = [scratch("a"), scratch("b")];
    for dir in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_sflr"))
            .args(["reproduce", "--reduced", "--seed", "11", "--out"])
            .arg(dir)
            .status()
            .expect("run sflr");
        if !status.success() {
            return Outcome {
                pass: false,
                detail: format!("reproduce exited with {status}"),
            };
        }
    }
    let mut same = true;
    let mut rows = 0;
    for file in ["replications.csv", "metrics.json", "manifest.json"] {
        let a = std::fs::read(dirs[0].join(file)).unwrap();
        let b = std::fs::read(dirs[1].join(file)).unwrap();
        same &= a == b;
        if file == "replications.csv" {
            rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
        }
    }
    for dir in &dirs {
        let _ = std::fs::remove_dir_all(dir);
    }
    Outcome {
        pass: same,
        detail: format!(
            "{rows} replication rows, outputs {}",
            if same { "byte-identical" } else { "differ" }
        ),
    }
}
