//! Small weighted least-squares solves shared by the local-polynomial smoothers.

use crate::grid::SpatialGrid;
use crate::kernel::epanechnikov;
use crate::SparseFts;

/// Pivot threshold on the unit-diagonal scaled normal matrix.
const PIVOT_TOL: f64 = 1e-10;

/// Intercept weights `g` of a local polynomial fit with symmetric normal matrix `a`
/// (row-major, `n × n`, `n ≤ 3`): the intercept is `g · rhs`.
///
/// Tries each leading block size in `chain` in order and returns `None` when the
/// window carries no weight at all.
pub(crate) fn intercept_weights(a: &[[f64; 3]; 3], chain: &[usize]) -> Option<[f64; 3]> {
    if !(a[0][0] > 0.0) {
        return None;
    }
    'sizes: for &m in chain {
        let mut d = [0.0; 3];
        for i in 0..m {
            if !(a[i][i] > 0.0) {
                continue 'sizes;
            }
            d[i] = 1.0 / a[i][i].sqrt();
        }
        let mut l = [[0.0; 3]; 3];
        for i in 0..m {
            for j in 0..=i {
                let mut s = a[i][j] * d[i] * d[j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s < PIVOT_TOL {
                        continue 'sizes;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        // C z = d0 e0, then g = D z
        let mut z = [0.0; 3];
        for i in 0..m {
            let mut s = if i == 0 { d[0] } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * z[k];
            }
            z[i] = s / l[i][i];
        }
        for i in (0..m).rev() {
            let mut s = z[i];
            for k in i + 1..m {
                s -= l[k][i] * z[k];
            }
            z[i] = s / l[i][i];
        }
        let mut g = [0.0; 3];
        for i in 0..m {
            g[i] = d[i] * z[i];
        }
        return Some(g);
    }
    None
}

/// Kernel evaluations of every observation against the grid points in its window.
///
/// Entry values are `K((x_obs - x_i)/B)` and offsets `d = x_obs - x_i`.
pub(crate) struct ObsKernel {
    /// `(grid index, kernel, offset)` per entry
    pub entries: Vec<(u32, f64, f64)>,
    /// entry range per observation, in time-major order
    pub obs_start: Vec<usize>,
    /// first observation of each time point
    pub time_start: Vec<usize>,
}

impl ObsKernel {
    pub fn new(data: &SparseFts, grid: &SpatialGrid, bandwidth: f64) -> Self {
        let mut entries = Vec::new();
        let mut obs_start = vec![0];
        let mut time_start = vec![0];
        for c in data.curves() {
            for o in c {
                for i in grid.window(o.x, bandwidth) {
                    let d = o.x - grid.point(i);
                    let k = epanechnikov(d / bandwidth);
                    if k > 0.0 {
                        entries.push((i as u32, k, d));
                    }
                }
                obs_start.push(entries.len());
            }
            time_start.push(obs_start.len() - 1);
        }
        Self {
            entries,
            obs_start,
            time_start,
        }
    }

    /// Observation indices belonging to time `t`.
    pub fn obs_of(&self, t: usize) -> std::ops::Range<usize> {
        self.time_start[t]..self.time_start[t + 1]
    }

    pub fn entries_of(&self, obs: usize) -> &[(u32, f64, f64)] {
        &self.entries[self.obs_start[obs]..self.obs_start[obs + 1]]
    }
}
