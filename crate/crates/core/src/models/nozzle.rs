//! Steady Burgers flow in a dual-throat nozzle with a random shock position.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

pub const LOFI_GRID: usize = 52;
pub const HIFI_GRID: usize = 1048;
pub const MIN_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NozzleSample {
    pub xi: f64,
    pub delta: f64,
    pub field: Vector<f64>,
    pub shock_x: f64,
}

impl NozzleSample {
    pub fn from_xi(xi: f64, n_grid: usize) -> Result<Self> {
        let delta = nozzle_delta(xi);
        Ok(Self {
            xi,
            delta,
            field: nozzle_field(delta, n_grid)?,
            shock_x: nozzle_shock_position(delta)?,
        })
    }
}

/// Maps a standard-normal draw into (−1, 1).
pub fn nozzle_delta(xi: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    (-1.0 + (1.0 + 4.0 * xi * xi).sqrt()) / (2.0 * xi)
}

pub fn nozzle_shock_position(delta: f64) -> Result<f64> {
    if !(delta.abs() < 1.0) {
        return Err(Error::NoShock);
    }
    let a = (1.0 - delta * delta).sqrt().asin();
    Ok(if delta <= 0.0 { a } else { PI - a })
}

/// `n` uniformly spaced points over `[0, π]`, endpoints included.
pub fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { PI } else { PI * i as f64 / (n - 1) as f64 }).collect()
}

/// Steady field on an `n_grid` point grid; points with `x ≤ X_s` take the pre-shock branch.
pub fn nozzle_field(delta: f64, n_grid: usize) -> Result<Vector<f64>> {
    if n_grid < MIN_GRID {
        return Err(Error::config(format!("nozzle grid needs at least {MIN_GRID} points, got {n_grid}")));
    }
    let xs = nozzle_shock_position(delta)?;
    let x = grid(n_grid);
    Ok(x.iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == 0 || i + 1 == n_grid {
                0.0
            } else if x <= xs {
                x.sin()
            } else {
                -x.sin()
            }
        })
        .collect())
}

/// Shock location from samples `u` at increasing stations `x` in `[0, π]`.
///
/// Among interior positive-to-nonpositive transitions, the one that best fits
/// the steady profile `+sin x | −sin x` is taken: splitting after sample `i`
/// leaves a squared misfit that falls as `Σ_{j≤i} u_j sin x_j` grows. The zero
/// crossing inside that transition is found by linear interpolation.
pub fn shock_from_samples(x: &[f64], u: &[f64]) -> Result<f64> {
    if x.len() != u.len() {
        return Err(Error::dim("shock samples", x.len(), u.len()));
    }
    let n = u.len();
    let mut prefix = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n.saturating_sub(2) {
        prefix += u[i] * x[i].sin();
        if i >= 1 && u[i] > 0.0 && u[i + 1] <= 0.0 && best.is_none_or(|(_, p)| prefix > p) {
            best = Some((i, prefix));
        }
    }
    let (i, _) = best.ok_or(Error::NoShock)?;
    Ok(x[i] + (x[i + 1] - x[i]) * u[i] / (u[i] - u[i + 1]))
}

/// Shock location from a field sampled on [`grid`].
pub fn nozzle_shock_from_field(field: &[f64]) -> Result<f64> {
    shock_from_samples(&grid(field.len()), field)
}

/// Linear interpolation of a uniform-grid field onto another uniform grid over `[0, π]`.
pub fn resample(field: &[f64], n_out: usize) -> Vector<f64> {
    let n = field.len();
    let h_in = PI / (n - 1) as f64;
    grid(n_out)
        .iter()
        .map(|&x| {
            let s = x / h_in;
            let i = (s.floor() as usize).min(n - 2);
            let t = s - i as f64;
            field[i] * (1.0 - t) + field[i + 1] * t
        })
        .collect()
}

/// Result of marching the unsteady problem to steady state.
#[derive(Debug, Clone)]
pub struct MarchedSolution {
    pub centers: Vec<f64>,
    pub u: Vec<f64>,
    pub steps: usize,
    pub residual: f64,
}

impl MarchedSolution {
    /// Value at `x`, linear between cell centres and zero at the walls.
    pub fn sample(&self, x: f64) -> f64 {
        let n = self.u.len();
        let dx = PI / n as f64;
        let s = x / dx - 0.5;
        if s <= 0.0 {
            return self.u[0] * (x / (0.5 * dx)).max(0.0);
        }
        if s >= (n - 1) as f64 {
            return self.u[n - 1] * ((PI - x) / (0.5 * dx)).max(0.0);
        }
        let i = s.floor() as usize;
        let t = s - i as f64;
        self.u[i] * (1.0 - t) + self.u[i + 1] * t
    }

    pub fn shock_position(&self) -> Result<f64> {
        shock_from_samples(&self.centers, &self.u)
    }
}

/// Godunov flux for `u²/2`.
fn godunov(ul: f64, ur: f64) -> f64 {
    let l = ul.max(0.0);
    let r = ur.min(0.0);
    (0.5 * l * l).max(0.5 * r * r)
}

/// First-order finite-volume march of `u_t + (u²/2)_x = sin x cos x` from `u₀ = δ sin x`.
///
/// Walls carry zero flux, so `∫u` is conserved and the steady shock settles
/// where the analytic solution puts it. Stops when `max|Δu|/Δt < tol`.
pub fn burgers_march(delta: f64, cells: usize, tol: f64, max_steps: usize) -> Result<MarchedSolution> {
    if cells < MIN_GRID {
        return Err(Error::config(format!("need at least {MIN_GRID} cells, got {cells}")));
    }
    let dx = PI / cells as f64;
    let centers: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * dx).collect();
    let source: Vec<f64> = (0..cells)
        .map(|i| {
            let (a, b) = (i as f64 * dx, (i + 1) as f64 * dx);
            (b.sin().powi(2) - a.sin().powi(2)) / (2.0 * dx)
        })
        .collect();
    let mut u: Vec<f64> = centers.iter().map(|x| delta * x.sin()).collect();
    let mut flux = vec![0.0; cells + 1];
    let mut residual = f64::INFINITY;
    for step in 1..=max_steps {
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let dt = 0.9 * dx / umax;
        for i in 1..cells {
            flux[i] = godunov(u[i - 1], u[i]);
        }
        residual = 0.0;
        for i in 0..cells {
            let rate = -(flux[i + 1] - flux[i]) / dx + source[i];
            u[i] += dt * rate;
            residual = residual.max(rate.abs());
        }
        if residual < tol {
            return Ok(MarchedSolution { centers, u, steps: step, residual });
        }
    }
    Err(Error::Divergence {
        iteration: max_steps,
        reason: format!("steady residual {residual:.3e} above {tol:.1e}"),
    })
}
