//! Consistency checks of JKO output against the PDE: the per-step
//! Euler-Lagrange equation and the space-time weak form.

use serde::{Deserialize, Serialize};

use super::JkoTrajectory;
use crate::density::{grid_window, quantile_to_grid, QuantileDensity, Reconstruction};
use crate::error::{invalid, Result};
use crate::numerics::{derivative, third_divided_difference, trapezoid_map};

/// Which form of the optimality condition [`el_residual`] tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElForm {
    /// `(X_prev - X) / tau = x - v_xxx`, the first variation of `E` plus
    /// the transport term.
    #[default]
    Corrected,
    /// `(X_prev - X) / tau = x v - v v_xxx`.
    AsPrinted,
}

/// Relative `L^2(v dx)` mismatch between the discrete transport velocity
/// `(X_prev - X_next) / tau` and the velocity demanded by the optimality
/// condition, over the interior 80% of the mass.
///
/// `v_xxx` is evaluated in `x`: it is six times the third divided
/// difference of the cell values `(y_k, rho_k)` on the four cells around
/// each particle. The mismatch is divided by the sum of the norms of the two
/// terms of the right-hand side, so it is dimensionless and vanishes at
/// equilibrium up to stencil error.
pub fn el_residual(next: &QuantileDensity, prev: &QuantileDensity, tau: f64, form: ElForm) -> f64 {
    let n = next.n();
    if n < 6 || prev.n() != n {
        return f64::NAN;
    }
    let h = next.cell_mass();
    let m = next.mass();
    let x = next.positions();
    let p = prev.positions();
    let rho = next.cell_densities();
    let y = next.cell_centers();
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for i in 2..n - 2 {
        let s = next.fraction(i);
        if s < 0.1 * m || s > 0.9 * m {
            continue;
        }
        let vxxx = third_divided_difference(
            [y[i - 2], y[i - 1], y[i], y[i + 1]],
            [rho[i - 2], rho[i - 1], rho[i], rho[i + 1]],
        );
        let lhs = (p[i] - x[i]) / tau;
        let (a, b) = match form {
            ElForm::Corrected => (x[i], vxxx),
            ElForm::AsPrinted => {
                let v = 2.0 * h / (x[i + 1] - x[i - 1]);
                (v * x[i], v * vxxx)
            }
        };
        let r = lhs - (a - b);
        num += h * r * r;
        da += h * a * a;
        db += h * b * b;
    }
    let den = da.sqrt() + db.sqrt();
    if den > 0.0 {
        num.sqrt() / den
    } else {
        0.0
    }
}

/// Which weak formulation [`weak_form_residual`] integrates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeakForm {
    /// `-v z_t + x v z_x - (3/2) v_x^2 z_xx - v v_x z_xxx`, obtained from
    /// `v_t = (x v - v v_xxx)_x` by integrating by parts.
    #[default]
    Corrected,
    /// `-v z_t - 3 v_x^2 z_xx - 2 v v_x z_xxx`.
    AsPrinted,
}

/// Test function `phi((x - xc)/wx) phi((t - tc)/wt)` with the smooth bump
/// `phi(r) = exp(-1/(1 - r^2))` on `abs(r) < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpTestFunction {
    /// Centre in space.
    pub x_center: f64,
    /// Half width in space.
    pub x_width: f64,
    /// Centre in time.
    pub t_center: f64,
    /// Half width in time.
    pub t_width: f64,
}

/// Bump `phi(r)` and its first three derivatives.
fn bump(r: f64) -> [f64; 4] {
    if r.abs() >= 1.0 {
        return [0.0; 4];
    }
    let q = 1.0 - r * r;
    let phi = (-1.0 / q).exp();
    let g1 = -2.0 * r / (q * q);
    let g2 = -2.0 / (q * q) - 8.0 * r * r / (q * q * q);
    let g3 = -24.0 * r / (q * q * q) - 48.0 * r * r * r / (q * q * q * q);
    [phi, g1 * phi, (g2 + g1 * g1) * phi, (g3 + 3.0 * g1 * g2 + g1 * g1 * g1) * phi]
}

impl BumpTestFunction {
    /// `[z, z_t, z_x, z_xx, z_xxx]` at `(x, t)`.
    pub fn eval(&self, x: f64, t: f64) -> [f64; 5] {
        let bx = bump((x - self.x_center) / self.x_width);
        let bt = bump((t - self.t_center) / self.t_width);
        let wx = self.x_width;
        [
            bx[0] * bt[0],
            bx[0] * bt[1] / self.t_width,
            bx[1] * bt[0] / wx,
            bx[2] * bt[0] / (wx * wx),
            bx[3] * bt[0] / (wx * wx * wx),
        ]
    }

    /// `sup abs(z) = e^{-2}`.
    pub fn sup(&self) -> f64 {
        (-2.0f64).exp()
    }

    /// Area of the space-time support.
    pub fn volume(&self) -> f64 {
        4.0 * self.x_width * self.t_width
    }
}

/// Three bumps in space (left flank, centre, right flank of the initial
/// support) times one bump covering the middle 80% of the time span.
pub fn default_test_functions(traj: &JkoTrajectory) -> Vec<BumpTestFunction> {
    let t_end = traj.last().time;
    let (lo, hi) = traj.snapshots[0].state.support();
    let c = 0.5 * (lo + hi);
    let w = 0.5 * (hi - lo);
    [-0.5, 0.0, 0.5]
        .iter()
        .map(|&k| BumpTestFunction { x_center: c + k * w, x_width: 0.6 * w, t_center: 0.5 * t_end, t_width: 0.4 * t_end })
        .collect()
}

/// Space-time quadrature of the weak form over the trajectory, one value
/// per test function, divided by `sup abs(z)` and the support area.
///
/// Each snapshot is reconstructed on a common grid with `grid_points`
/// points; the time integral uses the trapezoid rule over the snapshots.
pub fn weak_form_residual(
    traj: &JkoTrajectory,
    tests: &[BumpTestFunction],
    form: WeakForm,
    grid_points: usize,
) -> Result<Vec<f64>> {
    if traj.snapshots.len() < 10 {
        return Err(invalid("weak-form residual needs at least 10 snapshots"));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &traj.snapshots {
        let (a, b) = s.state.support();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let (x_min, dx) = grid_window(lo, hi, grid_points)?;
    let xs: Vec<f64> = (0..grid_points).map(|i| x_min + i as f64 * dx).collect();
    let mut per_time = vec![Vec::with_capacity(traj.snapshots.len()); tests.len()];
    let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
    for s in &traj.snapshots {
        let (g, _) = quantile_to_grid(&s.state, x_min, dx, grid_points, Reconstruction::ContactTail)?;
        let v = g.values();
        let vx = derivative(v, dx);
        for (k, z) in tests.iter().enumerate() {
            let val = trapezoid_map(v, dx, |i, vi| {
                let x = xs[i];
                let [_, zt, zx, zxx, zxxx] = z.eval(x, s.time);
                match form {
                    WeakForm::Corrected => -vi * zt + x * vi * zx - 1.5 * vx[i] * vx[i] * zxx - vi * vx[i] * zxxx,
                    WeakForm::AsPrinted => -vi * zt - 3.0 * vx[i] * vx[i] * zxx - 2.0 * vi * vx[i] * zxxx,
                }
            });
            per_time[k].push(val);
        }
    }
    Ok(tests
        .iter()
        .zip(per_time)
        .map(|(z, series)| {
            let mut acc = 0.0;
            for j in 1..times.len() {
                acc += 0.5 * (times[j] - times[j - 1]) * (series[j] + series[j - 1]);
            }
            acc.abs() / (z.sup() * z.volume())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let e = 1e-5;
        for &r in &[-0.7, -0.2, 0.0, 0.3, 0.8] {
            let b = bump(r);
            let p = bump(r + e);
            let m = bump(r - e);
            for k in 0..3 {
                let num = (p[k] - m[k]) / (2.0 * e);
                assert!((num - b[k + 1]).abs() < 1e-6 * (1.0 + b[k + 1].abs()), "r={r} k={k}: {num} vs {}", b[k + 1]);
            }
        }
    }
}
