//! Lyapunov functionals of the rescaled thin-film equation.
//!
//! For a density `v` of mass `M`:
//!
//! | symbol | definition |
//! |---|---|
//! | `alpha` | `(1/2) int x^2 v` |
//! | `beta` | `(1/2) int v_x^2` |
//! | `E` | `alpha + beta` |
//! | `H` | `int (x^2/2) v + 2 sqrt(2/3) v^{3/2}` |
//! | `D` | `int (x + sqrt(6) (sqrt v)_x)^2 v` |
//! | extra | `(sqrt(6)/24) int v^{-3/2} v_x^4` |
//! | `M_{2m}` | `int abs(x)^{2m} v` |
//!
//! Relative quantities subtract the value of the equal-mass Smyth-Hill
//! profile, always in closed form.
//!
//! Every functional has a grid form (centred differences and the trapezoid
//! rule) and a Lagrangian form on [`QuantileDensity`]. The Lagrangian surface
//! energy is the exact Dirichlet energy of the reconstruction used by
//! [`crate::density::quantile_to_grid`]: piecewise linear through the cell
//! values `(y_k, rho_k)` plus the two quadratic-contact tails. It is a sum of
//! terms that each depend on two neighbouring gaps, which keeps its Hessian
//! pentadiagonal in the positions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::density::{
    contact_offset_ratio, reconstruct, GridDensity, QuantileDensity, Reconstruction, SmythHill,
};
use crate::error::{invalid, Result};
use crate::numerics::{derivative, trapezoid_map};

/// Number of grid points used when a quantile state is reconstructed for
/// grid-based norms.
pub const DEFAULT_RECORD_GRID: usize = 4001;

/// `2 sqrt(2/3)`, the weight of `v^{3/2}` in the entropy.
pub fn entropy_weight() -> f64 {
    2.0 * (2.0f64 / 3.0).sqrt()
}

/// Coefficient `c` of the tail surface energy `c rho_0^2 / Delta_0`.
pub fn edge_surface_coefficient() -> f64 {
    (2.0 / 3.0) / (contact_offset_ratio() + 0.5)
}

/// Ratio between `int v^{1/2} ds` over a half cell of a quadratic-contact
/// tail and the same integral with the density frozen at the edge cell value.
pub fn edge_entropy_factor() -> f64 {
    0.75 * (1.5 * (3f64.cbrt() - 1.0)).sqrt()
}

/// Entropy dissipation and the extra term appearing next to it in the
/// discrete entropy inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dissipation {
    /// `int (x + sqrt(6) (sqrt v)_x)^2 v`.
    pub d: f64,
    /// `(sqrt(6)/24) int v^{-3/2} v_x^4`.
    pub extra: f64,
}

/// Functionals available on both density representations.
pub trait Functionals {
    /// Total mass.
    fn total_mass(&self) -> f64;
    /// `(1/2) int x^2 v`.
    fn alpha(&self) -> f64;
    /// `(1/2) int v_x^2`.
    fn beta(&self) -> f64;
    /// `int v^{3/2}`.
    fn three_halves(&self) -> f64;
    /// `int abs(x)^{2m} v` for `two_m = 2m`.
    fn moment(&self, two_m: u32) -> f64;
    /// `max v`.
    fn sup_norm(&self) -> f64;
    /// Dissipation with `(sqrt v)_x` and the extra fourth-power term.
    fn dissipation(&self) -> Dissipation;
    /// Dissipation with `v_x` in place of `(sqrt v)_x`, i.e.
    /// `int (x + sqrt(6) v_x)^2 v`.
    fn dissipation_literal(&self) -> f64;

    /// `E = alpha + beta`.
    fn energy(&self) -> f64 {
        self.alpha() + self.beta()
    }

    /// `H = alpha + 2 sqrt(2/3) int v^{3/2}`.
    fn entropy(&self) -> f64 {
        self.alpha() + entropy_weight() * self.three_halves()
    }
}

impl Functionals for GridDensity {
    fn total_mass(&self) -> f64 {
        self.mass()
    }

    fn alpha(&self) -> f64 {
        let (x0, dx) = (self.x_min(), self.dx());
        trapezoid_map(self.values(), dx, |i, v| {
            let x = x0 + i as f64 * dx;
            0.5 * x * x * v
        })
    }

    fn beta(&self) -> f64 {
        let vx = derivative(self.values(), self.dx());
        trapezoid_map(&vx, self.dx(), |_, d| 0.5 * d * d)
    }

    fn three_halves(&self) -> f64 {
        trapezoid_map(self.values(), self.dx(), |_, v| v * v.sqrt())
    }

    fn moment(&self, two_m: u32) -> f64 {
        let (x0, dx) = (self.x_min(), self.dx());
        trapezoid_map(self.values(), dx, |i, v| (x0 + i as f64 * dx).abs().powi(two_m as i32) * v)
    }

    fn sup_norm(&self) -> f64 {
        self.values().iter().copied().fold(0.0, f64::max)
    }

    fn dissipation(&self) -> Dissipation {
        let (x0, dx) = (self.x_min(), self.dx());
        let root: Vec<f64> = self.values().iter().map(|v| v.sqrt()).collect();
        let g = derivative(&root, dx);
        let s6 = 6f64.sqrt();
        let d = trapezoid_map(self.values(), dx, |i, v| {
            let r = x0 + i as f64 * dx + s6 * g[i];
            r * r * v
        });
        let extra = s6 / 24.0 * 16.0 * trapezoid_map(&root, dx, |i, r| r * g[i].powi(4));
        Dissipation { d, extra }
    }

    fn dissipation_literal(&self) -> f64 {
        let (x0, dx) = (self.x_min(), self.dx());
        let vx = derivative(self.values(), dx);
        let s6 = 6f64.sqrt();
        trapezoid_map(self.values(), dx, |i, v| {
            let r = x0 + i as f64 * dx + s6 * vx[i];
            r * r * v
        })
    }
}

/// Surface energy of one interior link between the cells of widths `a` and
/// `b`: `(1/2) (rho_b - rho_a)^2 / ((a + b)/2)` with `rho = h / width`.
pub(crate) fn link_energy(a: f64, b: f64, h: f64) -> f64 {
    let p = 1.0 / b - 1.0 / a;
    h * h * p * p / (a + b)
}

/// Value, gradient and Hessian of [`link_energy`] in `(a, b)`.
pub(crate) fn link_energy_jet(a: f64, b: f64, h: f64) -> (f64, [f64; 2], [[f64; 3]; 1]) {
    let h2 = h * h;
    let p = 1.0 / b - 1.0 / a;
    let s = a + b;
    let (pa, pb) = (1.0 / (a * a), -1.0 / (b * b));
    let (paa, pbb) = (-2.0 / (a * a * a), 2.0 / (b * b * b));
    let (s1, s2, s3) = (1.0 / s, 1.0 / (s * s), 1.0 / (s * s * s));
    let f = h2 * p * p * s1;
    let fa = h2 * (2.0 * p * pa * s1 - p * p * s2);
    let fb = h2 * (2.0 * p * pb * s1 - p * p * s2);
    let faa = h2 * (2.0 * pa * pa * s1 + 2.0 * p * paa * s1 - 4.0 * p * pa * s2 + 2.0 * p * p * s3);
    let fbb = h2 * (2.0 * pb * pb * s1 + 2.0 * p * pbb * s1 - 4.0 * p * pb * s2 + 2.0 * p * p * s3);
    let fab = h2 * (2.0 * pa * pb * s1 - 2.0 * p * pa * s2 - 2.0 * p * pb * s2 + 2.0 * p * p * s3);
    (f, [fa, fb], [[faa, fab, fbb]])
}

/// Tail surface energy `c rho^2 / Delta = c h^2 / Delta^3` with its first
/// two derivatives in `Delta`.
pub(crate) fn edge_energy_jet(delta: f64, h: f64) -> (f64, f64, f64) {
    let c = edge_surface_coefficient() * h * h;
    let d3 = delta * delta * delta;
    (c / d3, -3.0 * c / (d3 * delta), 12.0 * c / (d3 * delta * delta))
}

impl Functionals for QuantileDensity {
    fn total_mass(&self) -> f64 {
        self.mass()
    }

    fn alpha(&self) -> f64 {
        0.5 * self.cell_mass() * self.positions().iter().map(|x| x * x).sum::<f64>()
    }

    fn beta(&self) -> f64 {
        let h = self.cell_mass();
        let gaps = self.gaps();
        let m = gaps.len();
        let interior: f64 = gaps.windows(2).map(|w| link_energy(w[0], w[1], h)).sum();
        interior + edge_energy_jet(gaps[0], h).0 + edge_energy_jet(gaps[m - 1], h).0
    }

    fn three_halves(&self) -> f64 {
        let h = self.cell_mass();
        let rho = self.cell_densities();
        let m = rho.len();
        let interior: f64 = rho.iter().map(|r| r.sqrt()).sum::<f64>();
        h * interior + edge_entropy_factor() * 0.5 * h * (rho[0].sqrt() + rho[m - 1].sqrt())
    }

    fn moment(&self, two_m: u32) -> f64 {
        self.cell_mass() * self.positions().iter().map(|x| x.abs().powi(two_m as i32)).sum::<f64>()
    }

    fn sup_norm(&self) -> f64 {
        self.cell_densities().into_iter().fold(0.0, f64::max)
    }

    fn dissipation(&self) -> Dissipation {
        let h = self.cell_mass();
        let x = self.positions();
        let n = x.len();
        if n < 4 {
            return Dissipation { d: 0.0, extra: 0.0 };
        }
        let rho = self.cell_densities();
        let y = self.cell_centers();
        let s6 = 6f64.sqrt();
        let mut r2 = Vec::with_capacity(n - 2);
        let mut ex = Vec::with_capacity(n - 2);
        for i in 1..n - 1 {
            let g = (rho[i].sqrt() - rho[i - 1].sqrt()) / (y[i] - y[i - 1]);
            let r = x[i] + s6 * g;
            let v = 2.0 * h / (x[i + 1] - x[i - 1]);
            r2.push(r * r);
            ex.push(g.powi(4) / v.sqrt());
        }
        let sum_ends = |a: &[f64]| a.iter().sum::<f64>() + a[0] + a[a.len() - 1];
        Dissipation { d: h * sum_ends(&r2), extra: s6 / 24.0 * 16.0 * h * sum_ends(&ex) }
    }

    fn dissipation_literal(&self) -> f64 {
        let h = self.cell_mass();
        let x = self.positions();
        let n = x.len();
        if n < 4 {
            return 0.0;
        }
        let rho = self.cell_densities();
        let y = self.cell_centers();
        let s6 = 6f64.sqrt();
        let r2: Vec<f64> = (1..n - 1)
            .map(|i| {
                let r = x[i] + s6 * (rho[i] - rho[i - 1]) / (y[i] - y[i - 1]);
                r * r
            })
            .collect();
        h * (r2.iter().sum::<f64>() + r2[0] + r2[r2.len() - 1])
    }
}

/// `int (1 + abs(x)^{2m}) f^2 + int f_x^2` for samples `f` on the grid
/// `x_min + i dx`.
pub fn weighted_norm_sq_values(x_min: f64, dx: f64, f: &[f64], m: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&m) {
        return Err(invalid(format!("weight exponent m must lie in [0, 2], got {m}")));
    }
    if f.len() < 3 {
        return Err(invalid("weighted norm needs at least three samples"));
    }
    let fx = derivative(f, dx);
    let weighted = trapezoid_map(f, dx, |i, v| {
        let x = x_min + i as f64 * dx;
        (1.0 + x.abs().powf(2.0 * m)) * v * v
    });
    Ok(weighted + trapezoid_map(&fx, dx, |_, d| d * d))
}

/// `|||a - b|||^2_{m,1}` for two densities sampled on the same grid.
pub fn weighted_norm_sq(a: &GridDensity, b: &GridDensity, m: f64) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(invalid("weighted norm needs both densities on the same grid"));
    }
    let f: Vec<f64> = a.values().iter().zip(b.values()).map(|(p, q)| p - q).collect();
    weighted_norm_sq_values(a.x_min(), a.dx(), &f, m)
}

/// All functionals of one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct FunctionalRecord {
    /// Snapshot time.
    pub time: f64,
    /// Energy.
    pub E: f64,
    /// Entropy.
    pub H: f64,
    /// Half second moment.
    pub alpha: f64,
    /// Half Dirichlet energy.
    pub beta: f64,
    /// Entropy dissipation.
    pub D: f64,
    /// `(sqrt(6)/24) int v^{-3/2} v_x^4`.
    pub extra_dissipation: f64,
    /// Fourth moment.
    pub M4: f64,
    /// Maximum density.
    pub sup_v: f64,
    /// `E - E_inf`.
    pub E_rel: f64,
    /// `H - H_inf`.
    pub H_rel: f64,
    /// `alpha - alpha_inf`.
    pub alpha_rel: f64,
    /// `beta - beta_inf`.
    pub beta_rel: f64,
    /// `|||v - v_inf|||^2_{1,1}`.
    pub norm11_sq: f64,
    /// `|||v - v_inf|||^2_{p,1}` for each requested `p`, keyed by `p`.
    pub normp1_sq: Vec<(f64, f64)>,
    /// `int abs(v - v_inf)`.
    pub l1_dist: f64,
}

/// Options of [`record`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordOptions {
    /// Exponents `p` of the `|||.|||_{p,1}` norms to evaluate.
    pub p_values: Vec<f64>,
    /// Grid points of the reconstruction used for the norms of a quantile state.
    pub grid_points: usize,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self { p_values: vec![1.5], grid_points: DEFAULT_RECORD_GRID }
    }
}

/// Densities that can produce a [`FunctionalRecord`].
pub trait Recordable: Functionals {
    /// Samples of the density on a grid that also covers `[-c, c]`.
    fn grid_for_norms(&self, c: f64, points: usize) -> Result<GridDensity>;
}

impl Recordable for GridDensity {
    fn grid_for_norms(&self, c: f64, _points: usize) -> Result<GridDensity> {
        if self.x_min() > -c || self.x_max() < c {
            return Err(invalid(format!(
                "grid [{}, {}] does not cover the equilibrium support [-{c}, {c}]",
                self.x_min(),
                self.x_max()
            )));
        }
        Ok(self.clone())
    }
}

impl Recordable for QuantileDensity {
    fn grid_for_norms(&self, c: f64, points: usize) -> Result<GridDensity> {
        Ok(reconstruct(self, Some((-c, c)), points, Reconstruction::ContactTail)?.0)
    }
}

/// Evaluates every functional of `v` at time `time` relative to `smyth`.
///
/// ```
/// use thinfilm::{record, smyth_hill, RecordOptions};
/// let sh = smyth_hill(2.0 / 45.0).unwrap();
/// let q = sh.quantiles(400).unwrap().translated(0.2).unwrap();
/// let r = record(&q, 0.0, &sh, &RecordOptions::default()).unwrap();
/// assert!(r.H_rel > 0.0 && r.E_rel > 0.0);
/// assert!((r.E_rel - (r.alpha_rel + r.beta_rel)).abs() <= 1e-12 * r.E_rel.abs());
/// ```
pub fn record<V: Recordable>(v: &V, time: f64, smyth: &SmythHill, opts: &RecordOptions) -> Result<FunctionalRecord> {
    let m = v.total_mass();
    if (m - smyth.mass()).abs() > 1e-8 * smyth.mass() {
        return Err(invalid(format!("density mass {m} differs from equilibrium mass {}", smyth.mass())));
    }
    let alpha = v.alpha();
    let beta = v.beta();
    let h = v.entropy();
    let dis = v.dissipation();
    let c = smyth.support_radius();
    let grid = v.grid_for_norms(c, opts.grid_points)?;
    let f: Vec<f64> = grid
        .values()
        .iter()
        .enumerate()
        .map(|(i, val)| val - smyth.value(grid.x(i)))
        .collect();
    let norm11_sq = weighted_norm_sq_values(grid.x_min(), grid.dx(), &f, 1.0)?;
    let normp1_sq = opts
        .p_values
        .iter()
        .map(|&p| Ok((p, weighted_norm_sq_values(grid.x_min(), grid.dx(), &f, p)?)))
        .collect::<Result<Vec<_>>>()?;
    let l1_dist = trapezoid_map(&f, grid.dx(), |_, d| d.abs());
    let alpha_rel = alpha - smyth.alpha();
    let beta_rel = beta - smyth.beta();
    Ok(FunctionalRecord {
        time,
        E: alpha + beta,
        H: h,
        alpha,
        beta,
        D: dis.d,
        extra_dissipation: dis.extra,
        M4: v.moment(4),
        sup_v: v.sup_norm(),
        E_rel: alpha_rel + beta_rel,
        H_rel: h - smyth.entropy(),
        alpha_rel,
        beta_rel,
        norm11_sq,
        normp1_sq,
        l1_dist,
    })
}

impl FunctionalRecord {
    /// Fixed leading CSV columns; one `normp1_sq@p` column per `p` follows.
    pub const FIXED_COLUMNS: [&'static str; 15] = [
        "time",
        "E",
        "H",
        "alpha",
        "beta",
        "D",
        "extra_dissipation",
        "M4",
        "sup_v",
        "E_rel",
        "H_rel",
        "alpha_rel",
        "beta_rel",
        "norm11_sq",
        "l1_dist",
    ];

    /// CSV header for records carrying the given `p` values.
    pub fn csv_header(p_values: &[f64]) -> Vec<String> {
        let mut h: Vec<String> = Self::FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        h.extend(p_values.iter().map(|p| format!("normp1_sq@{p}")));
        h
    }

    /// CSV fields in the order of [`FunctionalRecord::csv_header`].
    pub fn csv_row(&self) -> Vec<String> {
        let mut row: Vec<String> = [
            self.time,
            self.E,
            self.H,
            self.alpha,
            self.beta,
            self.D,
            self.extra_dissipation,
            self.M4,
            self.sup_v,
            self.E_rel,
            self.H_rel,
            self.alpha_rel,
            self.beta_rel,
            self.norm11_sq,
            self.l1_dist,
        ]
        .iter()
        .map(|v| v.to_string())
        .collect();
        row.extend(self.normp1_sq.iter().map(|(_, v)| v.to_string()));
        row
    }

    /// Parses a row written by [`FunctionalRecord::csv_row`] given its header.
    pub fn from_csv_row(header: &[String], row: &[String]) -> std::result::Result<Self, String> {
        if header.len() != row.len() || header.len() < 15 {
            return Err(format!("expected {} fields, found {}", header.len(), row.len()));
        }
        for (i, name) in Self::FIXED_COLUMNS.iter().enumerate() {
            if header[i] != *name {
                return Err(format!("column {i} should be {name}, found {}", header[i]));
            }
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"));
        let v: Vec<f64> = row.iter().map(|s| parse(s)).collect::<std::result::Result<_, _>>()?;
        let mut normp1_sq = Vec::new();
        for (name, val) in header[15..].iter().zip(&v[15..]) {
            let p = name
                .strip_prefix("normp1_sq@")
                .ok_or_else(|| format!("unexpected column {name}"))
                .and_then(|p| parse(p))?;
            normp1_sq.push((p, *val));
        }
        Ok(Self {
            time: v[0],
            E: v[1],
            H: v[2],
            alpha: v[3],
            beta: v[4],
            D: v[5],
            extra_dissipation: v[6],
            M4: v[7],
            sup_v: v[8],
            E_rel: v[9],
            H_rel: v[10],
            alpha_rel: v[11],
            beta_rel: v[12],
            norm11_sq: v[13],
            l1_dist: v[14],
            normp1_sq,
        })
    }

    /// `|||v - v_inf|||^2_{p,1}` for a recorded `p`.
    pub fn normp1(&self, p: f64) -> Option<f64> {
        self.normp1_sq.iter().find(|(q, _)| (q - p).abs() < 1e-12).map(|(_, v)| *v)
    }

    /// Named scalar fields, handy for JSON dumps and series extraction.
    pub fn scalars(&self) -> BTreeMap<String, f64> {
        Self::csv_header(&self.normp1_sq.iter().map(|(p, _)| *p).collect::<Vec<_>>())
            .into_iter()
            .zip(self.csv_row().iter().map(|s| s.parse::<f64>().unwrap_or(f64::NAN)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(f64, f64) -> f64, a: f64, b: f64, grad: [f64; 2], hess: [f64; 3]) {
        let e = 1e-6 * a.min(b);
        let ga = (f(a + e, b) - f(a - e, b)) / (2.0 * e);
        let gb = (f(a, b + e) - f(a, b - e)) / (2.0 * e);
        let floor = 1e-10;
        assert!((ga - grad[0]).abs() <= 1e-6 * grad[0].abs() + floor, "{ga} {}", grad[0]);
        assert!((gb - grad[1]).abs() <= 1e-6 * grad[1].abs() + floor, "{gb} {}", grad[1]);
        let e = 1e-4 * a.min(b);
        let haa = (f(a + e, b) - 2.0 * f(a, b) + f(a - e, b)) / (e * e);
        let hab = (f(a + e, b + e) - f(a + e, b - e) - f(a - e, b + e) + f(a - e, b - e)) / (4.0 * e * e);
        let hbb = (f(a, b + e) - 2.0 * f(a, b) + f(a, b - e)) / (e * e);
        for (num, exact) in [(haa, hess[0]), (hab, hess[1]), (hbb, hess[2])] {
            assert!((num - exact).abs() <= 1e-3 * exact.abs().max(1e-3 * hess[0].abs()), "{num} {exact}");
        }
    }

    #[test]
    fn link_energy_derivatives_match_finite_differences() {
        let h = 0.01;
        for &(a, b) in &[(0.1, 0.13), (0.05, 0.02), (0.3, 0.3)] {
            let (f, g, hs) = link_energy_jet(a, b, h);
            assert!((f - link_energy(a, b, h)).abs() < 1e-18);
            fd_check(|a, b| link_energy(a, b, h), a, b, g, hs[0]);
        }
    }

    #[test]
    fn edge_energy_derivatives() {
        let (f, g, hh) = edge_energy_jet(0.2, 0.01);
        let e = 1e-6;
        let fp = edge_energy_jet(0.2 + e, 0.01).0;
        let fm = edge_energy_jet(0.2 - e, 0.01).0;
        assert!(((fp - fm) / (2.0 * e) - g).abs() < 1e-6 * g.abs());
        assert!(((fp - 2.0 * f + fm) / (e * e) - hh).abs() < 1e-3 * hh.abs());
    }

    #[test]
    fn edge_coefficients_from_quadratic_contact() {
        assert!((edge_surface_coefficient() - 0.241447).abs() < 1e-5);
        assert!((edge_entropy_factor() - 0.61085).abs() < 1e-4);
    }
}
