//! Direct finite-difference integration of `v_t = (x v - v v_xxx)_x` on
//! strictly positive data, used to cross-validate the JKO scheme over
//! short horizons.
//!
//! Grid values are cell averages on cells of width `dx` centred at the grid
//! points. The flux through the face between cells `i` and `i + 1` is
//!
//! ```text
//! F_{i+1/2} = x_{i+1/2} v_{i+1/2} - v_{i+1/2} (v_{i+2} - 3 v_{i+1} + 3 v_i - v_{i-1}) / dx^3
//! ```
//!
//! with `v_{i+1/2}` the average of the two neighbours in the fourth-order
//! term and the upwind value in the drift term, and
//! `v_i <- v_i + (dt/dx) (F_{i+1/2} - F_{i-1/2})`. The two boundary faces
//! carry no flux and the stencil is closed by even reflection across them,
//! so `sum_i v_i dx` is conserved up to rounding.

use serde::{Deserialize, Serialize};

use crate::density::{grid_to_quantile, quantile_to_grid, GridDensity, QuantileDensity, Reconstruction, SmythHill};
use crate::error::{invalid, Error, Result};
use crate::functionals::Functionals;
use crate::jko::{run_from_quantiles, JkoConfig};
use crate::numerics::trapezoid_map;

/// Time discretization of [`integrate`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdmScheme {
    /// Forward Euler on the full flux.
    #[default]
    ExplicitEuler,
    /// Fourth-order term implicit with the mobility `v` frozen at the old
    /// step; drift explicit. One pentadiagonal solve per step.
    SemiImplicit,
}

/// Settings of [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdmConfig {
    /// Time step.
    pub dt: f64,
    /// Time discretization.
    pub scheme: FdmScheme,
    /// Integration aborts when `min v` drops below this value.
    pub positivity_floor: f64,
    /// Largest admissible `dt / dx^4` for the explicit scheme.
    pub cfl: f64,
}

/// Default `dt / dx^4` bound of the explicit scheme.
pub const DEFAULT_CFL: f64 = 0.1;

/// Default positivity floor.
pub const DEFAULT_POSITIVITY_FLOOR: f64 = 1e-12;

impl FdmConfig {
    /// Explicit scheme with the largest step allowed by [`DEFAULT_CFL`].
    pub fn explicit_for(dx: f64) -> Self {
        Self {
            dt: DEFAULT_CFL * dx.powi(4),
            scheme: FdmScheme::ExplicitEuler,
            positivity_floor: DEFAULT_POSITIVITY_FLOOR,
            cfl: DEFAULT_CFL,
        }
    }

    /// Checks the settings against the grid spacing `dx`.
    pub fn validate(&self, dx: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.positivity_floor > 0.0) {
            return Err(invalid("positivity floor must be positive"));
        }
        if self.scheme == FdmScheme::ExplicitEuler && self.dt > self.cfl * dx.powi(4) * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "explicit step dt={} exceeds cfl * dx^4 = {} (dx={dx})",
                self.dt,
                self.cfl * dx.powi(4)
            )));
        }
        Ok(())
    }
}

/// Discrete mass `sum_i v_i dx`, the quantity the scheme conserves.
pub fn cell_mass(v: &GridDensity) -> f64 {
    v.values().iter().sum::<f64>() * v.dx()
}

fn reflected(v: &[f64], i: isize) -> f64 {
    let n = v.len() as isize;
    let j = if i < 0 {
        -1 - i
    } else if i >= n {
        2 * n - 1 - i
    } else {
        i
    };
    v[j as usize]
}

fn third_difference(v: &[f64], i: usize, dx: f64) -> f64 {
    let i = i as isize;
    (reflected(v, i + 2) - 3.0 * reflected(v, i + 1) + 3.0 * reflected(v, i) - reflected(v, i - 1)) / (dx * dx * dx)
}

/// `v_xxx` at the interior faces `x_{i+1/2}`, `i = 1, ..., n - 3`, from
/// the four-point stencil of the flux; exact for quartic `v` up to
/// rounding. Returns `(x_{i+1/2}, v_xxx)` pairs.
///
/// ```
/// use thinfilm::fdm::face_third_derivative;
/// use thinfilm::SmythHill;
/// let sh = SmythHill::with_radius(1.0).unwrap();
/// let v = sh.sample(-0.9, 0.01, 181).unwrap();
/// for (x, d3) in face_third_derivative(&v) {
///     assert!((d3 - x).abs() < 1e-8);
/// }
/// ```
pub fn face_third_derivative(v: &GridDensity) -> Vec<(f64, f64)> {
    let (vals, dx) = (v.values(), v.dx());
    (1..vals.len().saturating_sub(2))
        .map(|i| (v.x(i) + 0.5 * dx, third_difference(vals, i, dx)))
        .collect()
}

/// Upwind drift flux `x v` through a face at `xf`: the drift transports
/// mass towards the origin, so the face takes the value of the cell farther
/// from it. A centred average keeps draining a nearly empty cell at the rate
/// of its neighbour and loses positivity near the walls.
fn drift_flux(xf: f64, left: f64, right: f64) -> f64 {
    if xf >= 0.0 {
        xf * right
    } else {
        xf * left
    }
}

/// Face fluxes `F_{i+1/2}`, `i = 0..n-2`.
fn fluxes(v: &[f64], x_min: f64, dx: f64) -> Vec<f64> {
    (0..v.len() - 1)
        .map(|i| {
            let xf = x_min + (i as f64 + 0.5) * dx;
            let vf = 0.5 * (v[i] + v[i + 1]);
            drift_flux(xf, v[i], v[i + 1]) - vf * third_difference(v, i, dx)
        })
        .collect()
}

fn explicit_step(v: &mut [f64], x_min: f64, dx: f64, dt: f64) {
    let f = fluxes(v, x_min, dx);
    let n = v.len();
    let r = dt / dx;
    for i in 0..n {
        let right = if i + 1 < n { f[i] } else { 0.0 };
        let left = if i > 0 { f[i - 1] } else { 0.0 };
        v[i] += r * (right - left);
    }
}

/// Solves the banded system with lower and upper bandwidth 2 stored as
/// `rows[i][k] = A[i][i + k - 2]`, by elimination without pivoting.
fn solve_banded(mut rows: Vec<[f64; 5]>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = rows.len();
    for i in 0..n {
        let piv = rows[i][2];
        if !(piv.abs() > 0.0) || !piv.is_finite() {
            return Err(Error::OracleAbort(format!("singular semi-implicit system at row {i}")));
        }
        for d in 1..=2 {
            if i + d >= n {
                break;
            }
            let m = rows[i + d][2 - d] / piv;
            if m == 0.0 {
                continue;
            }
            for k in 0..=2 {
                if i + k < n {
                    let row_i = rows[i][2 + k];
                    rows[i + d][2 - d + k] -= m * row_i;
                }
            }
            b[i + d] -= m * b[i];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in 1..=2 {
            if i + k < n {
                s -= rows[i][2 + k] * x[i + k];
            }
        }
        x[i] = s / rows[i][2];
    }
    Ok(x)
}

fn semi_implicit_step(v: &mut Vec<f64>, x_min: f64, dx: f64, dt: f64) -> Result<()> {
    let n = v.len();
    let r = dt / dx;
    let d3 = dx * dx * dx;
    // Row i of the operator u -> (F_{i+1/2}(u) - F_{i-1/2}(u)) restricted
    // to the fourth-order part, with mobility frozen at the old state.
    let mut rows = vec![[0.0f64; 5]; n];
    let mut rhs = v.clone();
    let add = |rows: &mut Vec<[f64; 5]>, i: usize, j: isize, val: f64| {
        let n = n as isize;
        let j = if j < 0 {
            -1 - j
        } else if j >= n {
            2 * n - 1 - j
        } else {
            j
        } as usize;
        rows[i][j + 2 - i] += val;
    };
    for i in 0..n {
        rows[i][2] += 1.0;
    }
    for face in 0..n - 1 {
        let mob = 0.5 * (v[face] + v[face + 1]);
        let xf = x_min + (face as f64 + 0.5) * dx;
        let drift = drift_flux(xf, v[face], v[face + 1]);
        let f = face as isize;
        // F = drift - mob * (u_{f+2} - 3 u_{f+1} + 3 u_f - u_{f-1}) / dx^3;
        // cell `face` gains +r F, cell `face+1` gains -r F.
        for (cell, sign) in [(face, 1.0), (face + 1, -1.0)] {
            rhs[cell] += sign * r * drift;
            let c = sign * r * mob / d3;
            add(&mut rows, cell, f + 2, c);
            add(&mut rows, cell, f + 1, -3.0 * c);
            add(&mut rows, cell, f, 3.0 * c);
            add(&mut rows, cell, f - 1, -c);
        }
    }
    *v = solve_banded(rows, rhs)?;
    Ok(())
}

/// Integrates from `v0` up to `t_final`; the last step is shortened to end
/// exactly at `t_final`.
///
/// ```
/// use thinfilm::fdm::{cell_mass, integrate, FdmConfig};
/// use thinfilm::GridDensity;
/// let v0 = GridDensity::from_fn(-3.0, 0.1, 61, |x| 0.01 + (-x * x).exp()).unwrap();
/// let cfg = FdmConfig::explicit_for(0.1);
/// let v = integrate(&v0, 1e-3, &cfg).unwrap();
/// assert!((cell_mass(&v) - cell_mass(&v0)).abs() < 1e-13 * cell_mass(&v0));
/// ```
pub fn integrate(v0: &GridDensity, t_final: f64, config: &FdmConfig) -> Result<GridDensity> {
    integrate_observed(v0, t_final, config, |_, _| {})
}

/// [`integrate`] calling `observer(t, values)` after every step.
pub fn integrate_observed(
    v0: &GridDensity,
    t_final: f64,
    config: &FdmConfig,
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<GridDensity> {
    let dx = v0.dx();
    config.validate(dx)?;
    if !(t_final >= 0.0) {
        return Err(invalid(format!("final time must be non-negative, got {t_final}")));
    }
    let floor = config.positivity_floor;
    if let Some(i) = v0.values().iter().position(|&x| !(x >= floor)) {
        return Err(invalid(format!("initial data below the positivity floor at sample {i}")));
    }
    let x_min = v0.x_min();
    let mut v = v0.values().to_vec();
    let mut t = 0.0;
    while t < t_final {
        let dt = config.dt.min(t_final - t);
        match config.scheme {
            FdmScheme::ExplicitEuler => explicit_step(&mut v, x_min, dx, dt),
            FdmScheme::SemiImplicit => semi_implicit_step(&mut v, x_min, dx, dt)?,
        }
        t = if t_final - t <= config.dt { t_final } else { t + dt };
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min >= floor) {
            return Err(Error::OracleAbort(format!("min v = {min:e} below the positivity floor {floor:e} at t = {t}")));
        }
        observer(t, &v);
    }
    GridDensity::new(x_min, dx, v)
}

/// Strictly positive initial datum
/// `v_inf + amplitude sup(v_inf) exp(-x^2 / (2 width^2))`, rescaled to the
/// equilibrium mass, on `count` points of `[-half_width, half_width]`.
pub fn smooth_positive_initial(
    smyth: &SmythHill,
    amplitude: f64,
    width: f64,
    half_width: f64,
    count: usize,
) -> Result<GridDensity> {
    if !(amplitude > 0.0 && width > 0.0 && half_width > smyth.support_radius()) {
        return Err(invalid("positive datum needs amplitude > 0, width > 0 and a window wider than the equilibrium"));
    }
    let dx = 2.0 * half_width / (count - 1) as f64;
    let bump = amplitude * smyth.sup();
    let v = GridDensity::from_fn(-half_width, dx, count, |x| smyth.value(x) + bump * (-0.5 * x * x / (width * width)).exp())?;
    v.scaled(smyth.mass() / v.mass())
}

/// Settings of [`cross_validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossvalConfig {
    /// Equilibrium mass.
    pub mass: f64,
    /// Relative amplitude of the Gaussian added to the equilibrium.
    pub amplitude: f64,
    /// Standard deviation of the Gaussian.
    pub width: f64,
    /// Half width of the finite-difference domain.
    pub half_width: f64,
    /// Finite-difference grid points.
    pub grid_points: usize,
    /// Final time.
    pub t_final: f64,
    /// JKO time step.
    pub tau: f64,
    /// JKO cells.
    pub n_cells: usize,
    /// Finite-difference settings; the time step defaults to the CFL bound.
    pub fdm: Option<FdmConfig>,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        Self {
            mass: 2.0 / 45.0,
            amplitude: 0.3,
            width: 1.0,
            half_width: 4.0,
            grid_points: 321,
            t_final: 0.05,
            tau: 1e-4,
            n_cells: 400,
            fdm: None,
        }
    }
}

/// Outcome of [`cross_validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    /// `int |v_fdm - v_jko|` at the final time, on the finite-difference
    /// grid.
    pub l1_gap: f64,
    /// `int |v_fdm - v_0|`, the distance travelled, for scale.
    pub l1_motion: f64,
    /// `int |v_jko(0) - v_0|`: representation error of the initial
    /// quantile state on the finite-difference grid.
    pub l1_initial_gap: f64,
    /// Relative change of `sum v_i dx` in the finite-difference run.
    pub fdm_mass_drift: f64,
    /// Relative difference between the final JKO mass and the initial mass.
    pub jko_mass_drift: f64,
    /// Energy at the start and at the end of the finite-difference run.
    pub fdm_energy: [f64; 2],
    /// Final finite-difference state.
    pub fdm_final: GridDensity,
    /// Final JKO state.
    pub jko_final: QuantileDensity,
}

/// Runs the JKO scheme and the finite-difference oracle from the same
/// [`smooth_positive_initial`] datum and compares them at `t_final`.
pub fn cross_validate(cfg: &CrossvalConfig) -> Result<CrossvalReport> {
    let smyth = SmythHill::new(cfg.mass)?;
    let v0 = smooth_positive_initial(&smyth, cfg.amplitude, cfg.width, cfg.half_width, cfg.grid_points)?;
    let fdm_cfg = cfg.fdm.unwrap_or_else(|| FdmConfig::explicit_for(v0.dx()));
    let m0 = cell_mass(&v0);
    let v_fdm = integrate(&v0, cfg.t_final, &fdm_cfg)?;
    let fdm_mass_drift = (cell_mass(&v_fdm) - m0).abs() / m0;

    let q0 = grid_to_quantile(&v0, cfg.n_cells)?;
    let q0 = QuantileDensity::new(smyth.mass(), q0.into_positions())?;
    let jcfg = JkoConfig { tau: cfg.tau, n_cells: cfg.n_cells, ..JkoConfig::default() };
    let traj = run_from_quantiles(q0, cfg.t_final, &jcfg, &smyth).map_err(|f| f.error)?;
    let q = traj.last().state.clone();
    let jko_mass_drift = (q.mass() - smyth.mass()).abs() / smyth.mass();
    let (g, _) = quantile_to_grid(&q, v0.x_min(), v0.dx(), v0.len(), Reconstruction::ContactTail)?;
    let (g0, _) = quantile_to_grid(&traj.snapshots[0].state, v0.x_min(), v0.dx(), v0.len(), Reconstruction::ContactTail)?;
    let gap0: Vec<f64> = g0.values().iter().zip(v0.values()).map(|(a, b)| a - b).collect();
    let l1_initial_gap = trapezoid_map(&gap0, v0.dx(), |_, d| d.abs());

    let diff: Vec<f64> = v_fdm.values().iter().zip(g.values()).map(|(a, b)| a - b).collect();
    let l1_gap = trapezoid_map(&diff, v0.dx(), |_, d| d.abs());
    let motion: Vec<f64> = v_fdm.values().iter().zip(v0.values()).map(|(a, b)| a - b).collect();
    let l1_motion = trapezoid_map(&motion, v0.dx(), |_, d| d.abs());
    Ok(CrossvalReport {
        l1_gap,
        l1_motion,
        l1_initial_gap,
        fdm_mass_drift,
        jko_mass_drift,
        fdm_energy: [v0.energy(), v_fdm.energy()],
        fdm_final: v_fdm,
        jko_final: q,
    })
}
