//! Minimizing-movement (JKO) scheme on quantile states.
//!
//! One step maps the previous positions `P` to a minimizer of
//!
//! ```text
//! Phi(X) = tau (E(X) - E_inf) + (h/2) sum (X_i - P_i)^2
//! ```
//!
//! over strictly increasing `X` with gaps at least `eps_mono`. The default
//! inner solver is a damped Newton method: the Hessian of `Phi` is
//! pentadiagonal, so each iteration costs `O(N)`. Near the contact points
//! the energy has directions of negative curvature; the Newton matrix is
//! then shifted by a multiple of the identity until its `L D L^T`
//! factorization succeeds, and a backtracking line search enforces both
//! the Armijo condition and the gap floor. A gradient-descent solver in the
//! log-gap parametrization is kept as an alternative through
//! [`InnerSolver::LogGapDescent`].

mod banded;
mod energy;
mod persist;
mod residual;

pub use banded::{Ldl, Pentadiagonal};
pub use energy::{energy as lagrangian_energy, energy_derivatives, surface_gradient};
pub use persist::{
    append_trajectory_dir, read_trajectory_dir, resume_trajectory, simulate_to_dir, write_trajectory_dir,
    InitialCondition, RunConfig, TrajectoryDir, CONFIG_FILE, DIAGNOSTICS_FILE, RECORDS_FILE, SNAPSHOT_DIR,
    STATE_FILE,
};
pub use residual::{
    default_test_functions, el_residual, weak_form_residual, BumpTestFunction, ElForm, WeakForm,
};

use serde::{Deserialize, Serialize};

use crate::density::{grid_to_quantile, GridDensity, QuantileDensity, SmythHill};
use crate::error::{invalid, Error, Result};
use crate::functionals::{record, FunctionalRecord, Functionals, RecordOptions};

/// Inner optimization method of a JKO step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSolver {
    /// Shifted Newton iteration with banded `L D L^T` solves.
    #[default]
    Newton,
    /// Steepest descent on `(X_0, log(gap_k - eps_mono))` with Armijo
    /// backtracking and Barzilai-Borwein trial steps.
    LogGapDescent,
}

/// Parameters of the scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JkoConfig {
    /// Time step.
    pub tau: f64,
    /// Number of quantiles `N`.
    pub n_cells: usize,
    /// Floor on every gap; `None` selects `1e-9` times the initial support width.
    pub eps_mono: Option<f64>,
    /// Stopping tolerance on the relative gradient norm.
    pub inner_tol: f64,
    /// Cap on inner iterations per step.
    pub max_inner_iters: usize,
    /// Threshold reported alongside the Euler-Lagrange residual.
    pub el_check_tol: f64,
    /// Inner solver.
    #[serde(default)]
    pub solver: InnerSolver,
    /// Functionals evaluated for every snapshot.
    #[serde(default)]
    pub record: RecordOptions,
}

impl Default for JkoConfig {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            n_cells: 400,
            eps_mono: None,
            inner_tol: 1e-10,
            max_inner_iters: 200,
            el_check_tol: 0.05,
            solver: InnerSolver::Newton,
            record: RecordOptions::default(),
        }
    }
}

impl JkoConfig {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if self.n_cells < 32 {
            return Err(invalid(format!("n_cells must be at least 32, got {}", self.n_cells)));
        }
        if let Some(e) = self.eps_mono {
            if !(e > 0.0) {
                return Err(invalid("eps_mono must be positive"));
            }
        }
        if !(self.inner_tol > 0.0) || self.max_inner_iters == 0 {
            return Err(invalid("inner_tol and max_inner_iters must be positive"));
        }
        Ok(())
    }

    /// The gap floor for a given state.
    pub fn eps_mono_for(&self, q: &QuantileDensity) -> f64 {
        self.eps_mono.unwrap_or_else(|| {
            let (lo, hi) = q.support();
            1e-9 * (hi - lo)
        })
    }
}

/// Per-step solver and consistency diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JkoStepDiagnostics {
    /// `Phi(P) = tau E_rel(P)`.
    pub objective_initial: f64,
    /// `Phi` at the accepted state.
    pub objective_final: f64,
    /// Inner iterations used.
    pub inner_iters: usize,
    /// Movement cost actually paid, `(1/2) W_2^2(v_next, v_prev)`.
    pub w2_sq_moved: f64,
    /// Relative Euler-Lagrange mismatch, see [`el_residual`].
    pub el_residual: f64,
    /// Largest density slope next to the two contact points.
    pub edge_slope_indicator: f64,
    /// Relative gradient norm at exit.
    pub rel_gradient: f64,
    /// Largest identity shift used to make the Newton matrix positive definite.
    pub max_shift: f64,
    /// Whether the gradient tolerance was met (as opposed to a stalled
    /// line search or a negligible decrease).
    pub converged: bool,
}

/// `Phi(X) = tau (E(X) - E_inf) + (h/2) |X - P|^2`.
///
/// ```
/// use thinfilm::{jko::{objective, JkoConfig}, smyth_hill};
/// let sh = smyth_hill(2.0 / 45.0).unwrap();
/// let q = sh.quantiles(64).unwrap();
/// let cfg = JkoConfig::default();
/// let phi = objective(q.positions(), q.positions(), &cfg, &sh).unwrap();
/// assert!(phi.abs() < 1e-2 * cfg.tau * sh.energy());
/// ```
pub fn objective(x: &[f64], prev: &[f64], config: &JkoConfig, smyth: &SmythHill) -> Result<f64> {
    if x.len() != prev.len() || x.len() < 4 {
        return Err(invalid("objective needs two position vectors of equal length >= 4"));
    }
    let floor = config.eps_mono.unwrap_or(0.0);
    if let Some(i) = x.windows(2).position(|w| !(w[1] - w[0] >= floor && w[1] > w[0])) {
        return Err(invalid(format!("positions violate the monotonicity floor at gap {i}")));
    }
    let h = smyth.mass() / x.len() as f64;
    Ok(phi(x, prev, h, config.tau, smyth.energy()))
}

fn phi(x: &[f64], prev: &[f64], h: f64, tau: f64, e_inf: f64) -> f64 {
    let mv: f64 = x.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum();
    tau * (energy::energy(x, h) - e_inf) + 0.5 * h * mv
}

fn feasible(x: &[f64], eps: f64) -> bool {
    x.windows(2).all(|w| w[1] - w[0] >= eps) && x.iter().all(|v| v.is_finite())
}

fn rel_gradient(g: &[f64], x: &[f64], h: f64, tau: f64) -> f64 {
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    gmax / (h * tau * (1.0 + xmax))
}

fn objective_gradient(x: &[f64], prev: &[f64], h: f64, tau: f64) -> Vec<f64> {
    let mut g = surface_gradient(x, h);
    for i in 0..x.len() {
        g[i] = tau * (g[i] + h * x[i]) + h * (x[i] - prev[i]);
    }
    g
}

struct InnerResult {
    x: Vec<f64>,
    f: f64,
    iters: usize,
    rel_grad: f64,
    max_shift: f64,
    converged: bool,
}

fn negligible(decrease: f64, f: f64, tau: f64, e_abs: f64) -> bool {
    decrease < 1e-14 * (f.abs() + tau * e_abs.abs())
}

/// Bound on `|dPhi/dX_i|` relative to the sum of the absolute values of
/// the terms that form it. Below this the gradient is rounding noise and
/// the iterate counts as converged whatever the relative gradient.
const ROUNDING_GRADIENT_TOL: f64 = 1e-11;

/// Predicted decrease, relative to `|Phi| + tau |E|`, below which `Phi`
/// itself cannot resolve progress; the line search then asks for a smaller
/// gradient instead of the Armijo decrease.
const RESOLVABLE_DECREASE: f64 = 1e-12;

fn rounding_ratio(g: &[f64], x: &[f64], prev: &[f64], h: f64, tau: f64) -> f64 {
    let mag = energy::gradient_magnitude(x, h);
    (0..g.len()).map(|i| g[i].abs() / (tau * mag[i] + h * (x[i].abs() + prev[i].abs()))).fold(0.0, f64::max)
}

fn newton(prev: &[f64], h: f64, cfg: &JkoConfig, e_inf: f64, eps: f64) -> InnerResult {
    let tau = cfg.tau;
    let n = prev.len();
    let mut x = prev.to_vec();
    let mut f = phi(&x, prev, h, tau, e_inf);
    let f_start = f;
    let mut max_shift = 0.0f64;
    for iter in 0..cfg.max_inner_iters {
        let (e, ge, mut hess) = energy_derivatives(&x, h);
        let mut g = vec![0.0; n];
        for i in 0..n {
            g[i] = tau * ge[i] + h * (x[i] - prev[i]);
            hess.diag[i] = tau * hess.diag[i] + h;
        }
        for v in hess.off1.iter_mut().chain(hess.off2.iter_mut()) {
            *v *= tau;
        }
        let rel = rel_gradient(&g, &x, h, tau);
        let rr = rounding_ratio(&g, &x, prev, h, tau);
        if rel <= cfg.inner_tol || rr <= ROUNDING_GRADIENT_TOL {
            return InnerResult { x, f, iters: iter, rel_grad: rel, max_shift, converged: true };
        }
        let scale = hess.diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut shift = 0.0;
        let factor = loop {
            if let Some(ldl) = hess.factor(shift) {
                break ldl;
            }
            shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
        };
        max_shift = max_shift.max(shift);
        let mut p = factor.solve(&g);
        p.iter_mut().for_each(|v| *v = -*v);
        let slope: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
        let resolvable = -slope > RESOLVABLE_DECREASE * (f.abs() + tau * e.abs());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            if feasible(&trial, eps) {
                let ft = phi(&trial, prev, h, tau, e_inf);
                let ok = if resolvable {
                    ft <= f + 1e-4 * step * slope
                } else {
                    ft <= f + RESOLVABLE_DECREASE * (f.abs() + tau * e.abs())
                        && ft <= f_start
                        && rounding_ratio(&objective_gradient(&trial, prev, h, tau), &trial, prev, h, tau) < rr
                };
                if ok {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, ft)) => {
                x = trial;
                f = ft;
            }
            None => return InnerResult { x, f, iters: iter, rel_grad: rel, max_shift, converged: false },
        }
    }
    let g = objective_gradient(&x, prev, h, tau);
    let rel = rel_gradient(&g, &x, h, tau);
    let converged = rel <= cfg.inner_tol || rounding_ratio(&g, &x, prev, h, tau) <= ROUNDING_GRADIENT_TOL;
    InnerResult { x, f, iters: cfg.max_inner_iters, rel_grad: rel, max_shift, converged }
}

fn from_log_gaps(theta: &[f64], eps: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(theta.len());
    let mut acc = theta[0];
    x.push(acc);
    for t in &theta[1..] {
        acc += eps + t.exp();
        x.push(acc);
    }
    x
}

fn log_gap_descent(prev: &[f64], h: f64, cfg: &JkoConfig, e_inf: f64, eps: f64) -> InnerResult {
    let tau = cfg.tau;
    let n = prev.len();
    let mut theta = Vec::with_capacity(n);
    theta.push(prev[0]);
    for w in prev.windows(2) {
        theta.push((w[1] - w[0] - eps).max(eps).ln());
    }
    let mut x = from_log_gaps(&theta, eps);
    let mut f = phi(&x, prev, h, tau, e_inf);
    let grad_theta = |x: &[f64], theta: &[f64]| {
        let g = objective_gradient(x, prev, h, tau);
        let mut gt = vec![0.0; n];
        let mut tail = 0.0;
        for i in (1..n).rev() {
            tail += g[i];
            gt[i] = theta[i].exp() * tail;
        }
        gt[0] = tail + g[0];
        (g, gt)
    };
    let (mut gx, mut gt) = grad_theta(&x, &theta);
    let mut rel = rel_gradient(&gx, &x, h, tau);
    let mut trial_step = 1.0 / (gt.iter().map(|v| v * v).sum::<f64>().sqrt() + 1e-300) * 1e-3;
    for iter in 0..cfg.max_inner_iters {
        if rel <= cfg.inner_tol {
            return InnerResult { x, f, iters: iter, rel_grad: rel, max_shift: 0.0, converged: true };
        }
        let gnorm2: f64 = gt.iter().map(|v| v * v).sum();
        let mut step = trial_step;
        let mut accepted = None;
        for _ in 0..80 {
            let th: Vec<f64> = theta.iter().zip(&gt).map(|(a, b)| a - step * b).collect();
            let xt = from_log_gaps(&th, eps);
            if xt.iter().all(|v| v.is_finite()) {
                let ft = phi(&xt, prev, h, tau, e_inf);
                if ft <= f - 1e-4 * step * gnorm2 {
                    accepted = Some((th, xt, ft));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((th, xt, ft)) = accepted else {
            return InnerResult { x, f, iters: iter, rel_grad: rel, max_shift: 0.0, converged: false };
        };
        let decrease = f - ft;
        let (gx_new, gt_new) = grad_theta(&xt, &th);
        let s: Vec<f64> = th.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt_new.iter().zip(&gt).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        trial_step = if sy > 0.0 { ss / sy } else { step * 2.0 };
        theta = th;
        x = xt;
        f = ft;
        gx = gx_new;
        gt = gt_new;
        rel = rel_gradient(&gx, &x, h, tau);
        if negligible(decrease, f, tau, energy::energy(&x, h)) {
            return InnerResult { x, f, iters: iter + 1, rel_grad: rel, max_shift: 0.0, converged: rel <= cfg.inner_tol };
        }
    }
    InnerResult { x, f, iters: cfg.max_inner_iters, rel_grad: rel, max_shift: 0.0, converged: rel <= cfg.inner_tol }
}

fn edge_slope(q: &QuantileDensity) -> f64 {
    let rho = q.cell_densities();
    let y = q.cell_centers();
    let m = rho.len();
    if m < 2 {
        return 0.0;
    }
    let left = (rho[1] - rho[0]).abs() / (y[1] - y[0]);
    let right = (rho[m - 1] - rho[m - 2]).abs() / (y[m - 1] - y[m - 2]);
    left.max(right)
}

/// One JKO step from `prev`.
///
/// The returned state never has a larger objective than `prev` itself,
/// whose objective is `tau E_rel(prev)`; this is the minimality certificate
/// behind the free energy estimate.
///
/// ```
/// use thinfilm::{jko::{step, JkoConfig}, smyth_hill, Functionals};
/// let sh = smyth_hill(2.0 / 45.0).unwrap();
/// let prev = sh.quantiles(64).unwrap().translated(0.3).unwrap();
/// let cfg = JkoConfig { n_cells: 64, ..JkoConfig::default() };
/// let (next, diag) = step(&prev, &cfg, &sh).unwrap();
/// assert!(next.alpha() < prev.alpha());
/// assert!(diag.objective_final <= diag.objective_initial);
/// ```
pub fn step(prev: &QuantileDensity, config: &JkoConfig, smyth: &SmythHill) -> Result<(QuantileDensity, JkoStepDiagnostics)> {
    step_numbered(prev, config, smyth, 1)
}

fn step_numbered(
    prev: &QuantileDensity,
    config: &JkoConfig,
    smyth: &SmythHill,
    index: usize,
) -> Result<(QuantileDensity, JkoStepDiagnostics)> {
    config.validate()?;
    if (prev.mass() - smyth.mass()).abs() > 1e-8 * smyth.mass() {
        return Err(invalid("state mass differs from the equilibrium mass"));
    }
    let h = prev.cell_mass();
    let e_inf = smyth.energy();
    let eps = config.eps_mono_for(prev);
    let p = prev.positions();
    let f0 = phi(p, p, h, config.tau, e_inf);
    let res = match config.solver {
        InnerSolver::Newton => newton(p, h, config, e_inf, eps),
        InnerSolver::LogGapDescent => log_gap_descent(p, h, config, e_inf, eps),
    };
    let mut diag = JkoStepDiagnostics {
        objective_initial: f0,
        objective_final: res.f,
        inner_iters: res.iters,
        rel_gradient: res.rel_grad,
        max_shift: res.max_shift,
        converged: res.converged,
        ..Default::default()
    };
    if !(res.f <= f0) {
        return Err(Error::StepFailure {
            step: index,
            reason: format!("objective rose from {f0} to {}", res.f),
            diagnostics: Box::new(diag),
        });
    }
    let next = match QuantileDensity::new(prev.mass(), res.x) {
        Ok(q) => q,
        Err(e) => {
            return Err(Error::StepFailure { step: index, reason: e.to_string(), diagnostics: Box::new(diag) })
        }
    };
    diag.w2_sq_moved = 0.5 * h * next.positions().iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    diag.el_residual = el_residual(&next, prev, config.tau, ElForm::Corrected);
    diag.edge_slope_indicator = edge_slope(&next);
    Ok((next, diag))
}

/// One element of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JkoSnapshot {
    /// Step index `n`; the time is `n tau`.
    pub step: usize,
    /// Time `t_n = n tau`.
    pub time: f64,
    /// State.
    pub state: QuantileDensity,
    /// Functionals of the state.
    pub record: FunctionalRecord,
    /// Diagnostics of the step that produced the state (defaults for `n = 0`).
    pub diagnostics: JkoStepDiagnostics,
}

/// A run of the scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JkoTrajectory {
    /// Parameters, with `eps_mono` resolved.
    pub config: JkoConfig,
    /// Equilibrium the relative functionals refer to.
    pub smyth: SmythHill,
    /// Snapshots in time order.
    pub snapshots: Vec<JkoSnapshot>,
}

impl JkoTrajectory {
    /// Records of all snapshots.
    pub fn records(&self) -> impl Iterator<Item = &FunctionalRecord> {
        self.snapshots.iter().map(|s| &s.record)
    }

    /// Series `(t, f(record))`.
    pub fn series(&self, f: impl Fn(&FunctionalRecord) -> f64) -> Vec<(f64, f64)> {
        self.snapshots.iter().map(|s| (s.time, f(&s.record))).collect()
    }

    /// Last snapshot.
    pub fn last(&self) -> &JkoSnapshot {
        self.snapshots.last().expect("a trajectory holds at least its initial snapshot")
    }
}

/// A run that stopped early, with everything computed up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    /// Snapshots produced before the failure.
    pub partial: Box<JkoTrajectory>,
    /// Cause.
    #[source]
    pub error: Error,
}

/// Number of steps needed to reach `t_final`.
pub fn step_count(t_final: f64, tau: f64) -> usize {
    if t_final <= 0.0 {
        0
    } else {
        (t_final / tau - 1e-9).ceil() as usize
    }
}

/// Advances `traj` until its last time reaches `t_final`, calling
/// `observer` on each new snapshot.
pub fn extend(
    traj: &mut JkoTrajectory,
    t_final: f64,
    mut observer: impl FnMut(&JkoSnapshot) -> Result<()>,
) -> Result<()> {
    let total = step_count(t_final, traj.config.tau);
    let mut state = traj.last().state.clone();
    for n in traj.last().step + 1..=total {
        let (next, diag) = step_numbered(&state, &traj.config, &traj.smyth, n)?;
        let time = n as f64 * traj.config.tau;
        let rec = record(&next, time, &traj.smyth, &traj.config.record)?;
        let snap = JkoSnapshot { step: n, time, state: next.clone(), record: rec, diagnostics: diag };
        observer(&snap)?;
        traj.snapshots.push(snap);
        state = next;
    }
    Ok(())
}

/// Starts a trajectory at `q0` (without stepping).
pub fn start(q0: QuantileDensity, config: &JkoConfig, smyth: &SmythHill) -> Result<JkoTrajectory> {
    config.validate()?;
    if q0.n() != config.n_cells {
        return Err(invalid(format!("initial state has {} cells, config asks for {}", q0.n(), config.n_cells)));
    }
    if (q0.mass() - smyth.mass()).abs() > 1e-8 * smyth.mass() {
        return Err(invalid(format!("initial mass {} differs from equilibrium mass {}", q0.mass(), smyth.mass())));
    }
    let e0 = q0.energy();
    let m4 = q0.moment(4);
    if !e0.is_finite() || !m4.is_finite() {
        return Err(invalid("initial energy or fourth moment is not finite"));
    }
    let mut cfg = config.clone();
    cfg.eps_mono = Some(config.eps_mono_for(&q0));
    if q0.min_gap() < cfg.eps_mono.unwrap_or(0.0) {
        return Err(invalid("initial state violates the monotonicity floor"));
    }
    let rec = record(&q0, 0.0, smyth, &cfg.record)?;
    Ok(JkoTrajectory {
        config: cfg,
        smyth: *smyth,
        snapshots: vec![JkoSnapshot { step: 0, time: 0.0, state: q0, record: rec, diagnostics: JkoStepDiagnostics::default() }],
    })
}

/// Runs the scheme from quantiles `q0` up to `t_final`.
pub fn run_from_quantiles(
    q0: QuantileDensity,
    t_final: f64,
    config: &JkoConfig,
    smyth: &SmythHill,
) -> std::result::Result<JkoTrajectory, RunFailure> {
    let mut traj = start(q0, config, smyth).map_err(|error| RunFailure {
        partial: Box::new(JkoTrajectory { config: config.clone(), smyth: *smyth, snapshots: Vec::new() }),
        error,
    })?;
    match extend(&mut traj, t_final, |_| Ok(())) {
        Ok(()) => Ok(traj),
        Err(error) => Err(RunFailure { partial: Box::new(traj), error }),
    }
}

/// Runs the scheme from a grid density, converted to `config.n_cells`
/// quantiles.
pub fn run(
    v0: &GridDensity,
    t_final: f64,
    config: &JkoConfig,
    smyth: &SmythHill,
) -> std::result::Result<JkoTrajectory, RunFailure> {
    let fail = |error| RunFailure {
        partial: Box::new(JkoTrajectory { config: config.clone(), smyth: *smyth, snapshots: Vec::new() }),
        error,
    };
    if (v0.mass() - smyth.mass()).abs() > 1e-8 * smyth.mass() {
        return Err(fail(invalid(format!("initial mass {} differs from equilibrium mass {}", v0.mass(), smyth.mass()))));
    }
    let q0 = grid_to_quantile(v0, config.n_cells).map_err(fail)?;
    let q0 = QuantileDensity::new(smyth.mass(), q0.into_positions()).map_err(fail)?;
    run_from_quantiles(q0, t_final, config, smyth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh() -> SmythHill {
        SmythHill::new(2.0 / 45.0).unwrap()
    }

    #[test]
    fn objective_first_variation() {
        let s = sh();
        let cfg = JkoConfig { n_cells: 40, ..JkoConfig::default() };
        let prev = s.quantiles(40).unwrap().translated(0.1).unwrap();
        let p = prev.positions();
        let x: Vec<f64> = p.iter().map(|v| v * 1.05 - 0.02).collect();
        let h = prev.cell_mass();
        let g = objective_gradient(&x, p, h, cfg.tau);
        let eta: Vec<f64> = (0..40).map(|i| ((i as f64) * 0.3).cos()).collect();
        let f0 = objective(&x, p, &cfg, &s).unwrap();
        let slope: f64 = g.iter().zip(&eta).map(|(a, b)| a * b).sum();
        let mut errs = Vec::new();
        for &e in &[1e-4, 5e-5] {
            let xe: Vec<f64> = x.iter().zip(&eta).map(|(a, b)| a + e * b).collect();
            let fe = objective(&xe, p, &cfg, &s).unwrap();
            errs.push((fe - f0 - e * slope).abs());
        }
        assert!(errs[1] < 0.3 * errs[0], "{errs:?}");
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let s = sh();
        let cfg = JkoConfig { n_cells: 64, ..JkoConfig::default() };
        let q = s.quantiles(64).unwrap();
        let (next, diag) = step(&q, &cfg, &s).unwrap();
        let moved = crate::transport::w2(&q, &next).unwrap();
        assert!(moved < 1e-3, "moved {moved}");
        assert!(diag.objective_final <= diag.objective_initial);
    }

    #[test]
    fn solvers_agree_on_a_small_problem() {
        let s = sh();
        let prev = s.quantiles(32).unwrap().translated(0.2).unwrap();
        let newton_cfg = JkoConfig { n_cells: 32, tau: 1e-2, ..JkoConfig::default() };
        let gd_cfg = JkoConfig { solver: InnerSolver::LogGapDescent, max_inner_iters: 200_000, inner_tol: 1e-7, ..newton_cfg.clone() };
        let (a, _) = step(&prev, &newton_cfg, &s).unwrap();
        let (b, db) = step(&prev, &gd_cfg, &s).unwrap();
        let d = crate::transport::w2(&a, &b).unwrap();
        let moved = crate::transport::w2(&a, &prev).unwrap();
        assert!(d < 1e-3 * moved, "distance {d} vs movement {moved}, gd iters {}", db.inner_iters);
    }

    #[test]
    fn step_count_rounding() {
        assert_eq!(step_count(3.0, 1e-3), 3000);
        assert_eq!(step_count(0.3, 1e-3), 300);
        assert_eq!(step_count(0.0, 1e-3), 0);
        assert_eq!(step_count(0.05, 1e-4), 500);
    }
}
