//! Exponential decay rates of functional time series.
//!
//! [`fit_rate`] fits `value ~ A e^{-rate t}` by ordinary least squares of
//! `log(value)` against `t`. [`convergence_report`] applies it to the
//! relative entropy, the second moment, the weighted norms and the `L^1`
//! distance of a trajectory and compares each rate with its theoretical
//! value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::FunctionalRecord;
use crate::inequalities::DynamicTolerance;
use crate::io::{write_json, write_table};
use crate::jko::JkoTrajectory;

/// Fewest in-window samples a fit accepts.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Samples below this multiple of the series' initial magnitude are
/// treated as numerical noise.
pub const DEFAULT_FLOOR_FACTOR: f64 = 1e-10;

/// Earliest default window start.
pub const DEFAULT_T_LO: f64 = 0.5;

/// Number of steps excluded from the default window, as a multiple of `tau`.
pub const TRANSIENT_STEPS: f64 = 500.0;

/// A series whose in-window magnitude stays below this fraction of its
/// natural scale counts as already converged.
pub const CONVERGED_FRACTION: f64 = 1e-3;

/// Result of one log-linear fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Name of the series.
    pub quantity: String,
    /// Fit window `[t_lo, t_hi]`.
    pub window: [f64; 2],
    /// Fitted rate `-slope`.
    pub rate: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    /// Samples that entered the fit.
    pub samples: usize,
    /// In-window samples at or below the floor (or non-positive), excluded.
    pub floor_hits: usize,
    /// In-window samples excluded because the signed series changes sign
    /// next to them.
    pub zero_crossings: usize,
    /// Floor used.
    pub floor: f64,
}

/// Fits `value ~ A e^{-rate t}` to the samples of `series` with `t` in
/// `window` and `value > floor`.
///
/// ```
/// use thinfilm::rates::fit_rate;
/// let s: Vec<(f64, f64)> = (0..50).map(|i| {
///     let t = i as f64 * 0.1;
///     (t, 3.0 * (-2.0 * t).exp())
/// }).collect();
/// let fit = fit_rate(&s, (0.0, 5.0), 0.0).unwrap();
/// assert!((fit.rate - 2.0).abs() < 1e-10);
/// assert!((fit.r_squared - 1.0).abs() < 1e-12);
/// ```
pub fn fit_rate(series: &[(f64, f64)], window: (f64, f64), floor: f64) -> Result<RateFit> {
    fit_masked(series, &vec![false; series.len()], window, floor, "series")
}

fn fit_masked(series: &[(f64, f64)], excluded: &[bool], window: (f64, f64), floor: f64, name: &str) -> Result<RateFit> {
    let (t_lo, t_hi) = window;
    if !(t_lo < t_hi) || !t_lo.is_finite() || !t_hi.is_finite() {
        return Err(invalid(format!("fit window needs t_lo < t_hi, got [{t_lo}, {t_hi}]")));
    }
    let (mut floor_hits, mut zero_crossings) = (0, 0);
    let mut pts = Vec::new();
    for (&(t, v), &skip) in series.iter().zip(excluded) {
        if t < t_lo || t > t_hi {
            continue;
        }
        if skip {
            zero_crossings += 1;
        } else if !(v > floor) || !v.is_finite() {
            floor_hits += 1;
        } else {
            pts.push((t, v.ln()));
        }
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{name}: {} usable samples in [{t_lo}, {t_hi}], need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt <= 0.0 {
        return Err(Error::InsufficientData(format!("{name}: all usable samples share one time")));
    }
    let slope = sty / stt;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mt)).powi(2)).sum();
    let scale = syy.max(my * my);
    let r_squared = if syy > 1e-24 * scale.max(1.0) { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        quantity: name.to_string(),
        window: [t_lo, t_hi],
        rate: -slope,
        r_squared,
        samples: pts.len(),
        floor_hits,
        zero_crossings,
        floor,
    })
}

/// Outcome of comparing one fitted rate with its target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateStatus {
    /// Rate at least `target - slack` (and not above the ceiling).
    Pass,
    /// Rate below `target - slack`.
    Fail,
    /// Rate above `ceiling + slack`: the fit is dominated by the numerical
    /// floor rather than by the decay.
    FloorDominated,
    /// The series is at its numerical floor throughout the window.
    AlreadyConverged,
    /// Too few usable samples, while the series is not at its floor.
    InsufficientData,
    /// Reported without a target.
    Observation,
}

/// One quantity of the convergence report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    /// Series name.
    pub quantity: String,
    /// Fit window.
    pub window: [f64; 2],
    /// Fit, when one was possible.
    pub fit: Option<RateFit>,
    /// Theoretical rate, if the quantity is gated.
    pub target: Option<f64>,
    /// Allowed shortfall below the target.
    pub slack: f64,
    /// Largest credible rate, when the theory gives one.
    pub ceiling: Option<f64>,
    /// Outcome.
    pub status: RateStatus,
}

impl RateCheck {
    /// Whether the check counts as passed (already converged included).
    pub fn passed(&self) -> bool {
        matches!(self.status, RateStatus::Pass | RateStatus::AlreadyConverged | RateStatus::Observation)
    }

    /// Fitted rate or NaN.
    pub fn rate(&self) -> f64 {
        self.fit.as_ref().map_or(f64::NAN, |f| f.rate)
    }
}

/// Targets and slacks of [`convergence_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    /// Window start; defaults to `max(0.5, 500 tau)`.
    pub t_lo: Option<f64>,
    /// Window end; defaults to the last snapshot time.
    pub t_hi: Option<f64>,
    /// Floor as a multiple of each series' initial magnitude.
    pub floor_factor: f64,
    /// Exponents `p` of the `|||.|||_{p,1}` norms to fit.
    pub p_values: Vec<f64>,
    /// Slack of the entropy rate.
    pub slack_entropy: f64,
    /// Slack of the second-moment rate.
    pub slack_alpha: f64,
    /// Slack of the `|||.|||_{1,1}` rate.
    pub slack_norm11: f64,
    /// Slack of the `|||.|||_{p,1}` rates.
    pub slack_normp1: f64,
    /// Slack of the `L^1` rate.
    pub slack_l1: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            t_lo: None,
            t_hi: None,
            floor_factor: DEFAULT_FLOOR_FACTOR,
            p_values: vec![1.5],
            slack_entropy: 0.2,
            slack_alpha: 0.15,
            slack_norm11: 0.15,
            slack_normp1: 0.1,
            slack_l1: 0.15,
        }
    }
}

/// Full convergence report of a trajectory.
///
/// The entropy audit counts steps on which `H_rel` rose by more than
/// `tau` times the calibrated rate tolerance of
/// [`DynamicTolerance::CALIBRATED`]; near equilibrium the state drifts at
/// the convergence level of the inner solver, far below that tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Fit window used for every quantity.
    pub window: [f64; 2],
    /// Number of steps on which the relative entropy increased by more
    /// than the per-step tolerance of the dynamic checks.
    pub entropy_increases: usize,
    /// Largest one-step increase of the relative entropy (negative when it
    /// decreased on every step).
    pub max_entropy_increase: f64,
    /// One check per quantity.
    pub checks: Vec<RateCheck>,
}

impl ConvergenceReport {
    /// Whether the entropy never increased and every gated check passed.
    pub fn passed(&self) -> bool {
        self.entropy_increases == 0 && self.checks.iter().all(RateCheck::passed)
    }

    /// Check of the named quantity.
    pub fn get(&self, quantity: &str) -> Option<&RateCheck> {
        self.checks.iter().find(|c| c.quantity == quantity)
    }

    /// Rows `(quantity, window, rate, target, slack, pass)`.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.checks
            .iter()
            .map(|c| {
                vec![
                    c.quantity.clone(),
                    format!("{}..{}", c.window[0], c.window[1]),
                    c.rate().to_string(),
                    c.target.map_or(String::new(), |t| t.to_string()),
                    c.slack.to_string(),
                    c.passed().to_string(),
                ]
            })
            .collect()
    }

    /// Writes the report as JSON.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Writes [`ConvergenceReport::csv_rows`] with a header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = ["quantity", "window", "rate", "target", "slack", "pass"].map(String::from);
        write_table(path, &header, self.csv_rows())
    }

    /// Plain-text summary, one line per quantity.
    pub fn table(&self) -> String {
        let mut out = format!(
            "window [{}, {}], entropy increases: {} (largest {:.3e})\n",
            self.window[0], self.window[1], self.entropy_increases, self.max_entropy_increase
        );
        for c in &self.checks {
            let target = c.target.map_or("-".to_string(), |t| format!("{t:.3}"));
            let r2 = c.fit.as_ref().map_or(f64::NAN, |f| f.r_squared);
            out.push_str(&format!(
                "{:<16} rate {:>8.4} target {:>6} slack {:.2} r2 {:.6} {:?}\n",
                c.quantity,
                c.rate(),
                target,
                c.slack,
                r2,
                c.status
            ));
        }
        out
    }
}

/// Time series of the quantities fitted by [`convergence_report`], as
/// `(name, values)` columns aligned with the snapshot times.
pub fn plot_columns(traj: &JkoTrajectory, p_values: &[f64]) -> Vec<(String, Vec<f64>)> {
    let col = |f: &dyn Fn(&FunctionalRecord) -> f64| traj.records().map(f).collect::<Vec<f64>>();
    let mut cols = vec![
        ("time".to_string(), col(&|r| r.time)),
        ("H_rel".to_string(), col(&|r| r.H_rel)),
        ("E_rel".to_string(), col(&|r| r.E_rel)),
        ("alpha_rel".to_string(), col(&|r| r.alpha_rel)),
        ("norm11_sq".to_string(), col(&|r| r.norm11_sq)),
    ];
    for &p in p_values {
        cols.push((format!("normp1_sq({p})"), col(&|r| r.normp1(p).unwrap_or(f64::NAN))));
    }
    cols.push(("l1_dist".to_string(), col(&|r| r.l1_dist)));
    cols
}

/// Writes [`plot_columns`] as CSV.
pub fn write_plot_data(traj: &JkoTrajectory, p_values: &[f64], path: &Path) -> Result<()> {
    let cols = plot_columns(traj, p_values);
    let header: Vec<String> = cols.iter().map(|c| c.0.clone()).collect();
    let rows = (0..traj.snapshots.len()).map(|i| cols.iter().map(|c| c.1[i].to_string()).collect());
    write_table(path, &header, rows)
}

/// Default fit window `[max(0.5, 500 tau), t_last]`.
pub fn default_window(traj: &JkoTrajectory) -> (f64, f64) {
    (DEFAULT_T_LO.max(TRANSIENT_STEPS * traj.config.tau), traj.last().time)
}

struct Spec {
    name: String,
    values: Vec<f64>,
    signed: bool,
    scale: f64,
    target: Option<f64>,
    slack: f64,
    ceiling: Option<f64>,
}

/// Fits every convergence rate of `traj` and compares it with theory:
/// `H_rel` (rate 2, also the ceiling), `|alpha_rel|` (1),
/// `|||v - v_inf|||^2_{1,1}` (1), `|||v - v_inf|||^2_{p,1}` (`2 - p`), the
/// `L^1` distance (1). `E_rel` is fitted as an observation.
///
/// A quantity whose in-window magnitude stays below [`CONVERGED_FRACTION`]
/// of its natural scale (`H_inf`, `alpha_inf`, `int (v_inf)_x^2` for the
/// norms, the mass for `L^1`) is reported as already converged.
pub fn convergence_report(traj: &JkoTrajectory, opts: &RateOptions) -> Result<ConvergenceReport> {
    if traj.snapshots.len() < 2 {
        return Err(Error::InsufficientData("trajectory has no steps".into()));
    }
    let (d_lo, d_hi) = default_window(traj);
    let window = (opts.t_lo.unwrap_or(d_lo), opts.t_hi.unwrap_or(d_hi));
    if !(window.0 < window.1) {
        return Err(invalid(format!("fit window [{}, {}] is empty", window.0, window.1)));
    }
    let sh = &traj.smyth;
    let h_inf = sh.entropy();
    let tau = traj.config.tau;
    let audit_tol = tau * DynamicTolerance::CALIBRATED.rate(tau, traj.config.n_cells, sh);
    let steps: Vec<f64> = traj.snapshots.windows(2).map(|w| w[1].record.H_rel - w[0].record.H_rel).collect();
    let increases = steps.iter().filter(|&&d| d > audit_tol).count();
    let max_increase = steps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let col = |f: &dyn Fn(&FunctionalRecord) -> f64| traj.records().map(f).collect::<Vec<f64>>();
    let norm_scale = 2.0 * sh.beta();
    let mut specs = vec![
        Spec {
            name: "H_rel".into(),
            values: col(&|r| r.H_rel),
            signed: false,
            scale: h_inf,
            target: Some(2.0),
            slack: opts.slack_entropy,
            ceiling: Some(2.0),
        },
        Spec {
            name: "alpha_rel_abs".into(),
            values: col(&|r| r.alpha_rel),
            signed: true,
            scale: sh.alpha(),
            target: Some(1.0),
            slack: opts.slack_alpha,
            ceiling: None,
        },
        Spec {
            name: "norm11_sq".into(),
            values: col(&|r| r.norm11_sq),
            signed: false,
            scale: norm_scale,
            target: Some(1.0),
            slack: opts.slack_norm11,
            ceiling: None,
        },
    ];
    for &p in &opts.p_values {
        if !(1.0 < p && p < 2.0) {
            return Err(invalid(format!("norm exponent p must lie in (1, 2), got {p}")));
        }
        let values = traj
            .records()
            .map(|r| r.normp1(p).ok_or_else(|| invalid(format!("records carry no norm for p = {p}"))))
            .collect::<Result<Vec<f64>>>()?;
        specs.push(Spec {
            name: format!("normp1_sq({p})"),
            values,
            signed: false,
            scale: norm_scale,
            target: Some(2.0 - p),
            slack: opts.slack_normp1,
            ceiling: None,
        });
    }
    specs.push(Spec {
        name: "l1_distance".into(),
        values: col(&|r| r.l1_dist),
        signed: false,
        scale: sh.mass(),
        target: Some(1.0),
        slack: opts.slack_l1,
        ceiling: None,
    });
    specs.push(Spec {
        name: "E_rel".into(),
        values: col(&|r| r.E_rel),
        signed: false,
        scale: sh.energy(),
        target: None,
        slack: 0.0,
        ceiling: None,
    });
    let times = col(&|r| r.time);
    let checks = specs.into_iter().map(|s| check_series(&times, s, window, opts.floor_factor)).collect();
    Ok(ConvergenceReport {
        window: [window.0, window.1],
        entropy_increases: increases,
        max_entropy_increase: max_increase,
        checks,
    })
}

fn check_series(times: &[f64], s: Spec, window: (f64, f64), floor_factor: f64) -> RateCheck {
    let n = s.values.len();
    let excluded: Vec<bool> = (0..n)
        .map(|i| {
            s.signed && {
                let v = s.values[i];
                let flips = |j: usize| s.values[j] * v <= 0.0;
                (i > 0 && flips(i - 1)) || (i + 1 < n && flips(i + 1))
            }
        })
        .collect();
    let series: Vec<(f64, f64)> = times.iter().zip(&s.values).map(|(&t, &v)| (t, v.abs())).collect();
    let floor = floor_factor * s.values[0].abs();
    let converged = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .all(|(_, v)| *v <= CONVERGED_FRACTION * s.scale);
    let fit = fit_masked(&series, &excluded, window, floor, &s.name);
    let status = match (&fit, s.target) {
        _ if converged => RateStatus::AlreadyConverged,
        (Err(_), _) => RateStatus::InsufficientData,
        (Ok(_), None) => RateStatus::Observation,
        (Ok(f), Some(target)) => {
            if s.ceiling.is_some_and(|c| f.rate > c + s.slack) {
                RateStatus::FloorDominated
            } else if f.rate >= target - s.slack {
                RateStatus::Pass
            } else {
                RateStatus::Fail
            }
        }
    };
    RateCheck {
        quantity: s.name,
        window: [window.0, window.1],
        fit: fit.ok(),
        target: s.target,
        slack: s.slack,
        ceiling: s.ceiling,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expo(a: f64, rate: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|i| (i as f64 * 0.1, a * (-rate * i as f64 * 0.1).exp())).collect()
    }

    #[test]
    fn scaling_invariance_and_constant_series() {
        let a = fit_rate(&expo(1.0, 1.3, 40), (0.0, 4.0), 0.0).unwrap();
        let b = fit_rate(&expo(1e6, 1.3, 40), (0.0, 4.0), 0.0).unwrap();
        assert!((a.rate - b.rate).abs() < 1e-12);
        let c = fit_rate(&expo(2.0, 0.0, 40), (0.0, 4.0), 0.0).unwrap();
        assert!(c.rate.abs() < 1e-14);
        assert_eq!(c.r_squared, 1.0);
    }

    #[test]
    fn noisy_series_counts_floor_hits() {
        // Deterministic pseudo-noise of amplitude 1e-8 on e^{-t}.
        let s: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let t = i as f64 * 0.05;
                (t, (-t).exp() + 1e-8 * ((i * 7919 % 113) as f64 / 56.0 - 1.0))
            })
            .collect();
        let f = fit_rate(&s, (0.0, 20.0), 1e-7).unwrap();
        assert!(f.floor_hits > 0);
        assert!((f.rate - 1.0).abs() < 0.01, "{}", f.rate);
    }

    #[test]
    fn too_few_samples_is_insufficient_data() {
        let s = expo(1.0, 1.0, 5);
        assert!(matches!(fit_rate(&s, (0.0, 1.0), 0.0), Err(Error::InsufficientData(_))));
        assert!(fit_rate(&s, (1.0, 1.0), 0.0).is_err());
    }
}
