//! Trajectory directories and run configuration.
//!
//! Layout of a trajectory directory:
//!
//! ```text
//! config.json            run configuration and resolved scheme parameters
//! state.json             last snapshot (step, time, mass, positions)
//! records.csv            one FunctionalRecord row per snapshot
//! diagnostics.csv        one row of step diagnostics per snapshot
//! snapshots/NNNNNN.csv   quantile CSV (header s,X) of snapshot NNNNNN
//! ```
//!
//! All files are replaced atomically. Rows of `records.csv` are never
//! rewritten once produced, so resuming a run appends rows that are
//! byte-identical to those of an uninterrupted run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{extend, start, InnerSolver, JkoConfig, JkoSnapshot, JkoStepDiagnostics, JkoTrajectory, RunFailure};
use crate::density::{grid_to_quantile, GridDensity, QuantileDensity, SmythHill};
use crate::error::{invalid, Error, Result};
use crate::functionals::{FunctionalRecord, RecordOptions};
use crate::io::{read_grid_csv, read_json, read_quantile_csv, read_table, write_json, write_quantile_csv, write_table};

/// Run configuration file name.
pub const CONFIG_FILE: &str = "config.json";
/// Last-state file name.
pub const STATE_FILE: &str = "state.json";
/// Records file name.
pub const RECORDS_FILE: &str = "records.csv";
/// Diagnostics file name.
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
/// Snapshot subdirectory.
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Grid points used to sample analytic initial conditions before
/// conversion to quantiles.
const IC_GRID_POINTS: usize = 40_001;

/// Initial condition of a run.
///
/// Textual forms: `smyth-translated:D`, `smyth-dilated:L`,
/// `two-bump:C1,W1,C2,W2,RATIO`, `smyth-gaussian:AMPLITUDE,WIDTH`,
/// `from-file:PATH`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// Equilibrium of the run mass moved by `D`.
    SmythTranslated(f64),
    /// Equilibrium of the run mass dilated to `L v(L x)`.
    SmythDilated(f64),
    /// Two bumps `(1 - ((x - c)/w)^2)^3_+` with mass ratio `RATIO` of the
    /// first to the second.
    TwoBump {
        /// First centre.
        c1: f64,
        /// First half width.
        w1: f64,
        /// Second centre.
        c2: f64,
        /// Second half width.
        w2: f64,
        /// Mass of the first bump divided by the mass of the second.
        ratio: f64,
    },
    /// Equilibrium plus `AMPLITUDE exp(-x^2 / (2 WIDTH^2))`, rescaled to
    /// the run mass. Strictly positive everywhere.
    SmythGaussian {
        /// Peak height of the added Gaussian.
        amplitude: f64,
        /// Standard deviation of the added Gaussian.
        width: f64,
    },
    /// Grid density CSV (header `x,v`); its mass overrides the run mass.
    FromFile(PathBuf),
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SmythTranslated(d) => write!(f, "smyth-translated:{d}"),
            Self::SmythDilated(l) => write!(f, "smyth-dilated:{l}"),
            Self::TwoBump { c1, w1, c2, w2, ratio } => write!(f, "two-bump:{c1},{w1},{c2},{w2},{ratio}"),
            Self::SmythGaussian { amplitude, width } => write!(f, "smyth-gaussian:{amplitude},{width}"),
            Self::FromFile(p) => write!(f, "from-file:{}", p.display()),
        }
    }
}

impl FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').ok_or_else(|| invalid(format!("initial condition {s:?} lacks ':'")))?;
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| invalid(format!("{a:?} is not a number in {s:?}"))))
                .collect()
        };
        let want = |v: Vec<f64>, k: usize| -> Result<Vec<f64>> {
            if v.len() == k {
                Ok(v)
            } else {
                Err(invalid(format!("{kind} takes {k} numbers, got {}", v.len())))
            }
        };
        match kind {
            "smyth-translated" => Ok(Self::SmythTranslated(want(nums()?, 1)?[0])),
            "smyth-dilated" => Ok(Self::SmythDilated(want(nums()?, 1)?[0])),
            "two-bump" => {
                let v = want(nums()?, 5)?;
                Ok(Self::TwoBump { c1: v[0], w1: v[1], c2: v[2], w2: v[3], ratio: v[4] })
            }
            "smyth-gaussian" => {
                let v = want(nums()?, 2)?;
                Ok(Self::SmythGaussian { amplitude: v[0], width: v[1] })
            }
            "from-file" => Ok(Self::FromFile(PathBuf::from(args))),
            _ => Err(invalid(format!("unknown initial condition kind {kind:?}"))),
        }
    }
}

impl Serialize for InitialCondition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for InitialCondition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Initial condition.
    pub initial_condition: InitialCondition,
    /// Mass `M`.
    pub mass: f64,
    /// Time step.
    pub tau: f64,
    /// Number of quantiles.
    pub n_cells: usize,
    /// Final time.
    pub t_final: f64,
    /// Exponents of the recorded `|||.|||_{p,1}` norms.
    pub p_values: Vec<f64>,
    /// Seed of randomized suites run on this trajectory.
    pub seed: u64,
    /// Output directory.
    pub output_dir: Option<PathBuf>,
    /// Relative gradient tolerance of the inner solver.
    pub inner_tol: f64,
    /// Inner iteration cap.
    pub max_inner_iters: usize,
    /// Gap floor; `None` selects the default relative to the initial support.
    pub eps_mono: Option<f64>,
    /// Inner solver.
    pub solver: InnerSolver,
}

impl Default for RunConfig {
    fn default() -> Self {
        let j = JkoConfig::default();
        Self {
            initial_condition: InitialCondition::SmythTranslated(0.5),
            mass: 2.0 / 45.0,
            tau: j.tau,
            n_cells: j.n_cells,
            t_final: 3.0,
            p_values: vec![1.5],
            seed: 0,
            output_dir: None,
            inner_tol: j.inner_tol,
            max_inner_iters: j.max_inner_iters,
            eps_mono: None,
            solver: j.solver,
        }
    }
}

fn smooth_bump(x: f64, c: f64, w: f64) -> f64 {
    let r = (x - c) / w;
    if r.abs() < 1.0 {
        (1.0 - r * r).powi(3)
    } else {
        0.0
    }
}

impl RunConfig {
    /// Scheme parameters derived from this configuration.
    pub fn jko_config(&self) -> JkoConfig {
        JkoConfig {
            tau: self.tau,
            n_cells: self.n_cells,
            eps_mono: self.eps_mono,
            inner_tol: self.inner_tol,
            max_inner_iters: self.max_inner_iters,
            el_check_tol: JkoConfig::default().el_check_tol,
            solver: self.solver,
            record: RecordOptions { p_values: self.p_values.clone(), ..RecordOptions::default() },
        }
    }

    /// Checks that numeric fields are in range.
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.tau > 0.0) || !(self.t_final >= 0.0) {
            return Err(invalid("mass and tau must be positive and t_final nonnegative"));
        }
        if self.p_values.iter().any(|p| !(0.0..=2.0).contains(p)) {
            return Err(invalid("p values must lie in [0, 2]"));
        }
        self.jko_config().validate()
    }

    /// The initial density on a fine grid, for initial conditions that
    /// have one; `None` for the closed-form equilibrium families.
    pub fn initial_grid(&self) -> Result<Option<GridDensity>> {
        let sh = SmythHill::new(self.mass)?;
        let c = sh.support_radius();
        match &self.initial_condition {
            InitialCondition::SmythTranslated(_) | InitialCondition::SmythDilated(_) => Ok(None),
            InitialCondition::TwoBump { c1, w1, c2, w2, ratio } => {
                if !(*w1 > 0.0 && *w2 > 0.0 && *ratio > 0.0) {
                    return Err(invalid("two-bump widths and ratio must be positive"));
                }
                let lo = (c1 - w1).min(c2 - w2);
                let hi = (c1 + w1).max(c2 + w2);
                let dx = (hi - lo) / (IC_GRID_POINTS - 7) as f64;
                let x0 = lo - 3.0 * dx;
                let a = ratio / (1.0 + ratio) / (w1 * 32.0 / 35.0);
                let b = 1.0 / (1.0 + ratio) / (w2 * 32.0 / 35.0);
                let g = GridDensity::from_fn(x0, dx, IC_GRID_POINTS, |x| a * smooth_bump(x, *c1, *w1) + b * smooth_bump(x, *c2, *w2))?;
                Ok(Some(g.scaled(self.mass / g.mass())?))
            }
            InitialCondition::SmythGaussian { amplitude, width } => {
                if !(*amplitude > 0.0 && *width > 0.0) {
                    return Err(invalid("Gaussian amplitude and width must be positive"));
                }
                let half = (c + 8.0 * width).max(1.5 * c);
                let dx = 2.0 * half / (IC_GRID_POINTS - 1) as f64;
                let g = GridDensity::from_fn(-half, dx, IC_GRID_POINTS, |x| {
                    sh.value(x) + amplitude * (-x * x / (2.0 * width * width)).exp()
                })?;
                Ok(Some(g.scaled(self.mass / g.mass())?))
            }
            InitialCondition::FromFile(p) => Ok(Some(read_grid_csv(p)?)),
        }
    }

    /// Initial quantile state and the equilibrium of the same mass.
    pub fn initial_state(&self) -> Result<(QuantileDensity, SmythHill)> {
        let n = self.n_cells;
        match &self.initial_condition {
            InitialCondition::SmythTranslated(d) => {
                let sh = SmythHill::new(self.mass)?;
                Ok((sh.quantiles(n)?.translated(*d)?, sh))
            }
            InitialCondition::SmythDilated(l) => {
                let sh = SmythHill::new(self.mass)?;
                Ok((sh.quantiles(n)?.dilated(*l)?, sh))
            }
            _ => {
                let g = self.initial_grid()?.expect("grid initial condition");
                let sh = SmythHill::new(g.mass())?;
                Ok((grid_to_quantile(&g, n)?, sh))
            }
        }
    }
}

/// Contents of `config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDir {
    /// Configuration as requested.
    pub run: RunConfig,
    /// Scheme parameters with the gap floor resolved.
    pub jko: JkoConfig,
    /// Equilibrium of the run mass.
    pub smyth: SmythHill,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StateFile {
    step: usize,
    time: f64,
    mass: f64,
    positions: Vec<f64>,
}

const DIAG_COLUMNS: [&str; 11] = [
    "step",
    "time",
    "objective_initial",
    "objective_final",
    "inner_iters",
    "w2_sq_moved",
    "el_residual",
    "edge_slope_indicator",
    "rel_gradient",
    "max_shift",
    "converged",
];

fn diag_row(s: &JkoSnapshot) -> Vec<String> {
    let d = &s.diagnostics;
    vec![
        s.step.to_string(),
        s.time.to_string(),
        d.objective_initial.to_string(),
        d.objective_final.to_string(),
        d.inner_iters.to_string(),
        d.w2_sq_moved.to_string(),
        d.el_residual.to_string(),
        d.edge_slope_indicator.to_string(),
        d.rel_gradient.to_string(),
        d.max_shift.to_string(),
        d.converged.to_string(),
    ]
}

fn parse_diag(path: &Path, row: &[String]) -> Result<(usize, JkoStepDiagnostics)> {
    let bad = |what: &str| Error::Format { path: path.to_path_buf(), reason: format!("bad {what} in diagnostics row {row:?}") };
    if row.len() != DIAG_COLUMNS.len() {
        return Err(bad("field count"));
    }
    let f = |i: usize| row[i].parse::<f64>().map_err(|_| bad(DIAG_COLUMNS[i]));
    Ok((
        row[0].parse().map_err(|_| bad("step"))?,
        JkoStepDiagnostics {
            objective_initial: f(2)?,
            objective_final: f(3)?,
            inner_iters: row[4].parse().map_err(|_| bad("inner_iters"))?,
            w2_sq_moved: f(5)?,
            el_residual: f(6)?,
            edge_slope_indicator: f(7)?,
            rel_gradient: f(8)?,
            max_shift: f(9)?,
            converged: row[10].parse().map_err(|_| bad("converged"))?,
        },
    ))
}

fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(SNAPSHOT_DIR).join(format!("{step:06}.csv"))
}

fn write_state(dir: &Path, s: &JkoSnapshot) -> Result<()> {
    write_json(
        &dir.join(STATE_FILE),
        &StateFile { step: s.step, time: s.time, mass: s.state.mass(), positions: s.state.positions().to_vec() },
    )
}

/// Writes a complete trajectory directory.
pub fn write_trajectory_dir(dir: &Path, run: &RunConfig, traj: &JkoTrajectory) -> Result<()> {
    write_json(&dir.join(CONFIG_FILE), &TrajectoryDir { run: run.clone(), jko: traj.config.clone(), smyth: traj.smyth })?;
    for s in &traj.snapshots {
        write_quantile_csv(&snapshot_path(dir, s.step), &s.state)?;
    }
    let p = &traj.config.record.p_values;
    write_table(&dir.join(RECORDS_FILE), &FunctionalRecord::csv_header(p), traj.records().map(|r| r.csv_row()))?;
    let header: Vec<String> = DIAG_COLUMNS.iter().map(|s| s.to_string()).collect();
    write_table(&dir.join(DIAGNOSTICS_FILE), &header, traj.snapshots.iter().map(diag_row))?;
    if let Some(last) = traj.snapshots.last() {
        write_state(dir, last)?;
    }
    Ok(())
}

/// Appends snapshots `new` to an existing trajectory directory, keeping
/// previously written rows untouched.
pub fn append_trajectory_dir(dir: &Path, new: &[JkoSnapshot]) -> Result<()> {
    if new.is_empty() {
        return Ok(());
    }
    for s in new {
        write_quantile_csv(&snapshot_path(dir, s.step), &s.state)?;
    }
    let (header, mut rows) = read_table(&dir.join(RECORDS_FILE))?;
    rows.extend(new.iter().map(|s| s.record.csv_row()));
    write_table(&dir.join(RECORDS_FILE), &header, rows)?;
    let (header, mut rows) = read_table(&dir.join(DIAGNOSTICS_FILE))?;
    rows.extend(new.iter().map(diag_row));
    write_table(&dir.join(DIAGNOSTICS_FILE), &header, rows)?;
    write_state(dir, new.last().expect("nonempty"))
}

/// Reads a trajectory directory back into memory.
pub fn read_trajectory_dir(dir: &Path) -> Result<(RunConfig, JkoTrajectory)> {
    let meta: TrajectoryDir = read_json(&dir.join(CONFIG_FILE))?;
    let rec_path = dir.join(RECORDS_FILE);
    let (header, rows) = read_table(&rec_path)?;
    let records = rows
        .iter()
        .map(|r| FunctionalRecord::from_csv_row(&header, r).map_err(|reason| Error::Format { path: rec_path.clone(), reason }))
        .collect::<Result<Vec<_>>>()?;
    let diag_path = dir.join(DIAGNOSTICS_FILE);
    let (_, drows) = read_table(&diag_path)?;
    let diags = drows.iter().map(|r| parse_diag(&diag_path, r)).collect::<Result<Vec<_>>>()?;
    if diags.len() != records.len() {
        return Err(Error::Format { path: diag_path, reason: "row count differs from records.csv".into() });
    }
    let mut snapshots = Vec::with_capacity(records.len());
    for (record, (step, diagnostics)) in records.into_iter().zip(diags) {
        let path = snapshot_path(dir, step);
        let state = read_quantile_csv(&path)?;
        if (state.mass() - meta.smyth.mass()).abs() > 1e-8 * meta.smyth.mass() {
            return Err(Error::Format { path, reason: "snapshot mass differs from the run mass".into() });
        }
        let state = QuantileDensity::new(meta.smyth.mass(), state.into_positions())?;
        snapshots.push(JkoSnapshot { step, time: record.time, state, record, diagnostics });
    }
    if snapshots.is_empty() {
        return Err(Error::Format { path: rec_path, reason: "trajectory has no snapshots".into() });
    }
    Ok((meta.run, JkoTrajectory { config: meta.jko, smyth: meta.smyth, snapshots }))
}

/// Runs a configuration from scratch and writes its directory.
pub fn simulate_to_dir(run: &RunConfig, dir: &Path) -> std::result::Result<JkoTrajectory, RunFailure> {
    let fail = |error| RunFailure {
        partial: Box::new(JkoTrajectory { config: run.jko_config(), smyth: SmythHill::new(run.mass.max(1e-300)).unwrap_or_else(|_| SmythHill::with_radius(1.0).expect("unit radius")), snapshots: Vec::new() }),
        error,
    };
    run.validate().map_err(fail)?;
    let (q0, sh) = run.initial_state().map_err(fail)?;
    let mut stored = run.clone();
    stored.mass = sh.mass();
    let mut traj = start(q0, &run.jko_config(), &sh).map_err(fail)?;
    let outcome = extend(&mut traj, run.t_final, |_| Ok(()));
    let written = write_trajectory_dir(dir, &stored, &traj);
    match (outcome, written) {
        (Ok(()), Ok(())) => Ok(traj),
        (Err(error), _) | (Ok(()), Err(error)) => Err(RunFailure { partial: Box::new(traj), error }),
    }
}

/// Continues the run stored in `dir` up to `t_final` (the stored final
/// time when `None`) and appends the new snapshots.
pub fn resume_trajectory(dir: &Path, t_final: Option<f64>) -> std::result::Result<JkoTrajectory, RunFailure> {
    let empty = |error| RunFailure {
        partial: Box::new(JkoTrajectory { config: JkoConfig::default(), smyth: SmythHill::with_radius(1.0).expect("unit radius"), snapshots: Vec::new() }),
        error,
    };
    let meta: TrajectoryDir = read_json(&dir.join(CONFIG_FILE)).map_err(empty)?;
    let state: StateFile = read_json(&dir.join(STATE_FILE)).map_err(empty)?;
    let q = QuantileDensity::new(state.mass, state.positions).map_err(empty)?;
    let rec = crate::functionals::record(&q, state.time, &meta.smyth, &meta.jko.record).map_err(empty)?;
    let mut traj = JkoTrajectory {
        config: meta.jko.clone(),
        smyth: meta.smyth,
        snapshots: vec![JkoSnapshot { step: state.step, time: state.time, state: q, record: rec, diagnostics: JkoStepDiagnostics::default() }],
    };
    let target = t_final.unwrap_or(meta.run.t_final);
    let outcome = extend(&mut traj, target, |_| Ok(()));
    let new = &traj.snapshots[1..];
    let mut written = append_trajectory_dir(dir, new);
    if written.is_ok() && target > meta.run.t_final {
        let mut run = meta.run.clone();
        run.t_final = target;
        written = write_json(&dir.join(CONFIG_FILE), &TrajectoryDir { run, jko: meta.jko, smyth: meta.smyth });
    }
    match (outcome, written) {
        (Ok(()), Ok(())) => Ok(traj),
        (Err(error), _) | (Ok(()), Err(error)) => Err(RunFailure { partial: Box::new(traj), error }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_condition_text_round_trip() {
        for s in ["smyth-translated:0.5", "smyth-dilated:1.25", "two-bump:-0.4,0.5,0.5,0.3,2", "smyth-gaussian:0.05,1", "from-file:v0.csv"] {
            let ic: InitialCondition = s.parse().unwrap();
            assert_eq!(ic.to_string(), s);
        }
        assert!("two-bump:1,2".parse::<InitialCondition>().is_err());
        assert!("nonsense".parse::<InitialCondition>().is_err());
    }

    #[test]
    fn two_bump_has_requested_mass() {
        let run = RunConfig {
            initial_condition: "two-bump:-0.5,0.4,0.4,0.3,2".parse().unwrap(),
            n_cells: 64,
            ..RunConfig::default()
        };
        let (q, sh) = run.initial_state().unwrap();
        assert!((q.mass() - run.mass).abs() < 1e-12);
        assert!((sh.mass() - run.mass).abs() < 1e-12);
    }
}
