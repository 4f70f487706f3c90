//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thinfilm::fdm::{cross_validate, CrossvalConfig, FdmConfig, FdmScheme, DEFAULT_CFL, DEFAULT_POSITIVITY_FLOOR};
use thinfilm::inequalities::{
    dynamic_suite, static_corpus, static_suite, summarize, summary_table, DynamicTolerance, Form, InequalityReport,
    SuiteSummary,
};
use thinfilm::io::{read_grid_csv, read_quantile_csv, read_table, write_grid_csv, write_json, write_quantile_csv};
use thinfilm::jko::{read_trajectory_dir, resume_trajectory, simulate_to_dir, InitialCondition, RunFailure};
use thinfilm::rates::{convergence_report, write_plot_data, RateOptions};
use thinfilm::transport::resample;
use thinfilm::{grid_to_quantile, JkoTrajectory, QuantileDensity, RunConfig};

use crate::opts::{parse_enum, CheckOpts, CrossvalOpts, RatesOpts, ResumeOpts, SimulateOpts, W2Opts};
use crate::{CliError, Outcome};

/// Grid spacing of the static corpus.
const DEFAULT_CORPUS_DX: f64 = 5e-4;
const DEFAULT_CORPUS_SIZE: usize = 100;
const DEFAULT_W2_GRID_QUANTILES: usize = 2000;
const DEFAULT_L1_TOL: f64 = 1e-2;
const DEFAULT_MASS_TOL: f64 = 1e-8;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn required<T>(value: Option<T>, what: &str) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("missing {what}")))
}

fn summary_line(traj: &JkoTrajectory) -> String {
    let last = traj.last();
    format!(
        "{} snapshots, t = {}, H_rel = {:.6e}, E_rel = {:.6e}",
        traj.snapshots.len(),
        last.time,
        last.record.H_rel,
        last.record.E_rel
    )
}

fn run_failure(f: RunFailure) -> CliError {
    let done = f.partial.snapshots.len();
    let e = CliError::from(f.error);
    match e {
        CliError::Domain(msg) => CliError::Domain(format!("{msg} ({done} snapshots kept)")),
        usage => usage,
    }
}

/// Builds the run configuration from merged options and defaults.
pub fn run_config(o: SimulateOpts) -> Result<RunConfig, CliError> {
    let o = o.resolve()?;
    let d = RunConfig::default();
    Ok(RunConfig {
        initial_condition: match o.initial_condition {
            Some(s) => s.parse::<InitialCondition>()?,
            None => d.initial_condition,
        },
        mass: o.mass.unwrap_or(d.mass),
        tau: o.tau.unwrap_or(d.tau),
        n_cells: o.n_cells.unwrap_or(d.n_cells),
        t_final: o.t_final.unwrap_or(d.t_final),
        p_values: o.p_values.unwrap_or(d.p_values),
        seed: o.seed.unwrap_or(d.seed),
        output_dir: o.output_dir.or(d.output_dir),
        inner_tol: o.inner_tol.unwrap_or(d.inner_tol),
        max_inner_iters: o.max_inner_iters.unwrap_or(d.max_inner_iters),
        eps_mono: o.eps_mono.or(d.eps_mono),
        solver: match o.solver {
            Some(s) => parse_enum(&s).map_err(|e| usage(format!("solver: {e}")))?,
            None => d.solver,
        },
    })
}

pub fn simulate(o: SimulateOpts) -> Result<Outcome, CliError> {
    let run = run_config(o)?;
    let dir = required(run.output_dir.clone(), "output directory (--out)")?;
    let traj = simulate_to_dir(&run, &dir).map_err(run_failure)?;
    println!("{}: {}", dir.display(), summary_line(&traj));
    Ok(Outcome::Pass)
}

pub fn resume(o: ResumeOpts) -> Result<Outcome, CliError> {
    let o = o.resolve()?;
    let dir = required(o.trajectory, "trajectory directory")?;
    let traj = resume_trajectory(&dir, o.t_final).map_err(run_failure)?;
    println!("{}: {} new snapshots, t = {}", dir.display(), traj.snapshots.len() - 1, traj.last().time);
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    trajectory: &'a Path,
    suite: &'a str,
    form: Form,
    tolerance: DynamicTolerance,
    passed: bool,
    summaries: Vec<SuiteSummary>,
    reports: Vec<InequalityReport>,
}

pub fn check(o: CheckOpts) -> Result<Outcome, CliError> {
    let o = o.resolve()?;
    let dir = required(o.trajectory, "trajectory directory")?;
    let suite = o.suite.unwrap_or_else(|| "all".into());
    let (with_static, with_dynamic) = match suite.as_str() {
        "static" => (true, false),
        "dynamic" => (false, true),
        "all" => (true, true),
        other => return Err(usage(format!("suite must be static, dynamic or all, got {other:?}"))),
    };
    let form: Form = match o.form {
        Some(s) => parse_enum(&s).map_err(|e| usage(format!("form: {e}")))?,
        None => Form::default(),
    };
    let tolerance = DynamicTolerance {
        c1: o.c1.unwrap_or(DynamicTolerance::CALIBRATED.c1),
        c2: o.c2.unwrap_or(DynamicTolerance::CALIBRATED.c2),
    };
    let (run, traj) = read_trajectory_dir(&dir)?;
    for s in &traj.snapshots {
        if s.state.positions().iter().any(|x| !x.is_finite()) {
            return Err(CliError::Domain(format!("snapshot {} of {} is not finite", s.step, dir.display())));
        }
    }
    let mut reports = Vec::new();
    if with_static {
        let corpus = static_corpus(
            o.seed.unwrap_or(run.seed),
            o.count.unwrap_or(DEFAULT_CORPUS_SIZE),
            &traj.smyth,
            o.dx.unwrap_or(DEFAULT_CORPUS_DX),
        )?;
        reports.extend(static_suite(&corpus, &traj.smyth, form)?);
    }
    if with_dynamic {
        reports.extend(dynamic_suite(&traj, form, tolerance)?);
    }
    let passed = reports.iter().all(|r| r.passed);
    print!("{}", summary_table(&reports));
    let json = o.json.unwrap_or_else(|| dir.join("check.json"));
    write_json(
        &json,
        &CheckOutput { trajectory: &dir, suite: &suite, form, tolerance, passed, summaries: summarize(&reports), reports },
    )?;
    println!("{} ({})", if passed { "PASS" } else { "FAIL" }, json.display());
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

pub fn rates(o: RatesOpts) -> Result<Outcome, CliError> {
    let o = o.resolve()?;
    let dir = required(o.trajectory, "trajectory directory")?;
    let (_, traj) = read_trajectory_dir(&dir)?;
    let d = RateOptions::default();
    let p_values = o.p_values.unwrap_or_else(|| traj.config.record.p_values.clone());
    let opts = RateOptions {
        t_lo: o.t_lo.or(d.t_lo),
        t_hi: o.t_hi.or(d.t_hi),
        floor_factor: o.floor_factor.unwrap_or(d.floor_factor),
        p_values: p_values.clone(),
        ..d
    };
    let report = convergence_report(&traj, &opts)?;
    report.write_json(&o.json.unwrap_or_else(|| dir.join("rates.json")))?;
    report.write_csv(&o.csv.unwrap_or_else(|| dir.join("rates.csv")))?;
    write_plot_data(&traj, &p_values, &o.plot.unwrap_or_else(|| dir.join("rates_plot.csv")))?;
    print!("{}", report.table());
    let passed = report.passed();
    println!("{}", if passed { "PASS" } else { "FAIL" });
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

/// Reads a grid (`x,v`) or quantile (`s,X`) CSV and returns it as
/// quantiles; grid files are converted with `grid_quantiles` cells.
fn read_density(path: &Path, grid_quantiles: usize) -> Result<(QuantileDensity, bool), CliError> {
    let (header, _) = read_table(path)?;
    match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "v"] => Ok((grid_to_quantile(&read_grid_csv(path)?, grid_quantiles)?, true)),
        ["s", "X"] => Ok((read_quantile_csv(path)?, false)),
        _ => Err(CliError::Domain(format!("{}: header must be x,v or s,X", path.display()))),
    }
}

pub fn w2(o: W2Opts) -> Result<Outcome, CliError> {
    let o = o.resolve()?;
    let a_path = required(o.file_a, "first density file")?;
    let b_path = required(o.file_b, "second density file")?;
    let grid_n = o.n_cells.unwrap_or(DEFAULT_W2_GRID_QUANTILES);
    let (a, a_grid) = read_density(&a_path, grid_n)?;
    let (b, b_grid) = read_density(&b_path, grid_n)?;
    let n = o.n_cells.unwrap_or_else(|| match (a_grid, b_grid) {
        (false, false) => a.n().max(b.n()),
        (false, true) => a.n().max(grid_n),
        (true, false) => b.n().max(grid_n),
        (true, true) => grid_n,
    });
    let (a, b) = (resample(&a, n)?, resample(&b, n)?);
    if (a.mass() - b.mass()).abs() > DEFAULT_MASS_TOL * a.mass().max(b.mass()) {
        return Err(CliError::Domain(format!("masses differ: {} vs {}", a.mass(), b.mass())));
    }
    let b = QuantileDensity::new(a.mass(), b.into_positions())?;
    println!("{}", thinfilm::w2(&a, &b)?);
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct CrossvalOutput<'a> {
    config: &'a CrossvalConfig,
    l1_gap: f64,
    l1_motion: f64,
    l1_initial_gap: f64,
    fdm_mass_drift: f64,
    jko_mass_drift: f64,
    fdm_energy: [f64; 2],
    l1_tol: f64,
    mass_tol: f64,
    passed: bool,
}

pub fn crossval(o: CrossvalOpts) -> Result<Outcome, CliError> {
    let o = o.resolve()?;
    let d = CrossvalConfig::default();
    let mut cfg = CrossvalConfig {
        mass: o.mass.unwrap_or(d.mass),
        amplitude: o.amplitude.unwrap_or(d.amplitude),
        width: o.width.unwrap_or(d.width),
        half_width: o.half_width.unwrap_or(d.half_width),
        grid_points: o.grid_points.unwrap_or(d.grid_points),
        t_final: o.t_final.unwrap_or(d.t_final),
        tau: o.tau.unwrap_or(d.tau),
        n_cells: o.n_cells.unwrap_or(d.n_cells),
        fdm: None,
    };
    if cfg.grid_points < 2 {
        return Err(usage("grid_points must be at least 2"));
    }
    let scheme: FdmScheme = match o.scheme {
        Some(s) => parse_enum(&s).map_err(|e| usage(format!("scheme: {e}")))?,
        None => FdmScheme::default(),
    };
    if o.dt.is_some() || o.positivity_floor.is_some() || scheme != FdmScheme::default() {
        let dx = 2.0 * cfg.half_width / (cfg.grid_points - 1) as f64;
        cfg.fdm = Some(FdmConfig {
            dt: o.dt.unwrap_or(DEFAULT_CFL * dx.powi(4)),
            scheme,
            positivity_floor: o.positivity_floor.unwrap_or(DEFAULT_POSITIVITY_FLOOR),
            cfl: DEFAULT_CFL,
        });
    }
    let l1_tol = o.l1_tol.unwrap_or(DEFAULT_L1_TOL);
    let mass_tol = o.mass_tol.unwrap_or(DEFAULT_MASS_TOL);
    let r = cross_validate(&cfg)?;
    let passed = r.l1_gap <= l1_tol && r.fdm_mass_drift <= mass_tol && r.jko_mass_drift <= mass_tol;
    println!("l1 gap          {:.6e} (tolerance {l1_tol:e})", r.l1_gap);
    println!("l1 motion       {:.6e}", r.l1_motion);
    println!("l1 initial gap  {:.6e}", r.l1_initial_gap);
    println!("fdm mass drift  {:.3e}", r.fdm_mass_drift);
    println!("jko mass drift  {:.3e}", r.jko_mass_drift);
    println!("fdm energy      {:.9} -> {:.9}", r.fdm_energy[0], r.fdm_energy[1]);
    println!("{}", if passed { "PASS" } else { "FAIL" });
    if let Some(out) = o.output_dir {
        write_out(&out, &cfg, &r, l1_tol, mass_tol, passed)?;
    }
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

fn write_out(
    out: &PathBuf,
    cfg: &CrossvalConfig,
    r: &thinfilm::fdm::CrossvalReport,
    l1_tol: f64,
    mass_tol: f64,
    passed: bool,
) -> Result<(), CliError> {
    write_json(
        &out.join("crossval.json"),
        &CrossvalOutput {
            config: cfg,
            l1_gap: r.l1_gap,
            l1_motion: r.l1_motion,
            l1_initial_gap: r.l1_initial_gap,
            fdm_mass_drift: r.fdm_mass_drift,
            jko_mass_drift: r.jko_mass_drift,
            fdm_energy: r.fdm_energy,
            l1_tol,
            mass_tol,
            passed,
        },
    )?;
    write_grid_csv(&out.join("fdm_final.csv"), &r.fdm_final)?;
    write_quantile_csv(&out.join("jko_final.csv"), &r.jko_final)?;
    Ok(())
}
