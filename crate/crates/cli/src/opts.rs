//! Command-line options and their merge with `--config` files.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

/// Simulate the rescaled thin-film equation with the JKO scheme and check
/// its Lyapunov functionals and convergence rates.
#[derive(Debug, Parser)]
#[command(name = "thinfilm", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the JKO scheme and write a trajectory directory.
    Simulate(SimulateOpts),
    /// Run the inequality suites on a trajectory directory.
    Check(CheckOpts),
    /// Fit exponential convergence rates along a trajectory.
    Rates(RatesOpts),
    /// Print the Wasserstein distance between two density files.
    W2(W2Opts),
    /// Compare the JKO scheme with the finite-difference oracle.
    Crossval(CrossvalOpts),
    /// Continue a stored run to a later final time.
    Resume(ResumeOpts),
}

/// Reads a `--config` file into the option struct of a subcommand; a
/// missing path yields all-unset options.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

/// Parses a kebab-case enum name through its serde representation.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Replaces each field of `flags` by the value from `file` when the file
/// sets it.
macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn resolve(self) -> Result<Self, CliError> {
                let file: $ty = load_config(self.config.as_deref())?;
                Ok(Self { $($field: file.$field.or(self.$field),)* config: self.config })
            }
        }
    };
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOpts {
    /// JSON config file; its values take precedence over flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Initial condition: smyth-translated:D, smyth-dilated:L,
    /// two-bump:C1,W1,C2,W2,RATIO, smyth-gaussian:A,W or from-file:PATH.
    #[arg(long = "ic")]
    pub initial_condition: Option<String>,
    /// Mass M.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Time step.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Number of quantile cells N.
    #[arg(long = "cells")]
    pub n_cells: Option<usize>,
    /// Final time.
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Exponents p of the recorded |||.|||_{p,1} norms.
    #[arg(long = "p", value_delimiter = ',')]
    pub p_values: Option<Vec<f64>>,
    /// Seed of randomized suites run on the trajectory.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Relative gradient tolerance of the inner solver.
    #[arg(long)]
    pub inner_tol: Option<f64>,
    /// Inner iteration cap.
    #[arg(long)]
    pub max_inner_iters: Option<usize>,
    /// Gap floor.
    #[arg(long)]
    pub eps_mono: Option<f64>,
    /// Inner solver: newton or log-gap-descent.
    #[arg(long)]
    pub solver: Option<String>,
}

overlay!(SimulateOpts {
    initial_condition, mass, tau, n_cells, t_final, p_values, seed, output_dir, inner_tol, max_inner_iters, eps_mono, solver,
});

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOpts {
    /// JSON config file; its values take precedence over flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Trajectory directory.
    pub trajectory: Option<PathBuf>,
    /// Suite: static, dynamic or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// Form of the inequalities: corrected or as-stated.
    #[arg(long)]
    pub form: Option<String>,
    /// Seed of the static corpus; defaults to the run seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of densities in the static corpus.
    #[arg(long)]
    pub count: Option<usize>,
    /// Grid spacing of the static corpus.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Coefficient of tau in the dynamic tolerance.
    #[arg(long)]
    pub c1: Option<f64>,
    /// Coefficient of 1/N in the dynamic tolerance.
    #[arg(long)]
    pub c2: Option<f64>,
    /// JSON report path; defaults to check.json in the trajectory.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

overlay!(CheckOpts { trajectory, suite, form, seed, count, dx, c1, c2, json });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesOpts {
    /// JSON config file; its values take precedence over flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Trajectory directory.
    pub trajectory: Option<PathBuf>,
    /// Exponents p of the |||.|||_{p,1} rates; defaults to the recorded ones.
    #[arg(long = "p", value_delimiter = ',')]
    pub p_values: Option<Vec<f64>>,
    /// Fit window start.
    #[arg(long)]
    pub t_lo: Option<f64>,
    /// Fit window end.
    #[arg(long)]
    pub t_hi: Option<f64>,
    /// Floor as a multiple of each series' initial magnitude.
    #[arg(long)]
    pub floor_factor: Option<f64>,
    /// JSON report path; defaults to rates.json in the trajectory.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// CSV report path; defaults to rates.csv in the trajectory.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Plot-ready series path; defaults to rates_plot.csv in the trajectory.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

overlay!(RatesOpts { trajectory, p_values, t_lo, t_hi, floor_factor, json, csv, plot });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W2Opts {
    /// JSON config file; its values take precedence over flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// First density: grid CSV (x,v) or quantile CSV (s,X).
    pub file_a: Option<PathBuf>,
    /// Second density.
    pub file_b: Option<PathBuf>,
    /// Quantiles of the common resampling; defaults to the larger count
    /// of the two inputs (2000 for grid files).
    #[arg(long = "cells")]
    pub n_cells: Option<usize>,
}

overlay!(W2Opts { file_a, file_b, n_cells });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossvalOpts {
    /// JSON config file; its values take precedence over flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Equilibrium mass.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Relative amplitude of the Gaussian added to the equilibrium.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Standard deviation of the Gaussian.
    #[arg(long)]
    pub width: Option<f64>,
    /// Half width of the finite-difference domain.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Finite-difference grid points.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Final time.
    #[arg(long)]
    pub t_final: Option<f64>,
    /// JKO time step.
    #[arg(long)]
    pub tau: Option<f64>,
    /// JKO cells.
    #[arg(long = "cells")]
    pub n_cells: Option<usize>,
    /// Finite-difference scheme: explicit-euler or semi-implicit.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Finite-difference time step; defaults to the explicit CFL bound.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Positivity floor of the finite-difference oracle.
    #[arg(long)]
    pub positivity_floor: Option<f64>,
    /// Largest accepted L1 gap.
    #[arg(long)]
    pub l1_tol: Option<f64>,
    /// Largest accepted relative mass drift of either method.
    #[arg(long)]
    pub mass_tol: Option<f64>,
    /// Directory for the report and both final states.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
}

overlay!(CrossvalOpts {
    mass, amplitude, width, half_width, grid_points, t_final, tau, n_cells, scheme, dt, positivity_floor, l1_tol, mass_tol, output_dir,
});

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResumeOpts {
    /// JSON config file; its values take precedence over flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Trajectory directory.
    pub trajectory: Option<PathBuf>,
    /// New final time; defaults to the stored one.
    #[arg(long)]
    pub t_final: Option<f64>,
}

overlay!(ResumeOpts { trajectory, t_final });
