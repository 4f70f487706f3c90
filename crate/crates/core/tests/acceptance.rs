//! Acceptance criteria. Every test writes one `criterion ...: PASS|FAIL`
//! line to standard error, outside the test harness' capture, so the lines
//! appear in the output of `cargo test`.
//!
//! Variants that check an inequality or constant in its originally stated
//! form are `#[ignore]`d: they fail, and the corrected variant is the gate.
//! The failing values are printed by the gated tests as well.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thinfilm::fdm::{cross_validate, face_third_derivative, CrossvalConfig};
use thinfilm::inequalities::{
    decay_constant, energy_decay_reports, entropy_step_reports, k3_constant, static_corpus, static_suite,
    summarize, DynamicTolerance, Form, InequalityReport, STATIC_TOLERANCE,
};
use thinfilm::jko::{read_trajectory_dir, run_from_quantiles, simulate_to_dir, RunConfig, RECORDS_FILE};
use thinfilm::rates::fit_rate;
use thinfilm::transport::{w2_sq_atoms_quantile, w2_sq_bruteforce, Atom};
use thinfilm::{record, Functionals, JkoTrajectory, RecordOptions, SmythHill};

fn line(criterion: &str, passed: bool, detail: impl AsRef<str>) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion}: {verdict} | {}", detail.as_ref());
}

fn acceptance_config() -> RunConfig {
    RunConfig {
        initial_condition: "smyth-translated:0.5".parse().unwrap(),
        mass: 2.0 / 45.0,
        tau: 1e-3,
        n_cells: 400,
        t_final: 3.0,
        ..RunConfig::default()
    }
}

/// The dissipation run of criteria 4 and 5, computed once per test binary.
fn acceptance_run() -> &'static (JkoTrajectory, Duration) {
    static RUN: OnceLock<(JkoTrajectory, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let run = acceptance_config();
        let start = Instant::now();
        let (q0, sh) = run.initial_state().unwrap();
        let traj = run_from_quantiles(q0, run.t_final, &run.jko_config(), &sh).map_err(|f| f.error).unwrap();
        (traj, start.elapsed())
    })
}

// ---------------------------------------------------------------- 1

fn random_atoms(rng: &mut ChaCha8Rng, total: f64) -> Vec<Atom> {
    let k = rng.gen_range(1..=8);
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| Atom { position: rng.gen_range(-3.0..3.0), mass: total * w / sum }).collect()
}

#[test]
fn criterion_1_quantile_w2_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let total = rng.gen_range(0.5..2.0);
        let (a, b) = (random_atoms(&mut rng, total), random_atoms(&mut rng, total));
        let q = w2_sq_atoms_quantile(&a, &b).unwrap();
        let lp = w2_sq_bruteforce(&a, &b).unwrap();
        worst = worst.max((q - lp).abs() / lp.max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    let passed = worst <= 1e-9 && elapsed < Duration::from_secs(10);
    line("1 (OT oracle equivalence)", passed, format!("200 pairs, worst relative gap {worst:.2e}, {elapsed:.2?}"));
    assert!(passed);
}

// ---------------------------------------------------------------- 2

const N_EQ: usize = 2000;

/// Largest `|v_xxx - x|` on `|x| <= 0.9 C`, with `v_xxx` from the
/// flux stencil of the finite-difference oracle on `n` uniform points
/// across the support.
fn vxxx_defect(sh: &SmythHill, n: usize) -> f64 {
    let c = sh.support_radius();
    let dx = 2.0 * c / (n - 1) as f64;
    let v = sh.sample(-c, dx, n).unwrap();
    face_third_derivative(&v)
        .into_iter()
        .filter(|(x, _)| x.abs() <= 0.9 * c)
        .map(|(x, d3)| (d3 - x).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_2_equilibrium_identities() {
    let start = Instant::now();
    let sh = SmythHill::with_radius(1.0).unwrap();
    let q = sh.quantiles(N_EQ).unwrap();
    let rec = record(&q, 0.0, &sh, &RecordOptions::default()).unwrap();
    // Closed forms at C = 1, checked symbolically: mass 2/45, alpha 1/315,
    // beta 2/945, H 1/63, M4 2/945, v_xxx = x.
    let checks = [
        ("alpha", rec.alpha, 1.0 / 315.0),
        ("beta", rec.beta, 2.0 / 945.0),
        ("H", rec.H, 1.0 / 63.0),
        ("M4", rec.M4, 2.0 / 945.0),
        ("D", rec.D, 0.0),
    ];
    let mut detail = Vec::new();
    let mut passed = true;
    for (name, got, want) in checks {
        let err = (got - want).abs();
        passed &= err <= 1e-6;
        detail.push(format!("{name} err {err:.1e}"));
    }
    let v3 = vxxx_defect(&sh, N_EQ);
    passed &= v3 <= 1e-6;
    detail.push(format!("vxxx-x {v3:.1e}"));
    let elapsed = start.elapsed();
    passed &= elapsed < Duration::from_secs(5);
    line("2 (equilibrium identities)", passed, format!("{}, {elapsed:.2?}", detail.join(", ")));
    let literal = (rec.M4 - 8.0 / 2835.0).abs();
    line(
        "2 (M4 = 8/2835 as stated)",
        literal <= 1e-6,
        format!("M4 = {:.6e}, off by {literal:.2e}; the closed form is 2/945", rec.M4),
    );
    assert!(passed);
}

#[test]
#[ignore = "the stated constant 8/2835 is not the fourth moment of the C = 1 profile (2/945)"]
fn criterion_2_fourth_moment_as_stated() {
    let sh = SmythHill::with_radius(1.0).unwrap();
    let q = sh.quantiles(N_EQ).unwrap();
    assert!((q.moment(4) - 8.0 / 2835.0).abs() <= 1e-6);
}

// ---------------------------------------------------------------- 3

const CORPUS_SEED: u64 = 2024;
const CORPUS_SIZE: usize = 100;
const CORPUS_DX: f64 = 5e-4;

fn static_reports(form: Form) -> (Vec<InequalityReport>, Duration) {
    let start = Instant::now();
    let sh = SmythHill::new(2.0 / 45.0).unwrap();
    let corpus = static_corpus(CORPUS_SEED, CORPUS_SIZE, &sh, CORPUS_DX).unwrap();
    let reports = static_suite(&corpus, &sh, form).unwrap();
    (reports, start.elapsed())
}

#[test]
fn criterion_3_static_suite() {
    let (reports, elapsed) = static_reports(Form::Corrected);
    let summaries = summarize(&reports);
    let required = ["h1", "h1a", "infbnd", "pkl", "talagrand", "entsecmo", "displacement-convexity"];
    let present = required.iter().all(|name| summaries.iter().any(|s| s.name == *name));
    let passed = present && summaries.iter().all(|s| s.all_passed()) && elapsed < Duration::from_secs(120);
    let detail: Vec<String> = summaries.iter().map(|s| format!("{} {}/{}", s.name, s.passed, s.total)).collect();
    line("3 (static suite, tol 1e-6)", passed, format!("{}, {elapsed:.2?}", detail.join(", ")));

    let (stated, _) = static_reports(Form::AsStated);
    for s in summarize(&stated) {
        if s.name.starts_with("talagrand") || s.name.starts_with("displacement-convexity") {
            line(&format!("3 ({})", s.name), s.all_passed(), format!("{}/{} pass", s.passed, s.total));
        }
    }
    assert!(STATIC_TOLERANCE == 1e-6);
    assert!(passed);
}

#[test]
#[ignore = "W2^2 <= H_rel and the unit displacement-convexity coefficient fail; the corrected forms are gated"]
fn criterion_3_talagrand_and_convexity_as_stated() {
    let (reports, _) = static_reports(Form::AsStated);
    for s in summarize(&reports) {
        assert!(s.all_passed(), "{s}");
    }
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_4a_entropy_monotone_and_per_step_dissipation() {
    let (traj, _) = acceptance_run();
    let h: Vec<f64> = traj.records().map(|r| r.H_rel).collect();
    let increases = h.windows(2).filter(|w| w[1] >= w[0]).count();
    let fraction = |form: Form| {
        let reports = entropy_step_reports(traj, form, DynamicTolerance::CALIBRATED);
        let step: Vec<_> = reports.iter().filter(|r| r.name.starts_with("entropy-dissipation-step")).collect();
        step.iter().filter(|r| r.passed).count() as f64 / step.len() as f64
    };
    let corrected = fraction(Form::Corrected);
    let passed = increases == 0 && corrected >= 0.99;
    line(
        "4a (H_rel monotone, per-step dissipation)",
        passed,
        format!("{increases} non-decreasing steps of {}, dissipation holds on {:.2}% of steps", h.len() - 1, 100.0 * corrected),
    );
    let stated = fraction(Form::AsStated);
    line("4a (per-step dissipation with the extra term, as stated)", stated >= 0.99, format!("holds on {:.2}% of steps", 100.0 * stated));
    assert!(passed);
}

#[test]
#[ignore = "the extra dissipation term is positive at equilibrium, where the entropy change and D vanish"]
fn criterion_4a_per_step_dissipation_as_stated() {
    let (traj, _) = acceptance_run();
    let reports = entropy_step_reports(traj, Form::AsStated, DynamicTolerance::CALIBRATED);
    let step: Vec<_> = reports.iter().filter(|r| r.name.starts_with("entropy-dissipation-step")).collect();
    let ok = step.iter().filter(|r| r.passed).count() as f64 / step.len() as f64;
    assert!(ok >= 0.99, "holds on {ok}");
}

const WINDOW: (f64, f64) = (0.5, 2.5);

fn fitted(traj: &JkoTrajectory, f: impl Fn(&thinfilm::FunctionalRecord) -> f64) -> (f64, f64) {
    let series: Vec<(f64, f64)> = traj.records().map(|r| (r.time, f(r))).collect();
    let floor = 1e-10 * series[0].1.abs();
    let fit = fit_rate(&series, WINDOW, floor).unwrap();
    (fit.rate, fit.r_squared)
}

#[test]
fn criterion_4b_to_4e_decay_rates() {
    let (traj, elapsed) = acceptance_run();
    let checks = [
        ("4b (H_rel rate >= 1.8)", fitted(traj, |r| r.H_rel), 1.8),
        ("4c (|alpha_rel| rate >= 0.85)", fitted(traj, |r| r.alpha_rel.abs()), 0.85),
        ("4d (norm11_sq rate >= 0.85)", fitted(traj, |r| r.norm11_sq), 0.85),
        ("4e (normp1_sq p=1.5 rate >= 0.4)", fitted(traj, |r| r.normp1(1.5).unwrap()), 0.4),
    ];
    let mut all = true;
    for (name, (rate, r2), threshold) in checks {
        let passed = rate >= threshold;
        all &= passed;
        line(name, passed, format!("rate {rate:.4} on [0.5, 2.5], r2 {r2:.6}, run {elapsed:.2?}"));
    }
    let (e_rate, _) = fitted(traj, |r| r.E_rel);
    line("4 (E_rel rate, observation)", true, format!("rate {e_rate:.4}"));
    assert!(all);
}

#[test]
fn criterion_4f_fourth_moment_bound() {
    let (traj, _) = acceptance_run();
    let r0 = &traj.snapshots[0].record;
    let k3 = k3_constant(traj, Form::Corrected);
    let max_m4 = traj.records().map(|r| r.M4).fold(f64::NEG_INFINITY, f64::max);
    let rhs = r0.M4 + k3 * r0.H_rel;
    let passed = max_m4 <= rhs;
    line("4f (max M4 <= M4(v0) + K3 H_rel(0))", passed, format!("max M4 {max_m4:.6e} <= {rhs:.6e} (K3 {k3:.4})"));
    assert!(passed);
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_energy_decay_chain() {
    let (traj, _) = acceptance_run();
    let zero = DynamicTolerance { c1: 0.0, c2: 0.0 };
    let reports = energy_decay_reports(traj, zero).unwrap();
    let in_window: Vec<_> = reports.iter().filter(|r| r.context["time"] <= 3.0 + 1e-9).collect();
    let worst = in_window.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let passed = !in_window.is_empty() && in_window.iter().all(|r| r.slack >= 0.0);
    line(
        "5 (E_rel(T) <= (K/3)(1+6e)e^-T on [1, 3])",
        passed,
        format!("{} snapshots, K {:.4e}, smallest slack {worst:.3e}", in_window.len(), decay_constant(traj)),
    );
    assert!(passed);
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_cross_validation() {
    let mut all = true;
    for (label, amplitude) in [("default datum", CrossvalConfig::default().amplitude), ("amplitude 0.05", 0.05)] {
        let cfg = CrossvalConfig { amplitude, ..CrossvalConfig::default() };
        let start = Instant::now();
        let r = cross_validate(&cfg).unwrap();
        let passed = r.l1_gap <= 1e-2 && r.fdm_mass_drift <= 1e-8 && r.jko_mass_drift <= 1e-8;
        all &= passed;
        line(
            &format!("6 (JKO vs FDM, {label})"),
            passed,
            format!(
                "L1 gap {:.3e} (motion {:.3e}, initial representation gap {:.3e}), mass drift fdm {:.1e} jko {:.1e}, {:.2?}",
                r.l1_gap,
                r.l1_motion,
                r.l1_initial_gap,
                r.fdm_mass_drift,
                r.jko_mass_drift,
                start.elapsed()
            ),
        );
    }
    assert!(all);
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_7_el_residual_refinement() {
    let mut maxima = Vec::new();
    for (tau, n) in [(1e-3, 200), (5e-4, 400), (2.5e-4, 800)] {
        let run = RunConfig { tau, n_cells: n, t_final: 0.5, ..acceptance_config() };
        let (q0, sh) = run.initial_state().unwrap();
        let traj = run_from_quantiles(q0, run.t_final, &run.jko_config(), &sh).map_err(|f| f.error).unwrap();
        let worst = traj
            .snapshots
            .iter()
            .filter(|s| s.time >= 0.1)
            .map(|s| s.diagnostics.el_residual)
            .fold(0.0, f64::max);
        maxima.push(worst);
    }
    let passed = maxima.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = maxima.iter().map(|m| format!("{m:.3e}")).collect();
    line("7 (EL residual refinement)", passed, format!("max residual on [0.1, 0.5]: {}", shown.join(" > ")));
    assert!(passed);
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let run = acceptance_config();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    simulate_to_dir(&run, &a).map_err(|f| f.error).unwrap();
    simulate_to_dir(&run, &b).map_err(|f| f.error).unwrap();
    let ra = std::fs::read(a.join(RECORDS_FILE)).unwrap();
    let rb = std::fs::read(b.join(RECORDS_FILE)).unwrap();
    let (_, back) = read_trajectory_dir(&a).unwrap();
    let passed = ra == rb && back.snapshots.len() == 3001;
    line("8 (determinism)", passed, format!("records.csv {} bytes, identical: {}", ra.len(), ra == rb));
    assert!(passed);
}
