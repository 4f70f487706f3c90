use thinfilm::inequalities::{
    calibrate_dynamic_tolerance, calibrate_m4_tolerance, static_corpus, Form, static_suite, DynamicTolerance, M4Tolerance,
    CALIBRATION_RUNS, CALIBRATION_TIME,
};
use thinfilm::{smyth_hill, Functionals};

#[test]
fn frozen_dynamic_tolerance_covers_a_fresh_calibration() {
    let sh = smyth_hill(2.0 / 45.0).unwrap();
    let fresh = calibrate_dynamic_tolerance(&CALIBRATION_RUNS, CALIBRATION_TIME, &sh, 2.0).unwrap();
    assert!(DynamicTolerance::CALIBRATED.covers(&fresh), "{fresh:?}");
}

#[test]
fn frozen_m4_tolerance_covers_a_fresh_calibration() {
    let sh = smyth_hill(2.0 / 45.0).unwrap();
    let fresh = calibrate_m4_tolerance(&CALIBRATION_RUNS, CALIBRATION_TIME, &sh, 2.0).unwrap();
    assert!(M4Tolerance::CALIBRATED.covers(&fresh), "{fresh:?}");
}

#[test]
fn static_corpus_is_reproducible_and_mass_normalized() {
    let sh = smyth_hill(2.0 / 45.0).unwrap();
    let a = static_corpus(7, 12, &sh, 1e-3).unwrap();
    let b = static_corpus(7, 12, &sh, 1e-3).unwrap();
    assert_eq!(a, b);
    for v in &a {
        assert!((v.total_mass() - sh.mass()).abs() < 1e-8 * sh.mass());
    }
    let reports = static_suite(&a, &sh, Form::Corrected).unwrap();
    assert!(reports.iter().all(|r| r.passed), "{:?}", reports.iter().find(|r| !r.passed));
}
