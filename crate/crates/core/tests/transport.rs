use proptest::prelude::*;
use thinfilm::transport::{resample, w2_sq_atoms_quantile, w2_sq_bruteforce, Atom};
use thinfilm::{displacement_interpolate, smyth_hill, w2, w2_sq, QuantileDensity};

fn atoms(pairs: &[(f64, f64)]) -> Vec<Atom> {
    pairs.iter().map(|&(position, mass)| Atom { position, mass }).collect()
}

// Optimal values of the transportation linear programs, solved with the
// HiGHS simplex solver at feasibility tolerance 1e-12.
const LP_CASES: [(&[(f64, f64)], &[(f64, f64)], f64); 3] = [
    (&[(0.0, 0.3), (1.0, 0.5), (2.5, 0.2)], &[(-1.0, 0.6), (3.0, 0.4)], 2.35),
    (
        &[(-2.0, 0.25), (-0.5, 0.25), (0.7, 0.25), (1.9, 0.25)],
        &[(0.1, 0.1), (0.2, 0.2), (0.4, 0.3), (2.2, 0.4)],
        1.7225,
    ),
    (&[(0.0, 1.0)], &[(-1.5, 0.2), (0.5, 0.3), (1.0, 0.5)], 1.025),
];

#[test]
fn both_atomic_solvers_match_linear_programming() {
    for (a, b, expected) in LP_CASES {
        let (a, b) = (atoms(a), atoms(b));
        assert!((w2_sq_atoms_quantile(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((w2_sq_bruteforce(&a, &b).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn bruteforce_rejects_oversized_inputs() {
    let many: Vec<Atom> = (0..13).map(|i| Atom { position: i as f64, mass: 1.0 }).collect();
    assert!(w2_sq_bruteforce(&many, &many).is_err());
}

#[test]
fn resampling_the_equilibrium_keeps_w2_small() {
    let sh = smyth_hill(2.0 / 45.0).unwrap();
    let fine = sh.quantiles(4000).unwrap();
    let coarse = resample(&fine, 500).unwrap();
    assert!(w2(&coarse, &sh.quantiles(500).unwrap()).unwrap() < 1e-4);
}

fn quantiles() -> impl Strategy<Value = QuantileDensity> {
    (prop::collection::vec(0.01f64..1.0, 64), -2.0f64..2.0).prop_map(|(gaps, start)| {
        let mut x = start;
        let pos = gaps
            .iter()
            .map(|g| {
                x += g;
                x
            })
            .collect();
        QuantileDensity::new(1.0, pos).unwrap()
    })
}

proptest! {
    #[test]
    fn w2_is_a_metric(a in quantiles(), b in quantiles(), c in quantiles()) {
        let (ab, bc, ac) = (w2(&a, &b).unwrap(), w2(&b, &c).unwrap(), w2(&a, &c).unwrap());
        prop_assert!((ab - w2(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert_eq!(w2(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn translation_costs_mass_times_shift_squared(a in quantiles(), d in -3.0f64..3.0) {
        let moved = a.translated(d).unwrap();
        prop_assert!((w2_sq(&a, &moved).unwrap() - d * d * a.mass()).abs() < 1e-10);
    }

    #[test]
    fn geodesics_have_constant_speed(a in quantiles(), b in quantiles(), t in 0.05f64..0.95) {
        let mid = displacement_interpolate(&a, &b, t).unwrap();
        let total = w2(&a, &b).unwrap();
        prop_assert!((w2(&a, &mid).unwrap() - t * total).abs() < 1e-10);
        prop_assert!((w2(&mid, &b).unwrap() - (1.0 - t) * total).abs() < 1e-10);
    }

    #[test]
    fn quantile_and_bruteforce_solvers_agree(
        a in prop::collection::vec((-3.0f64..3.0, 0.05f64..1.0), 1..8),
        b in prop::collection::vec((-3.0f64..3.0, 0.05f64..1.0), 1..8),
    ) {
        let (mut a, mut b) = (atoms(&a), atoms(&b));
        let (ma, mb): (f64, f64) = (a.iter().map(|t| t.mass).sum(), b.iter().map(|t| t.mass).sum());
        a.iter_mut().for_each(|t| t.mass /= ma);
        b.iter_mut().for_each(|t| t.mass /= mb);
        let q = w2_sq_atoms_quantile(&a, &b).unwrap();
        let lp = w2_sq_bruteforce(&a, &b).unwrap();
        prop_assert!((q - lp).abs() <= 1e-9 * (1.0 + q), "{} vs {}", q, lp);
    }
}
