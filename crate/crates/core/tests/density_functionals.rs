use proptest::prelude::*;
use thinfilm::{
    grid_to_quantile, record, reconstruct, rescale_u_to_v, rescale_v_to_u, smyth_hill, w2, FunctionalRecord,
    Functionals, QuantileDensity, RecordOptions, Reconstruction, SmythHill,
};

// Closed forms at support radius 1, from symbolic integration of
// (1 - x^2)^2 / 24 and its derivatives.
const MASS: f64 = 2.0 / 45.0;
const ALPHA: f64 = 1.0 / 315.0;
const BETA: f64 = 2.0 / 945.0;
const ENERGY: f64 = 1.0 / 189.0;
const ENTROPY: f64 = 1.0 / 63.0;
const M4: f64 = 2.0 / 945.0;

#[test]
fn unit_radius_equilibrium_matches_closed_forms() {
    let sh = SmythHill::with_radius(1.0).unwrap();
    for (got, want) in [
        (sh.mass(), MASS),
        (sh.alpha(), ALPHA),
        (sh.beta(), BETA),
        (sh.energy(), ENERGY),
        (sh.entropy(), ENTROPY),
        (sh.fourth_moment(), M4),
    ] {
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }
    for x in [-0.9, -0.3, 0.0, 0.4, 0.8] {
        assert!((sh.derivative(x, 3) - x).abs() < 1e-14);
    }
}

#[test]
fn sampled_equilibrium_approaches_closed_forms() {
    let sh = smyth_hill(MASS).unwrap();
    let v = sh.sample_symmetric(20_001, 1.1).unwrap();
    assert!((v.total_mass() - MASS).abs() < 1e-9);
    assert!((v.alpha() - ALPHA).abs() < 1e-9);
    assert!((v.beta() - BETA).abs() < 1e-8);
    assert!((v.moment(4) - M4).abs() < 1e-9);
}

#[test]
fn grid_quantile_grid_round_trip() {
    let sh = smyth_hill(MASS).unwrap();
    let v = sh.sample_symmetric(4001, 1.2).unwrap();
    let q = grid_to_quantile(&v, 2000).unwrap();
    assert!(w2(&q, &sh.quantiles(2000).unwrap()).unwrap() < 1e-5);
    let (back, diag) = reconstruct(&q, Some((-1.2, 1.2)), 4001, Reconstruction::ContactTail).unwrap();
    assert!((diag.renormalization - 1.0).abs() < 1e-3);
    let gap: f64 = (0..back.len()).map(|i| (back.values()[i] - sh.value(back.x(i))).abs()).sum::<f64>() * back.dx();
    assert!(gap < 1e-4 * MASS, "{gap}");
}

#[test]
fn self_similar_rescaling_round_trip() {
    let u = smyth_hill(0.7).unwrap().sample_symmetric(501, 1.3).unwrap();
    let (v, b) = rescale_u_to_v(&u, 0.4).unwrap();
    let (w, b2) = rescale_v_to_u(&v, 0.4).unwrap();
    assert_eq!(b, b2);
    assert!((w.x_min() - u.x_min()).abs() < 1e-14 && (w.dx() - u.dx()).abs() < 1e-15);
    for (a, c) in u.values().iter().zip(w.values()) {
        assert!((a - c).abs() < 1e-15);
    }
}

#[test]
fn record_survives_csv_round_trip() {
    let sh = smyth_hill(MASS).unwrap();
    let q = sh.quantiles(300).unwrap().dilated(1.1).unwrap();
    let opts = RecordOptions { p_values: vec![1.5, 1.25], ..RecordOptions::default() };
    let r = record(&q, 0.25, &sh, &opts).unwrap();
    let header = FunctionalRecord::csv_header(&opts.p_values);
    let back = FunctionalRecord::from_csv_row(&header, &r.csv_row()).unwrap();
    assert_eq!(r, back);
}

fn quantiles() -> impl Strategy<Value = QuantileDensity> {
    (prop::collection::vec(0.01f64..1.0, 2..80), -2.0f64..2.0, 0.1f64..3.0).prop_map(|(gaps, start, mass)| {
        let mut x = start;
        let pos = gaps
            .iter()
            .map(|g| {
                x += g;
                x
            })
            .collect();
        QuantileDensity::new(mass, pos).unwrap()
    })
}

proptest! {
    #[test]
    fn equilibrium_mass_scales_with_fifth_power_of_radius(c in 0.1f64..5.0) {
        let sh = SmythHill::with_radius(c).unwrap();
        prop_assert!((sh.mass() - MASS * c.powi(5)).abs() <= 1e-12 * sh.mass());
        prop_assert!((smyth_hill(sh.mass()).unwrap().support_radius() - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn potential_energy_scales_under_dilation(q in quantiles(), lambda in 0.2f64..4.0) {
        let centered = q.translated(-q.mean()).unwrap();
        let d = centered.dilated(lambda).unwrap();
        prop_assert!((d.alpha() - centered.alpha() / (lambda * lambda)).abs() <= 1e-10 * (1.0 + d.alpha()));
        prop_assert!((d.moment(4) - centered.moment(4) / lambda.powi(4)).abs() <= 1e-10 * (1.0 + d.moment(4)));
    }

    #[test]
    fn surface_energy_is_translation_invariant(q in quantiles(), d in -5.0f64..5.0) {
        let moved = q.translated(d).unwrap();
        prop_assert!((moved.beta() - q.beta()).abs() <= 1e-9 * (1.0 + q.beta()));
        prop_assert!((moved.total_mass() - q.total_mass()).abs() <= 1e-14 * q.total_mass());
    }
}
