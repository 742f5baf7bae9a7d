mod common;

use common::rel_err;
use harvest_core::geometry::{
    proper_distance, radius_from_distance, BoundaryCondition, DetectorConfig, DetectorPair, Family,
    SpacetimeParams,
};
use harvest_core::observables::{
    assemble_density_matrix, concurrence, concurrence_general, delta_p, delta_x, harvest, p_btz,
    p_btz_series, x_btz, x_btz_series, x_total, EvalSpec, TermKind,
};
use harvest_core::oracle::{p_direct, x_direct, OracleSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn params(mass: f64, family: Family) -> SpacetimeParams {
    SpacetimeParams::dirichlet(mass, 10.0, family).unwrap()
}

#[test]
fn closed_form_matches_direct_integrals_at_large_mass() {
    let eval = EvalSpec::default();
    let oracle = OracleSpec::default();
    for family in [Family::Btz, Family::Geon] {
        let p = params(1.0, family);
        for (dist, gap) in [(1.0, 1.0), (0.3, 0.1)] {
            let pair = DetectorPair::from_distances(dist, 0.5, gap, &p).unwrap();
            let r = harvest(&pair, &p, &eval).unwrap();
            let pd = p_direct(pair.a(), &p, &oracle).unwrap().value.re;
            let xd = x_direct(&pair, &p, &oracle).unwrap().value;
            assert!(rel_err(r.p_a, pd) < 1e-6, "{family} d={dist}: P {} vs {pd}", r.p_a);
            assert!(
                (r.x() - xd).norm() < 1e-6 * xd.norm(),
                "{family} d={dist}: X {} vs {xd}",
                r.x()
            );
        }
    }
}

#[test]
fn geon_corrections_vanish_for_btz_family() {
    let eval = EvalSpec::default();
    let btz = params(0.01, Family::Btz);
    let geon = params(0.01, Family::Geon);
    let pair = DetectorPair::from_distances(1.0, 0.5, 0.1, &btz).unwrap();
    let rb = harvest(&pair, &btz, &eval).unwrap();
    let rg = harvest(&pair, &geon, &eval).unwrap();
    let dp = delta_p(pair.a(), &geon, &eval).unwrap().value;
    let dx = delta_x(&pair, &geon, &eval).unwrap().value;
    assert!((rg.p_a - rb.p_a - dp).abs() < 1e-14);
    assert!((rg.x() - rb.x() - dx).norm() < 1e-14);
    assert_eq!(rb.p_a, p_btz(pair.a(), &btz, &eval).unwrap().value);
    assert_eq!(rb.x(), x_btz(&pair, &btz, &eval).unwrap().value);
}

#[test]
fn small_mass_geon_exceeds_btz() {
    let eval = EvalSpec::default();
    let btz = params(0.01, Family::Btz);
    let geon = params(0.01, Family::Geon);
    let pair = DetectorPair::from_distances(1.0, 0.5, 0.1, &btz).unwrap();
    let rb = harvest(&pair, &btz, &eval).unwrap();
    let rg = harvest(&pair, &geon, &eval).unwrap();
    assert!(rg.p_a - rb.p_a > 10.0 * (rg.err.p_a + rb.err.p_a));
    assert!(rg.x_abs - rb.x_abs > 10.0 * (rg.err.x_abs + rb.err.x_abs));
}

#[test]
fn transparent_series_term_counts() {
    let eval = EvalSpec::default();
    let p = SpacetimeParams::new(0.05, 10.0, BoundaryCondition::Transparent, Family::Btz).unwrap();
    let pair = DetectorPair::from_distances(1.0, 0.5, 0.1, &p).unwrap();
    let ps = p_btz_series(pair.a(), &p, &eval).unwrap();
    assert_eq!(ps.count(TermKind::Thermal), 1);
    assert_eq!(ps.count(TermKind::Minus), ps.n_max);
    assert_eq!(ps.count(TermKind::Plus) + ps.count(TermKind::Bracket), 0);
    let xs = x_btz_series(&pair, &p, &eval).unwrap();
    assert_eq!(xs.count(TermKind::Minus), xs.n_max + 1);
    assert_eq!(xs.count(TermKind::Plus), 0);
}

#[test]
fn image_terms_decay_geometrically() {
    let eval = EvalSpec::default();
    for mass in [1.0f64, 0.1, 0.01] {
        let bound = (-std::f64::consts::PI * mass.sqrt() / 2.0).exp();
        let p = params(mass, Family::Btz);
        for gap in [0.01, 1.0] {
            let d = DetectorConfig::at_distance(0.5, 0.0, gap, &p).unwrap();
            let mags = p_btz_series(&d, &p, &eval).unwrap().image_magnitudes();
            for w in mags.windows(2).filter(|w| w[0].0 >= 2 && w[1].1 > 1e-13) {
                assert!(w[1].1 / w[0].1 <= bound, "M={mass} n={}: ratio {}", w[1].0, w[1].1 / w[0].1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduced_concurrence_equals_wootters(
        pa in 0.0f64..2.0, pb in 0.0f64..2.0,
        xr in -2.0f64..2.0, xi in -2.0f64..2.0,
        cr in -0.5f64..0.5, ci in -0.5f64..0.5,
    ) {
        let x = Complex64::new(xr, xi);
        let c = Complex64::new(cr, ci);
        prop_assume!(c.norm() <= (pa * pb).sqrt());
        let s = 1e-3;
        let rho = assemble_density_matrix(pa, pb, x, c, s).unwrap();
        let general = concurrence_general(&rho).unwrap() / s;
        let reduced = concurrence(pa, pb, x.norm()).unwrap();
        prop_assert!((general - reduced).abs() < 1e-12, "{} vs {}", general, reduced);
    }

    #[test]
    fn x_modulus_swap_symmetric(
        mass in 0.1f64..10.0, dist in 0.05f64..3.0, sep in 0.05f64..2.0,
        gap in 0.0f64..2.0, geon in any::<bool>(),
    ) {
        let family = if geon { Family::Geon } else { Family::Btz };
        let p = params(mass, family);
        let pair = DetectorPair::from_distances(dist, sep, gap, &p).unwrap();
        let swapped = DetectorPair::new(*pair.b(), *pair.a()).unwrap();
        let eval = EvalSpec::default();
        let x = x_total(&pair, &p, &eval).unwrap().value.norm();
        let y = x_total(&swapped, &p, &eval).unwrap().value.norm();
        prop_assert!(rel_err(y, x) < 1e-12);
    }

    #[test]
    fn probabilities_positive_and_geon_larger(
        mass in 0.05f64..10.0, dist in 0.05f64..5.0, gap in 0.0f64..3.0,
    ) {
        let eval = EvalSpec::default();
        let p = params(mass, Family::Geon);
        let d = DetectorConfig::at_distance(dist, 0.0, gap, &p).unwrap();
        let pb = p_btz(&d, &p, &eval).unwrap().value;
        let dp = delta_p(&d, &p, &eval).unwrap().value;
        prop_assert!(pb > 0.0);
        prop_assert!(dp > 0.0);
    }

    #[test]
    fn concurrence_in_range(
        mass in 0.05f64..10.0, dist in 0.05f64..5.0, sep in 0.05f64..2.0, gap in 0.0f64..2.0,
    ) {
        let eval = EvalSpec::default();
        let p = params(mass, Family::Btz);
        let pair = DetectorPair::from_distances(dist, sep, gap, &p).unwrap();
        let r = harvest(&pair, &p, &eval).unwrap();
        prop_assert!(r.concurrence >= 0.0);
        prop_assert!(r.concurrence <= 2.0 * r.x_abs);
    }

    #[test]
    fn distance_round_trip(mass in 1e-4f64..10.0, ell in 1.0f64..20.0, d in 0.01f64..20.0) {
        let p = SpacetimeParams::dirichlet(mass, ell, Family::Btz).unwrap();
        let r = radius_from_distance(d, &p).unwrap();
        let back = proper_distance(p.horizon_radius(), r, &p).unwrap();
        prop_assert!((back - d).abs() < 1e-10, "{} vs {}", back, d);
    }
}
