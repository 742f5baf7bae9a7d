use harvest_core::geometry::{Family, SpacetimeParams};
use harvest_core::wightman::{
    geon_correction, sigma_n, sigma_tilde_n, truncation_bound, wightman, ImageSumControl,
    SpacetimeEvent,
};
use num_complex::Complex64;

fn params(mass: f64, family: Family) -> SpacetimeParams {
    SpacetimeParams::dirichlet(mass, 10.0, family).unwrap()
}

/// Textbook cosh form, fine away from the horizon.
#[allow(clippy::too_many_arguments)]
fn sigma_direct(t: f64, r: f64, phi: f64, t2: f64, r2: f64, phi2: f64, n: f64, eps: f64, p: &SpacetimeParams, geon: bool) -> Complex64 {
    let rh = p.horizon_radius();
    let ell = p.ads_length();
    let ang = (rh / ell * (phi - phi2 - 2.0 * std::f64::consts::PI * n)).cosh();
    let roots = (r * r - rh * rh).sqrt() * (r2 * r2 - rh * rh).sqrt() / (rh * rh);
    let base = Complex64::new(r * r2 / (rh * rh) * ang - 1.0, 0.0);
    if geon {
        base + roots * (rh / (ell * ell) * (t + t2)).cosh()
    } else {
        base - Complex64::new(rh / (ell * ell) * (t - t2), -eps).cosh() * roots
    }
}

#[test]
fn sigma_matches_cosh_form() {
    for mass in [1.0, 0.05] {
        let p = params(mass, Family::Btz);
        let rh = p.horizon_radius();
        let (r1, r2) = (1.3 * rh, 1.9 * rh);
        for (t1, t2) in [(0.0, 0.0), (1.5, -0.7), (-3.0, 2.0)] {
            let x = SpacetimeEvent::new(t1, r1, 0.2, &p).unwrap();
            let y = SpacetimeEvent::new(t2, r2, -0.1, &p).unwrap();
            for n in -3..=3 {
                for eps in [0.0, 1e-3] {
                    let got = sigma_n(&x, &y, n, &p, eps);
                    let want = sigma_direct(t1, r1, 0.2, t2, r2, -0.1, n as f64, eps, &p, false);
                    assert!(
                        (got - want).norm() < 1e-10 * want.norm().max(1.0),
                        "M={mass} n={n}: {got} vs {want}"
                    );
                }
                let got = sigma_tilde_n(&x, &y, n, &p);
                let want = sigma_direct(t1, r1, 0.2, t2, r2, -0.1, n as f64 + 0.5, 0.0, &p, true);
                assert!((got - want.re).abs() < 1e-10 * want.re.abs().max(1.0));
            }
        }
    }
}

#[test]
fn wightman_is_hermitian() {
    for family in [Family::Btz, Family::Geon] {
        let p = params(0.1, family);
        let rh = p.horizon_radius();
        let x = SpacetimeEvent::new(0.4, 1.2 * rh, 0.0, &p).unwrap();
        let y = SpacetimeEvent::new(-0.9, 1.5 * rh, 0.0, &p).unwrap();
        let ctl = ImageSumControl::Fixed(60);
        let wxy = wightman(&x, &y, &p, 1e-3, ctl).unwrap();
        let wyx = wightman(&y, &x, &p, 1e-3, ctl).unwrap();
        assert!((wxy - wyx.conj()).norm() < 1e-12 * wxy.norm(), "{wxy} vs {wyx}");
    }
}

#[test]
fn truncation_bound_controls_tail() {
    for mass in [1.0, 0.1, 0.01] {
        let p = params(mass, Family::Btz);
        let rh = p.horizon_radius();
        let x = SpacetimeEvent::new(0.0, 1.2 * rh, 0.0, &p).unwrap();
        let y = SpacetimeEvent::new(0.3, 1.4 * rh, 0.0, &p).unwrap();
        let n = truncation_bound(mass, 10.0, 1e-9).unwrap();
        let w1 = wightman(&x, &y, &p, 1e-2, ImageSumControl::Fixed(n)).unwrap();
        let w2 = wightman(&x, &y, &p, 1e-2, ImageSumControl::Fixed(2 * n)).unwrap();
        // The bound is on the unnormalised kernel; the prefactor is < 1.
        assert!((w1 - w2).norm() < 1e-9, "M={mass}: {}", (w1 - w2).norm());
    }
}

#[test]
fn geon_correction_small_at_large_mass() {
    let p = params(1.0, Family::Geon);
    let rh = p.horizon_radius();
    let x = SpacetimeEvent::new(0.0, 1.2 * rh, 0.0, &p).unwrap();
    let y = SpacetimeEvent::new(0.0, 1.4 * rh, 0.0, &p).unwrap();
    let corr = geon_correction(&x, &y, &p, 20).unwrap();
    let full = wightman(&x, &y, &p, 0.0, ImageSumControl::Fixed(20)).unwrap();
    assert!(corr > 0.0 && corr < 0.05 * full.norm());
}

#[test]
fn geon_correction_defined_near_horizon() {
    let p = params(1.0, Family::Geon);
    let rh = p.horizon_radius();
    // At equal angles every geon image stays spacelike.
    for t in [-5.0, 0.0, 5.0] {
        let x = SpacetimeEvent::new(t, 1.01 * rh, 0.0, &p).unwrap();
        let y = SpacetimeEvent::new(-t, 1.02 * rh, 0.0, &p).unwrap();
        assert!(geon_correction(&x, &y, &p, 10).is_ok());
    }
    assert!(SpacetimeEvent::new(0.0, 0.5 * rh, 0.0, &p).is_err());
}
