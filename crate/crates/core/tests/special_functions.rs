//! Incomplete gamma and mode overlap against independent references.

use freespace::optics::{mode_overlap_ideal, optimal_focusing, resonant_extinction};
use freespace::special::{gamma, scaled_upper_incomplete_gamma, upper_incomplete_gamma};
use proptest::prelude::*;

/// Adaptive Simpson on [a, b].
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Γ(a, x) = ∫ₓ^∞ t^(a−1) e^(−t) dt by quadrature, split into unit panels.
fn gamma_quadrature(a: f64, x: f64) -> f64 {
    let f = |t: f64| t.powf(a - 1.0) * (-t).exp();
    let mut total = 0.0;
    let mut lo = x;
    while lo < x + 60.0 {
        total += simpson(&f, lo, lo + 1.0, 1e-17);
        lo += 1.0;
    }
    total
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn quarter_order_matches_quadrature() {
    let q = gamma_quadrature(0.25, 1.0);
    let v = upper_incomplete_gamma(0.25, 1.0).unwrap();
    assert!((v - q).abs() < 1e-10, "{v} vs {q}");
}

#[test]
fn negative_quarter_order_matches_recurrence_from_quadrature() {
    // Γ(−1/4, x) = [Γ(3/4, x) − x^(−1/4) e^(−x)] / (−1/4)
    for x in [0.3, 1.0, 2.0, 4.85] {
        let oracle = (gamma_quadrature(0.75, x) - x.powf(-0.25) * (-x).exp()) / -0.25;
        let v = upper_incomplete_gamma(-0.25, x).unwrap();
        assert!((v - oracle).abs() < 1e-9, "x={x}: {v} vs {oracle}");
    }
}

#[test]
fn high_precision_reference_values() {
    // 40-digit references
    let cases = [
        (0.25, 1.0, 0.246_255_529_193_498_71),
        (-0.25, 1.0, 0.196_986_510_434_943_02),
        (-0.25, 4.85, 0.000_888_711_555_297_900_42),
        (0.25, 0.04, 1.850_908_808_625_730_2),
        (-1.75, 0.3, 2.720_304_561_448_821_3),
        (2.5, 3.0, 0.407_069_175_871_303),
        (-0.25, 100.0, 1.162_006_965_381_129_7e-46),
    ];
    for (a, x, want) in cases {
        let got = upper_incomplete_gamma(a, x).unwrap();
        assert!(rel(got, want) < 1e-12, "Γ({a}, {x}) = {got}, want {want}");
    }
}

#[test]
fn overlap_reference_values() {
    let cases = [
        (0.1, 0.007_353_722_145_779_969_6),
        (0.25, 0.041_799_112_686_279_13),
        (0.45378, 0.111_562_486_684_036_96),
        (1.0, 0.272_189_974_681_013_93),
        (2.25, 0.364_003_367_048_589_76),
        (5.0, 0.292_443_238_965_857_03),
        (10.0, 0.188_863_248_421_003_86),
    ];
    for (u, want) in cases {
        let got = mode_overlap_ideal(u).unwrap();
        assert!(rel(got, want) < 1e-11, "Λ({u}) = {got}, want {want}");
    }
}

#[test]
fn overlap_maximum_from_grid_scan() {
    let mut best = (0.0, 0.0);
    let mut u = 0.1;
    while u <= 10.0 {
        let l = mode_overlap_ideal(u).unwrap();
        if l > best.1 {
            best = (u, l);
        }
        u += 0.001;
    }
    let (u_opt, l_opt) = optimal_focusing(0.1, 10.0).unwrap();
    assert!((u_opt - best.0).abs() < 2e-3, "{u_opt} vs {}", best.0);
    assert!(l_opt >= best.1 - 1e-12);
    assert!(l_opt < 0.5);
}

#[test]
fn domain_errors_surface() {
    assert!(mode_overlap_ideal(0.0).is_err());
    assert!(mode_overlap_ideal(-1.0).is_err());
    assert!(mode_overlap_ideal(f64::NAN).is_err());
    assert!(scaled_upper_incomplete_gamma(0.5, 0.0).is_err());
    assert!(resonant_extinction(1.5).is_err());
}

proptest! {
    #[test]
    fn recurrence_holds(a in -3.0f64..3.0, x in 0.01f64..40.0) {
        // Γ(a + 1, x) = aΓ(a, x) + x^a e^(−x), in scaled form
        let lhs = scaled_upper_incomplete_gamma(a + 1.0, x).unwrap();
        let rhs = a * scaled_upper_incomplete_gamma(a, x).unwrap() + x.powf(a);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0), "a={} x={} {} {}", a, x, lhs, rhs);
    }

    #[test]
    fn positive_order_below_complete_gamma(a in 0.05f64..5.0, x in 0.001f64..50.0) {
        let v = upper_incomplete_gamma(a, x).unwrap();
        prop_assert!(v > 0.0 && v <= gamma(a) * (1.0 + 1e-12));
    }

    #[test]
    fn overlap_is_a_fraction(u in 0.01f64..50.0) {
        let l = mode_overlap_ideal(u).unwrap();
        prop_assert!(l > 0.0 && l < 0.5);
    }

    #[test]
    fn extinction_in_unit_interval(l in 0.0f64..=1.0) {
        let e = resonant_extinction(l).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!((e - resonant_extinction(1.0 - l).unwrap()).abs() < 1e-15);
    }
}
