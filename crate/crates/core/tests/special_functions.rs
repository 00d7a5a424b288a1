use kmfg_core::basis::{hermite_eval, ln_factorial, parabolic_cylinder_d};
use kmfg_core::Complex64;
use proptest::prelude::*;

/// `He_n(x) = n! sum_m (-1)^m x^{n-2m} / (m! (n-2m)! 2^m)` together with the
/// sum of the term magnitudes, which bounds the rounding error of the sum.
fn hermite_explicit(n: usize, x: Complex64) -> (Complex64, f64) {
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for m in 0..=n / 2 {
        let log_c = ln_factorial(n) - ln_factorial(m) - ln_factorial(n - 2 * m) - m as f64 * 2f64.ln();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let term = x.powu((n - 2 * m) as u32) * (sign * log_c.exp());
        scale += term.norm();
        total += term;
    }
    (total, scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recurrence_matches_explicit_sum(n in 0usize..30, re in -4.0f64..4.0, im in -4.0f64..4.0) {
        let x = Complex64::new(re, im);
        let (want, scale) = hermite_explicit(n, x);
        let got = hermite_eval(n, x);
        prop_assert!((got - want).norm() <= 1e-12 * scale.max(1.0), "n={n} x={x}: {got} vs {want}");
    }

    #[test]
    fn parabolic_cylinder_parity(n in 0usize..25, re in -6.0f64..6.0, im in -6.0f64..6.0) {
        let v = Complex64::new(re, im);
        let a = parabolic_cylinder_d(n, v).unwrap();
        let b = parabolic_cylinder_d(n, -v).unwrap();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((a - b * sign).norm() <= 1e-12 * a.norm().max(1e-300));
    }

    #[test]
    fn parabolic_cylinder_is_continuous_across_the_log_path(n in 0usize..12, re in -3.0f64..3.0) {
        // the direct formula is used up to |Im v| = 20 and the log-magnitude
        // form beyond; both must describe the same function
        let below = parabolic_cylinder_d(n, Complex64::new(re, 20.0 - 1e-9)).unwrap();
        let above = parabolic_cylinder_d(n, Complex64::new(re, 20.0 + 1e-9)).unwrap();
        prop_assert!((below - above).norm() <= 1e-6 * below.norm());
    }
}

#[test]
fn known_values() {
    // He_3(x) = x^3 - 3x, He_4(x) = x^4 - 6x^2 + 3
    let x = Complex64::new(0.5, -1.5);
    assert!((hermite_eval(3, x) - (x * x * x - x * 3.0)).norm() < 1e-14);
    assert!((hermite_eval(4, x) - (x.powu(4) - x * x * 6.0 + 3.0)).norm() < 1e-13);
    // D_0(v) = e^{-v^2/4}
    let v = Complex64::new(1.2, 0.7);
    assert!((parabolic_cylinder_d(0, v).unwrap() - (-v * v / 4.0).exp()).norm() < 1e-15);
}
