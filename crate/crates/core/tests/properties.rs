//! Property suites: parameter-independent invariants of the model layer, the
//! ODE right-hand side, and the simulator's determinism.

use merton_indivisible::hjb::{self, pasting_state, Envelopes, ShotKind};
use merton_indivisible::{integrate_shot, ModelParams};
use proptest::prelude::*;

/// Constructive strategy over admissible parameter sets: the drift gap is
/// placed strictly inside its band and the discount rate strictly above its
/// floor, so every sample validates.
fn valid_params() -> impl Strategy<Value = ModelParams> {
    (
        0.2f64..2.0,   // sigma
        0.2f64..2.0,   // sigma_tilde
        0.05f64..0.95, // alpha
        -1.0f64..1.0,  // mu
        0.05f64..0.95, // position of the drift gap inside its band
        0.05f64..3.0,  // discount margin above the floor
    )
        .prop_map(|(sigma, sigma_tilde, alpha, mu, t, margin)| {
            let lower = (alpha - 1.0) * sigma * sigma;
            let upper = 0.5 * (alpha - 1.0) * (sigma * sigma - sigma_tilde * sigma_tilde);
            let mu_tilde = mu + lower + t * (upper - lower);
            let floor = 0.0f64
                .max(alpha * mu + 0.5 * alpha * (alpha - 1.0) * sigma * sigma)
                .max(alpha * mu_tilde + 0.5 * alpha * (alpha - 1.0) * sigma_tilde * sigma_tilde);
            ModelParams::new(mu, sigma, mu_tilde, sigma_tilde, floor + margin, alpha)
                .expect("constructed inside the admissible region")
        })
}

proptest! {
    #[test]
    fn consumption_rate_routes_agree(p in valid_params()) {
        let m = p.merton();
        let via_coef = (m.a * p.alpha()).powf(1.0 / (p.alpha() - 1.0));
        prop_assert!((via_coef - m.c_rate).abs() <= 1e-12 * m.c_rate.abs());
        prop_assert!(m.a > 0.0 && m.a.is_finite());
        prop_assert!(m.c_rate > 0.0);
    }

    #[test]
    fn ratio_bound_is_positive_and_roots_the_sale_line(p in valid_params()) {
        let zbar = p.zbar_upper_bound();
        prop_assert!(zbar > 0.0, "zbar = {zbar}");
        prop_assert!(p.sale_region_lhs(zbar).abs() <= 1e-10 * (1.0 + zbar));
    }

    #[test]
    fn sale_line_changes_sign_exactly_at_the_bound(p in valid_params(), frac in 0.01f64..0.99, above in 1.01f64..10.0) {
        let zbar = p.zbar_upper_bound();
        prop_assert!(p.sale_region_lhs(frac * zbar) < 0.0);
        prop_assert!(p.sale_region_lhs(0.0) < 0.0);
        prop_assert!(p.sale_region_lhs(above * zbar) > 0.0);
    }

    #[test]
    fn post_sale_equation_solves_identically(p in valid_params()) {
        for x in [0.1, 1.0, 10.0, 100.0] {
            let scaled = p.merton_hjb_residual(x).abs() / x.powf(p.alpha());
            prop_assert!(scaled < 1e-9, "scaled residual {scaled} at x = {x}");
        }
    }

    #[test]
    fn curvature_solves_its_own_equation(p in valid_params(), z in 0.05f64..40.0, k in 0.1f64..30.0, kp in 1e-3f64..5.0) {
        let kpp = hjb::ode_second_derivative(&p, z, k, kp).unwrap();
        if kpp.is_finite() {
            let lhs = hjb::ode_lhs(&p, z, k, kp, kpp).unwrap();
            // Scale by the largest term entering the cancellation.
            let c = hjb::value_coefficient(&p).abs();
            let scale = (c * k).abs().max(kp.powf(p.alpha() / (p.alpha() - 1.0))).max(1.0);
            prop_assert!(lhs.abs() <= 1e-11 * scale, "lhs = {lhs}");
        }
    }

    /// The ODE evaluated along the lower envelope reduces to the sale-region
    /// line times a positive factor, so the envelope's residual changes sign
    /// exactly where selling stops dominating.
    #[test]
    fn lower_envelope_residual_is_the_sale_line(p in valid_params(), z in 0.05f64..40.0) {
        let a = p.merton().a;
        let alpha = p.alpha();
        let k = a * (z + 1.0).powf(alpha);
        let kp = a * alpha * (z + 1.0).powf(alpha - 1.0);
        let kpp = a * alpha * (alpha - 1.0) * (z + 1.0).powf(alpha - 2.0);
        let lhs = hjb::ode_lhs(&p, z, k, kp, kpp).unwrap();
        let expected = a * alpha * (z + 1.0).powf(alpha - 2.0) * p.sale_region_lhs(z);
        let scale = expected.abs().max(1e-12);
        prop_assert!((lhs - expected).abs() <= 1e-9 * scale.max(1.0), "lhs {lhs} vs {expected}");
    }

    #[test]
    fn envelope_bands_are_ordered_and_contact_is_clean(p in valid_params(), z in 1e-3f64..100.0) {
        let env = Envelopes::new(&p);
        prop_assert!(env.b_lower(z) < env.b_upper(z));
        // Pasting data at any admissible launch point is not flagged.
        let zbar = p.zbar_upper_bound();
        let z_star = (z % zbar).max(1e-4 * zbar);
        let (k0, kp0) = pasting_state(&p, z_star);
        prop_assert_eq!(env.classify(z_star, z_star, k0, kp0), None);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every shot from the reference parameters lands in a recognized
    /// terminal class with a well-formed, strictly increasing table.
    #[test]
    fn shots_terminate_in_a_known_class(frac in 0.01f64..1.0) {
        let p = ModelParams::new(1.0, 1.0, 0.5, 0.5, 2.0, 1.0 / 3.0).unwrap();
        let z_star = frac * p.zbar_upper_bound();
        let sol = integrate_shot(&p, z_star, 50.0, 1e-8).unwrap();
        prop_assert!(sol.grid.len() >= 2);
        prop_assert!(sol.grid.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(sol.grid.len(), sol.k_values.len());
        prop_assert_eq!(sol.grid.len(), sol.kprime_values.len());
        prop_assert!(sol.grid[0] == z_star);
        prop_assert!(!matches!(sol.classification.kind, ShotKind::StepFailure));
        prop_assert!(sol.classification.z_event <= 50.0 * (1.0 + 1e-12));
        // The event location is the last grid point.
        let last = *sol.grid.last().unwrap();
        prop_assert!((last - sol.classification.z_event).abs() <= 1e-9 * last);
    }
}

#[test]
fn shot_tables_are_bit_identical_across_runs() {
    let p = ModelParams::new(1.0, 1.0, 0.5, 0.5, 2.0, 1.0 / 3.0).unwrap();
    for z_star in [0.4, 1.0, 1.31, 1.5] {
        let a = integrate_shot(&p, z_star, 50.0, 1e-10).unwrap();
        let b = integrate_shot(&p, z_star, 50.0, 1e-10).unwrap();
        assert_eq!(a.grid.len(), b.grid.len());
        for i in 0..a.grid.len() {
            assert_eq!(a.grid[i].to_bits(), b.grid[i].to_bits());
            assert_eq!(a.k_values[i].to_bits(), b.k_values[i].to_bits());
            assert_eq!(a.kprime_values[i].to_bits(), b.kprime_values[i].to_bits());
        }
    }
}
