use std::f64::consts::TAU;

use proptest::prelude::*;

use helicity_core::acceptance::skewed_field;
use helicity_core::constructor::{smoothness_order, theorem2_pair};
use helicity_core::fields::{
    lemma1_extension, linear_rotation, scale_field, twist_field, ActionProfile, Gradient, HamiltonianField,
};
use helicity_core::flow::{transport, IntegratorConfig, PoincareMap, Scheme};
use helicity_core::geometry::{from_action_angle, ActionAngle};
use helicity_core::invariants::{form_helicity, helicity, QuadratureGrid};
use helicity_core::linking::{extended_point, orbit_linking};
use helicity_core::quadrature::Rule;
use helicity_core::report::format_float;
use helicity_core::{Disk, PhasePoint};

fn unit() -> Disk {
    Disk::unit()
}

fn at(action: f64, angle: f64) -> PhasePoint {
    from_action_angle(ActionAngle::new(action, angle)).unwrap()
}

fn twist(coeffs: Vec<f64>) -> HamiltonianField {
    twist_field(ActionProfile::polynomial(1.0, coeffs), unit())
}

fn builtin(which: usize, w: f64) -> HamiltonianField {
    match which {
        0 => linear_rotation(w, unit()),
        1 => twist(vec![0.0, w, 1.0, -0.5]),
        2 => skewed_field(unit(), w, 0.3, -0.2),
        _ => theorem2_pair(&linear_rotation(w, unit()), 1, unit(), 3).unwrap(),
    }
}

fn fd_gradient(h: &HamiltonianField, x: PhasePoint, t: f64) -> Gradient {
    let d = 1e-6;
    let f = |p: f64, q: f64| h.value(PhasePoint::new(p, q), t);
    Gradient::new(
        (f(x.p + d, x.q) - f(x.p - d, x.q)) / (2.0 * d),
        (f(x.p, x.q + d) - f(x.p, x.q - d)) / (2.0 * d),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn values_are_periodic(which in 0usize..4, w in -2.0..2.0f64, action in 0.0..1.0f64, angle in 0.0..TAU, t in 0.0..TAU) {
        let h = builtin(which, w);
        let x = at(action, angle);
        let scale = h.value(x, t).abs().max(1.0);
        prop_assert!((h.value(x, t) - h.value(x, t + h.period())).abs() <= 1e-12 * scale);
        prop_assert!((h.value(x, t) - h.value(x, t - 3.0 * h.period())).abs() <= 1e-12 * scale);
    }

    #[test]
    fn gradients_match_finite_differences(which in 0usize..4, w in -2.0..2.0f64, action in 0.01..0.99f64, angle in 0.0..TAU, t in 0.1..3.0f64) {
        let h = builtin(which, w);
        let x = at(action, angle);
        let g = h.gradient(x, t);
        let fd = fd_gradient(&h, x, t);
        let err = Gradient::new(g.dp - fd.dp, g.dq - fd.dq).norm();
        prop_assert!(err <= 1e-5 * g.norm().max(1.0), "{g:?} vs {fd:?}");
    }

    #[test]
    fn forward_then_backward_returns(which in 0usize..4, w in -1.5..1.5f64, action in 0.05..0.95f64, angle in 0.0..TAU) {
        let h = builtin(which, w);
        let cfg = IntegratorConfig::default().with_step(1e-3);
        let x = at(action, angle);
        let y = transport(&h, x, 0.0, TAU, &cfg).unwrap();
        let back = transport(&h, y, TAU, 0.0, &cfg).unwrap();
        prop_assert!(back.distance(x) < 1e-8, "{}", back.distance(x));
    }

    #[test]
    fn rotation_does_not_change_helicity(angle in 0.0..TAU) {
        let h = skewed_field(unit(), 0.8, 0.3, 0.2);
        let grid = QuadratureGrid::default();
        let a = helicity(&h, unit(), grid).unwrap().value;
        let b = helicity(&h.rotated(angle), unit(), grid).unwrap().value;
        prop_assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn rescaling_does_not_change_helicity(mu in 0.5..3.0f64) {
        let h = skewed_field(unit(), -0.4, 0.5, 0.1);
        let grid = QuadratureGrid::default();
        let a = helicity(&h, unit(), grid).unwrap().value;
        let b = helicity(&scale_field(&h, mu).unwrap(), unit(), grid).unwrap().value;
        prop_assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn time_only_terms_are_gauged_away(amp in -5.0..5.0f64, freq in 1u32..4) {
        let h = skewed_field(unit(), 0.8, 0.3, 0.2);
        let f = freq as f64;
        let g = HamiltonianField::from_fn("g", TAU, move |_, t: f64| amp * (f * t).sin(), |_, _| Gradient::ZERO).unwrap();
        let grid = QuadratureGrid::default();
        let a = helicity(&h, unit(), grid).unwrap().value;
        let b = helicity(&h.plus(&g).unwrap(), unit(), grid).unwrap().value;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn form_identity_on_twists(c in proptest::collection::vec(-1.0..1.0f64, 1..5)) {
        let h = twist(c);
        let grid = QuadratureGrid::default();
        let hel = helicity(&h, unit(), grid).unwrap().value;
        let form = form_helicity(&h, unit(), grid).unwrap();
        prop_assert!((form + 2.0 * hel).abs() < 1e-6);
    }

    #[test]
    fn gauss_rules_exact_to_degree(n in 4usize..40, frac in 0.0..1.0f64, b in 0.1..3.0f64) {
        let deg = ((2 * n - 1) as f64 * frac) as i32;
        let rule = Rule::composite_gauss(&[0.0, b], n);
        let got = rule.integrate(|x| x.powi(deg));
        let want = b.powi(deg + 1) / (deg + 1) as f64;
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn smooth_fields_report_full_order(w in -2.0..2.0f64, tau in 0.0..TAU, m in 0usize..5) {
        prop_assert_eq!(smoothness_order(&builtin(1, w), &[tau], m), m);
        prop_assert_eq!(smoothness_order(&builtin(2, w), &[tau], m), m);
    }

    #[test]
    fn floats_survive_csv(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn period_maps_preserve_area(which in 0usize..4, w in -1.5..1.5f64, action in 0.05..0.9f64, angle in 0.0..TAU) {
        let map = PoincareMap::new(builtin(which, w));
        let det = map.jacobian_determinant(at(action, angle), 1e-5).unwrap();
        prop_assert!((det - 1.0).abs() < 1e-4, "{det}");
    }

    #[test]
    fn midpoint_and_rk4_agree(which in 0usize..3, w in -1.5..1.5f64, action in 0.05..0.9f64, angle in 0.0..TAU) {
        let h = builtin(which, w);
        let x = at(action, angle);
        let mid = |step: f64| {
            let cfg = IntegratorConfig::default().with_step(step).with_scheme(Scheme::ImplicitMidpoint);
            transport(&h, x, 0.0, TAU, &cfg).unwrap()
        };
        let step = TAU / 400.0;
        let (coarse, fine) = (mid(step), mid(step / 2.0));
        // Richardson estimate of the error of the finer midpoint run
        let estimate = coarse.distance(fine) / 3.0;
        let cfg = IntegratorConfig::default().with_step(step / 2.0).with_scheme(Scheme::Rk4);
        let oracle = transport(&h, x, 0.0, TAU, &cfg).unwrap();
        prop_assert!(fine.distance(oracle) <= 10.0 * estimate + 1e-12, "{} vs {}", fine.distance(oracle), estimate);
    }

    #[test]
    fn linking_is_symmetric(a_action in 0.05..0.95f64, b_action in 0.05..0.95f64, a_angle in 0.0..TAU, b_angle in 0.0..TAU, ta in 0.0..TAU, tb in 0.0..TAU) {
        prop_assume!((a_action - b_action).abs() > 1e-3);
        let h = twist(vec![0.0, 0.7, 1.0]);
        let cfg = IntegratorConfig::default();
        let a = extended_point(a_action, a_angle, ta).unwrap();
        let b = extended_point(b_action, b_angle, tb).unwrap();
        let ab = orbit_linking(&h, unit(), a, b, 4, &cfg).unwrap();
        let ba = orbit_linking(&h, unit(), b, a, 4, &cfg).unwrap();
        prop_assert_eq!(ab, ba);
    }
}

#[test]
fn collar_extension_period_map_fixes_the_outer_edge() {
    let h = lemma1_extension(2, 1.0, 0.2).unwrap();
    let map = PoincareMap::new(h);
    for angle in [0.0, 1.0, 4.0] {
        let x = at(1.2, angle);
        assert!(map.apply(x).unwrap().distance(x) < 1e-9);
    }
    let inner = at(0.5, 0.3);
    assert!(map.apply(inner).unwrap().distance(inner) < 1e-6);
}
