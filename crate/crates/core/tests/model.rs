//! Model polynomials against exact rational oracles.

use num_rational::Ratio;
use proptest::prelude::*;
use wavespec::model::{eval_model, ModelFunctions, Rational};

fn q(n: i64, d: i64) -> Rational {
    Ratio::new(n, d)
}

/// Independent rational evaluation of the three polynomials from their
/// factored forms.
fn oracle(u: Rational) -> (Rational, Rational, Rational) {
    let d = q(6, 1) * (u - q(7, 12)) * (u - q(3, 4));
    let r = q(5, 1) * u * (q(1, 1) - u) * (u - q(1, 5));
    let f = q(2, 1) * u * u * u - q(4, 1) * u * u + q(21, 8) * u;
    (d, r, f)
}

#[test]
fn endpoint_values() {
    let v = eval_model(0.0);
    assert_eq!(v.d, 21.0 / 8.0);
    assert_eq!(v.r_prime, -1.0);
    assert_eq!(v.r, 0.0);
    assert_eq!(v.f, 0.0);
    let v = eval_model(1.0);
    assert_eq!(v.f, 5.0 / 8.0);
    assert_eq!(v.r_prime, -4.0);
    assert_eq!(v.d, 5.0 / 8.0);
}

#[test]
fn jump_fibre_is_horizontal_exactly() {
    let m = ModelFunctions::standard();
    let [_, _, f_fold, _, _] = m.eval_exact(q(7, 12));
    let [_, _, f_jump, _, _] = m.eval_exact(q(5, 6));
    assert_eq!(f_fold, q(245, 432));
    assert_eq!(f_jump, q(245, 432));
    assert!((m.f(7.0 / 12.0) - 245.0 / 432.0).abs() <= 1e-15);
    assert!((m.f(5.0 / 6.0) - 245.0 / 432.0).abs() <= 1e-15);
}

#[test]
fn roots_of_d_and_r() {
    let m = ModelFunctions::standard();
    for u in [q(7, 12), q(3, 4)] {
        assert_eq!(m.eval_exact(u)[0], q(0, 1));
    }
    for u in [q(0, 1), q(1, 5), q(1, 1)] {
        assert_eq!(m.eval_exact(u)[1], q(0, 1));
    }
    assert!(m.r_prime(1.0) < m.r_prime(0.0) && m.r_prime(0.0) < 0.0);
}

#[test]
fn antiderivative_identity_on_a_rational_grid() {
    let m = ModelFunctions::standard();
    let fp = m.f_poly().derivative();
    for i in 0..=1000 {
        let u = q(i, 1000);
        assert_eq!(fp.eval_exact(u), m.eval_exact(u)[0]);
        let x = i as f64 / 1000.0;
        assert!((fp.eval(x) - m.d(x)).abs() <= 1e-14);
    }
}

#[test]
fn floating_point_matches_rational_oracle() {
    let m = ModelFunctions::standard();
    for i in 0..=240 {
        let u = q(i, 240);
        let (d, r, f) = oracle(u);
        let [de, re, fe, _, _] = m.eval_exact(u);
        assert_eq!((d, r, f), (de, re, fe));
        let x = i as f64 / 240.0;
        let to = |z: Rational| *z.numer() as f64 / *z.denom() as f64;
        for (a, b) in [(m.d(x), to(d)), (m.r(x), to(r)), (m.f(x), to(f))] {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

proptest! {
    #[test]
    fn derivatives_match_difference_quotients(u in 0.0f64..1.0) {
        let m = ModelFunctions::standard();
        let h = 1e-6;
        let dd = (m.d(u + h) - m.d(u - h)) / (2.0 * h);
        let dr = (m.r(u + h) - m.r(u - h)) / (2.0 * h);
        prop_assert!((dd - m.d_prime(u)).abs() < 1e-8);
        prop_assert!((dr - m.r_prime(u)).abs() < 1e-8);
    }
}

#[test]
fn taylor_shift_is_exact() {
    let m = ModelFunctions::standard();
    let a = q(7, 12);
    let shifted = m.f_poly().shifted(a);
    for i in -12..=12 {
        let h = q(i, 17);
        assert_eq!(shifted.eval_exact(h), m.f_poly().eval_exact(a + h));
    }
}

#[test]
fn potential_near_the_fold_has_no_cancellation() {
    // F(u) - F(7/12) = (u - 7/12)² (2u - 5/3).
    let m = ModelFunctions::standard();
    for k in 2..=6 {
        for sign in [-1.0, 1.0] {
            let u = 7.0 / 12.0 + sign * 10f64.powi(-k);
            let h = u - 7.0 / 12.0;
            let oracle = h * h * (2.0 * u - 5.0 / 3.0);
            let got = m.f_from_fold(u);
            assert!((got - oracle).abs() <= 1e-12 * oracle.abs(), "u = {u}: {got} vs {oracle}");
        }
    }
    assert!((m.f_from_fold(5.0 / 6.0)).abs() < 1e-15);
}
