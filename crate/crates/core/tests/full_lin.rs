//! Full linearization: clocks, projective charts, 2-planes, asymptotics,
//! convergence to the reduced flow, the rescaled layer and the toy problem.

use std::sync::OnceLock;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use wavespec::espec::{EndState, EssentialSpectrum, Scaling};
use wavespec::full_lin::*;
use wavespec::model::ModelFunctions;
use wavespec::ode::{self, Options};
use wavespec::slow_evans::{jump_graph, JumpData};
use wavespec::wave::{self, find_c0, FastState, ShootOptions, SingularOrbit, System, Timescale};
use wavespec::Error;

fn model() -> ModelFunctions {
    ModelFunctions::standard()
}

fn orbit() -> &'static SingularOrbit {
    static O: OnceLock<SingularOrbit> = OnceLock::new();
    O.get_or_init(|| find_c0(&model(), (0.19, 0.23), &ShootOptions::default()).unwrap())
}

fn mat_from(vals: &[f64; 18]) -> CMat3 {
    CMat3::from_fn(|i, j| C::new(vals[2 * (3 * i + j)], vals[2 * (3 * i + j) + 1]))
}

fn mul(m: &CMat3, y: &[C; 3]) -> [C; 3] {
    std::array::from_fn(|i| (0..3).map(|j| m[(i, j)] * y[j]).sum())
}

#[test]
fn linear_matrix_matches_asymptotic_matrix_and_jacobian() {
    let m = model();
    let c = 0.2;
    let es = EssentialSpectrum::new(m.clone(), c);
    let lambda = C::new(0.4, -1.3);
    for (end, u) in [(EndState::Minus, 0.0), (EndState::Plus, 1.0)] {
        for (scaling, ts) in [(Scaling::Fast, Timescale::Fast), (Scaling::Slow, Timescale::Slow)] {
            let a = lin_matrix(&m, u, lambda, 0.01, c, ts);
            let b = es.asymptotic_matrix(lambda, 0.01, end, scaling);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((a[(i, j)] - b[(i, j)]).norm() < 1e-13);
                }
            }
        }
    }
    let jac = wave::jacobian_fast(&m, 0.37, c, 0.01);
    let a = fast_matrix(&m, 0.37, C::new(0.0, 0.0), 0.01, c);
    for i in 0..3 {
        for j in 0..3 {
            assert!((a[(i, j)] - jac[i][j]).norm() < 1e-15);
        }
    }
}

#[test]
fn slow_clock_is_fast_clock_over_eps() {
    let m = model();
    let st = LinState3 {
        y: [C::new(1.0, 0.5), C::new(-0.3, 0.0), C::new(0.2, 2.0)],
        base: FastState::new(0.3, 0.02, m.f(0.3)),
        lambda: C::new(0.7, 0.1),
        eps: 0.003,
    };
    let f = lin_rhs(&m, &st, 0.2, Timescale::Fast);
    let s = lin_rhs(&m, &st, 0.2, Timescale::Slow);
    for i in 0..3 {
        assert!((s[i] * st.eps - f[i]).norm() < 1e-14 * f[i].norm().max(1.0));
    }
}

#[test]
fn wave_derivative_solves_the_linearization_at_zero() {
    // Along any solution z(t) of the fast system, z'(t) solves y' = a(u(t), 0) y.
    let m = model();
    let (c, eps) = (0.2, 0.01);
    let z0 = FastState::new(0.3, 0.02, m.f(0.3) + 0.01);
    let d0 = wave::rhs(&m, z0, c, eps, System::FullFast).unwrap();
    let f = |_: f64, y: &[f64; 9]| {
        let base = FastState::new(y[0], y[1], y[2]);
        let b = wave::rhs(&m, base, c, eps, System::FullFast).unwrap();
        let st = LinState3 {
            y: [C::new(y[3], y[4]), C::new(y[5], y[6]), C::new(y[7], 0.0)],
            base,
            lambda: C::new(0.0, 0.0),
            eps,
        };
        let l = lin_rhs(&m, &st, c, Timescale::Fast);
        [b.u, b.p, b.v, l[0].re, l[0].im, l[1].re, l[1].im, l[2].re, 0.0]
    };
    let y0 = [z0.u, z0.p, z0.v, d0.u, 0.0, d0.p, 0.0, d0.v, 0.0];
    let opts = Options::with_tol(1e-12, 1e-14);
    let mut t = 0.0;
    let mut y = y0;
    for k in 1..=20 {
        let t1 = 2.5 * k as f64;
        y = *ode::solve(f, t, y, t1, &opts, &[]).unwrap().last();
        t = t1;
        let d = wave::rhs(&m, FastState::new(y[0], y[1], y[2]), c, eps, System::FullFast).unwrap();
        let scale = d.u.abs().max(d.p.abs()).max(d.v.abs());
        for (a, b) in [(y[3], d.u), (y[5], d.p), (y[7], d.v)] {
            assert!((a - b).abs() <= 1e-7 * scale, "t = {t}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn projective_flow_is_the_quotient_of_the_linear_flow(
        vals in prop::array::uniform18(-2.0f64..2.0),
        y in prop::array::uniform6(-2.0f64..2.0),
    ) {
        let m = mat_from(&vals);
        let h = [C::new(y[0], y[1]), C::new(y[2], y[3]), C::new(y[4], y[5])];
        let my = mul(&m, &h);
        for chart in [ProjChart::U0, ProjChart::P0, ProjChart::V0] {
            let k = chart.index();
            prop_assume!(h[k].norm() > 0.2);
            let pt = ChartPoint::from_homogeneous(&h, chart).unwrap();
            let d = proj_rhs(&m, &pt);
            // d/dt (y_i/y_k) = (My)_i/y_k − y_i (My)_k / y_k².
            let others: Vec<usize> = (0..3).filter(|&i| i != k).collect();
            for (n, &i) in others.iter().enumerate() {
                let q = my[i] / h[k] - h[i] * my[k] / (h[k] * h[k]);
                prop_assert!((d[n] - q).norm() <= 1e-12 * q.norm().max(1.0));
            }
        }
    }

    #[test]
    fn chart_round_trips(y in prop::array::uniform6(-2.0f64..2.0)) {
        let h = [C::new(y[0], y[1]), C::new(y[2], y[3]), C::new(y[4], y[5])];
        prop_assume!(h.iter().all(|z| z.norm() > 0.1));
        let a = ChartPoint::from_homogeneous(&h, ProjChart::U0).unwrap();
        let b = a.to_chart(ProjChart::V0).unwrap().to_chart(ProjChart::P0).unwrap().to_chart(ProjChart::U0).unwrap();
        for i in 0..2 {
            prop_assert!((a.coords[i] - b.coords[i]).norm() <= 1e-10 * a.coords[i].norm().max(1.0));
        }
        prop_assert!(fubini_study_dist(&h, &b.homogeneous()).unwrap() < 1e-7);
    }

    #[test]
    fn wedge_eigenvalues_are_pairwise_sums(vals in prop::array::uniform18(-3.0f64..3.0)) {
        let m = mat_from(&vals);
        prop_assert!(wedge_eig_defect(&m).unwrap() <= 1e-8);
        prop_assert!(wedge_eig_check(&m).unwrap());
    }

    #[test]
    fn compound_matrix_drives_the_wedge(
        vals in prop::array::uniform18(-2.0f64..2.0),
        a in prop::array::uniform6(-2.0f64..2.0),
        b in prop::array::uniform6(-2.0f64..2.0),
    ) {
        // (y1 ∧ y2)' = y1' ∧ y2 + y1 ∧ y2' = M⁽²⁾ (y1 ∧ y2).
        let m = mat_from(&vals);
        let y1 = [C::new(a[0], a[1]), C::new(a[2], a[3]), C::new(a[4], a[5])];
        let y2 = [C::new(b[0], b[1]), C::new(b[2], b[3]), C::new(b[4], b[5])];
        let lhs: Vec<C> = wedge(&mul(&m, &y1), &y2).to_array().iter()
            .zip(wedge(&y1, &mul(&m, &y2)).to_array())
            .map(|(x, y)| x + y)
            .collect();
        let rhs = mul(&compound2(&m), &wedge(&y1, &y2).to_array());
        for i in 0..3 {
            prop_assert!((lhs[i] - rhs[i]).norm() <= 1e-12 * rhs[i].norm().max(1.0));
        }
    }
}

#[test]
fn fast_chart_at_eps_zero_ignores_lambda() {
    let m = model();
    let pt = ChartPoint { chart: ProjChart::U0, coords: [C::new(0.3, 0.1), C::new(-0.4, 0.2)] };
    let a = proj_rhs_fast(&m, 0.4, &pt, C::new(0.0, 0.0), 0.0, 0.2);
    let b = proj_rhs_fast(&m, 0.4, &pt, C::new(5.0, -3.0), 0.0, 0.2);
    assert_eq!(a, b);
    let slow = proj_rhs_slow(&m, 0.4, [C::new(0.3, 0.0), C::new(0.1, 0.0)], C::new(1.0, 0.0), 0.01, 0.2);
    assert!(slow.iter().all(|z| z.is_finite()));
}

#[test]
fn chart_at_infinity_is_rejected() {
    let h = [C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(2.0, 0.0)];
    assert!(matches!(ChartPoint::from_homogeneous(&h, ProjChart::U0), Err(Error::Domain(_))));
}

#[test]
fn wedge_matrix_is_the_compound_of_the_fast_matrix() {
    let m = model();
    let (lambda, eps, c) = (C::new(1.0, 0.3), 1e-3, 0.2);
    for u in [0.0, 0.3, 7.0 / 12.0, 1.0] {
        let w = wedge_matrix(&m, u, lambda, eps, c);
        let k = compound2(&fast_matrix(&m, u, lambda, eps, c));
        assert!((w - k).norm() < 1e-14);
        let st = WedgeState { w_up: C::new(0.1, 0.2), w_pv: C::new(-1.0, 0.0), w_vu: C::new(0.5, -0.5) };
        let r = wedge_rhs(&m, u, &st, lambda, eps, c).to_array();
        let e = mul(&k, &st.to_array());
        for i in 0..3 {
            assert!((r[i] - e[i]).norm() < 1e-14);
        }
    }
}

#[test]
fn frozen_wedge_spectrum_has_two_fast_and_one_slow_eigenvalue() {
    // Eigenvalues of a⁽²⁾ are μ_f + μ_s1, μ_f + μ_s2 (O(1), negative) and μ_s1 + μ_s2 (O(ε)).
    let m = model();
    let eps = 1e-3;
    let w = wedge_matrix(&m, 0.0, C::new(1.0, 0.0), eps, 0.2);
    let dm = nalgebra::DMatrix::from_fn(3, 3, |i, j| w[(i, j)]);
    let mut ev = wavespec::linalg::eigenvalues(&dm).unwrap();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re));
    assert!(ev[0].re < -1.0 && ev[1].re < -1.0);
    assert!(ev[2].norm() < 10.0 * eps);
    let trace = w[(0, 0)] + w[(1, 1)] + w[(2, 2)];
    assert!((ev.iter().sum::<C>() - trace).norm() < 1e-10);
}

#[test]
fn wedge_of_two_solutions_solves_the_wedge_flow() {
    let m = model();
    let (u, lambda, eps, c) = (0.3, C::new(0.5, 0.5), 0.01, 0.2);
    let a = fast_matrix(&m, u, lambda, eps, c);
    let pack = |y: &[C; 3]| [y[0].re, y[0].im, y[1].re, y[1].im, y[2].re, y[2].im];
    let unpack = |v: &[f64]| -> [C; 3] { [C::new(v[0], v[1]), C::new(v[2], v[3]), C::new(v[4], v[5])] };
    let f = |_: f64, y: &[f64; 18]| {
        let mut out = [0.0; 18];
        let a1 = mul(&a, &unpack(&y[0..6]));
        let a2 = mul(&a, &unpack(&y[6..12]));
        let w = WedgeState::from_array(unpack(&y[12..18]));
        let dw = wedge_rhs(&m, u, &w, lambda, eps, c).to_array();
        out[0..6].copy_from_slice(&pack(&a1));
        out[6..12].copy_from_slice(&pack(&a2));
        out[12..18].copy_from_slice(&pack(&dw));
        out
    };
    let y1 = [C::new(1.0, 0.0), C::new(0.2, 0.1), C::new(-0.3, 0.0)];
    let y2 = [C::new(0.0, 0.5), C::new(1.0, 0.0), C::new(0.4, -0.2)];
    let mut y0 = [0.0; 18];
    y0[0..6].copy_from_slice(&pack(&y1));
    y0[6..12].copy_from_slice(&pack(&y2));
    y0[12..18].copy_from_slice(&pack(&wedge(&y1, &y2).to_array()));
    let sol = ode::solve(f, 0.0, y0, 5.0, &Options::with_tol(1e-12, 1e-14), &[]).unwrap();
    let y = sol.last();
    let direct = wedge(&unpack(&y[0..6]), &unpack(&y[6..12])).to_array();
    let flowed = unpack(&y[12..18]);
    for i in 0..3 {
        assert!((direct[i] - flowed[i]).norm() < 1e-9 * direct[i].norm().max(1.0));
    }
}

#[test]
fn fubini_study_distance_cases() {
    let x = [C::new(1.0, 0.0), C::new(0.0, 0.0)];
    let y = [C::new(0.0, 0.0), C::new(3.0, 0.0)];
    assert!((fubini_study_dist(&x, &y).unwrap() - 1.0).abs() < 1e-15);
    let z = [C::new(0.0, 2.0), C::new(0.0, 0.0)];
    assert!(fubini_study_dist(&x, &z).unwrap() < 1e-15);
    let w = [C::new(1.0, 0.0), C::new(1.0, 0.0)];
    assert!((fubini_study_dist(&x, &w).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(matches!(fubini_study_dist(&x, &[C::new(0.0, 0.0); 2]), Err(Error::Domain(_))));
}

#[test]
fn fast_eigenvalue_approaches_its_limit() {
    let m = model();
    let eps = 1e-5;
    for end in [EndState::Minus, EndState::Plus] {
        let e = asymptotic_eigs(&m, C::new(0.0, 0.0), eps, 0.2, end).unwrap();
        assert!(((e.mu[0].re - e.mu_f0) / e.mu_f0).abs() <= 10.0 * eps);
        // Slow eigenvalues are εν up to O(ε²).
        for (mu, nu) in [(e.mu[1], e.nu_m), (e.mu[2], e.nu_p)] {
            assert!((mu - eps * nu).norm() <= 10.0 * eps * (eps * nu).norm());
        }
        // Eigenvectors approach the reduced ones.
        for i in 0..3 {
            assert!(fubini_study_dist(&e.vectors[i], &e.reduced[i]).unwrap() < 1e-3, "vector {i} at {end:?}");
        }
    }
}

#[test]
fn asymptotic_eigenvalues_satisfy_vieta() {
    // For a: e₁ = -(ελ + D)/c, e₂ = -ε, e₃ = -ε²(R' - λ)/c.
    let m = model();
    let (eps, c) = (0.01, 0.2);
    for (lambda, end) in [(C::new(0.5, 0.8), EndState::Minus), (C::new(2.0, -1.0), EndState::Plus)] {
        let u = end.u_bar();
        let e = asymptotic_eigs(&m, lambda, eps, c, end).unwrap();
        let [a, b, d] = e.mu;
        let e1 = -(eps * lambda + m.d(u)) / c;
        let e3 = -eps * eps * (m.r_prime(u) - lambda) / c;
        assert!((a + b + d - e1).norm() < 1e-12);
        assert!((a * b + b * d + a * d + eps).norm() < 1e-12);
        assert!((a * b * d - e3).norm() < 1e-14);
        // ν_m ν_p = (R' - λ)/D.
        assert!((e.nu_m * e.nu_p - (m.r_prime(u) - lambda) / m.d(u)).norm() < 1e-12);
        for i in 0..3 {
            let av = mul(&fast_matrix(&m, u, lambda, eps, c), &e.vectors[i]);
            for k in 0..3 {
                assert!((av[k] - e.mu[i] * e.vectors[i][k]).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn hierarchy_breaks_for_large_eps_and_is_reported() {
    let m = model();
    assert!(matches!(asymptotic_eigs(&m, C::new(0.0, 0.0), 0.1, 5.0, EndState::Minus), Err(Error::Hierarchy(_))));
    assert!(matches!(asymptotic_eigs(&m, C::new(0.0, 0.0), 0.0, 0.2, EndState::Minus), Err(Error::Domain(_))));
    let lambdas = [C::new(0.0, 0.0), C::new(1.0, 1.0), C::new(15.0, 0.0)];
    let bar = hierarchy_eps_bar(&m, &lambdas, 0.2, &[0.5, 0.1, 0.01, 1e-3, 1e-4]).unwrap();
    assert!(bar >= 1e-3);
    for &eps in [0.5, 0.1, 0.01, 1e-3, 1e-4].iter().filter(|&&e| e <= bar) {
        for &l in &lambdas {
            assert!(asymptotic_eigs(&m, l, eps, 0.2, EndState::Plus).is_ok());
        }
    }
    assert_eq!(hierarchy_eps_bar(&m, &lambdas, 5.0, &[0.1]), None);
}

#[test]
fn projectivized_solution_converges_to_the_reduced_curve() {
    let m = model();
    let opts = ConvergenceOptions::default();
    let eps = [1e-2, 3e-3, 1e-3];
    for lambda in [15.0, 0.0] {
        let res = convergence_run(&m, C::new(lambda, 0.0), &eps, orbit(), &opts).unwrap();
        let d: Vec<f64> = res.iter().map(|r| r.sup_distance).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "λ = {lambda}: {d:?}");
        assert!(res[1].reached >= 0.95 && res[2].reached >= 0.95);
        assert!(res.iter().all(|r| r.c == orbit().c0));
    }
    let err = convergence_run(&m, C::new(1.0, 0.0), &[1e-3, 1e-2], orbit(), &opts);
    assert!(matches!(err, Err(Error::Domain(_))));
}

#[test]
fn convergence_distances_are_stable_under_tolerance_refinement() {
    let m = model();
    let coarse = ConvergenceOptions::default();
    let fine = ConvergenceOptions { rtol: 1e-11, atol: 1e-13, ..coarse };
    let eps = [3e-3, 1e-3];
    let a = convergence_run(&m, C::new(15.0, 0.0), &eps, orbit(), &coarse).unwrap();
    let b = convergence_run(&m, C::new(15.0, 0.0), &eps, orbit(), &fine).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.sup_distance - y.sup_distance).abs() < 1e-6, "{} vs {}", x.sup_distance, y.sup_distance);
    }
}

#[test]
fn reduced_rows_follow_the_jump_graph_on_the_fiber() {
    let m = model();
    let opts = ConvergenceOptions::default();
    let lambda = C::new(0.5, 0.0);
    let rows = reduced_rows(orbit(), lambda, &opts, 91).unwrap();
    assert_eq!(rows.len(), 91);
    assert!(rows.iter().all(|r| r.eps == 0.0 && r.s.im == 0.0));
    let jd = JumpData::from_orbit(orbit()).unwrap();
    let on_fiber: Vec<_> = rows.iter().filter(|r| r.ubar > jd.u_f && r.ubar < jd.u_j).collect();
    assert!(!on_fiber.is_empty());
    // Graph values from two fiber points determine the same starting s₀.
    let s0_of = |r: &CurveRow| {
        let den_f = jd.c * jd.u_f - jd.p_f;
        (r.s * (jd.c * r.ubar - jd.p_f) - (m.r(r.ubar) - m.r(jd.u_f) - lambda * (r.ubar - jd.u_f))) / den_f
    };
    let s0 = s0_of(on_fiber[0]);
    for r in &on_fiber {
        assert!((s0_of(r) - s0).norm() < 1e-10);
        assert!((jump_graph(&m, s0, lambda, &jd, r.ubar) - r.s).norm() < 1e-10);
    }
}

#[test]
fn rescaled_layer_integrates_to_the_jump_graph() {
    let jd = JumpData::from_orbit(orbit()).unwrap();
    let xi: Vec<f64> = std::iter::once(0.0).chain((0..=60).map(|i| 10f64.powf(i as f64 / 10.0))).collect();
    let rep = rescaled_layer(&model(), &jd, C::new(0.3, 0.4), &xi, C::new(2.0, -1.0), C::new(0.5, 0.1)).unwrap();
    assert!(rep.samples.last().unwrap().ubar > 0.8);
    assert!(rep.identity_error < 1e-8, "identity {}", rep.identity_error);
    assert!(rep.quadrature_error < 1e-8, "quadrature {}", rep.quadrature_error);
    assert!(rep.g_error_scaled < 1e-8, "g {}", rep.g_error_scaled);
    assert!(rep.g_error_minus > 0.5 && rep.g_error_plus > 0.5);
    assert!(rep.s_error < 1e-8, "s {}", rep.s_error);
    assert!(matches!(
        rescaled_layer(&model(), &jd, C::new(0.0, 0.0), &[1.0, 2.0], C::new(1.0, 0.0), C::new(0.0, 0.0)),
        Err(Error::Domain(_))
    ));
}

fn toy(eps: f64) -> ToyState {
    ToyState { b: 0.5, y: 0.5, db: C::new(0.3, 0.0), dy: C::new(0.4, 0.0), eps, lambda: C::new(1.0, 0.0) }
}

#[test]
fn toy_problem_matches_its_closed_form() {
    for eps in [0.02, 0.01, 0.005] {
        let r = toy_exchange(&toy(eps), 5.0 / eps).unwrap();
        assert!(r.closed_form_error <= 1e-9, "eps {eps}: {}", r.closed_form_error);
    }
    assert!(matches!(toy_exchange(&toy(0.2), 1.0), Err(Error::Domain(_))));
    assert!(matches!(toy_exchange(&ToyState { b: 2.0, ..toy(0.01) }, 1.0), Err(Error::Domain(_))));
}

#[test]
fn toy_slow_manifold_is_invariant() {
    let eps = 0.01;
    let (y, dy, lambda) = (0.5, C::new(0.4, 0.1), C::new(1.0, 2.0));
    let on = ToyState { b: 0.0, y, db: eps * lambda * y * dy / (1.0 + 2.0 * eps), dy, eps, lambda };
    assert!(on.manifold_defect() < 1e-16);
    let r = toy_exchange(&on, 1.0 / eps).unwrap();
    // Values grow like e^{2εt}; the defect stays at rounding level relative to that.
    assert!(r.manifold_defect < 1e-10, "{}", r.manifold_defect);
    let far = toy_exchange(&toy(eps), 1.0 / eps).unwrap();
    assert!(far.manifold_defect > 0.1);
}

#[test]
fn toy_angle_scales_like_eps_squared() {
    let ratios: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&eps| toy_exchange(&toy(eps), 1.0 / eps).unwrap().angle / (eps * eps))
        .collect();
    for w in ratios.windows(2) {
        assert!((w[0] / w[1] - 1.0).abs() < 0.05, "{ratios:?}");
    }
    // Exact angle at t = 1/ε is (e/2)·bound up to O(ε).
    for eps in [0.02, 0.01, 0.005] {
        let r = toy_exchange(&toy(eps), 1.0 / eps).unwrap();
        assert!((r.angle / r.bound - std::f64::consts::E / 2.0).abs() < 0.05);
        let early = toy_exchange(&toy(eps), 0.5 / eps).unwrap();
        assert!(early.bound_holds);
    }
}
