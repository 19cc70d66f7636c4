//! Invariant suites behind `wavespec verify`. Each suite is deterministic and
//! checks properties that hold independently of any reference numbers.

use num_complex::Complex64 as C;
use serde::Serialize;
use wavespec::espec::{EndState, EssentialSpectrum, Order, RegionLabel, Signature};
use wavespec::full_lin::{self, asymptotic_eigs, CMat3, ToyState};
use wavespec::model::{ModelFunctions, Rational};
use wavespec::ode::{self, Options};
use wavespec::slow_evans::{jump_linear, jump_projective, EvansConfig, SlowEvans};
use wavespec::wave::{self, FastState, ShootOptions, System};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub pass: bool,
    pub detail: String,
    #[serde(skip)]
    pub c0: Option<f64>,
}

type Check = wavespec::Result<(bool, String)>;

fn suite(name: &'static str, r: Check) -> SuiteResult {
    match r {
        Ok((pass, detail)) => SuiteResult { suite: name, pass, detail, c0: None },
        Err(e) => SuiteResult { suite: name, pass: false, detail: format!("error: {e}"), c0: None },
    }
}

/// Deterministic complex probe points on a spiral.
fn probes(n: usize, scale: f64) -> impl Iterator<Item = C> {
    (0..n).map(move |k| {
        let t = k as f64 + 1.0;
        C::from_polar(scale * (0.2 + 0.8 * (0.37 * t).fract()), 2.399963 * t)
    })
}

pub fn run_suites(cfg: &RunConfig) -> Vec<SuiteResult> {
    let m = ModelFunctions::standard();
    let shoot = ShootOptions { rtol: cfg.rtol, atol: cfg.atol, defect_tol: cfg.shoot_tol, ..ShootOptions::default() };
    let mut out = vec![suite("model", model_suite(&m))];
    let orbit = wave::find_c0(&m, cfg.c_bracket, &shoot);
    let mut w = suite("wave", wave_suite(&m, cfg, &shoot, &orbit));
    w.c0 = orbit.as_ref().ok().map(|o| o.c0);
    out.push(w);
    let c0 = orbit.as_ref().map(|o| o.c0).unwrap_or(0.5 * (cfg.c_bracket.0 + cfg.c_bracket.1));
    out.push(suite("espec", espec_suite(&m, c0)));
    let evans = orbit.clone().and_then(|o| {
        SlowEvans::new(
            o,
            EvansConfig {
                section: cfg.section,
                rtol: cfg.rtol,
                atol: cfg.atol,
                beta: cfg.beta,
                ..EvansConfig::default()
            },
        )
    });
    out.push(suite("slow_evans", evans.and_then(|e| slow_evans_suite(&m, &e))));
    out.push(suite("full_lin", full_lin_suite(&m, c0)));
    out.push(suite("toy", toy_suite()));
    out
}

fn model_suite(m: &ModelFunctions) -> Check {
    let target = Rational::new(245, 432);
    let exact = m.eval_exact(Rational::new(7, 12))[2] == target && m.eval_exact(Rational::new(5, 6))[2] == target;
    let mut fold: f64 = 0.0;
    for k in 0..=20 {
        let u = 0.05 * k as f64;
        let r = m.f_from_fold(u) - (m.f(u) - m.f(m.u_f()));
        fold = fold.max(r.abs());
    }
    Ok((exact && fold <= 1e-13, format!("F(u_F) = F(u_J) = 245/432 exactly: {exact}; fold-shifted F error {fold:.1e}")))
}

fn wave_suite(
    m: &ModelFunctions,
    cfg: &RunConfig,
    shoot: &ShootOptions,
    orbit: &wavespec::Result<wave::SingularOrbit>,
) -> Check {
    let orbit = orbit.as_ref().map_err(Clone::clone)?;
    let hyp = wave::check_hypotheses(orbit, shoot)?;
    let inside = orbit.c0 > cfg.c_bracket.0 && orbit.c0 < cfg.c_bracket.1;
    // The layer flow keeps p̄ and v̄ fixed.
    let (c, p0, v0) = (orbit.c0, orbit.p_f, orbit.v_f);
    let f = |_: f64, y: &[f64; 3]| {
        wave::rhs(m, FastState::new(y[0], y[1], y[2]), c, 0.0, System::Layer).unwrap().to_array()
    };
    let sol = ode::solve(f, 0.0, [0.6, p0, v0], 100.0, &Options::with_tol(cfg.rtol, cfg.atol), &[])?;
    let drift = sol.y.iter().map(|y| (y[1] - p0).abs().max((y[2] - v0).abs())).fold(0.0, f64::max);
    Ok((
        inside && orbit.defect.abs() <= 1e-8 && hyp.monotone && drift <= 1e-10,
        format!(
            "c0 = {:.10} in bracket: {inside}; defect {:.1e}; monotone slow flow: {}; layer drift {drift:.1e}",
            orbit.c0, orbit.defect, hyp.monotone
        ),
    ))
}

fn espec_suite(m: &ModelFunctions, c: f64) -> Check {
    let s = EssentialSpectrum::new(m.clone(), c);
    let sig = |n, p| Signature::Hyperbolic { neg: n, pos: p };
    let rows = [
        (C::new(1.0, 0.0), RegionLabel::Omega, sig(2, 1), sig(2, 1)),
        (C::new(-2.0, 0.0), RegionLabel::A1, sig(1, 2), sig(2, 1)),
        (C::new(-20.0, 50.0), RegionLabel::A2, sig(2, 1), sig(1, 2)),
        (C::new(-5.0, 0.0), RegionLabel::A4, sig(1, 2), sig(1, 2)),
    ];
    let mut table = true;
    for (l, label, a, b) in rows {
        table &= s.signature(l, 0.1, EndState::Minus)? == a
            && s.signature(l, 0.1, EndState::Plus)? == b
            && s.classify(l, 0.1)? == label;
    }
    // Border points are where the asymptotic matrix has a purely imaginary eigenvalue.
    let mut border = true;
    for end in [EndState::Minus, EndState::Plus] {
        for p in s.border_polyline(0.1, end, Order::Third, 0.0, (-20.0, 20.0), 41) {
            border &= s.signature(p.lambda, 0.1, end)? == Signature::Border;
        }
    }
    Ok((table && border, format!("signature table: {table}; border points are borders: {border}")))
}

fn slow_evans_suite(m: &ModelFunctions, e: &SlowEvans) -> Check {
    let mut jump: f64 = 0.0;
    for (i, l) in probes(25, 3.0).enumerate() {
        let p = C::from_polar(1.0 + 0.1 * i as f64, 0.7 * i as f64);
        let v = C::new(1.0, 0.3 * i as f64 - 3.0);
        let (p1, v1) = jump_linear(m, p, v, l, &e.jump);
        let s1 = jump_projective(m, p / v, l, &e.jump);
        jump = jump.max((p1 / v1 - s1).norm() / s1.norm().max(1.0));
    }
    let e0 = e.evans(C::new(0.0, 0.0))?.value.norm();
    let mut conj: f64 = 0.0;
    for l in [C::new(0.2, 0.4), C::new(-0.3, 1.1), C::new(0.7, 0.05)] {
        let a = e.evans(l)?.value;
        let b = e.evans(l.conj())?.value;
        conj = conj.max((a - b.conj()).norm() / a.norm().max(1.0));
    }
    Ok((
        jump <= 1e-12 && e0 <= 1e-8 && conj <= 1e-10,
        format!("jump projectivization {jump:.1e}; |E(0)| = {e0:.1e}; conjugation symmetry {conj:.1e}"),
    ))
}

fn full_lin_suite(m: &ModelFunctions, c: f64) -> Check {
    let mut wedge: f64 = 0.0;
    let mut z = probes(200, 3.0);
    for _ in 0..20 {
        let mat = CMat3::from_fn(|_, _| z.next().expect("enough probes"));
        wedge = wedge.max(full_lin::wedge_eig_defect(&mat)?);
    }
    let eps = 0.01;
    let mut vieta: f64 = 0.0;
    for (lambda, end) in [(C::new(0.5, 0.8), EndState::Minus), (C::new(2.0, -1.0), EndState::Plus)] {
        let u = end.u_bar();
        let [a, b, d] = asymptotic_eigs(m, lambda, eps, c, end)?.mu;
        let e1 = -(eps * lambda + m.d(u)) / c;
        let e3 = -eps * eps * (m.r_prime(u) - lambda) / c;
        vieta =
            vieta.max((a + b + d - e1).norm()).max((a * b + b * d + a * d + eps).norm()).max((a * b * d - e3).norm());
    }
    Ok((wedge <= 1e-8 && vieta <= 1e-10, format!("wedge eigenvalue sums {wedge:.1e}; asymptotic Vieta {vieta:.1e}")))
}

fn toy_suite() -> Check {
    let mut err: f64 = 0.0;
    let mut holds = true;
    for eps in [0.02, 0.01] {
        let ics =
            ToyState { b: 0.5, y: 0.5, db: C::new(0.3, 0.0), dy: C::new(0.4, 0.0), eps, lambda: C::new(1.0, 0.0) };
        let r = full_lin::toy_exchange(&ics, 0.5 / eps)?;
        err = err.max(r.closed_form_error);
        holds &= r.bound_holds;
    }
    Ok((err <= 1e-9 && holds, format!("closed form {err:.1e}; angle bound at t = 1/(2ε): {holds}")))
}
