//! Travelling-wave construction.
//!
//! The singular orbit Γ₀ is two slow segments on the attracting branches of
//! the critical manifold `v = F(u)` joined by a horizontal fast jump from the
//! fold `u = 7/12` to `u = 5/6`. Its speed `c₀` is the root of the matching
//! defect in `P` at the jump. For `ε > 0` the full three-dimensional system is
//! shot forward from `z⁻ = (0,0,0)` along its one-dimensional unstable
//! manifold and `c` is bisected on overshoot/undershoot of `z⁺ = (1, c, 5/8)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::espec::EndState;
use crate::linalg::{self, CMat};
use crate::model::ModelFunctions;
use crate::ode::{self, Direction, Event, Stop};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SlowState {
    pub u: f64,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FastState {
    pub u: f64,
    pub p: f64,
    pub v: f64,
}

impl FastState {
    pub fn new(u: f64, p: f64, v: f64) -> Self {
        Self { u, p, v }
    }
    pub fn to_array(self) -> [f64; 3] {
        [self.u, self.p, self.v]
    }
    pub fn from_array(a: [f64; 3]) -> Self {
        Self { u: a[0], p: a[1], v: a[2] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Layer,
    Reduced,
    Desingularized,
    FullFast,
    FullSlow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Timescale {
    Slow,
    Fast,
}

/// Right-hand side of the selected system. For the two slow-manifold flows
/// the `v` component is `d/dt F(U)`, so a state on `v = F(u)` stays there.
pub fn rhs(model: &ModelFunctions, s: FastState, c: f64, eps: f64, system: System) -> Result<FastState> {
    let FastState { u, p, v } = s;
    Ok(match system {
        System::Layer => FastState::new((v - model.f(u)) / c, 0.0, 0.0),
        System::FullFast => FastState::new((v - model.f(u)) / c, eps * model.r(u), eps * (c * u - p)),
        System::FullSlow => {
            if eps <= 0.0 {
                return Err(Error::Domain("full slow system needs eps > 0".into()));
            }
            FastState::new((v - model.f(u)) / (c * eps), model.r(u), c * u - p)
        }
        System::Reduced => {
            let d = model.d(u);
            if d.abs() < 1e-13 {
                return Err(Error::Domain(format!(
                    "reduced flow singular at fold (D({u}) = {d:e}); use the desingularized flow"
                )));
            }
            FastState::new((c * u - p) / d, model.r(u), c * u - p)
        }
        System::Desingularized => {
            let d = model.d(u);
            FastState::new(c * u - p, model.r(u) * d, d * (c * u - p))
        }
    })
}

/// Desingularized slow flow `U' = cU - P`, `P' = R(U) D(U)`.
#[inline]
pub fn desingularized(model: &ModelFunctions, s: &[f64; 2], c: f64) -> [f64; 2] {
    let u = s[0];
    [c * u - s[1], model.r(u) * model.d(u)]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaddleFrame {
    pub endpoint: EndState,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Sup-normalized, same order as `eigenvalues`.
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Jacobian of the fast system at a point `(u, p, v)`; it does not depend on `p, v`.
pub fn jacobian_fast(model: &ModelFunctions, u: f64, c: f64, eps: f64) -> [[f64; 3]; 3] {
    [[-model.d(u) / c, 0.0, 1.0 / c], [eps * model.r_prime(u), 0.0, 0.0], [eps * c, -eps, 0.0]]
}

/// Saddle data at `z⁻` or `z⁺`: the 3×3 fast Jacobian for `eps > 0`, the
/// 2×2 desingularized slow Jacobian for `eps = 0`.
pub fn saddle_frame(model: &ModelFunctions, endpoint: EndState, c: f64, eps: f64) -> Result<SaddleFrame> {
    let u = endpoint.u_bar();
    if eps == 0.0 {
        let k = model.r_prime(u) * model.d(u) + model.r(u) * model.d_prime(u);
        let disc = c * c - 4.0 * k;
        if disc <= 0.0 || k >= 0.0 {
            return Err(Error::Hierarchy(format!("Z at u={u} is not a saddle of the slow flow")));
        }
        let (m1, m2) = ((c - disc.sqrt()) / 2.0, (c + disc.sqrt()) / 2.0);
        let vec = |m: f64| {
            let (a, b): (f64, f64) = (1.0, c - m);
            let s = a.abs().max(b.abs());
            vec![a / s, b / s]
        };
        return Ok(SaddleFrame { endpoint, eigenvalues: vec![m1, m2], eigenvectors: vec![vec(m1), vec(m2)] });
    }
    let j = jacobian_fast(model, u, c, eps);
    let m = CMat::from_fn(3, 3, |r, k| Complex64::new(j[r][k], 0.0));
    let pairs = linalg::eigenpairs(&m)?;
    let scale = pairs.iter().map(|(l, _)| l.norm()).fold(0.0, f64::max);
    if pairs.iter().any(|(l, _)| l.im.abs() > 1e-9 * scale) {
        return Err(Error::Hierarchy("complex saddle eigenvalues".into()));
    }
    let ev: Vec<f64> = pairs.iter().map(|(l, _)| l.re).collect();
    let (mf, m1, m2) = (ev[0], ev[1], ev[2]);
    if !(mf < m1 && m1 < 0.0 && 0.0 < m2 && mf.abs() > 10.0 * m1.abs().max(m2)) {
        return Err(Error::Hierarchy(format!(
            "expected mu_f << mu_s1 < 0 < mu_s2, got {mf:e}, {m1:e}, {m2:e}; eps too large"
        )));
    }
    Ok(SaddleFrame {
        endpoint,
        eigenvalues: ev,
        eigenvectors: pairs.iter().map(|(_, v)| v.iter().map(|z| z.re).collect()).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShootOptions {
    /// Take-off/landing distance from the saddles along their eigenvectors.
    pub offset: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Bisection on the matching defect stops at this bracket width ...
    pub bisect_tol: f64,
    /// ... and the secant polish at this defect.
    pub defect_tol: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { offset: 1e-8, rtol: 1e-10, atol: 1e-12, bisect_tol: 1e-6, defect_tol: 1e-12 }
    }
}

impl ShootOptions {
    fn ode(&self) -> ode::Options {
        ode::Options::with_tol(self.rtol, self.atol)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SlowSegment {
    pub zeta: Vec<f64>,
    pub states: Vec<SlowState>,
}

impl SlowSegment {
    fn from_solution(sol: &ode::Solution<2>, reverse: bool) -> Self {
        let mut zeta: Vec<f64> = sol.t.clone();
        let mut states: Vec<SlowState> = sol.y.iter().map(|y| SlowState { u: y[0], p: y[1] }).collect();
        if reverse {
            zeta.reverse();
            states.reverse();
        }
        // ζ = 0 at the jump: the left segment ends there, the right one starts there.
        let z0 = if reverse { zeta[0] } else { zeta[zeta.len() - 1] };
        zeta.iter_mut().for_each(|z| *z -= z0);
        Self { zeta, states }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularOrbit {
    #[serde(skip)]
    pub model: ModelFunctions,
    pub left_segment: SlowSegment,
    /// `(u_F, u_J)` at height `(p_F, v_F)`.
    pub jump_fiber: (f64, f64),
    pub right_segment: SlowSegment,
    pub c0: f64,
    pub p_f: f64,
    pub v_f: f64,
    /// Matching defect at `c0`.
    pub defect: f64,
}

struct SlowShot {
    left: ode::Solution<2>,
    right: ode::Solution<2>,
}

impl SlowShot {
    fn defect(&self) -> f64 {
        self.left.last()[1] - self.right.last()[1]
    }
}

const T_MAX_SLOW: f64 = 1e3;

fn shoot_slow(model: &ModelFunctions, c: f64, opts: &ShootOptions) -> Result<SlowShot> {
    let o = opts.ode();
    let f = |_: f64, y: &[f64; 2]| desingularized(model, y, c);
    let u_f = model.u_f();
    let u_j = model.u_j();

    let left_frame = saddle_frame(model, EndState::Minus, c, 0.0)?;
    let m = left_frame.eigenvalues[1];
    let y0 = [opts.offset, (c - m) * opts.offset];
    let events = [
        Event::new(Direction::Rising, move |_, y: &[f64; 2]| y[0] - u_f),
        Event::new(Direction::Falling, |_, y: &[f64; 2]| y[0]),
    ];
    let left = ode::solve(f, 0.0, y0, T_MAX_SLOW, &o, &events)?;
    if left.stop != Stop::Event(0) {
        return Err(Error::Integration(format!("left slow segment missed the fold at c={c}")));
    }

    let right_frame = saddle_frame(model, EndState::Plus, c, 0.0)?;
    let m = right_frame.eigenvalues[0];
    let y0 = [1.0 - opts.offset, c - (c - m) * opts.offset];
    let events = [
        Event::new(Direction::Falling, move |_, y: &[f64; 2]| y[0] - u_j),
        Event::new(Direction::Rising, |_, y: &[f64; 2]| y[0] - 1.0),
    ];
    let right = ode::solve(f, 0.0, y0, -T_MAX_SLOW, &o, &events)?;
    if right.stop != Stop::Event(0) {
        return Err(Error::Integration(format!("right slow segment missed the jump point at c={c}")));
    }
    Ok(SlowShot { left, right })
}

/// `m(c) = P_left(u_F) - P_right(u_J)`.
pub fn matching_defect(model: &ModelFunctions, c: f64, opts: &ShootOptions) -> Result<f64> {
    Ok(shoot_slow(model, c, opts)?.defect())
}

/// Bisection then secant on the matching defect.
pub fn find_c0(model: &ModelFunctions, bracket: (f64, f64), opts: &ShootOptions) -> Result<SingularOrbit> {
    let (mut a, mut b) = bracket;
    if !(a > 0.0 && b > a) {
        return Err(Error::Domain(format!("invalid bracket [{a}, {b}]")));
    }
    let m = |c: f64| matching_defect(model, c, opts);
    let (mut fa, fb) = (m(a)?, m(b)?);
    if fa * fb > 0.0 {
        return Err(Error::NoConnection { lo: bracket.0, hi: bracket.1 });
    }
    let mut fb = fb;
    while b - a > opts.bisect_tol {
        let mid = 0.5 * (a + b);
        let fm = m(mid)?;
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    // Secant, safeguarded to stay in the bracket.
    let (mut x0, mut f0, mut x1, mut f1) = (a, fa, b, fb);
    for _ in 0..50 {
        if f1.abs() <= opts.defect_tol || f1 == f0 {
            break;
        }
        let mut x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 > bracket.0 && x2 < bracket.1) {
            x2 = 0.5 * (x0 + x1);
        }
        let f2 = m(x2)?;
        (x0, f0, x1, f1) = (x1, f1, x2, f2);
    }
    let c0 = if f1.abs() <= f0.abs() { x1 } else { x0 };
    singular_orbit_at(model, c0, opts)
}

/// Assembles the orbit at a given speed (with whatever defect it has).
pub fn singular_orbit_at(model: &ModelFunctions, c: f64, opts: &ShootOptions) -> Result<SingularOrbit> {
    let shot = shoot_slow(model, c, opts)?;
    let p_f = shot.left.last()[1];
    Ok(SingularOrbit {
        model: model.clone(),
        left_segment: SlowSegment::from_solution(&shot.left, false),
        jump_fiber: (model.u_f(), model.u_j()),
        right_segment: SlowSegment::from_solution(&shot.right, true),
        c0: c,
        p_f,
        v_f: model.f(model.u_f()),
        defect: shot.defect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub monotone: bool,
    pub min_u_dot: f64,
    pub dm_dc: f64,
}

pub fn check_hypotheses(orbit: &SingularOrbit, opts: &ShootOptions) -> Result<HypothesisReport> {
    let c = orbit.c0;
    let min_u_dot = orbit
        .left_segment
        .states
        .iter()
        .chain(orbit.right_segment.states.iter())
        .map(|s| c * s.u - s.p)
        .fold(f64::INFINITY, f64::min);
    let h = 1e-5;
    let dm_dc = (matching_defect(&orbit.model, c + h, opts)? - matching_defect(&orbit.model, c - h, opts)?) / (2.0 * h);
    Ok(HypothesisReport { monotone: min_u_dot > 0.0, min_u_dot, dm_dc })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveProfile {
    pub grid: Vec<f64>,
    pub states: Vec<FastState>,
    pub c: f64,
    pub eps: f64,
    pub timescale: Timescale,
}

impl WaveProfile {
    fn system(&self) -> System {
        match self.timescale {
            Timescale::Fast => System::FullFast,
            Timescale::Slow => System::FullSlow,
        }
    }

    /// Base point at an arbitrary time: cubic Hermite between stored states
    /// with slopes from the vector field. `t` is clamped to the grid.
    pub fn at(&self, model: &ModelFunctions, t: f64) -> FastState {
        let n = self.grid.len();
        if n == 1 {
            return self.states[0];
        }
        let t = t.clamp(self.grid[0], self.grid[n - 1]);
        let i = self.grid.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let sys = self.system();
        let f = |s: FastState| rhs(model, s, self.c, self.eps, sys).unwrap_or_default().to_array();
        let (a, b) = (self.states[i], self.states[i + 1]);
        FastState::from_array(ode::hermite(
            self.grid[i],
            &a.to_array(),
            &f(a),
            self.grid[i + 1],
            &b.to_array(),
            &f(b),
            t,
        ))
    }

    /// Euclidean distances of the first and last states to `z⁻` and `z⁺`.
    pub fn endpoint_gaps(&self, model: &ModelFunctions) -> (f64, f64) {
        let first = self.states[0];
        let last = self.states[self.states.len() - 1];
        let zp = FastState::new(1.0, self.c, model.f(1.0));
        (dist(first, FastState::default()), dist(last, zp))
    }

    /// Max over grid midpoints of the relative mismatch between the chord
    /// slope and the vector field; a coarse self-consistency check.
    pub fn midpoint_residual(&self, model: &ModelFunctions) -> f64 {
        let sys = self.system();
        self.grid
            .windows(2)
            .zip(self.states.windows(2))
            .map(|(g, s)| {
                let h = g[1] - g[0];
                let mid = FastState::new(0.5 * (s[0].u + s[1].u), 0.5 * (s[0].p + s[1].p), 0.5 * (s[0].v + s[1].v));
                let f = rhs(model, mid, self.c, self.eps, sys).unwrap_or_default();
                let chord = [(s[1].u - s[0].u) / h, (s[1].p - s[0].p) / h, (s[1].v - s[0].v) / h];
                let fa = f.to_array();
                (0..3).map(|i| (chord[i] - fa[i]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn dist(a: FastState, b: FastState) -> f64 {
    ((a.u - b.u).powi(2) + (a.p - b.p).powi(2) + (a.v - b.v).powi(2)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FullShootOptions {
    pub bracket: (f64, f64),
    pub offset: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Bisection stops at this bracket width in `c`.
    pub c_tol: f64,
}

impl Default for FullShootOptions {
    fn default() -> Self {
        Self { bracket: (0.17, 0.25), offset: 1e-8, rtol: 1e-10, atol: 1e-12, c_tol: 1e-14 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShotOutcome {
    /// `u` runs past 1.
    Overshoot,
    /// `u` turns back (or goes negative) before reaching 1.
    Undershoot,
    /// Neither within the time budget.
    Undecided,
}

fn full_shot(
    model: &ModelFunctions,
    c: f64,
    eps: f64,
    opts: &FullShootOptions,
) -> Result<(ShotOutcome, ode::Solution<3>)> {
    let frame = saddle_frame(model, EndState::Minus, c, eps)?;
    let e = &frame.eigenvectors[2];
    let sgn = if e[0] >= 0.0 { 1.0 } else { -1.0 };
    let y0 = [sgn * e[0] * opts.offset, sgn * e[1] * opts.offset, sgn * e[2] * opts.offset];
    let f = |_: f64, y: &[f64; 3]| rhs(model, FastState::from_array(*y), c, eps, System::FullFast).unwrap().to_array();
    let events = [
        Event::new(Direction::Rising, |_, y: &[f64; 3]| y[0] - 1.001),
        Event::new(Direction::Falling, |_, y: &[f64; 3]| y[0] + 1e-3),
        Event::new(Direction::Falling, |_, y: &[f64; 3]| if y[0] > 0.2 { y[2] - model.f(y[0]) } else { 1.0 }),
    ];
    // Slow passages take O(1/eps); the budget covers both branches with margin.
    let t_max = 200.0 / eps;
    let o = ode::Options { max_steps: 20_000_000, ..ode::Options::with_tol(opts.rtol, opts.atol) };
    let sol = ode::solve(f, 0.0, y0, t_max, &o, &events)?;
    let outcome = match sol.stop {
        Stop::Event(0) => ShotOutcome::Overshoot,
        Stop::Event(_) => ShotOutcome::Undershoot,
        Stop::Completed => ShotOutcome::Undecided,
    };
    Ok((outcome, sol))
}

/// Shooting for the `ε > 0` wave. `c_guess` is the first bisection point.
pub fn find_c_eps(
    model: &ModelFunctions,
    eps: f64,
    c_guess: f64,
    opts: &FullShootOptions,
) -> Result<(f64, WaveProfile)> {
    if !(eps > 0.0 && eps <= 0.01) {
        return Err(Error::Domain(format!("find_c_eps needs 0 < eps <= 0.01, got {eps}")));
    }
    let (mut a, mut b) = opts.bracket;
    let (oa, _) = full_shot(model, a, eps, opts)?;
    let (ob, _) = full_shot(model, b, eps, opts)?;
    if oa == ob || oa == ShotOutcome::Undecided || ob == ShotOutcome::Undecided {
        return Err(Error::NoConnection { lo: a, hi: b });
    }
    let mut mid = if c_guess > a && c_guess < b { c_guess } else { 0.5 * (a + b) };
    let mut best: Option<(f64, ode::Solution<3>)> = None;
    for _ in 0..200 {
        let (om, sol) = full_shot(model, mid, eps, opts)?;
        if om == ShotOutcome::Undecided {
            best = Some((mid, sol));
            break;
        }
        if om == oa {
            a = mid;
        } else {
            b = mid;
        }
        best = Some((mid, sol));
        if b - a <= opts.c_tol {
            break;
        }
        let next = 0.5 * (a + b);
        if next == a || next == b {
            break;
        }
        mid = next;
    }
    let (c, sol) = best.ok_or_else(|| Error::NoConvergence("no shot evaluated".into()))?;
    let zp = FastState::new(1.0, c, model.f(1.0));
    let (imin, _) = sol
        .y
        .iter()
        .enumerate()
        .map(|(i, y)| (i, dist(FastState::from_array(*y), zp)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let profile = WaveProfile {
        grid: sol.t[..=imin].to_vec(),
        states: sol.y[..=imin].iter().map(|y| FastState::from_array(*y)).collect(),
        c,
        eps,
        timescale: Timescale::Fast,
    };
    Ok((c, profile))
}
