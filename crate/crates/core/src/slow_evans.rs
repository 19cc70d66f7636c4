//! Reduced (slow) eigenvalue problem along the singular orbit.
//!
//! In desingularized time the linearization on the slow branches reads
//! `P' = (R'(U) - λ) V`, `V' = c V - D(U) P`, coupled to the base flow
//! `U' = cU - P`, `P̄' = R D`. Its projectivization on the chart `S = P/V` is
//! the Riccati equation `S' = R' - λ - cS + D S²`; on `T = V/P` it is
//! `T' = -(R' - λ) T² + cT - D`. Solutions are carried between the two charts
//! whenever the active coordinate exceeds the switch threshold, and across the
//! fast jump by the explicit linear jump map.
//!
//! The Riccati–Evans function `E(λ) = s₁(λ) - u₀(λ)` compares, at the section
//! `U = Σ`, the solution leaving the unstable direction at `U = 0` (through the
//! jump) with the one arriving along the stable direction at `U = 1`. Zeros are
//! eigenvalues; poles appear where one of the two passes through `S = ∞`
//! exactly at the section.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::contour::{SpectralContour, Winding};
use crate::model::ModelFunctions;
use crate::ode::{self, Direction, Event, Stop};
use crate::wave::{desingularized, SingularOrbit, SlowState};
use crate::{Error, Result};

type C = Complex64;

const T_MAX: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlowLinState {
    pub p: C,
    pub v: C,
    pub base: SlowState,
}

/// Linearized desingularized flow together with its base flow.
pub fn desing_lin_rhs(model: &ModelFunctions, st: &SlowLinState, lambda: C, c: f64) -> SlowLinState {
    let u = st.base.u;
    let d = model.d(u);
    let b = desingularized(model, &[u, st.base.p], c);
    SlowLinState { p: (model.r_prime(u) - lambda) * st.v, v: c * st.v - d * st.p, base: SlowState { u: b[0], p: b[1] } }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Chart {
    /// `S = P/V`
    S,
    /// `T = V/P`
    T,
}

impl Chart {
    fn other(self) -> Self {
        match self {
            Chart::S => Chart::T,
            Chart::T => Chart::S,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiccatiPoint {
    pub chart: Chart,
    pub value: C,
    pub base: SlowState,
    /// Number of chart transits so far.
    pub wind_hint: u32,
}

impl RiccatiPoint {
    /// Homogeneous representative `(P, V)`.
    pub fn homogeneous(&self) -> (C, C) {
        match self.chart {
            Chart::S => (self.value, C::new(1.0, 0.0)),
            Chart::T => (C::new(1.0, 0.0), self.value),
        }
    }

    /// Value on chart S, `None` at `S = ∞`.
    pub fn s_value(&self) -> Option<C> {
        match self.chart {
            Chart::S => Some(self.value),
            Chart::T if self.value.norm() == 0.0 => None,
            Chart::T => Some(self.value.inv()),
        }
    }
}

#[inline]
fn ric(model: &ModelFunctions, u: f64, w: C, chart: Chart, lambda: C, c: f64) -> C {
    let d = model.d(u);
    let q = model.r_prime(u) - lambda;
    match chart {
        Chart::S => q - c * w + d * w * w,
        Chart::T => -q * w * w + c * w - d,
    }
}

pub fn riccati_rhs(model: &ModelFunctions, pt: &RiccatiPoint, lambda: C, c: f64) -> C {
    ric(model, pt.base.u, pt.value, pt.chart, lambda, c)
}

/// Roots of `D S² - c S + (R' - λ)` frozen at `U`: `(attractor, repeller)` of the
/// forward Riccati flow, told apart by the sign of `Re(2 D S - c)`.
pub fn frozen_fixed_points(model: &ModelFunctions, u: f64, lambda: C, c: f64) -> Result<(C, C)> {
    let d = model.d(u);
    if d.abs() < 1e-13 {
        return Err(Error::Domain(format!("D({u}) = 0: frozen Riccati equation is linear")));
    }
    let disc = C::new(c * c, 0.0) + 4.0 * d * (lambda - model.r_prime(u));
    let scale = c * c + 4.0 * (d * (lambda - model.r_prime(u))).norm();
    let sq = disc.sqrt();
    if disc.norm() <= 1e-12 * scale || sq.re.abs() < 1e-14 * (1.0 + disc.norm()) {
        return Err(Error::NonHyperbolic);
    }
    let a = (c - sq) / (2.0 * d);
    let b = (c + sq) / (2.0 * d);
    // Re(2 D a - c) = -Re(sq) < 0 for the principal root.
    Ok(if (2.0 * d * a - c).re < 0.0 { (a, b) } else { (b, a) })
}

/// Data of the fast jump from the fold `u_F` to `u_J` at height `p_F`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpData {
    pub u_f: f64,
    pub u_j: f64,
    pub p_f: f64,
    pub v_f: f64,
    pub c: f64,
}

impl JumpData {
    pub fn new(model: &ModelFunctions, c: f64, p_f: f64) -> Result<Self> {
        let u_f = model.u_f();
        if c * u_f - p_f <= 0.0 {
            return Err(Error::Domain(format!("c u_F - p_F = {} must be positive", c * u_f - p_f)));
        }
        Ok(Self { u_f, u_j: model.u_j(), p_f, v_f: model.f(u_f), c })
    }

    pub fn from_orbit(orbit: &SingularOrbit) -> Result<Self> {
        Self::new(&orbit.model, orbit.c0, orbit.p_f)
    }
}

/// Linear jump map `(P, V) ↦ J_λ (P, V)`.
pub fn jump_linear(model: &ModelFunctions, p: C, v: C, lambda: C, jd: &JumpData) -> (C, C) {
    let den = jd.c * jd.u_f - jd.p_f;
    let num = model.r(jd.u_j) - model.r(jd.u_f) - lambda * (jd.u_j - jd.u_f);
    (p + v * num / den, v * (jd.c * jd.u_j - jd.p_f) / den)
}

/// Projectivized jump on the chart `S = P/V`.
pub fn jump_projective(model: &ModelFunctions, s0: C, lambda: C, jd: &JumpData) -> C {
    jump_graph(model, s0, lambda, jd, jd.u_j)
}

/// The jump graph `s(ū)` for `ū ∈ [u_F, u_J]`; its value at `u_J` is the jump.
pub fn jump_graph(model: &ModelFunctions, s0: C, lambda: C, jd: &JumpData, u: f64) -> C {
    (model.r(u) - model.r(jd.u_f) - lambda * (u - jd.u_f) + s0 * (jd.c * jd.u_f - jd.p_f)) / (jd.c * u - jd.p_f)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvansConfig {
    /// Section `U = Σ`.
    pub section: f64,
    pub switch_threshold: f64,
    pub offset: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Lower boundary of Ω.
    pub beta: f64,
    pub scan_step: f64,
    pub root_tol: f64,
    /// `|E|` above this at a converged sign change marks a pole.
    pub pole_threshold: f64,
    pub pole_radius: f64,
}

impl Default for EvansConfig {
    fn default() -> Self {
        Self {
            section: 0.95,
            switch_threshold: 2.0,
            offset: 1e-8,
            rtol: 1e-10,
            atol: 1e-12,
            beta: -0.95,
            scan_step: 0.005,
            root_tol: 1e-10,
            pole_threshold: 1e3,
            pole_radius: 0.03,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Unstable,
    Stable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvansSample {
    pub lambda: C,
    pub value: C,
    /// `u₀` at the section.
    pub left_hit: C,
    /// `s₁` at the section.
    pub right_hit: C,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub zeta: f64,
    pub u: f64,
    pub chart: Chart,
    /// Real and imaginary part on the active chart: `(X, Y)` on S, `(s, t)` on T.
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XyFlow {
    pub lambda: C,
    pub unstable: Vec<TracePoint>,
    pub stable: Vec<TracePoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pole {
    pub lambda: f64,
    /// Winding on the confirmation circle (expected −1).
    pub winding: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealScan {
    pub interval: (f64, f64),
    pub eigenvalues: Vec<f64>,
    pub poles: Vec<Pole>,
    pub samples: Vec<(f64, f64)>,
}

/// `(Ẋ, Ẏ)` of the Riccati flow split into real and imaginary parts, `λ = μ + iω`.
pub fn xy_rhs(model: &ModelFunctions, u: f64, x: f64, y: f64, mu: f64, omega: f64, c: f64) -> (f64, f64) {
    let d = model.d(u);
    (model.r_prime(u) - mu - c * x + (x * x - y * y) * d, -omega - c * y + 2.0 * x * y * d)
}

/// Same flow on `1/S = s + i t`.
pub fn st_rhs(model: &ModelFunctions, u: f64, s: f64, t: f64, mu: f64, omega: f64, c: f64) -> (f64, f64) {
    let d = model.d(u);
    let q = model.r_prime(u) - mu;
    (-d + c * s - 2.0 * omega * s * t - q * (s * s - t * t), c * t - 2.0 * s * t * q + omega * (s * s - t * t))
}

struct Leg {
    t: f64,
    base: [f64; 2],
    chart: Chart,
    w: C,
    switches: u32,
}

/// Slow eigenvalue machinery bound to one singular orbit.
#[derive(Clone, Debug)]
pub struct SlowEvans {
    pub orbit: SingularOrbit,
    pub config: EvansConfig,
    pub jump: JumpData,
    start_minus: [f64; 2],
    start_plus: [f64; 2],
}

impl SlowEvans {
    pub fn new(orbit: SingularOrbit, config: EvansConfig) -> Result<Self> {
        let jump = JumpData::from_orbit(&orbit)?;
        let c = orbit.c0;
        let m = &orbit.model;
        let mu = crate::wave::saddle_frame(m, crate::espec::EndState::Minus, c, 0.0)?.eigenvalues[1];
        let start_minus = [config.offset, (c - mu) * config.offset];
        let mu = crate::wave::saddle_frame(m, crate::espec::EndState::Plus, c, 0.0)?.eigenvalues[0];
        let start_plus = [1.0 - config.offset, c - (c - mu) * config.offset];
        Ok(Self { orbit, config, jump, start_minus, start_plus })
    }

    fn c(&self) -> f64 {
        self.orbit.c0
    }

    fn model(&self) -> &ModelFunctions {
        &self.orbit.model
    }

    fn ode_opts(&self) -> ode::Options {
        ode::Options::with_tol(self.config.rtol, self.config.atol)
    }

    fn chart_for(&self, w: C, chart: Chart) -> (Chart, C) {
        if w.norm() > self.config.switch_threshold {
            (chart.other(), w.inv())
        } else {
            (chart, w)
        }
    }

    /// Carries base point and Riccati coordinate until `U` reaches `target`,
    /// switching charts on the way.
    #[allow(clippy::too_many_arguments)]
    fn ride(
        &self,
        lambda: C,
        base: [f64; 2],
        chart: Chart,
        w: C,
        backward: bool,
        target: f64,
        mut trace: Option<&mut Vec<TracePoint>>,
        zeta_shift: f64,
    ) -> Result<Leg> {
        let c = self.c();
        let model = self.model();
        let thr2 = self.config.switch_threshold.powi(2);
        let (mut chart, w) = self.chart_for(w, chart);
        let mut y = [base[0], base[1], w.re, w.im];
        let mut t = 0.0;
        let mut switches = 0u32;
        let t_end = if backward { -T_MAX } else { T_MAX };
        let dir = if backward { Direction::Falling } else { Direction::Rising };
        let o = self.ode_opts();
        loop {
            let ch = chart;
            let f = |_: f64, y: &[f64; 4]| {
                let b = desingularized(model, &[y[0], y[1]], c);
                let dw = ric(model, y[0], C::new(y[2], y[3]), ch, lambda, c);
                [b[0], b[1], dw.re, dw.im]
            };
            let events = [
                Event::new(dir, move |_, y: &[f64; 4]| y[0] - target),
                Event::new(Direction::Rising, move |_, y: &[f64; 4]| y[2] * y[2] + y[3] * y[3] - thr2),
                Event::new(
                    Direction::Either,
                    |_, y: &[f64; 4]| if y[0] < -1e-3 || y[0] > 1.0 + 1e-3 { 1.0 } else { -1.0 },
                ),
            ];
            let sol = ode::solve(f, t, y, t_end, &o, &events)?;
            if let Some(tr) = trace.as_deref_mut() {
                tr.extend(sol.t.iter().zip(sol.y.iter()).map(|(&s, y)| TracePoint {
                    zeta: s + zeta_shift,
                    u: y[0],
                    chart,
                    re: y[2],
                    im: y[3],
                }));
            }
            t = sol.t_last();
            y = *sol.last();
            match sol.stop {
                Stop::Event(0) => {
                    return Ok(Leg { t, base: [y[0], y[1]], chart, w: C::new(y[2], y[3]), switches });
                }
                Stop::Event(1) => {
                    let inv = C::new(y[2], y[3]).inv();
                    y[2] = inv.re;
                    y[3] = inv.im;
                    chart = chart.other();
                    switches += 1;
                    if switches > 10_000 {
                        return Err(Error::Integration("chart switching does not terminate".into()));
                    }
                }
                _ => return Err(Error::Integration(format!("base flow left [0, 1] before reaching U = {target}"))),
            }
        }
    }

    fn to_s(&self, leg: &Leg) -> Result<C> {
        match leg.chart {
            Chart::S => Ok(leg.w),
            Chart::T if leg.w.norm() < 1e-8 => Err(Error::SectionAtInfinity),
            Chart::T => Ok(leg.w.inv()),
        }
    }

    fn jump_leg(&self, leg: &Leg, lambda: C) -> (Chart, C) {
        let (p, v) = match leg.chart {
            Chart::S => (leg.w, C::new(1.0, 0.0)),
            Chart::T => (C::new(1.0, 0.0), leg.w),
        };
        let (p2, v2) = jump_linear(self.model(), p, v, lambda, &self.jump);
        if p2.norm() <= self.config.switch_threshold * v2.norm() {
            (Chart::S, p2 / v2)
        } else {
            (Chart::T, v2 / p2)
        }
    }

    fn unstable(&self, lambda: C, mut trace: Option<&mut Vec<TracePoint>>) -> Result<Leg> {
        let (attr, _) = frozen_fixed_points(self.model(), 0.0, lambda, self.c())?;
        // Zeta shift is fixed after the fact so that the fold sits at ζ = 0.
        let mut left = Vec::new();
        let leg = self.ride(
            lambda,
            self.start_minus,
            Chart::S,
            attr,
            false,
            self.jump.u_f,
            trace.as_ref().map(|_| &mut left),
            0.0,
        )?;
        if let Some(tr) = trace.as_deref_mut() {
            tr.extend(left.into_iter().map(|mut p| {
                p.zeta -= leg.t;
                p
            }));
        }
        let (chart, w) = self.jump_leg(&leg, lambda);
        let mut right =
            self.ride(lambda, [self.jump.u_j, leg.base[1]], chart, w, false, self.config.section, trace, 0.0)?;
        right.switches += leg.switches;
        Ok(right)
    }

    fn stable(&self, lambda: C, trace: Option<&mut Vec<TracePoint>>) -> Result<Leg> {
        let (_, rep) = frozen_fixed_points(self.model(), 1.0, lambda, self.c())?;
        self.ride(lambda, self.start_plus, Chart::S, rep, true, self.config.section, trace, 0.0)
    }

    /// Value on chart S at the section of the unstable (`u₀`) or stable (`s₁`) solution.
    pub fn shoot_section(&self, lambda: C, side: Side) -> Result<C> {
        let leg = match side {
            Side::Unstable => self.unstable(lambda, None)?,
            Side::Stable => self.stable(lambda, None)?,
        };
        self.to_s(&leg)
    }

    pub fn evans(&self, lambda: C) -> Result<EvansSample> {
        let left_hit = self.shoot_section(lambda, Side::Unstable)?;
        let right_hit = self.shoot_section(lambda, Side::Stable)?;
        Ok(EvansSample { lambda, value: right_hit - left_hit, left_hit, right_hit })
    }

    /// Centered difference of `E` at step `h`.
    pub fn derivative(&self, lambda: C, h: f64) -> Result<C> {
        Ok((self.evans(lambda + h)?.value - self.evans(lambda - h)?.value) / (2.0 * h))
    }

    pub fn winding(&self, contour: &SpectralContour) -> Result<Winding> {
        contour.winding(|l| self.evans(l).map(|s| s.value))
    }

    fn real_e(&self, x: f64) -> Result<f64> {
        Ok(self.evans(C::new(x, 0.0))?.value.re)
    }

    /// Sign-change scan of `E` on the real interval with bisection refinement;
    /// sign changes with large `|E|` at convergence are poles.
    pub fn find_real_eigenvalues(&self, a: f64, b: f64) -> Result<RealScan> {
        let rp0 = self.model().r_prime(0.0);
        if !(a > rp0 && b > a) {
            return Err(Error::Domain(format!("interval must satisfy {rp0} < a < b, got [{a}, {b}]")));
        }
        let n = ((b - a) / self.config.scan_step).ceil().max(1.0) as usize;
        let grid: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let samples: Vec<(f64, f64)> = grid
            .par_iter()
            .map(|&x| {
                // Nudge off a section pole hit exactly on the grid.
                let mut xx = x;
                for _ in 0..4 {
                    match self.real_e(xx) {
                        Ok(e) => return Ok((xx, e)),
                        Err(Error::SectionAtInfinity) => xx += 1e-7,
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::SectionAtInfinity)
            })
            .collect::<Result<_>>()?;

        let brackets: Vec<(f64, f64, f64)> = samples
            .windows(2)
            .filter_map(|w| {
                let ((x0, e0), (x1, e1)) = (w[0], w[1]);
                if e0 == 0.0 {
                    Some((x0, x0, e0))
                } else if (e0 < 0.0) != (e1 < 0.0) && e1 != 0.0 {
                    Some((x0, x1, e0))
                } else {
                    None
                }
            })
            .collect();

        let refined: Vec<(f64, f64)> = brackets
            .par_iter()
            .map(|&(mut lo, mut hi, mut elo)| {
                while hi - lo > self.config.root_tol {
                    let mid = 0.5 * (lo + hi);
                    let em = match self.real_e(mid) {
                        Ok(e) => e,
                        Err(Error::SectionAtInfinity) => return Ok((mid, f64::INFINITY)),
                        Err(e) => return Err(e),
                    };
                    if em == 0.0 {
                        return Ok((mid, 0.0));
                    }
                    if (em < 0.0) == (elo < 0.0) {
                        lo = mid;
                        elo = em;
                    } else {
                        hi = mid;
                    }
                }
                let mid = 0.5 * (lo + hi);
                let e = self.real_e(mid).map(f64::abs).unwrap_or(f64::INFINITY);
                Ok((mid, e))
            })
            .collect::<Result<_>>()?;

        let mut eigenvalues = Vec::new();
        let mut poles = Vec::new();
        for (x, e) in refined {
            if e > self.config.pole_threshold {
                let circle = SpectralContour::circle(C::new(x, 0.0), self.config.pole_radius, 32);
                poles.push(Pole { lambda: x, winding: self.winding(&circle).ok().map(|w| w.winding) });
            } else {
                eigenvalues.push(x);
            }
        }
        Ok(RealScan { interval: (a, b), eigenvalues, poles, samples })
    }

    /// Trajectories of both shots on their active charts, for plotting and
    /// for checking invariance properties of the real/imaginary split.
    pub fn xy_flow(&self, lambda: C) -> Result<XyFlow> {
        let mut unstable = Vec::new();
        let mut stable = Vec::new();
        self.unstable(lambda, Some(&mut unstable))?;
        self.stable(lambda, Some(&mut stable))?;
        Ok(XyFlow { lambda, unstable, stable })
    }

    fn solve_lin_to(&self, lambda: C, t0: f64, y0: [f64; 6], t1: f64) -> Result<[f64; 6]> {
        let c = self.c();
        let model = self.model();
        let f = |_: f64, y: &[f64; 6]| {
            let st =
                SlowLinState { p: C::new(y[2], y[3]), v: C::new(y[4], y[5]), base: SlowState { u: y[0], p: y[1] } };
            let d = desing_lin_rhs(model, &st, lambda, c);
            [d.base.u, d.base.p, d.p.re, d.p.im, d.v.re, d.v.im]
        };
        Ok(*ode::solve(f, t0, y0, t1, &self.ode_opts(), &[])?.last())
    }

    /// The linear solution leaving the unstable direction at `U = 0`, continued
    /// through the jump, sampled at `grid` (ζ = 0 at the jump, ζ < 0 on the
    /// left branch). Each sample is an exact integration, not an interpolant.
    pub fn eigenfunction(&self, lambda: C, grid: &[f64]) -> Result<Vec<SlowLinState>> {
        let c = self.c();
        let model = self.model();
        let (attr, _) = frozen_fixed_points(model, 0.0, lambda, c)?;
        let [u0, p0] = self.start_minus;
        let y0 = [u0, p0, attr.re, attr.im, 1.0, 0.0];
        let f = |_: f64, y: &[f64; 6]| {
            let st =
                SlowLinState { p: C::new(y[2], y[3]), v: C::new(y[4], y[5]), base: SlowState { u: y[0], p: y[1] } };
            let d = desing_lin_rhs(model, &st, lambda, c);
            [d.base.u, d.base.p, d.p.re, d.p.im, d.v.re, d.v.im]
        };
        let u_f = self.jump.u_f;
        let ev = [Event::new(Direction::Rising, move |_, y: &[f64; 6]| y[0] - u_f)];
        let left = ode::solve(f, 0.0, y0, T_MAX, &self.ode_opts(), &ev)?;
        if left.stop != Stop::Event(0) {
            return Err(Error::Integration("left branch did not reach the fold".into()));
        }
        let tau_f = left.t_last();
        let yf = *left.last();
        let (pj, vj) = jump_linear(model, C::new(yf[2], yf[3]), C::new(yf[4], yf[5]), lambda, &self.jump);
        let yj = [self.jump.u_j, yf[1], pj.re, pj.im, vj.re, vj.im];

        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&i, &j| grid[i].total_cmp(&grid[j]));
        let mut out = vec![None; grid.len()];
        let (mut tl, mut yl) = (0.0, y0);
        let (mut tr, mut yr) = (0.0, yj);
        for i in order {
            let z = grid[i];
            let y = if z <= 0.0 {
                let t = tau_f + z;
                if t < 0.0 {
                    return Err(Error::Domain(format!("grid point {z} precedes the take-off point")));
                }
                yl = self.solve_lin_to(lambda, tl, yl, t)?;
                tl = t;
                yl
            } else {
                yr = self.solve_lin_to(lambda, tr, yr, z)?;
                tr = z;
                yr
            };
            out[i] = Some(SlowLinState {
                p: C::new(y[2], y[3]),
                v: C::new(y[4], y[5]),
                base: SlowState { u: y[0], p: y[1] },
            });
        }
        Ok(out.into_iter().map(|s| s.expect("every grid point visited")).collect())
    }

    /// Max-norm residual of the Sturm–Liouville form
    /// `e^{cζ} (e^{-cζ} V'/D)' + Q̃ V - λ V`, `Q̃ = R' + c D' U' / D²`,
    /// on a uniform grid on one side of the jump (fourth-order differences,
    /// two points dropped at each end), relative to `max |V|`.
    pub fn sl_residual(&self, lambda: f64, grid: &[f64], v: &[f64]) -> Result<f64> {
        if grid.len() != v.len() || grid.len() < 5 {
            return Err(Error::Domain("need at least 5 grid points with matching values".into()));
        }
        let first = grid[0];
        let last = grid[grid.len() - 1];
        if first * last <= 0.0 || grid.contains(&0.0) {
            return Err(Error::Domain("grid contains ζ = 0 where D(Ū) is discontinuous".into()));
        }
        let h = grid[1] - grid[0];
        if grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0)) || h <= 0.0 {
            return Err(Error::Domain("grid must be ascending and uniform".into()));
        }
        let bases = self.eigenfunction(C::new(lambda, 0.0), grid)?;
        let c = self.c();
        let model = self.model();
        let vmax = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let mut res: f64 = 0.0;
        for i in 2..grid.len() - 2 {
            let d1 = (-v[i + 2] + 8.0 * v[i + 1] - 8.0 * v[i - 1] + v[i - 2]) / (12.0 * h);
            let d2 = (-v[i + 2] + 16.0 * v[i + 1] - 30.0 * v[i] + 16.0 * v[i - 1] - v[i - 2]) / (12.0 * h * h);
            let SlowState { u, p } = bases[i].base;
            let ud = c * u - p;
            let d = model.d(u);
            let dp = model.d_prime(u);
            let q = model.r_prime(u) + c * dp * ud / (d * d);
            let r = d2 / d - d1 * dp * ud / (d * d) - c * d1 / d + q * v[i] - lambda * v[i];
            res = res.max(r.abs());
        }
        Ok(res / vmax.max(f64::MIN_POSITIVE))
    }

    /// Weight `e^{-cζ}/D(Ū)` on a grid (positive on both attracting branches).
    pub fn sl_weight(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let bases = self.eigenfunction(C::new(0.0, 0.0), grid)?;
        Ok(grid.iter().zip(bases).map(|(z, b)| (-self.c() * z).exp() / self.model().d(b.base.u)).collect())
    }

    /// Homogeneous `(P, V)` of the reduced solution leaving `U = 0` along the
    /// unstable direction, at each `Ū` of the ascending list `us`. Points in
    /// `[u_F, u_J]` lie on the jump graph; elsewhere they are exact states of
    /// the norm-preserving linear flow at the crossing `U = Ū`.
    pub fn reduced_curve(&self, lambda: C, us: &[f64]) -> Result<Vec<(C, C)>> {
        if us.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("abscissae must be strictly ascending".into()));
        }
        let c = self.c();
        let model = self.model();
        let (u_f, u_j) = (self.jump.u_f, self.jump.u_j);
        if us.first().is_some_and(|&u| u <= self.start_minus[0]) || us.last().is_some_and(|&u| u >= 1.0) {
            return Err(Error::Domain("abscissae must lie inside (0, 1)".into()));
        }
        let f = |_: f64, y: &[f64; 6]| {
            let st =
                SlowLinState { p: C::new(y[2], y[3]), v: C::new(y[4], y[5]), base: SlowState { u: y[0], p: y[1] } };
            let d = desing_lin_rhs(model, &st, lambda, c);
            let rho = (st.p.conj() * d.p + st.v.conj() * d.v).re / (st.p.norm_sqr() + st.v.norm_sqr());
            let (dp, dv) = (d.p - rho * st.p, d.v - rho * st.v);
            [d.base.u, d.base.p, dp.re, dp.im, dv.re, dv.im]
        };
        let guard = |y: &[f64; 6]| y[0] < -1e-3 || y[0] > 1.0 + 1e-3;
        let hom = |y: &[f64; 6]| (C::new(y[2], y[3]), C::new(y[4], y[5]));
        let o = self.ode_opts();

        let (attr, _) = frozen_fixed_points(model, 0.0, lambda, c)?;
        let n = (attr.norm_sqr() + 1.0).sqrt();
        let [u0, p0] = self.start_minus;
        let y0 = [u0, p0, attr.re / n, attr.im / n, 1.0 / n, 0.0];
        let mut left_levels: Vec<f64> = us.iter().copied().filter(|&u| u < u_f).collect();
        left_levels.push(u_f);
        let left = ode::solve_levels(f, 0.0, y0, 0, &left_levels, T_MAX, &o, &guard)?;
        if left.len() != left_levels.len() {
            return Err(Error::Integration(format!("reduced solution stopped before U = {}", left_levels[left.len()])));
        }
        let (_, yf) = *left.last().expect("fold level present");
        let (pf, vf) = hom(&yf);
        let den = c * u_f - self.jump.p_f;
        let graph = |u: f64| {
            let num = model.r(u) - model.r(u_f) - lambda * (u - u_f);
            (pf * den + vf * num, vf * (c * u - self.jump.p_f))
        };
        let (pj, vj) = graph(u_j);
        let n = (pj.norm_sqr() + vj.norm_sqr()).sqrt();
        let yj = [u_j, yf[1], pj.re / n, pj.im / n, vj.re / n, vj.im / n];
        let right_levels: Vec<f64> = us.iter().copied().filter(|&u| u > u_j).collect();
        let right = ode::solve_levels(f, 0.0, yj, 0, &right_levels, T_MAX, &o, &guard)?;
        if right.len() != right_levels.len() {
            return Err(Error::Integration(format!(
                "reduced solution stopped before U = {}",
                right_levels[right.len()]
            )));
        }

        let mut out: Vec<(C, C)> = left[..left.len() - 1].iter().map(|(_, y)| hom(y)).collect();
        out.extend(us.iter().filter(|&&u| (u_f..=u_j).contains(&u)).map(|&u| graph(u)));
        out.extend(right.iter().map(|(_, y)| hom(y)));
        Ok(out)
    }
}
