//! Dormand–Prince 5(4) with cubic Hermite dense output and terminal events.
//!
//! States are fixed-size real arrays; complex linear systems are packed as
//! interleaved real/imaginary parts by the callers. Integration runs in either
//! time direction.

use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Absolute tolerance on the event function at a located root.
    pub event_tol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, event_tol: 1e-12, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

impl Options {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

/// Terminal event: integration stops at the first root of `g` crossed in `direction`.
pub struct Event<'a, const N: usize> {
    pub g: Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>,
    pub direction: Direction,
}

impl<'a, const N: usize> Event<'a, N> {
    pub fn new(direction: Direction, g: impl Fn(f64, &[f64; N]) -> f64 + 'a) -> Self {
        Self { g: Box::new(g), direction }
    }

    fn triggered(&self, g0: f64, g1: f64) -> bool {
        if g0 == 0.0 {
            return false;
        }
        match self.direction {
            Direction::Rising => g0 < 0.0 && g1 >= 0.0,
            Direction::Falling => g0 > 0.0 && g1 <= 0.0,
            Direction::Either => (g0 < 0.0) != (g1 < 0.0) || g1 == 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    Completed,
    Event(usize),
}

/// Accepted steps with derivatives, enough for Hermite interpolation.
#[derive(Clone, Debug)]
pub struct Solution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub dy: Vec<[f64; N]>,
    pub stop: Stop,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> &[f64; N] {
        self.y.last().expect("solution has at least one point")
    }

    pub fn t_last(&self) -> f64 {
        *self.t.last().expect("solution has at least one point")
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Cubic Hermite interpolation; `t` is clamped to the integrated range.
    pub fn at(&self, t: f64) -> [f64; N] {
        let n = self.t.len();
        if n == 1 {
            return self.y[0];
        }
        let forward = self.t[n - 1] >= self.t[0];
        let key = |s: f64| if forward { s } else { -s };
        let tk = key(t);
        let i = match self.t.partition_point(|&s| key(s) <= tk) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        hermite(
            self.t[i],
            &self.y[i],
            &self.dy[i],
            self.t[i + 1],
            &self.y[i + 1],
            &self.dy[i + 1],
            t.clamp(self.t[0].min(self.t[n - 1]), self.t[0].max(self.t[n - 1])),
        )
    }
}

pub fn hermite<const N: usize>(
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    t1: f64,
    y1: &[f64; N],
    f1: &[f64; N],
    t: f64,
) -> [f64; N] {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    std::array::from_fn(|k| h00 * y0[k] + h * h10 * f0[k] + h01 * y1[k] + h * h11 * f1[k])
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

/// One Dormand–Prince step: returns `(y1, f1, err)` with the embedded error estimate.
fn dp_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> ([f64; N], [f64; N], [f64; N])
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y1);
    let err =
        std::array::from_fn(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]));
    (y1, k7, err)
}

fn err_norm<const N: usize>(y0: &[f64; N], y1: &[f64; N], err: &[f64; N], o: &Options) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sc = o.atol + o.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], f0: &[f64; N], dir: f64, o: &Options) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let sc: [f64; N] = std::array::from_fn(|i| o.atol + o.rtol * y0[i].abs());
    let rms = |v: &[f64; N]| ((0..N).map(|i| (v[i] / sc[i]).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y0, dir * h0, &[(1.0, f0)]);
    let f1 = f(t0 + dir * h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(o.h_max)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction), stopping
/// early at the first terminal event.
pub fn solve<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &Options,
    events: &[Event<'_, N>],
) -> Result<Solution<N>, Error>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut sol = Solution { t: vec![t], y: vec![y], dy: vec![k1], stop: Stop::Completed };
    if t0 == t1 {
        return Ok(sol);
    }
    if y.iter().chain(k1.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Integration(format!("non-finite initial data at t={t0}")));
    }
    let mut gprev: Vec<f64> = events.iter().map(|e| (e.g)(t, &y)).collect();
    let mut h = initial_step(&mut f, t0, &y0, &k1, dir, opts);
    let mut rejected = false;
    let mut steps = 0usize;

    while dir * (t1 - t) > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration(format!("step budget exhausted at t={t}")));
        }
        h = h.min(opts.h_max).min((t1 - t).abs());
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration(format!("step size underflow at t={t}")));
        }
        let hs = dir * h;
        let (yn, kn, e) = dp_step(&mut f, t, &y, &k1, hs);
        let en = err_norm(&y, &yn, &e, opts);
        if !en.is_finite() {
            h *= 0.2;
            rejected = true;
            continue;
        }
        if en > 1.0 {
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            rejected = true;
            continue;
        }
        let tn = if (t1 - (t + hs)).abs() <= 1e-15 * t1.abs().max(1.0) { t1 } else { t + hs };

        // Earliest triggered event within the step.
        let gnew: Vec<f64> = events.iter().map(|ev| (ev.g)(tn, &yn)).collect();
        let mut hit: Option<(usize, f64)> = None;
        for (i, ev) in events.iter().enumerate() {
            if ev.triggered(gprev[i], gnew[i]) {
                let tau = locate(&|s| (ev.g)(s, &hermite(t, &y, &k1, tn, &yn, &kn, s)), t, tn, gprev[i]);
                if hit.is_none_or(|(_, th)| dir * (tau - th) < 0.0) {
                    hit = Some((i, tau));
                }
            }
        }
        if let Some((i, tau)) = hit {
            let (te, ye) = polish(&mut f, &events[i], t, &y, &k1, tn, gprev[i], gnew[i], tau, opts);
            let fe = f(te, &ye);
            sol.t.push(te);
            sol.y.push(ye);
            sol.dy.push(fe);
            sol.stop = Stop::Event(i);
            return Ok(sol);
        }

        t = tn;
        y = yn;
        k1 = kn;
        gprev = gnew;
        sol.t.push(t);
        sol.y.push(y);
        sol.dy.push(k1);
        let grow = if rejected { 1.0 } else { 5.0 };
        h *= (0.9 * en.max(1e-10).powf(-0.2)).min(grow);
        rejected = false;
    }
    Ok(sol)
}

/// Integrates forward through increasing `levels` of component `k`,
/// returning the exact state at each crossing (terminal-event restarts, no
/// interpolation). `guard` aborts the run when it turns true; the result then
/// holds only the levels reached so far.
pub fn solve_levels<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    k: usize,
    levels: &[f64],
    t_max: f64,
    opts: &Options,
    guard: &dyn Fn(&[f64; N]) -> bool,
) -> Result<Vec<(f64, [f64; N])>, Error>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(levels.len());
    let (mut t, mut y) = (t0, y0);
    for &level in levels {
        if y[k] >= level {
            return Err(Error::Integration(format!(
                "levels must lie ahead of the current state ({} >= {level})",
                y[k]
            )));
        }
        let events = [
            Event::new(Direction::Rising, move |_, y: &[f64; N]| y[k] - level),
            Event::new(Direction::Rising, |_, y: &[f64; N]| if guard(y) { 1.0 } else { -1.0 }),
        ];
        let sol = solve(&mut f, t, y, t_max, opts, &events)?;
        if sol.stop != Stop::Event(0) {
            break;
        }
        t = sol.t_last();
        y = *sol.last();
        out.push((t, y));
    }
    Ok(out)
}

/// Bisection for a root of `g` on `[a, b]` given `g(a) = ga`.
fn locate(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Refines the event time with full Runge–Kutta sub-steps from the last
/// accepted point (Illinois regula falsi), so the returned state carries the
/// integrator's accuracy rather than the interpolant's.
#[allow(clippy::too_many_arguments)]
fn polish<const N: usize, F>(
    f: &mut F,
    ev: &Event<'_, N>,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    tn: f64,
    g0: f64,
    g1: f64,
    guess: f64,
    opts: &Options,
) -> (f64, [f64; N])
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut eval = |s: f64| -> [f64; N] {
        if s == t {
            *y
        } else {
            dp_step(f, t, y, k1, s - t).0
        }
    };
    let (mut a, mut ga, mut b, mut gb) = (t, g0, tn, g1);
    let mut s = guess;
    let mut ys = eval(s);
    let mut side = 0i8;
    for _ in 0..60 {
        let gs = (ev.g)(s, &ys);
        if gs.abs() <= opts.event_tol || (b - a).abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
        if (gs < 0.0) == (ga < 0.0) {
            a = s;
            ga = gs;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = s;
            gb = gs;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        s = (a * gb - b * ga) / (gb - ga);
        if !s.is_finite() || (s - a) * (s - b) > 0.0 {
            s = 0.5 * (a + b);
        }
        ys = eval(s);
    }
    (s, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sol = solve(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, &Options::default(), &[]).unwrap();
        assert!((sol.last()[0] - (-5.0f64).exp()).abs() < 1e-11);
        let mid = sol.at(2.5)[0];
        assert!((mid - (-2.5f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn backward_rotation() {
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let sol = solve(f, 0.0, [0.0, 1.0], -3.0, &Options::default(), &[]).unwrap();
        assert!((sol.last()[0] - (-3.0f64).sin()).abs() < 1e-9);
    }

    #[test]
    fn event_location() {
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let ev = Event::new(Direction::Falling, |_, y: &[f64; 2]| y[0] - 0.5);
        let sol = solve(f, 0.0, [0.0, 1.0], 10.0, &Options::default(), &[ev]).unwrap();
        assert_eq!(sol.stop, Stop::Event(0));
        let te = sol.t_last();
        assert!((te - (std::f64::consts::PI - (0.5f64).asin())).abs() < 1e-10);
        assert!((sol.last()[0] - 0.5).abs() < 1e-12);
    }
}
